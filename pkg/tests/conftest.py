from hypothesis import settings

settings.register_profile("qrisk", deadline=None, max_examples=40)
settings.load_profile("qrisk")
