"""Quantum amplitude-estimation engine for VaR, CVaR, expectiles and Range-VaR."""

__version__ = "0.1.0"
