import json

import pytest

from qrisk.errors import ConfigurationError
from qrisk.experiments import (
    ExperimentSpec,
    canonical_summary,
    cell_seed,
    failed_rows,
    rows_to_csv,
    run,
    write_outputs,
)


def small_sweep(**kw):
    base = dict(kind="sweep-qubits", qubits=(3,), measures=("var", "expectile"), epsilon=0.1, seed=3)
    base.update(kw)
    return ExperimentSpec(**base)


def test_toml_round_trip():
    spec = ExperimentSpec(kind="sweep-shots", qubits=(3,), scale="hardware", shots=(128, 512),
                          variants=("iqae", "mlqae"), lambda_var=0.2, rvar_levels=(0.2, 0.05), gamma=0.3)
    assert ExperimentSpec.from_toml(spec.to_toml()) == spec


def test_unknown_keys_rejected():
    text = small_sweep().to_toml() + "\n[extra]\nfoo = 1\n"
    with pytest.raises(ConfigurationError):
        ExperimentSpec.from_toml(text)
    text = small_sweep().to_toml().replace("[run]", "[run]\nbogus = 2")
    with pytest.raises(ConfigurationError):
        ExperimentSpec.from_toml(text)


@pytest.mark.parametrize("kw", [
    dict(qubits=()),
    dict(measures=("var", "median")),
    dict(preset="cauchy"),
    dict(variant="qpe"),
    dict(kind="sweep-shots", mode="exact"),
    dict(kind="canonical-hist", measures=("var",)),
    dict(lambda_var=1.5),
    dict(repeats=0),
])
def test_invalid_specs(kw):
    with pytest.raises(ConfigurationError):
        small_sweep(**kw)


def test_cell_seed_depends_on_coordinates():
    assert cell_seed(0, 3, 1) == cell_seed(0, 3, 1)
    assert len({cell_seed(0, 3, 1), cell_seed(0, 1, 3), cell_seed(1, 3, 1)}) == 3


def test_single_qubit_count_gives_one_row_per_measure():
    rows = run(small_sweep(measures=("var",)))
    assert len(rows) == 1
    row = rows[0]
    for key in ("seed", "version", "config", "oracle_value", "continuous_value", "estimate", "grover_calls"):
        assert key in row
    assert row["status"] == "ok"


def test_sweep_is_deterministic():
    spec = small_sweep(qubits=(3, 4))
    assert rows_to_csv(run(spec)) == rows_to_csv(run(spec))


def test_workers_do_not_change_rows():
    spec = small_sweep(qubits=(3, 4))
    assert rows_to_csv(run(spec)) == rows_to_csv(run(spec.replace(workers=2)))


def test_single_shot_count_gives_one_row():
    spec = ExperimentSpec(kind="sweep-shots", qubits=(3,), measures=("expectile",), shots=(256,), epsilon=0.1)
    rows = run(spec)
    assert len(rows) == 1 and rows[0]["shots"] == 256


def test_shot_sweep_seeded():
    spec = ExperimentSpec(kind="sweep-shots", qubits=(3,), measures=("var",), shots=(128, 512),
                          variants=("iqae", "canonical"), seed=11)
    a, b = run(spec), run(spec)
    assert rows_to_csv(a) == rows_to_csv(b)
    assert len(a) == 4
    assert all(r["grover_calls"] >= 0 for r in a)


def test_failed_cells_recorded_and_run_continues():
    spec = small_sweep(measures=("var", "rvar"), rvar_levels=(1e-5, 1e-6), mode="exact", variant="statevector")
    rows = run(spec)
    bad = failed_rows(rows)
    assert [r["measure"] for r in bad] == ["rvar"]
    assert bad[0]["status"] == "IllConditionedError"
    assert rows[0]["status"] == "ok"


def test_canonical_m1_two_outcomes():
    spec = ExperimentSpec(kind="canonical-hist", qubits=(3,), measures=("expectile",), m=(1,), mode="exact",
                          variant="canonical")
    rows = run(spec)
    assert len(rows) == 2
    assert sum(r["weight"] for r in rows) == pytest.approx(1.0)


def test_canonical_exact_twice_identical():
    spec = ExperimentSpec(kind="canonical-hist", qubits=(3,), measures=("expectile",), m=(2, 3), mode="exact",
                          variant="canonical")
    assert rows_to_csv(run(spec)) == rows_to_csv(run(spec))


def test_canonical_summary_fields():
    spec = ExperimentSpec(kind="canonical-hist", qubits=(3,), measures=("expectile",), m=(2, 4), mode="exact",
                          variant="canonical")
    summary = canonical_summary(run(spec))
    assert [s["m"] for s in summary] == [2, 4]
    assert all(s["error"] >= 0 and s["cell_width"] > 0 for s in summary)


def test_outputs_reproduce_from_config(tmp_path):
    spec = small_sweep()
    rows = run(spec)
    paths = write_outputs(spec, rows, tmp_path / "a")
    again = ExperimentSpec.load(paths["config"])
    assert again == spec
    paths2 = write_outputs(again, run(again), tmp_path / "b")
    assert paths["csv"].read_text() == paths2["csv"].read_text()
    payload = json.loads(paths["json"].read_text())
    assert payload["config"]["schema"] == 1
    assert len(payload["rows"]) == len(rows)
