"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed outside pytest's capture so they show in the normal output.
"""

import math
import time

import numpy as np
import pytest

from qrisk.circuits import ExpectileParams, cdf_a_operator, cvar_a_operator, expectile_a_operator, rvar_a_operator
from qrisk.distributions import PRESETS, DiscretizedDistribution
from qrisk.experiments import ExperimentSpec, canonical_summary, run
from qrisk.oracle import MEASURES, discrete_value, exact_expectile, exact_h, rvar_window, var_index
from qrisk.qae import QAEConfig, canonical_outcomes, iqae, mlqae
from qrisk.risk import DEFAULT_QAE, IllConditionedError, RiskLevels, default_gamma, quantum_rvar, run_measure

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail="", label=None):
        label = label or ("PASS" if ok else "FAIL")
        with capsys.disabled():
            print(f"\n[criterion {number}] {label}: {title}" + (f" ({detail})" if detail else ""))
        return ok

    return emit


def bernoulli_op(a):
    return cdf_a_operator(DiscretizedDistribution.from_pmf([a, 1 - a]), 1)


def fejer_law(a, m):
    size = 2**m
    w = size * math.asin(math.sqrt(a)) / math.pi

    def kernel(x):
        s = math.sin(math.pi * x / size)
        if abs(s) < 1e-15:
            return 1.0
        return math.sin(math.pi * x) ** 2 / (size**2 * s**2)

    return np.array([0.5 * (kernel(y - w) + kernel(y + w)) for y in range(size)])


def payoff_range(dist, measure, levels, gamma):
    """Payoff range of the A-operator encoding the measure at its oracle indices."""
    if measure == "var":
        return 0.0
    if measure == "cvar":
        return cvar_a_operator(dist, var_index(dist, levels[0]), gamma).payoff_range
    if measure == "rvar":
        k2, k1 = rvar_window(dist, *levels)
        return rvar_a_operator(dist, k1, k2, gamma).payoff_range
    alpha = 1 - levels[0]
    e = exact_expectile(dist, alpha)
    return expectile_a_operator(dist, ExpectileParams(alpha, dist.index_of(e), dist.n_qubits), gamma).payoff_range


def test_criterion_1_oracle_equivalence_exact_mode(verdict):
    start = time.perf_counter()
    levels = RiskLevels()
    worst, failures = 0.0, []
    for preset in PRESETS.values():
        for n in range(3, 7):
            dist = preset.discretize(n)
            for measure in MEASURES:
                lv = levels.for_measure(measure)
                gamma = default_gamma(measure)
                res = run_measure(dist, measure, lv, gamma, DEFAULT_QAE)
                tol = gamma**2 * payoff_range(dist, measure, lv, gamma) / 3 + dist.b
                err = abs(res.value - discrete_value(dist, measure, lv))
                worst = max(worst, err / tol)
                if err > tol:
                    failures.append((preset.name, n, measure, err, tol))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed <= 300
    verdict(1, "exact-mode pipelines match the discrete oracle", ok,
            f"worst error/tolerance {worst:.3f}, {elapsed:.1f}s")
    assert not failures, failures
    assert elapsed <= 300


def _monotone_breaks(values):
    return sum(1 for a, b in zip(values, values[1:]) if b > a)


def test_criterion_2_simulator_convergence(verdict):
    start = time.perf_counter()
    base = dict(kind="sweep-qubits", preset="gamma-1-1", qubits=(3, 4, 5, 6, 7), epsilon=0.05, alpha_conf=0.01)
    # exact amplitudes, as a statevector simulator hands them to IQAE
    rows = run(ExperimentSpec(variant="statevector", mode="exact", **base))
    # shot-sampled IQAE at the same settings, reported for information
    sampled = run(ExperimentSpec(variant="iqae", mode="sampled", seed=0, **base))
    elapsed = time.perf_counter() - start
    problems, lines = [], []
    for measure in MEASURES:
        errs = [r["rel_error"] for r in rows if r["measure"] == measure]
        info = [r["rel_error"] for r in sampled if r["measure"] == measure]
        breaks = _monotone_breaks(errs)
        lines.append(f"{measure}: {' '.join(f'{e:.4f}' for e in errs)} | sampled iqae {' '.join(f'{e:.4f}' for e in info)}")
        if not errs[-1] < 0.02:
            problems.append(f"{measure} n=7 relative error {errs[-1]:.4f}")
        if breaks > 1:
            problems.append(f"{measure} has {breaks} non-monotone steps")
    ok = not problems and elapsed <= 600
    verdict(2, "relative error below 0.02 at n=7 with a decreasing trend", ok,
            "; ".join(problems) or f"{elapsed:.1f}s")
    print("\n".join(lines))
    assert not problems, problems
    assert elapsed <= 600


def test_criterion_3_canonical_refinement(verdict):
    start = time.perf_counter()
    spec = ExperimentSpec(kind="canonical-hist", preset="gamma-1-1", qubits=(5,), measures=("expectile",),
                          m=(3, 4, 5, 6), mode="exact", variant="canonical")
    summary = {s["m"]: s for s in canonical_summary(run(spec))}
    elapsed = time.perf_counter() - start
    improves = summary[6]["error"] < summary[3]["error"]
    within = summary[6]["error"] <= summary[6]["cell_width"]
    ok = improves and within and elapsed <= 600
    verdict(3, "most frequent outcome approaches the exact value", ok,
            f"error m=3 {summary[3]['error']:.3f}, m=6 {summary[6]['error']:.3f}, "
            f"m=6 cell {summary[6]['cell_width']:.3f}")
    assert improves and within
    assert elapsed <= 600


def test_criterion_4_starting_values_and_brackets(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(20240)
    alphas = (0.5, 0.7, 0.9, 0.99)
    sign_failures, bracket_failures = 0, 0
    for _ in range(200):
        n = int(rng.integers(1, 6))
        probs = rng.dirichlet(np.full(2**n, 0.5))
        dist = DiscretizedDistribution.from_pmf(probs, float(rng.uniform(-5, 5)), float(rng.uniform(0.1, 2)))
        for alpha in alphas:
            if not (exact_h(dist, alpha, dist.lo) >= dist.lo - 1e-12 and exact_h(dist, alpha, dist.hi) <= dist.hi + 1e-12):
                sign_failures += 1
            res = run_measure(dist, "expectile", (1 - alpha,), qae_config=DEFAULT_QAE)
            if not res.details["bracket_valid"]:
                bracket_failures += 1
    elapsed = time.perf_counter() - start
    ok = sign_failures == 0 and bracket_failures == 0 and elapsed <= 60
    verdict(4, "starting-value signs and bracket validity", ok,
            f"{sign_failures} sign and {bracket_failures} bracket failures over 800 cases, {elapsed:.1f}s")
    assert sign_failures == 0 and bracket_failures == 0
    assert elapsed <= 60


def test_criterion_5_qae_statistics(verdict):
    start = time.perf_counter()
    a = math.sin(math.pi / 8) ** 2
    alpha_conf = 0.05
    op = bernoulli_op(a)
    covered = 0
    for seed in range(100):
        lo, hi = iqae(op, 0.01, alpha_conf, 100, "sampled", rng=seed).confidence_interval
        covered += lo <= a <= hi
    coverage = covered / 100
    ml_errors = [abs(mlqae(bernoulli_op(p), 3, 4096, "sampled", rng=7).estimate - p) for p in (0.1, 0.3, 0.5)]
    law_gap = max(
        float(np.max(np.abs(canonical_outcomes(bernoulli_op(p), m) - fejer_law(p, m))))
        for m in range(1, 6) for p in (0.05, a, 0.3, 0.5, 0.77, 0.99)
    )
    elapsed = time.perf_counter() - start
    checks = coverage >= 1 - alpha_conf - 0.02, max(ml_errors) <= 0.02, law_gap <= 1e-8
    ok = all(checks) and elapsed <= 600
    verdict(5, "IQAE coverage, MLQAE accuracy and canonical outcome law", ok,
            f"coverage {coverage:.2f}, MLQAE max error {max(ml_errors):.4f}, law gap {law_gap:.1e}")
    assert all(checks)
    assert elapsed <= 600


def test_criterion_6_robustness_asymmetry(verdict):
    start = time.perf_counter()
    fractions, surfaced = {}, {}
    for name in sorted(PRESETS):
        spec = ExperimentSpec(kind="sweep-shots", preset=name, scale="hardware", qubits=(3,),
                              lambda_var=0.2, alpha_exp=0.2, rvar_levels=(0.2, 0.05),
                              shots=(128, 512, 2048, 8192), alpha_conf=0.05, mode="sampled",
                              variants=("iqae", "mlqae", "canonical"), repeats=5, seed=1)
        rows = run(spec)
        for measure in ("var", "expectile"):
            for variant in spec.variants:
                sel = [r for r in rows if r["measure"] == measure and r["variant"] == variant]
                fractions[(name, measure, variant)] = sum(r["within_grid"] for r in sel) / len(sel)
        for r in rows:
            if r["measure"] in ("cvar", "rvar") and r["status"] != "ok":
                surfaced[r["status"]] = surfaced.get(r["status"], 0) + 1
            # a failure must never come back as a number
            assert (r["status"] == "ok") == math.isfinite(r["estimate"])
    # the floor is enforced on a window that carries too little mass
    tiny = PRESETS["gamma-1-1"].discretize(3)
    with pytest.raises(IllConditionedError):
        quantum_rvar(tiny, 1e-5, 1e-6, qae_config=QAEConfig(variant="statevector"))
    elapsed = time.perf_counter() - start
    worst = min(fractions.values())
    ok = worst >= 0.75
    verdict(6, "VaR and expectile within one grid step in at least 75% of sampled cells", ok,
            f"lowest fraction {worst:.2f}, surfaced CVaR/RVaR diagnostics {surfaced or 'none'}, {elapsed:.1f}s")
    assert worst >= 0.75, {k: v for k, v in fractions.items() if v < 0.75}


def test_criterion_7_excluded(verdict):
    verdict(7, "gate counts and hardware errors; no transpiler or device in scope", True, label="EXCLUDED")
    pytest.skip("not reproducible without a transpiler and hardware")
