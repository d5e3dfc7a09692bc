"""Sweep runners behind the CLI: qubit sweeps, shot sweeps and canonical histograms.

An :class:`ExperimentSpec` fully determines a run.  Each cell draws its own
seed from ``SeedSequence([seed, *coords])``, so results do not depend on the
worker count or execution order.  Tables are written as CSV and JSON and
every row echoes the config, its seed and the package version.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import tomli
import tomli_w

from . import __version__
from .circuits import ExpectileParams, expectile_a_operator
from .distributions import DiscretizedDistribution, Preset, discretize, get_preset
from .errors import ConfigurationError, QRiskError
from .oracle import MEASURES, ORIENTATIONS, as_loss, continuous_value, discrete_value, exact_expectile
from .qae import VARIANTS, QAEConfig, canonical_outcomes, statevector_qae
from .risk import RiskLevels, default_gamma, run_measure

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
KINDS = ("estimate", "sweep-qubits", "sweep-shots", "canonical-hist")

# Section -> allowed keys of the TOML config.
SCHEMA = {
    "distribution": {"preset", "interval", "scale", "qubits", "orientation"},
    "measures": {"names", "lambda", "alpha", "rvar", "gamma"},
    "qae": {"variant", "variants", "m", "shots", "epsilon", "alpha_conf", "mode", "max_shots"},
    "run": {"seed", "repeats", "workers"},
}
TOP_LEVEL = {"schema", "kind"}


def artifact_version() -> str:
    """Package version, with ``git describe`` appended when available."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    tag = out.stdout.strip()
    return f"{__version__}+{tag}" if out.returncode == 0 and tag else __version__


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str = "sweep-qubits"
    preset: str = "gamma-1-1"
    interval: Optional[tuple[float, float]] = None
    scale: str = "simulator"
    qubits: tuple[int, ...] = (3, 4, 5, 6, 7)
    orientation: str = "loss"
    measures: tuple[str, ...] = MEASURES
    lambda_var: float = 0.05
    alpha_exp: float = 0.05
    rvar_levels: tuple[float, float] = (0.05, 0.005)
    gamma: Optional[float] = None
    variant: str = "iqae"
    variants: tuple[str, ...] = ()
    m: tuple[int, ...] = (3,)
    shots: tuple[int, ...] = (1024,)
    epsilon: float = 0.05
    alpha_conf: float = 0.01
    mode: str = "sampled"
    max_shots: int = 1_000_000
    seed: int = 0
    repeats: int = 1
    workers: int = 1

    def __post_init__(self):
        for name in ("qubits", "measures", "variants", "m", "shots", "rvar_levels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.interval is not None:
            object.__setattr__(self, "interval", tuple(float(v) for v in self.interval))
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown experiment kind {self.kind!r}")
        get_preset(self.preset)
        if not self.qubits or not self.measures or not self.m or not self.shots:
            raise ConfigurationError("sweep ranges must be non-empty")
        if any(q < 1 for q in self.qubits):
            raise ConfigurationError("qubit counts must be positive")
        for meas in self.measures:
            if meas not in MEASURES:
                raise ConfigurationError(f"unknown measure {meas!r}")
        for v in (self.variant, *self.variants):
            if v not in VARIANTS:
                raise ConfigurationError(f"unknown QAE variant {v!r}")
        if self.orientation not in ORIENTATIONS:
            raise ConfigurationError(f"unknown orientation {self.orientation!r}")
        if len(self.rvar_levels) != 2:
            raise ConfigurationError("rvar needs exactly two levels")
        if self.repeats < 1 or self.workers < 1:
            raise ConfigurationError("repeats and workers must be positive")
        if self.kind == "sweep-shots" and self.mode != "sampled":
            raise ConfigurationError("shot sweeps need sampled mode")
        if self.kind == "canonical-hist" and self.measures != ("expectile",):
            raise ConfigurationError("canonical histograms are built for the expectile only")
        self.levels  # validates the level values
        self.qae_config(self.variant, self.shots[0], self.m[0])

    @property
    def levels(self) -> RiskLevels:
        return RiskLevels(self.lambda_var, self.alpha_exp, *self.rvar_levels)

    @property
    def preset_obj(self) -> Preset:
        return get_preset(self.preset)

    def resolved_interval(self) -> tuple[float, float]:
        return self.interval if self.interval is not None else self.preset_obj.interval(self.scale)

    def distribution(self, n: int) -> DiscretizedDistribution:
        return discretize(self.preset_obj.spec, self.resolved_interval(), n)

    def gamma_for(self, measure: str) -> float:
        return self.gamma if self.gamma is not None else default_gamma(measure)

    def qae_config(self, variant: str, shots: int, m: int, seed: Optional[int] = None) -> QAEConfig:
        return QAEConfig(
            variant=variant,
            m=m,
            shots=shots,
            epsilon=self.epsilon,
            alpha_conf=self.alpha_conf,
            mode=self.mode,
            seed=seed,
            max_shots=self.max_shots,
        )

    def to_dict(self) -> dict:
        """Nested form matching the TOML schema."""
        dist = {
            "preset": self.preset,
            "scale": self.scale,
            "qubits": list(self.qubits),
            "orientation": self.orientation,
        }
        if self.interval is not None:
            dist["interval"] = list(self.interval)
        measures = {
            "names": list(self.measures),
            "lambda": self.lambda_var,
            "alpha": self.alpha_exp,
            "rvar": list(self.rvar_levels),
        }
        if self.gamma is not None:
            measures["gamma"] = self.gamma
        qae = {
            "variant": self.variant,
            "variants": list(self.variants),
            "m": list(self.m),
            "shots": list(self.shots),
            "epsilon": self.epsilon,
            "alpha_conf": self.alpha_conf,
            "mode": self.mode,
            "max_shots": self.max_shots,
        }
        run = {"seed": self.seed, "repeats": self.repeats, "workers": self.workers}
        return {
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "distribution": dist,
            "measures": measures,
            "qae": qae,
            "run": run,
        }

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def echo(self) -> str:
        """Compact config echo; ``workers`` is left out since it cannot change results."""
        d = self.to_dict()
        d["run"].pop("workers")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        unknown = set(data) - TOP_LEVEL - set(SCHEMA)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if data.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported config schema {data.get('schema')!r}")
        for section, allowed in SCHEMA.items():
            body = data.get(section, {})
            if not isinstance(body, dict):
                raise ConfigurationError(f"[{section}] must be a table")
            extra = set(body) - allowed
            if extra:
                raise ConfigurationError(f"unknown keys in [{section}]: {sorted(extra)}")
        dist, meas = data.get("distribution", {}), data.get("measures", {})
        qae, run = data.get("qae", {}), data.get("run", {})
        mapping = {
            "kind": data.get("kind"),
            "preset": dist.get("preset"),
            "interval": dist.get("interval"),
            "scale": dist.get("scale"),
            "qubits": _as_tuple(dist.get("qubits")),
            "orientation": dist.get("orientation"),
            "measures": _as_tuple(meas.get("names")),
            "lambda_var": meas.get("lambda"),
            "alpha_exp": meas.get("alpha"),
            "rvar_levels": meas.get("rvar"),
            "gamma": meas.get("gamma"),
            "variant": qae.get("variant"),
            "variants": qae.get("variants"),
            "m": _as_tuple(qae.get("m")),
            "shots": _as_tuple(qae.get("shots")),
            "epsilon": qae.get("epsilon"),
            "alpha_conf": qae.get("alpha_conf"),
            "mode": qae.get("mode"),
            "max_shots": qae.get("max_shots"),
            "seed": run.get("seed"),
            "repeats": run.get("repeats"),
            "workers": run.get("workers"),
        }
        try:
            return cls(**{k: v for k, v in mapping.items() if v is not None})
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentSpec":
        try:
            return cls.from_dict(tomli.loads(text))
        except tomli.TOMLDecodeError as exc:
            raise ConfigurationError(f"bad TOML: {exc}") from None

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        return cls.from_toml(Path(path).read_text())

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)


def _as_tuple(v):
    if v is None:
        return None
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def cell_seed(master: int, *coords: int) -> int:
    """Seed owned by one sweep cell, derived from the master seed and its coordinates."""
    ss = np.random.SeedSequence([int(master), *[int(c) for c in coords]])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# --------------------------------------------------------------------------
# cells
# --------------------------------------------------------------------------


def _risk_cell(spec: ExperimentSpec, n: int, measure: str, variant: str, shots: int, repeat: int) -> dict:
    coords = (n, MEASURES.index(measure), VARIANTS.index(variant), shots, repeat)
    seed = cell_seed(spec.seed, *coords)
    dist = spec.distribution(n)
    levels = spec.levels.for_measure(measure)
    loss = as_loss(dist, spec.orientation)
    oracle = discrete_value(loss, measure, levels)
    cont = continuous_value(spec.preset_obj.spec, measure, levels)
    length = spec.resolved_interval()[1] - spec.resolved_interval()[0]
    row = {
        "kind": spec.kind,
        "preset": spec.preset,
        "n_qubits": n,
        "measure": measure,
        "levels": "/".join(f"{v:g}" for v in levels),
        "variant": variant,
        "mode": spec.mode,
        "shots": shots,
        "repeat": repeat,
        "seed": seed,
        "gamma": spec.gamma_for(measure),
        "grid_step": dist.b,
        "oracle_value": oracle,
        "continuous_value": cont,
        "estimate": math.nan,
        "abs_error_oracle": math.nan,
        "rel_error": math.nan,
        "within_grid": False,
        "grover_calls": 0,
        "shots_used": 0,
        "converged": False,
        "status": "ok",
        "message": "",
    }
    cfg = spec.qae_config(variant, shots, spec.m[0], seed)
    try:
        res = run_measure(dist, measure, levels, spec.gamma_for(measure), cfg, spec.orientation, seed)
    except QRiskError as exc:
        row["status"] = type(exc).__name__
        row["message"] = str(exc)
        return row
    row.update(
        estimate=res.value,
        abs_error_oracle=abs(res.value - oracle),
        rel_error=abs(res.value - cont) / length,
        within_grid=bool(abs(res.value - oracle) <= dist.b),
        grover_calls=res.grover_calls,
        shots_used=res.shots_used,
        converged=res.converged,
    )
    return row


def _run_cells(spec: ExperimentSpec, cells: list[tuple]) -> list[dict]:
    if spec.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_risk_cell_star, [(spec, *c) for c in cells]))
    else:
        rows = [_risk_cell(spec, *c) for c in cells]
    version, echo = artifact_version(), spec.echo()
    for row in rows:
        row["version"] = version
        row["config"] = echo
    key = lambda r: (r["n_qubits"], MEASURES.index(r["measure"]), r["variant"], r["shots"], r["repeat"])
    return sorted(rows, key=key)


def _risk_cell_star(args):
    return _risk_cell(*args)


def run_estimate(spec: ExperimentSpec) -> list[dict]:
    """One row per measure (and repeat) at the first qubit count."""
    cells = [(spec.qubits[0], meas, spec.variant, spec.shots[0], r)
             for meas in spec.measures for r in range(spec.repeats)]
    return _run_cells(spec, cells)


def run_sweep_qubits(spec: ExperimentSpec) -> list[dict]:
    """One row per qubit count, measure and repeat."""
    cells = [(n, meas, spec.variant, spec.shots[0], r)
             for n in spec.qubits for meas in spec.measures for r in range(spec.repeats)]
    return _run_cells(spec, cells)


def run_sweep_shots(spec: ExperimentSpec) -> list[dict]:
    """One row per shot count, measure, QAE variant and repeat at the first qubit count."""
    if spec.mode != "sampled":
        raise ConfigurationError("shot sweeps need sampled mode")
    variants = spec.variants or (spec.variant,)
    cells = [(spec.qubits[0], meas, v, s, r)
             for s in spec.shots for meas in spec.measures for v in variants for r in range(spec.repeats)]
    return _run_cells(spec, cells)


def canonical_reference(dist: DiscretizedDistribution, alpha: float, gamma: float):
    """A-operator at the grid point nearest the exact expectile, its amplitude and the oracle value."""
    target = exact_expectile(dist, alpha)
    params = ExpectileParams(alpha, dist.index_of(target), dist.n_qubits)
    a_op = expectile_a_operator(dist, params, gamma)
    amp = statevector_qae(a_op).estimate
    return a_op, amp, target


def run_canonical_histogram(spec: ExperimentSpec) -> list[dict]:
    """Outcome distribution of canonical QAE on the expectile h-operator for each m.

    Rows list every outcome y with its weight (probability in exact mode,
    counts otherwise), the amplitude sin^2(pi y / 2^m) and that amplitude
    mapped through the payoff inversion.  ``reference_value`` is the inverted
    exact amplitude that the histogram concentrates on; ``oracle_value`` is
    the exact expectile of the pmf.
    """
    n = spec.qubits[0]
    loss = as_loss(spec.distribution(n), spec.orientation)
    alpha = 1 - spec.alpha_exp
    gamma = spec.gamma_for("expectile")
    a_op, amp, target = canonical_reference(loss, alpha, gamma)
    reference = a_op.invert(amp)
    version, echo = artifact_version(), spec.echo()
    rows = []
    for m in spec.m:
        seed = cell_seed(spec.seed, n, m)
        probs = canonical_outcomes(a_op, m)
        size = 2**m
        if spec.mode == "exact":
            weights = probs
        else:
            weights = np.random.Generator(np.random.PCG64(seed)).multinomial(spec.shots[0], probs)
        best = _most_frequent(weights, size)
        for y in range(size):
            a_y = math.sin(math.pi * y / size) ** 2
            rows.append({
                "kind": spec.kind,
                "preset": spec.preset,
                "n_qubits": n,
                "m": m,
                "outcome": y,
                "weight": float(weights[y]),
                "amplitude": a_y,
                "value": a_op.invert(a_y),
                "most_frequent": y == best,
                "reference_value": reference,
                "exact_amplitude": amp,
                "oracle_value": target,
                "breakpoint": loss.index_of(target),
                "gamma": gamma,
                "mode": spec.mode,
                "shots": spec.shots[0],
                "seed": seed,
                "version": version,
                "config": echo,
            })
    return rows


def _most_frequent(weights, size: int) -> int:
    """Outcome whose folded amplitude class carries the most weight (smaller y on ties)."""
    folded = {}
    for y in range(size):
        key = min(y, size - y)
        folded[key] = folded.get(key, 0.0) + float(weights[y])
    return max(sorted(folded), key=lambda k: folded[k])


def canonical_summary(rows: list[dict]) -> list[dict]:
    """Per m: the inverted value of the most frequent outcome and its distance to the reference."""
    out = []
    for m in sorted({r["m"] for r in rows}):
        sel = [r for r in rows if r["m"] == m]
        best = next(r for r in sel if r["most_frequent"])
        values = sorted({round(r["value"], 12) for r in sel})
        j = values.index(round(best["value"], 12))
        neighbours = [abs(values[k] - values[j]) for k in (j - 1, j + 1) if 0 <= k < len(values)]
        out.append({
            "m": m,
            "value": best["value"],
            "reference_value": best["reference_value"],
            "oracle_value": best["oracle_value"],
            "error": abs(best["value"] - best["reference_value"]),
            "cell_width": max(neighbours) if neighbours else math.inf,
        })
    return out


RUNNERS = {
    "estimate": run_estimate,
    "sweep-qubits": run_sweep_qubits,
    "sweep-shots": run_sweep_shots,
    "canonical-hist": run_canonical_histogram,
}


def run(spec: ExperimentSpec) -> list[dict]:
    return RUNNERS[spec.kind](spec)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_outputs(spec: ExperimentSpec, rows: list[dict], out_dir, extra: Optional[dict] = None) -> dict:
    """Write ``<kind>.csv``, ``<kind>.json`` and the reproducing ``config.toml``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = spec.kind
    paths = {
        "csv": out / f"{stem}.csv",
        "json": out / f"{stem}.json",
        "config": out / "config.toml",
    }
    paths["csv"].write_text(rows_to_csv(rows))
    payload = {
        "version": artifact_version(),
        "config": spec.to_dict(),
        "rows": [{k: _json_safe(v) for k, v in r.items() if k != "config"} for r in rows],
    }
    if extra:
        payload.update(extra)
    paths["json"].write_text(json.dumps(payload, indent=2, default=_json_safe) + "\n")
    paths["config"].write_text(spec.to_toml())
    return paths


def failed_rows(rows: list[dict]) -> list[dict]:
    return [r for r in rows if r.get("status", "ok") != "ok"]


__all__ = [
    "ExperimentSpec",
    "artifact_version",
    "canonical_summary",
    "cell_seed",
    "run",
    "run_canonical_histogram",
    "run_estimate",
    "run_sweep_qubits",
    "run_sweep_shots",
    "write_outputs",
]
