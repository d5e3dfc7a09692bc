"""PNG figures for sweep tables, drawn with the non-interactive Agg backend."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

MEASURE_LABELS = {"var": "VaR", "cvar": "CVaR", "rvar": "RVaR", "expectile": "EVaR"}


def _finite(v) -> bool:
    return isinstance(v, (int, float)) and math.isfinite(v)


def plot_sweep_qubits(rows: list[dict], path) -> Path:
    """Relative error against the continuous reference versus qubit count."""
    series = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r["status"] == "ok" and _finite(r["rel_error"]):
            series[r["measure"]][r["n_qubits"]].append(r["rel_error"])
    fig, ax = plt.subplots(figsize=(6, 4))
    for measure, by_n in series.items():
        ns = sorted(by_n)
        ax.plot(ns, [sum(by_n[n]) / len(by_n[n]) for n in ns], marker="o",
                label=MEASURE_LABELS.get(measure, measure))
    ax.set_xlabel("distribution qubits n")
    ax.set_ylabel("relative error")
    ax.set_title(rows[0]["preset"] if rows else "")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_sweep_shots(rows: list[dict], path) -> Path:
    """Mean absolute error against the discrete oracle versus shots, one panel per measure."""
    measures = sorted({r["measure"] for r in rows}, key=list(MEASURE_LABELS).index)
    fig, axes = plt.subplots(1, max(len(measures), 1), figsize=(4 * max(len(measures), 1), 3.5), squeeze=False)
    for ax, measure in zip(axes[0], measures):
        sel = [r for r in rows if r["measure"] == measure]
        by_variant = defaultdict(lambda: defaultdict(list))
        for r in sel:
            if r["status"] == "ok" and _finite(r["abs_error_oracle"]):
                by_variant[r["variant"]][r["shots"]].append(r["abs_error_oracle"])
        for variant, by_shots in sorted(by_variant.items()):
            xs = sorted(by_shots)
            ax.plot(xs, [sum(by_shots[s]) / len(by_shots[s]) for s in xs], marker="o", label=variant)
        if sel:
            ax.axhline(sel[0]["grid_step"], color="k", ls="--", lw=0.8, label="grid step")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("shots")
        ax.set_title(MEASURE_LABELS.get(measure, measure))
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("|estimate - oracle|")
    axes[0][-1].legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def plot_canonical_hist(rows: list[dict], path) -> Path:
    """Outcome weights per m, placed at their inverted values, with the reference lines."""
    ms = sorted({r["m"] for r in rows})
    fig, axes = plt.subplots(len(ms), 1, figsize=(6, 1.8 * len(ms) + 0.5), squeeze=False, sharex=True)
    for ax, m in zip(axes[:, 0], ms):
        sel = [r for r in rows if r["m"] == m]
        total = sum(r["weight"] for r in sel) or 1.0
        folded = defaultdict(float)
        for r in sel:
            folded[round(r["value"], 9)] += r["weight"] / total
        xs = sorted(folded)
        width = (max(xs) - min(xs)) / (4 * len(xs)) if len(xs) > 1 else 1.0
        ax.bar(xs, [folded[x] for x in xs], width=width)
        ax.axvline(sel[0]["reference_value"], color="k", lw=1, label="exact amplitude")
        ax.axvline(sel[0]["oracle_value"], color="r", ls="--", lw=1, label="oracle expectile")
        ax.set_ylabel(f"m = {m}")
    axes[0, 0].legend(fontsize="small")
    axes[-1, 0].set_xlabel("inverted value")
    fig.tight_layout()
    return _save(fig, path)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


PLOTTERS = {
    "sweep-qubits": plot_sweep_qubits,
    "sweep-shots": plot_sweep_shots,
    "canonical-hist": plot_canonical_hist,
}
