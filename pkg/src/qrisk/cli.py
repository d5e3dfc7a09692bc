"""Command line entry point: ``qrisk <command> [options]``.

Exit status is 0 on success, 2 for configuration errors and 3 when a
computation failed to converge or hit an ill-conditioned denominator (any
partial output has been written by then).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .distributions import PRESETS, discretize, get_preset
from .errors import ConfigurationError, QRiskError
from .experiments import ExperimentSpec, canonical_summary, failed_rows, rows_to_csv, run, write_outputs
from .oracle import MEASURES, golden_records, write_golden
from .qae import VARIANTS

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("qrisk")


def _int_list(text: str) -> list[int]:
    """Parse ``3,4,5`` or ``3-7``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML experiment file; flags override it")
    p.add_argument("--preset", choices=sorted(PRESETS), help="distribution preset")
    p.add_argument("--interval", type=float, nargs=2, metavar=("LO", "HI"), help="truncation interval")
    p.add_argument("--scale", choices=("simulator", "hardware"), help="preset interval to use")
    p.add_argument("--qubits", type=_int_list, help="distribution qubits, e.g. 5 or 3-7")
    p.add_argument("--orientation", choices=("loss", "pnl"), help="how the preset variable is read")
    p.add_argument("--measure", type=_str_list, help=f"comma list from {', '.join(MEASURES)}")
    p.add_argument("--levels", type=float, nargs="+", metavar="L",
                   help="tail level L (VaR, CVaR, EVaR) and optional second RVaR level")
    p.add_argument("--gamma", type=float, help="rotation scale; default per measure")
    p.add_argument("--qae", choices=VARIANTS, help="amplitude estimator")
    p.add_argument("--variants", type=_str_list, help="estimators compared by sweep-shots")
    p.add_argument("--mode", choices=("exact", "sampled"), help="exact probabilities or shot sampling")
    p.add_argument("--shots", type=_int_list, help="shots per circuit (list for sweep-shots)")
    p.add_argument("--m", type=_int_list, help="evaluation qubits or schedule depth (list for canonical-hist)")
    p.add_argument("--epsilon", type=float, help="IQAE target half-width")
    p.add_argument("--alpha-conf", type=float, help="IQAE confidence level")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--repeats", type=int, help="seeded repetitions per cell")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrisk", description="Risk measures by simulated amplitude estimation.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", help="print the pmf of a preset")
    p.add_argument("--preset", choices=sorted(PRESETS), default="gamma-1-1")
    p.add_argument("--interval", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--scale", choices=("simulator", "hardware"), default="simulator")
    p.add_argument("--qubits", type=int, default=3)
    p.add_argument("--out", type=Path, help="CSV file (stdout when omitted)")

    for name, help_ in (
        ("estimate", "estimate one or more measures"),
        ("sweep-qubits", "error versus distribution qubits"),
        ("sweep-shots", "error versus shots per estimator"),
        ("canonical-hist", "canonical QAE outcome histograms versus m"),
    ):
        _add_common(sub.add_parser(name, help=help_))

    p = sub.add_parser("oracle", help="write the golden oracle file")
    p.add_argument("--qubits", type=_int_list, default=[3, 4, 5, 6, 7])
    p.add_argument("--out", type=Path, default=Path("oracle_golden.json"))
    return parser


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    base = ExperimentSpec.load(args.config) if args.config else None
    kind = args.command
    defaults = {
        "estimate": dict(qubits=(5,), mode="exact", variant="mlqae", m=(4,)),
        "sweep-qubits": dict(),
        "sweep-shots": dict(qubits=(3,), scale="hardware", lambda_var=0.2, alpha_exp=0.2, rvar_levels=(0.2, 0.05),
                            shots=(128, 512, 2048, 8192), alpha_conf=0.05, variants=("iqae", "mlqae", "canonical")),
        "canonical-hist": dict(qubits=(5,), measures=("expectile",), m=(1, 2, 3, 4, 5, 6), mode="exact",
                               variant="canonical"),
    }[kind]
    if base is not None:
        if base.kind != kind:
            raise ConfigurationError(f"config is for {base.kind!r}, not {kind!r}")
        spec_kwargs = {}
    else:
        spec_kwargs = dict(defaults)
    flags = {
        "preset": args.preset,
        "interval": args.interval,
        "scale": args.scale,
        "qubits": args.qubits,
        "orientation": args.orientation,
        "measures": args.measure,
        "gamma": args.gamma,
        "variant": args.qae,
        "variants": args.variants,
        "mode": args.mode,
        "shots": args.shots,
        "m": args.m,
        "epsilon": args.epsilon,
        "alpha_conf": args.alpha_conf,
        "seed": args.seed,
        "repeats": args.repeats,
        "workers": args.workers,
    }
    if args.levels:
        if len(args.levels) > 2:
            raise ConfigurationError("--levels takes one or two values")
        level = args.levels[0]
        second = args.levels[1] if len(args.levels) == 2 else level / 10
        flags.update(lambda_var=level, alpha_exp=level, rvar_levels=(level, second))
    spec_kwargs.update({k: v for k, v in flags.items() if v is not None})
    if base is not None:
        return base.replace(**spec_kwargs)
    return ExperimentSpec(kind=kind, **spec_kwargs)


def _cmd_discretize(args) -> int:
    preset = get_preset(args.preset)
    interval = args.interval or preset.interval(args.scale)
    dist = discretize(preset.spec, interval, args.qubits)
    rows = [{"index": i, "value": repr(float(dist.value(i))), "probability": repr(float(p))}
            for i, p in enumerate(dist.probs)]
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        handle = open(args.out, "w", newline="")
    else:
        handle = sys.stdout
    try:
        writer = csv.DictWriter(handle, fieldnames=["index", "value", "probability"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if handle is not sys.stdout:
            handle.close()
    return EXIT_OK


def _cmd_oracle(args) -> int:
    presets = list(PRESETS.values())
    sim_levels = [("var", (0.05,)), ("cvar", (0.05,)), ("rvar", (0.05, 0.005)), ("expectile", (0.05,))]
    hw_levels = [("var", (0.2,)), ("cvar", (0.2,)), ("rvar", (0.2, 0.05)), ("expectile", (0.2,))]
    records = golden_records(presets, args.qubits, sim_levels, "simulator")
    records += golden_records(presets, [3], hw_levels, "hardware")
    write_golden(args.out, records, "qrisk oracle")
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    spec = spec_from_args(args)
    rows = run(spec)
    extra = {"summary": canonical_summary(rows)} if spec.kind == "canonical-hist" else None
    out = args.out or Path("results") / spec.kind
    paths = write_outputs(spec, rows, out, extra)
    if not args.no_figures and spec.kind != "estimate":
        from .plotting import PLOTTERS

        paths["figure"] = PLOTTERS[spec.kind](rows, Path(out) / f"{spec.kind}.png")
    if spec.kind == "canonical-hist":
        sys.stdout.write(rows_to_csv(extra["summary"]))
    else:
        keep = ("n_qubits", "measure", "variant", "shots", "repeat", "estimate", "oracle_value",
                "continuous_value", "status")
        sys.stdout.write(rows_to_csv([{k: r[k] for k in keep} for r in rows]))
    for label, path in paths.items():
        log.info("%s: %s", label, path)
    failures = failed_rows(rows)
    for r in failures:
        print(f"cell n={r['n_qubits']} {r['measure']} {r['variant']} shots={r['shots']}: "
              f"{r['status']}: {r['message']}", file=sys.stderr)
    return EXIT_NUMERIC if failures else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        if args.command == "discretize":
            return _cmd_discretize(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        return _cmd_experiment(args)
    except ConfigurationError as exc:
        print(f"qrisk: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QRiskError as exc:
        print(f"qrisk: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
