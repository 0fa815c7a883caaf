"""Command-line pipeline: load, screen, fit, effects, inference, robustness.

Flags can also be supplied through a flat key-value config file
(key = value, '#' comments); explicit command-line flags win over config
values. Bad flags exit 2; data and validation failures exit 1 with a
location-bearing message.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .effects import gaps
from .errors import InferenceError, SynthControlError
from .estimator import (
    DEFAULT_DECAY,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    fit_study,
    time_weights,
)
from .inference import filter_placebos, inference_report, run_placebos
from .panel import PanelLayout, Period, load_panel
from .report import (
    build_report,
    round_dollars,
    sha256_file,
    write_alpha_sweep_csv,
    write_gaps_csv,
    write_loo_csv,
    write_placebo_gaps_csv,
    write_placebos_csv,
    write_ratio_ranking_csv,
    write_weights_csv,
)
from .robustness import DEFAULT_LOO_MIN_WEIGHT, alpha_sweep, leave_one_out
from .study import DonorScreen, StudySpec, build_study, pre_period_index

_BOOL_DESTS = ("completeness_required", "placebos", "alpha_sweep_placebos")


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthcontrol",
        description=(
            "Fit a convex donor-weight counterfactual for a treated panel "
            "unit, estimate post-event effects, and run placebo inference "
            "and robustness checks."
        ),
    )
    parser.add_argument("--data", help="wide-layout panel CSV")
    parser.add_argument(
        "--region-column",
        default="RegionName",
        help="unit-label column in the wide CSV (default: RegionName)",
    )
    parser.add_argument("--treated", help="treated unit label")
    parser.add_argument(
        "--intervention",
        type=Period.parse,
        help="last pre-treatment month, YYYY-MM",
    )
    parser.add_argument("--pre-start", type=Period.parse,
                        help="first pre-treatment month, YYYY-MM")
    parser.add_argument("--post-end", type=Period.parse,
                        help="last post-treatment month, YYYY-MM")
    parser.add_argument(
        "--alpha",
        type=float,
        default=DEFAULT_DECAY,
        help=f"per-month decay rate for the loss weights "
        f"(default: {DEFAULT_DECAY})",
    )
    parser.add_argument(
        "--min-pre-correlation",
        type=float,
        default=None,
        help="drop donors whose pre-window correlation with the treated "
        "unit is below this (default: screen disabled)",
    )
    parser.add_argument(
        "--completeness-required",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="drop donors with missing values inside the study window",
    )
    parser.add_argument(
        "--placebos",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="run placebo-in-space inference",
    )
    parser.add_argument(
        "--placebo-filter-multiplier",
        type=float,
        default=2.0,
        help="keep placebos with pre RMSPE at most this multiple of the "
        "treated unit's (default: 2)",
    )
    parser.add_argument(
        "--loo",
        choices=("top", "all", "none"),
        default="top",
        help="leave-one-out targets: highest-weight donor, every donor "
        "above --loo-min-weight, or skip (default: top)",
    )
    parser.add_argument(
        "--loo-min-weight",
        type=float,
        default=DEFAULT_LOO_MIN_WEIGHT,
        help=f"weight floor for --loo all (default: {DEFAULT_LOO_MIN_WEIGHT})",
    )
    parser.add_argument(
        "--alpha-sweep",
        type=_parse_float_list,
        default=None,
        metavar="LIST",
        help="comma-separated decay rates to refit, e.g. 0.003,0.005,0.01",
    )
    parser.add_argument(
        "--alpha-sweep-placebos",
        action=argparse.BooleanOptionalAction,
        default=False,
        help="rerun placebo inference at every swept rate (costly)",
    )
    parser.add_argument("--tolerance", type=float, default=DEFAULT_TOL,
                        help=f"solver convergence tolerance (default: {DEFAULT_TOL})")
    parser.add_argument(
        "--max-iterations",
        type=int,
        default=DEFAULT_MAX_ITER,
        help=f"solver iteration cap (default: {DEFAULT_MAX_ITER})",
    )
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel workers for placebo fits (default: 1)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--config", default=None,
                        help="flat key-value config file; flags override it")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    return parser


def load_config(path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise SynthControlError(f"cannot read config {path}: {err}") from None
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SynthControlError(
                f"{path}:{line_no}: expected 'key = value', got {line!r}"
            )
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _parse_bool(text: str, key: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise SynthControlError(f"config key {key!r}: not a boolean: {text!r}")


def _merge_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    bootstrap = argparse.ArgumentParser(add_help=False)
    bootstrap.add_argument("--config", default=None)
    preliminary, _ = bootstrap.parse_known_args(argv)
    if preliminary.config is not None:
        known = {
            action.dest for action in parser._actions if action.dest != "help"
        }
        config = load_config(preliminary.config)
        for key in config:
            if key not in known:
                parser.error(f"unknown config key {key!r} in {preliminary.config}")
        defaults: dict[str, object] = {
            key: _parse_bool(value, key) if key in _BOOL_DESTS else value
            for key, value in config.items()
        }
        # argparse applies each option's type converter to string defaults
        parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _dollars(value: float) -> str:
    amount = round_dollars(value)
    return f"-${-amount:,}" if amount < 0 else f"${amount:,}"


def run(args: argparse.Namespace) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    panel = load_panel(args.data, PanelLayout(region_column=args.region_column))
    spec = StudySpec(
        treated=args.treated,
        intervention=args.intervention,
        pre_start=args.pre_start,
        post_end=args.post_end,
        alpha=args.alpha,
        donor_screen=DonorScreen(
            completeness_required=args.completeness_required,
            min_pre_correlation=args.min_pre_correlation,
        ),
    )
    study = build_study(panel, spec)
    tw = time_weights(pre_period_index(spec), spec.alpha)
    fit = fit_study(study, tw, tol=args.tolerance, max_iter=args.max_iterations)
    effects = gaps(study, fit.weights)
    write_weights_csv(fit, out / "weights.csv")
    write_gaps_csv(study, effects, out / "gaps.csv")

    inference = filtered_inference = None
    if args.placebos:
        placebos = run_placebos(
            panel,
            spec,
            tol=args.tolerance,
            max_iter=args.max_iterations,
            workers=args.workers,
        )
        write_placebos_csv(placebos, out / "placebos.csv")
        write_placebo_gaps_csv(placebos, spec, out / "placebo_gaps.csv")
        write_ratio_ranking_csv(placebos, out / "ratio_ranking.csv")
        try:
            inference = inference_report(placebos)
        except InferenceError as err:
            print(f"warning: placebo inference unavailable: {err}", file=sys.stderr)
        filtered = filter_placebos(placebos, args.placebo_filter_multiplier)
        write_placebo_gaps_csv(filtered, spec, out / "placebo_gaps_filtered.csv")
        try:
            filtered_inference = inference_report(filtered)
        except InferenceError as err:
            print(
                f"warning: filtered placebo inference unavailable: {err}",
                file=sys.stderr,
            )

    loo = None
    if args.loo != "none":
        loo = leave_one_out(
            panel,
            spec,
            targets=args.loo,
            min_weight=args.loo_min_weight,
            tol=args.tolerance,
            max_iter=args.max_iterations,
        )
        write_loo_csv(loo, out / "loo.csv")

    sweep = None
    if args.alpha_sweep:
        sweep = alpha_sweep(
            panel,
            spec,
            args.alpha_sweep,
            with_placebos=args.alpha_sweep_placebos,
            workers=args.workers,
            tol=args.tolerance,
            max_iter=args.max_iterations,
        )
        write_alpha_sweep_csv(sweep, out / "alpha_sweep.csv")

    report = build_report(
        spec,
        study,
        fit,
        effects,
        inference=inference,
        filtered_inference=filtered_inference,
        filter_multiplier=args.placebo_filter_multiplier if args.placebos else None,
        loo=loo,
        sweep=sweep,
        solver={"tolerance": args.tolerance, "max_iterations": args.max_iterations},
        provenance={
            "data_path": str(args.data),
            "data_sha256": sha256_file(args.data),
            "tool_version": __version__,
            "generated_at": datetime.now(timezone.utc).isoformat(),
        },
    )
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n",
                                     encoding="utf-8")

    window = (
        f"pre {spec.pre_start}..{spec.intervention} | "
        f"post {spec.intervention.shift(1)}..{spec.post_end}"
    )
    print(f"treated {spec.treated} | donors {study.n_donors} "
          f"({len(study.excluded)} excluded) | {window}")
    line = f"att {_dollars(effects.att)}/month"
    if effects.rmspe_pre_relative == effects.rmspe_pre_relative:
        line += f" | pre fit {100 * effects.rmspe_pre_relative:.2f}% of mean level"
    print(line)
    if inference is not None:
        print(
            f"p(gap) {inference.k_gap + 1}/{inference.j + 1} = "
            f"{inference.p_gap_value:.4f} | "
            f"p(ratio) {inference.k_ratio + 1}/{inference.j_ratio + 1} = "
            f"{inference.p_ratio_value:.4f} | "
            f"ratio rank {inference.rank_ratio} of {inference.j_ratio + 1}"
        )
    print(f"wrote {out}/report.json")


def main(argv=None) -> int:
    parser = build_parser()
    args = _merge_config(parser, argv)
    for required in ("data", "treated", "intervention", "pre_start", "post_end"):
        if getattr(args, required) is None:
            parser.error(f"--{required.replace('_', '-')} is required "
                         "(flag or config)")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        run(args)
    except (SynthControlError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
