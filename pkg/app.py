"""
SepsisLens
Command-line entry point.

Subcommands:
    synth     generate a synthetic cohort and its embedding table
    validate  check a config without running anything
    run       label, window, featurize, evaluate, audit and report
    audit     re-run the audits over the scores of an earlier run
    compare   text vs structured vs both on the same encounters
    sweep     one evaluation per prediction horizon

Exit codes: 0 success, 2 usage, 3 data/config validation, 4 pipeline failure.
"""

import argparse
import logging
import sys
from typing import List, Optional

from config.settings import configure_logging, load_config, validate_config
from data.synth_cohort import GeneratorSpec, write_synthetic
from utils.errors import ConfigurationError, SepsisLensError
from utils.pipeline import compare_modalities, run_audit, run_pipeline, sweep_horizons

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_FAILURE = 4


# =====================================================
# ARGUMENTS
# =====================================================

def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand's copy from overwriting a flag given before it
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    flags.add_argument("--out-dir", default=argparse.SUPPRESS, help="override run.out_dir")
    flags.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override run.seed")
    flags.add_argument(
        "--skip-invalid", action="store_true", default=argparse.SUPPRESS, help="keep valid records when some are invalid"
    )
    flags.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS, help="debug logging")
    return flags


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    parser = argparse.ArgumentParser(prog="sepsislens", description="Early severe sepsis prediction pipeline", parents=[flags])
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[flags], help="generate a synthetic cohort")
    synth.add_argument("--n", type=int, default=1000, help="number of encounters")
    synth.add_argument("--prevalence", type=float, default=0.025)
    synth.add_argument("--signal-strength", type=float, default=1.0)
    synth.add_argument("--text-strength", type=float, default=1.0)
    synth.add_argument("--structured-strength", type=float, default=1.0)
    synth.add_argument("--leak-fraction", type=float, default=0.0)
    synth.add_argument("--vasopressor-fraction", type=float, default=0.0)
    synth.add_argument("--out", required=True, help="JSONL cohort file to write")
    synth.add_argument("--embeddings-out", default=None, help="GloVe file (default <out stem>.vectors.txt)")

    sub.add_parser("validate", parents=[flags], help="validate a config")
    sub.add_parser("run", parents=[flags], help="run the full pipeline")
    audit = sub.add_parser("audit", parents=[flags], help="audit the scores of a previous run")
    audit.add_argument("--scores", default=None, help="scores.csv (default <out_dir>/scores.csv)")
    sub.add_parser("compare", parents=[flags], help="compare text, structured and combined models")
    sub.add_parser("sweep", parents=[flags], help="evaluate every horizon in sweep.horizons")
    return parser


def _config_from_args(args) -> dict:
    path = args.config
    overrides = {}
    if hasattr(args, "out_dir"):
        overrides["run.out_dir"] = args.out_dir
    if hasattr(args, "seed"):
        overrides["run.seed"] = args.seed
    if getattr(args, "skip_invalid", False):
        overrides["data.skip_invalid"] = True
    return load_config(path, overrides)


# =====================================================
# COMMANDS
# =====================================================

def cmd_synth(args) -> int:
    spec = GeneratorSpec(
        n_encounters=args.n,
        prevalence=args.prevalence,
        signal_strength=args.signal_strength,
        text_strength=args.text_strength,
        structured_strength=args.structured_strength,
        leak_fraction=args.leak_fraction,
        vasopressor_fraction=args.vasopressor_fraction,
        seed=getattr(args, "seed", 0),
    )
    cohort_path, embeddings_path, truth = write_synthetic(spec, args.out, args.embeddings_out)
    print(f"Wrote {spec.n_encounters} encounters ({len(truth.positive_ids)} positive) to {cohort_path}")
    print(f"Wrote embeddings to {embeddings_path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        config = _config_from_args(args)
    except ConfigurationError as e:
        for issue in e.issues or [str(e)]:
            print(issue, file=sys.stderr)
        return EXIT_VALIDATION

    is_valid, issues = validate_config(config)
    if is_valid:
        print("ok")
        return EXIT_OK
    for issue in issues:
        print(issue, file=sys.stderr)
    return EXIT_VALIDATION


def cmd_run(args) -> int:
    result = run_pipeline(_config_from_args(args))
    print(f"AUC {result.report.auc:.4f} on {result.report.n} encounters ({result.report.positives} positive)")
    for name, path in sorted(result.outputs.items()):
        print(f"  {name}: {path}")
    return EXIT_OK


def cmd_audit(args) -> int:
    for report in run_audit(_config_from_args(args), scores_path=args.scores):
        print(f"{report.audit}: {len(report.flagged)} of {report.audited_count} flagged ({100 * report.flagged_rate:.1f}%)")
    return EXIT_OK


def cmd_compare(args) -> int:
    for modality, report in compare_modalities(_config_from_args(args)).items():
        print(f"{modality}: AUC {report.auc:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    for report in sweep_horizons(_config_from_args(args)):
        print(f"{report.horizon_hours:g}h: AUC {report.auc:.4f} on {report.n} encounters")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "validate": cmd_validate,
    "run": cmd_run,
    "audit": cmd_audit,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "synth" and not getattr(args, "config", None):
        parser.error(f"{args.command} requires --config")
    configure_logging(getattr(args, "verbose", False))
    try:
        return COMMANDS[args.command](args)
    except SepsisLensError as e:
        print(f"error: {e}", file=sys.stderr)
        for issue in getattr(e, "issues", [])[1:]:
            print(f"  {issue}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
