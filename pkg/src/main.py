"""
Command-line interface for SpecTran

Commands:
    synth       - Generate a synthetic embeddings + interactions benchmark
    preprocess  - Filter and split an interaction log
    train       - Train the configured transform + backbone
    evaluate    - Test-partition HR@K / NDCG@K from a checkpoint
    diagnose    - Covariance spectra and SpecTran attention-weight report
"""

import argparse
import sys
from typing import List, Optional

from src.config.constants import DEFAULT_SPECTRUM_TOP_K, ExitCode
from src.config.run_config import RunConfig, load_run_config
from src.config.settings import get_settings
from src.services.pipeline_service import (
    cmd_diagnose,
    cmd_evaluate,
    cmd_preprocess,
    cmd_synth,
    cmd_train,
)
from src.utils.errors import SpecTranError
from src.utils.logging_config import console, get_logger, setup_logging

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Run configuration (TOML)")
    common.add_argument("--seed", type=int, default=None, help="Override run.seed")
    common.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Fixed-order kernels and sequential evaluation",
    )
    common.add_argument("--out", default=None, help="Output directory (overrides run.output_dir)")

    parser = argparse.ArgumentParser(
        prog="spectran",
        description="SpecTran - spectral adapter for semantic item embeddings in sequential recommenders",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    spectran synth --config configs/default.toml --out runs/synth
    spectran preprocess --config configs/default.toml
    spectran train --config configs/default.toml --seed 7
    spectran evaluate --config configs/default.toml
    spectran diagnose --config configs/default.toml --checkpoint runs/default/checkpoint.bin --weights
        """
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    subparsers.add_parser("synth", parents=[common], help="Generate a synthetic benchmark")
    subparsers.add_parser("preprocess", parents=[common], help="Filter and split interactions")
    subparsers.add_parser("train", parents=[common], help="Train a model")

    evaluate_parser = subparsers.add_parser("evaluate", parents=[common], help="Evaluate a checkpoint")
    evaluate_parser.add_argument("--checkpoint", default=None, help="Checkpoint (default: <out>/checkpoint.bin)")

    diagnose_parser = subparsers.add_parser("diagnose", parents=[common], help="Spectral diagnostics")
    diagnose_parser.add_argument("--checkpoint", default=None, help="Checkpoint whose embeddings to analyse")
    diagnose_parser.add_argument("--weights", action="store_true", help="Write the SpecTran weight report")
    diagnose_parser.add_argument("--top-k", type=int, default=DEFAULT_SPECTRUM_TOP_K, help="Components to report")
    diagnose_parser.add_argument("--dataset-name", default=None, help="Label for the weight report row")

    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_run_config(args.config)
    return config.with_overrides(seed=args.seed, deterministic=args.deterministic, output_dir=args.out)


def run(args: argparse.Namespace) -> None:
    config = _resolve_config(args)
    if args.command == "synth":
        cmd_synth(config)
    elif args.command == "preprocess":
        cmd_preprocess(config)
    elif args.command == "train":
        report = cmd_train(config)
        console.print(f"trainable params: {report.trainable_params}  epochs: {report.epochs}")
    elif args.command == "evaluate":
        row = cmd_evaluate(config, args.checkpoint)
        console.print(
            f"HR@10 {row.hr10:.4f}  HR@20 {row.hr20:.4f}  NDCG@10 {row.ndcg10:.4f}  "
            f"NDCG@20 {row.ndcg20:.4f}  users {row.users}"
        )
    elif args.command == "diagnose":
        cmd_diagnose(config, args.checkpoint, args.weights, args.top_k, args.dataset_name)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return int(ExitCode.USAGE)

    settings = get_settings()
    setup_logging(settings.log_level, settings.log_file, settings.log_format, settings.use_rich)

    try:
        run(args)
    except SpecTranError as e:
        logger.error(f"COMMAND_FAILED | command={args.command} | type={type(e).__name__} | message={e}")
        console.print(f"error: {e}", style="red", markup=False)
        return int(e.exit_code)
    return int(ExitCode.SUCCESS)


if __name__ == "__main__":
    sys.exit(main())
