#!/usr/bin/env python
"""
Run the synthetic benchmark suite for SpecTran

For each seed: generate the planted-spectrum benchmark, split it, then train
and evaluate every transform. Reports the top-10 covariance mass of the
projected semantic embeddings (collapse check) and the test NDCG@20 ordering.
"""

import argparse
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config.constants import DEFAULT_SPECTRUM_TOP_K, TransformKind  # noqa: E402
from src.config.run_config import RunConfig, load_run_config  # noqa: E402
from src.config.settings import get_settings  # noqa: E402
from src.services.pipeline_service import PipelineService  # noqa: E402
from src.utils.errors import SpecTranError  # noqa: E402
from src.utils.file_handlers import write_json  # noqa: E402
from src.utils.logging_config import setup_logging  # noqa: E402

TRANSFORMS = [
    TransformKind.NONE,
    TransformKind.MLP,
    TransformKind.SVD_TRUNCATE,
    TransformKind.SVD_IDENTITY,
    TransformKind.SPECTRAN,
]
COLLAPSE_MASS = 0.9


def _variant(base: RunConfig, seed: int, transform: TransformKind, data_dir: Path, out_dir: Path) -> RunConfig:
    run = base.run.model_copy(update={
        "seed": seed,
        "output_dir": out_dir,
        "embeddings": data_dir / "embeddings.emb1",
        "interactions": data_dir / "interactions.tsv",
    })
    model = base.model.model_copy(update={"transform": transform})
    return base.model_copy(update={"run": run, "model": model})


def run_seed(base: RunConfig, seed: int, root: Path) -> Dict[str, Any]:
    data_dir = root / f"seed_{seed}" / "data"
    synth_cfg = _variant(base, seed, TransformKind.NONE, data_dir, data_dir)
    PipelineService(synth_cfg).synth()

    split_dir = root / f"seed_{seed}" / "splits"
    PipelineService(_variant(base, seed, TransformKind.NONE, data_dir, split_dir)).preprocess()

    results: Dict[str, Any] = {}
    for transform in TRANSFORMS:
        out_dir = root / f"seed_{seed}" / transform.value
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "splits.bin").write_bytes((split_dir / "splits.bin").read_bytes())

        service = PipelineService(_variant(base, seed, transform, data_dir, out_dir))
        start_time = time.time()
        try:
            trained = service.train()
            metrics = service.evaluate()
            diagnosis = service.diagnose(checkpoint=out_dir / "checkpoint.bin", top_k=DEFAULT_SPECTRUM_TOP_K)
        except SpecTranError as e:
            results[transform.value] = {"status": "error", "error": str(e)}
            print(f"  {transform.value:<13} error: {e}")
            continue

        projected = diagnosis["spectra"].get("projected", {})
        fractions = projected.get("fractions", [])
        results[transform.value] = {
            "status": "success",
            "ndcg20": metrics.ndcg20,
            "hr20": metrics.hr20,
            "trainable_params": trained.efficiency.trainable_params,
            "adapter_params": trained.efficiency.adapter_params,
            "top10_mass": fractions[-1] if fractions else None,
            "epochs": trained.epochs,
            "seconds": time.time() - start_time,
        }
        print(
            f"  {transform.value:<13} NDCG@20={metrics.ndcg20:.4f}  HR@20={metrics.hr20:.4f}  "
            f"params={trained.efficiency.trainable_params}  top10_mass={results[transform.value]['top10_mass']}"
        )
    return results


def summarize(per_seed: Dict[int, Dict[str, Any]]) -> Dict[str, Any]:
    collapse_ok: List[bool] = []
    ordering_wins = 0
    for results in per_seed.values():
        mlp = results.get(TransformKind.MLP.value, {})
        spectran = results.get(TransformKind.SPECTRAN.value, {})
        base = results.get(TransformKind.NONE.value, {})
        if all(r.get("status") == "success" for r in (mlp, spectran, base)):
            collapse_ok.append(
                mlp["top10_mass"] >= COLLAPSE_MASS and spectran["top10_mass"] < mlp["top10_mass"]
            )
            if spectran["ndcg20"] >= mlp["ndcg20"] and spectran["ndcg20"] >= base["ndcg20"]:
                ordering_wins += 1
    return {
        "seeds": len(per_seed),
        "collapse_reproduced_all_seeds": bool(collapse_ok) and all(collapse_ok),
        "spectran_best_seeds": ordering_wins,
    }


def run_benchmark(config_path: str, seeds: List[int], out: Path) -> None:
    """Run the benchmark suite"""
    settings = get_settings()
    setup_logging("WARNING", settings.log_file, settings.log_format, settings.use_rich)
    base = load_run_config(config_path)

    print("=" * 70)
    print("SpecTran Synthetic Benchmark")
    print("=" * 70)
    print(f"Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print(f"Seeds: {seeds}  d={base.model.d}  items={base.synth.n_items}  rank={base.synth.rank}")
    print()

    total_start = time.time()
    per_seed: Dict[int, Dict[str, Any]] = {}
    for seed in seeds:
        print(f"Seed {seed}")
        print("-" * 50)
        per_seed[seed] = run_seed(base, seed, out)
        print()

    summary = summarize(per_seed)
    print("=" * 70)
    print(f"Collapse reproduced on every seed: {summary['collapse_reproduced_all_seeds']}")
    print(f"SpecTran best on {summary['spectran_best_seeds']}/{summary['seeds']} seeds")
    print(f"Total time: {time.time() - total_start:.1f}s")

    output_path = write_json(out / "benchmark.json", {
        "timestamp": datetime.now().isoformat(),
        "config": base.echo(),
        "results": {str(seed): results for seed, results in per_seed.items()},
        "summary": summary,
    })
    print(f"\nResults saved to: {output_path}")
    print("=" * 70)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="SpecTran synthetic benchmark")
    parser.add_argument("--config", default="configs/default.toml", help="Base run configuration")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4], help="Run seeds")
    parser.add_argument("--out", default="runs/benchmark", help="Output directory")
    args = parser.parse_args()
    run_benchmark(args.config, args.seeds, Path(args.out))
