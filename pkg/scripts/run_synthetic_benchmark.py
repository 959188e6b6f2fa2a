"""End-to-end benchmark on a planted-motif synthetic dataset

Generates the dataset, runs the full pipeline on the odd/even subject split
and checks how often each training instance's best detector lands on its
planted motif.
"""

import os
import sys
import time
from dataclasses import replace

import click
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'trajectorylet-learner'))

# Initialize logging BEFORE importing workflow modules
from src.utils.logger import setup_logger
setup_logger(name="", level=os.getenv("LOG_LEVEL", "INFO"))

from src.config.langsmith_config import log_langsmith_info
from src.config.pipeline_config import create_config
from src.harness.protocols import ProtocolSpec, split_dataset
from src.harness.synthetic import SyntheticSpec, generate_synthetic, motif_hit_rate
from src.utils.error_handler import TrajectoryletError
from src.workflow import run_pipeline_sync

MIN_ACCURACY = 0.95
MIN_HIT_RATE = 0.8


@click.command()
@click.option("--seed", default=0, show_default=True, help="Synthetic dataset seed")
@click.option("--classes", default=4, show_default=True)
@click.option("--instances-per-class", default=40, show_default=True)
@click.option("--output-dir", default="workspace", show_default=True)
def main(seed: int, classes: int, instances_per_class: int, output_dir: str):
    """Run the synthetic benchmark; exit 1 when a threshold is missed."""
    spec = replace(SyntheticSpec(), seed=seed, class_count=classes, instances_per_class=instances_per_class)
    config = create_config("synthetic", output_dir=output_dir)

    print("\n" + "=" * 80)
    print("SYNTHETIC BENCHMARK")
    print("=" * 80)
    print(f"\n📋 {spec.class_count} classes x {spec.instances_per_class} instances, seed {spec.seed}")
    print(f"🔬 L={config.trajectorylet_length}, N={config.pool_size}, N_A={config.n_top}, "
          f"M_A={config.per_instance_budget}, K={config.n_clusters}")
    log_langsmith_info()

    start_time = time.time()
    dataset = generate_synthetic(spec)
    train, test = split_dataset(dataset.sequences, ProtocolSpec())
    result = run_pipeline_sync(config, train_sequences=train, test_sequences=test,
                               run_name=f"synthetic_benchmark_seed{spec.seed}")

    report = result["report"]
    top_frames = {iid: kept[0].source_frame for iid, kept in result["mined"].items() if kept}
    hit_rate = motif_hit_rate(top_frames, dataset.motifs, config.trajectorylet_length)

    print("\n" + "=" * 80)
    print("BENCHMARK RESULTS")
    print("=" * 80)
    print(report.to_text(include_timings=True))
    print(f"Top-detector motif hit rate: {hit_rate:.3f} ({len(top_frames)} training instances)")
    print(f"\nTotal execution time: {time.time() - start_time:.2f}s")

    passed = report.accuracy >= MIN_ACCURACY and hit_rate >= MIN_HIT_RATE
    print(f"\n{'✅ PASS' if passed else '❌ FAIL'}: accuracy >= {MIN_ACCURACY} and hit rate >= {MIN_HIT_RATE}")
    sys.exit(0 if passed else 1)


if __name__ == "__main__":
    try:
        main(standalone_mode=False)
    except KeyboardInterrupt:
        print("\n\n⚠️  Benchmark interrupted by user")
        sys.exit(0)
    except TrajectoryletError as e:
        print(f"\n\n❌ Benchmark failed: {e}")
        sys.exit(2)
