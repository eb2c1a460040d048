#!/usr/bin/env python3
"""Run the checked-in experiment manifests and drop CSV/JSON artifacts in results/.

Usage: python scripts/run_benchmarks.py [--threads N]
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from prophet_samples.cli import main as cli_main  # noqa: E402

MANIFESTS = [
    ("eval", "eval_instance_a.json", "eval_instance_a.csv"),
    ("dominance", "dominance_corpus.json", "dominance_corpus.csv"),
    ("ordinal-sweep", "ordinal_sweep_10k.json", "ordinal_sweep_10k.csv"),
    ("hardness-verify", "hardness_k400.json", "hardness_k400.json"),
    ("tv-convergence", "tv_convergence.json", "tv_mixture.csv"),
    ("tv-convergence", "tv_binomial_normal.json", "tv_binomial_normal.csv"),
    ("stats-check", "stats_check.json", "stats_check.json"),
]


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--threads", type=int, default=0)
    args = parser.parse_args()

    results = ROOT / "results"
    results.mkdir(exist_ok=True)
    for command, manifest, artifact in MANIFESTS:
        argv = [
            command,
            "--config",
            str(ROOT / "configs" / manifest),
            "--out",
            str(results / artifact),
        ]
        if args.threads:
            argv += ["--threads", str(args.threads)]
        print(f"== {command} {manifest}", file=sys.stderr)
        code = cli_main(argv)
        if code != 0:
            return code
    print(f"artifacts in {results}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
