#!/usr/bin/env python3
"""Local-step sweep: K in {1, 3, 6, 8} at corruption fraction 0.2.

K=1 mirrors single-step baselines; larger K should reach a given gap in
fewer rounds (the per-round factor gamma^K shrinks with K). The comparison
CSV's rounds-to-gap column makes the monotone speedup visible.
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from byzfl.cli import main as byzfl_main

CONFIG = {
    "problem": {"p": 10, "n_users": 50, "samples_per_user": 200, "heterogeneity": 0.0, "loss": "ridge", "reg": 0.5},
    "n_byzantine": 10,
    "attack": {"kind": "gaussian", "sigma": 10.0},
    "aggregator": {"kind": "geomed"},
    "schedule": {"kind": "uniform", "steps": 6, "eta": "auto"},
    "oracle": {"kind": "full"},
    "rounds": 200,
    "seed": 2024,
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/k_sweep")
    parser.add_argument("--values", default="1,3,6,8")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = Path(tmp) / "config.json"
        cfg_path.write_text(json.dumps(CONFIG))
        argv = ["sweep", "--config", str(cfg_path), "--param", "K", "--values", args.values, "--out", args.out]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        return byzfl_main(argv)


if __name__ == "__main__":
    sys.exit(main())
