#!/usr/bin/env python3
"""Aggregator contrast under a strong Gaussian attack at corruption 0.2.

The geometric median should converge while the plain mean is wrecked by the
attacker noise; coordinate median and trimmed mean sit in between on this
symmetric attack. Produces one run directory per aggregator plus the
comparison CSV.
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
    "attack": {"kind": "gaussian", "sigma": 1000.0},
    "aggregator": {"kind": "geomed"},
    "schedule": {"kind": "uniform", "steps": "auto", "eta": "auto"},
    "oracle": {"kind": "full"},
    "rounds": 200,
    "seed": 2024,
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/aggregator_contrast")
    parser.add_argument("--values", default="geomed,mean,coordinate_median,trimmed_mean")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = Path(tmp) / "config.json"
        cfg_path.write_text(json.dumps(CONFIG))
        argv = ["sweep", "--config", str(cfg_path), "--param", "aggregator", "--values", args.values, "--out", args.out]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        return byzfl_main(argv)


if __name__ == "__main__":
    sys.exit(main())
