#!/usr/bin/env python3
"""Reproduce all benchmark panels into one results directory."""
import argparse
import sys
from pathlib import Path

from lindblad_ft.harness import PANEL_NAMES, reproduce_panel


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--traj", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    for name in PANEL_NAMES:
        out = Path(args.out) / f"panel_{name}"
        reproduce_panel(name, out_dir=out, n_traj=args.traj, seed=args.seed)
        print(f"panel {name} -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
