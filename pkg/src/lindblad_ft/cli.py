"""Command-line entry point: simulate, panel, validate."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (PANEL_NAMES, ConfigError, build_model, config_hash,
                      load_config, panel_config, reproduce_panel, run_experiment,
                      serialize_config, validate_model)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--traj", type=int, default=None, help="override run.n_traj")
    p.add_argument("--seed", type=int, default=None, help="override run.seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lindblad-ft",
        description="Fluctuation-theorem checks for Lindblad master equations")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configured experiment")
    sim.add_argument("--config", required=True, help="path to the JSON config")
    sim.add_argument("--out", required=True, help="output directory")
    _add_common(sim)
    sim.add_argument("--engines", choices=("exact", "qmc", "both"), default=None,
                     help="override run.engines")

    pan = sub.add_parser("panel", help="reproduce a benchmark panel")
    pan.add_argument("--name", required=True, choices=PANEL_NAMES)
    pan.add_argument("--out", required=True, help="output directory")
    _add_common(pan)

    val = sub.add_parser("validate", help="check a config file and its model")
    val.add_argument("--config", required=True, help="path to the JSON config")
    return parser


def _load(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        raise SystemExit(2)
    return load_config(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = _load(args.config)
            overrides = {}
            if args.traj is not None:
                overrides["n_traj"] = args.traj
            if args.seed is not None:
                overrides["seed"] = args.seed
            if args.engines is not None:
                overrides["engines"] = args.engines
            if overrides:
                raw = json.loads(serialize_config(cfg))
                raw["run"].update(overrides)
                cfg = load_config(json.dumps(raw))
            res = run_experiment(cfg, args.out)
            print(f"wrote {args.out} (config {config_hash(cfg)[:12]}, "
                  f"{len(res.times)} output times)")
        elif args.command == "panel":
            res = reproduce_panel(args.name, out_dir=args.out, n_traj=args.traj,
                                  seed=args.seed)
            print(f"panel {args.name}: wrote {args.out} ({len(res.times)} output times)")
        elif args.command == "validate":
            cfg = _load(args.config)
            report = validate_model(build_model(cfg),
                                    times=(0.0, 0.5 * cfg.model.t_f, cfg.model.t_f))
            print(serialize_config(cfg))
            for name, info in report.as_dict().items():
                status = "pass" if info["passed"] else "FAIL"
                print(f"{status}: {name} ({info['detail']})")
            if not report.ok:
                return 1
            print(f"config ok (hash {config_hash(cfg)[:12]})")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
