"""``simulate`` command: run one figure preset and write CSV plus JSON metadata."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError
from .experiments import PRESETS, ExperimentSpec, list_presets, run_experiment

EXIT_OK = 0
EXIT_VALIDATION = 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Monte Carlo and closed-form secrecy rates for one figure preset.")
    p.add_argument("--figure", help=f"preset id: {', '.join(PRESETS)}")
    p.add_argument("--trials", type=int, default=50, help="Monte Carlo trials per point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0,
                   help="multiply N_t and T by this factor for quick runs")
    p.add_argument("--full", action="store_true",
                   help="use the complete sweep grid instead of the desk-scale one")
    p.add_argument("--geometries", type=int, default=1,
                   help="independent random geometries averaged per point")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="CSV path (default results/<figure>.csv)")
    p.add_argument("--config", help="JSON file with scenario fields overriding the preset")
    p.add_argument("--list", action="store_true", help="print the presets and exit")
    return p


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    if args.list:
        print(json.dumps(list_presets(), indent=2))
        return EXIT_OK
    try:
        if not args.figure:
            raise ConfigError("--figure is required")
        overrides = {}
        if args.config:
            path = Path(args.config)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            try:
                overrides = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
            if not isinstance(overrides, dict):
                raise ConfigError(f"{path}: expected a JSON object")
        out = args.out or str(Path("results") / f"{args.figure}.csv")
        spec = ExperimentSpec(figure=args.figure, trials=args.trials, seed=args.seed,
                              scale=args.scale, full=args.full, geometries=args.geometries,
                              overrides=overrides, out=out, workers=args.workers)
        table = run_experiment(spec)
    except ConfigError as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"wrote {len(table.rows)} rows to {out} (+ {out}.json)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
