"""Command line front end.

Exit codes: 0 success, 2 invalid configuration, 3 failure during the run.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError, ValidationError
from .config import load_config
from .runner import bench, run_simulation, sweep

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spikearray", description="Event-driven neuromorphic array emulator")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run a configuration and write raster/stats"),
                        ("validate", "check a configuration and report every error"),
                        ("bench", "measure event throughput"),
                        ("sweep", "crossbar precision sweep")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="YAML or JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out-dir", default="out", help="directory for output files (default: out)")
        p.add_argument("--ticks", type=int, default=None, help="override the run length")
        if name == "run":
            p.add_argument("--workers", type=int, default=None, help="parallel trial workers")
        if name == "bench":
            p.add_argument("--repeats", type=int, default=3)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok ({cfg.engine} engine)")
            return EXIT_OK
        if args.command == "run":
            art = run_simulation(cfg, args.out_dir, seed=args.seed, ticks=args.ticks, workers=args.workers)
            tot = art.stats["totals"]
            print(f"wrote {len(art.rasters)} raster file(s) and {art.stats_path}; "
                  f"{tot['synaptic_events']} synaptic events, {tot['spikes']} spikes, "
                  f"{tot['energy']['total_uJ']:.6g} uJ")
        elif args.command == "bench":
            print(json.dumps(bench(cfg, args.repeats, seed=args.seed, ticks=args.ticks), indent=2))
        elif args.command == "sweep":
            records, path = sweep(cfg, args.out_dir, seed=args.seed)
            for r in records:
                print(f"levels={r['levels']:4d} mean_rel_error={r['mean_rel_error']:.6f}")
            print(f"wrote {path}")
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - any engine failure maps to the runtime exit code
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
