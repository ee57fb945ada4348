"""Command-line front end: ``spinrotor run | sweep | validate``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, load_config, resolve
from .runner import (
    EXIT_CONFIG,
    EXIT_INTEGRATION,
    EXIT_OK,
    FAILURES,
    parse_grid,
    run_scenario,
    sweep,
)


def _default_threads():
    env = os.environ.get("SPINROTOR_THREADS")
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"SPINROTOR_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("SPINROTOR_THREADS must be at least 1")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="spinrotor",
                                description="Rigid rotors with embedded spins: scenario runner.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides output.directory)")
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int)

    sw = sub.add_parser("sweep", help="run a scenario over a grid of one parameter")
    sw.add_argument("config")
    sw.add_argument("--param", required=True, help="dotted path, e.g. thermal.T")
    sw.add_argument("--grid", required=True,
                    help="'a,b,c', 'linspace:start:stop:num' or 'geomspace:start:stop:num'")
    sw.add_argument("--out")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--threads", type=int)

    val = sub.add_parser("validate", help="check a config and print its resolved form")
    val.add_argument("config")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        threads = getattr(args, "threads", None)
        if threads is None and args.command != "validate":
            threads = _default_threads()
        if threads is not None and threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command == "validate":
            cfg = load_config(args.config)
            sys.stdout.write(cfg.resolved_text())
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
            res = run_scenario(cfg, args.out, seed=args.seed, threads=threads)
            print(json.dumps({"scenario": res.scenario, "out_dir": res.out_dir,
                              "summary": res.summary}, sort_keys=True))
            return EXIT_OK
        with open(args.config, "rb") as fh:
            doc = json.loads(fh.read().decode("utf-8"))
        resolve(json.loads(json.dumps(doc)))
        grid = parse_grid(args.grid)
        res = sweep(doc, args.param, grid, args.out, seed=args.seed, threads=threads)
        print(json.dumps({"out_dir": res.out_dir, "points": len(res.rows), "failed": res.n_failed}))
        return res.exit_code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FAILURES as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    sys.exit(main())
