"""Command line: run, sweep, oracle.

Exit codes: 0 ok, 2 configuration error, 3 protocol invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys

from ..channel import ProtocolInvariantError
from ..scenario import BUILTINS, ConfigError, builtin_scenario, parse_scenario, parse_time
from .oracle import analytic_saturation_throughput
from .runner import AXES, run, run_csv, sweep

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3


def _load(args):
    if args.scenario:
        try:
            with open(args.scenario) as f:
                return parse_scenario(f.read())
        except OSError as exc:
            raise ConfigError(f"cannot read {args.scenario}: {exc}") from None
    if args.builtin:
        return builtin_scenario(args.builtin)
    raise ConfigError("give --scenario FILE or --builtin NAME")


def _duration(args, s):
    from dataclasses import replace
    if args.duration is None:
        return s
    return replace(s, duration=parse_time(args.duration, "--duration"))


def cmd_run(args):
    s = _duration(args, _load(args))
    seed = s.seed if args.seed is None else args.seed
    trace = [] if args.trace else None
    report, _ = run(s, seed, trace=trace)
    if trace is not None:
        with open(args.trace, "w") as f:
            for rec in trace:
                f.write(json.dumps(rec, sort_keys=True) + "\n")
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(run_csv(report, seed))
    print(f"{'wlan':<10} {'throughput Mb/s':>16} {'coll. prob':>10} {'airtime':>8} {'jain':>6}")
    for w in report.wlans.values():
        print(f"{w.wlan_id:<10} {w.throughput_bps / 1e6:16.3f} {w.collision_prob:10.4f} "
              f"{w.airtime_share:8.4f} {w.jain:6.3f}")
    print(f"{'total':<10} {report.throughput_bps / 1e6:16.3f} {report.collision_prob:10.4f} "
          f"{report.airtime_share:8.4f} {report.jain:6.3f}")
    return EXIT_OK


def _split(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def cmd_sweep(args):
    s = _duration(args, _load(args))
    try:
        seeds = [int(k) for k in _split(args.seeds)]
    except ValueError:
        raise ConfigError(f"--seeds must be integers, got {args.seeds!r}") from None
    text = sweep(s, args.axis, _split(args.values), seeds, jobs=args.jobs)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args):
    from ..scenario import PhyParams
    phy = PhyParams()
    if args.width not in phy.width_factors:
        raise ConfigError(f"--width must be one of {sorted(phy.width_factors)}")
    if not 1 <= args.agg <= phy.max_aggregation:
        raise ConfigError(f"--agg must be in 1..{phy.max_aggregation}")
    if args.streams < 1:
        raise ConfigError("--streams must be >= 1")
    bps = analytic_saturation_throughput(phy, args.width, args.streams, args.agg)
    print(f"{bps:.3f}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hewsim", description="Dense WLAN MAC simulator")
    sub = p.add_subparsers(dest="cmd", required=True)

    def source(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--scenario", help="scenario TOML file")
        g.add_argument("--builtin", choices=BUILTINS)
        sp.add_argument("--duration", help="simulated time, e.g. 10s or 500ms")

    r = sub.add_parser("run", help="simulate one scenario")
    source(r)
    r.add_argument("--seed", type=int)
    r.add_argument("--trace", help="write a JSONL event trace here")
    r.add_argument("--csv", help="write per-node/WLAN rows here")
    r.set_defaults(fn=cmd_run)

    sw = sub.add_parser("sweep", help="sweep one parameter over values and seeds")
    source(sw)
    sw.add_argument("--axis", required=True, help=f"one of {', '.join(AXES)} (radio axes accept @WLAN)")
    sw.add_argument("--values", required=True, help="comma separated")
    sw.add_argument("--seeds", default="1", help="comma separated")
    sw.add_argument("--csv", help="output file (default stdout)")
    sw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sw.set_defaults(fn=cmd_sweep)

    o = sub.add_parser("oracle", help="closed-form single-sender saturation throughput (bit/s)")
    o.add_argument("--width", type=int, default=20, help="MHz")
    o.add_argument("--streams", type=int, default=1)
    o.add_argument("--agg", type=int, default=1)
    o.set_defaults(fn=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolInvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
