"""Single runs, parameter sweeps and CSV emission."""
from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from ..scenario import ConfigError, InvariantViolation, Node, map_nodes, validate, with_protocol
from ..sim import Simulation
from .metrics import reduce

CSV_COLUMNS = ["axis_value", "seed", "wlan_id", "node_id", "throughput_bps", "collision_prob",
               "airtime_share", "jain"]
AXES = ("ofdma", "mumimo", "cca_threshold", "tx_power", "aggregation", "n_stas", "protocol")


def run(scenario, seed: int | None = None, t_end: int | None = None, trace: list | None = None, **kw):
    """Simulate once; returns (Report, MetricsRaw)."""
    problems = validate(scenario)
    if problems:
        raise InvariantViolation(problems)
    raw = Simulation(scenario, seed, trace=trace, **kw).run(t_end)
    return reduce(raw), raw


# -- axes --------------------------------------------------------------------------

def _off_or_int(v: str):
    return None if v in ("off", "none") else int(v)


def _resize(scenario, n: int):
    """Every WLAN gets n STAs cloned from its first STA, spread on a circle."""
    if n < 0:
        raise ConfigError("n_stas must be >= 0")
    wlans = []
    for w in scenario.wlans:
        tmpl = w.stas[0] if w.stas else Node(f"{w.id}.sta", "STA", (w.ap.position[0] + 3.0, w.ap.position[1]),
                                             w.ap.radio)
        radius = math.dist(tmpl.position, w.ap.position) or 3.0
        stas = tuple(
            replace(tmpl, id=f"{w.id}.sta{i + 1}",
                    position=(round(w.ap.position[0] + radius * math.cos(2 * math.pi * i / n), 6),
                              round(w.ap.position[1] + radius * math.sin(2 * math.pi * i / n), 6)))
            for i in range(n)
        )
        wlans.append(replace(w, stas=stas))
    return replace(scenario, wlans=tuple(wlans))


def apply_axis(scenario, axis: str, value: str):
    """Scenario with one sweep parameter set.  Radio axes take an optional @WLAN suffix."""
    key, _, target = axis.partition("@")
    target = target or None
    if target is not None and key not in ("cca_threshold", "tx_power"):
        raise ConfigError(f"axis {key} does not take a @WLAN target")
    if target is not None and target not in {w.id for w in scenario.wlans}:
        raise ConfigError(f"axis {axis}: no WLAN named {target}")
    try:
        if key == "ofdma":
            return with_protocol(scenario, ofdma=_off_or_int(value))
        if key == "mumimo":
            return with_protocol(scenario, mumimo=None if value in ("off", "none") else value)
        if key == "aggregation":
            return with_protocol(scenario, aggregation=int(value))
        if key == "protocol":
            return with_protocol(scenario, protocol=value)
        if key == "n_stas":
            return _resize(scenario, int(value))
        if key in ("cca_threshold", "tx_power"):
            dbm = float(str(value).lower().removesuffix("dbm"))
            return map_nodes(scenario, lambda n: replace(n, radio=replace(n.radio, **{key: dbm})), target)
    except ValueError as exc:
        raise ConfigError(f"axis {axis}: bad value {value!r} ({exc})") from None
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}")


# -- CSV ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.6f}"


def report_rows(report, axis_value: str, seed) -> list[list]:
    rows = []
    for n in report.nodes.values():
        wj = report.wlans[n.wlan_id].jain
        rows.append([axis_value, seed, n.wlan_id, n.node_id, n.throughput_bps, n.collision_prob,
                     n.airtime_share, wj])
    for w in report.wlans.values():
        rows.append([axis_value, seed, w.wlan_id, "*", w.throughput_bps, w.collision_prob,
                     w.airtime_share, w.jain])
    rows.append([axis_value, seed, "*", "*", report.throughput_bps, report.collision_prob,
                 report.airtime_share, report.jain])
    return rows


def _sort_key(order):
    kind = {"mean": 1, "stddev": 2}

    def key(row):
        seed = row[1]
        k = kind.get(seed, 0) if isinstance(seed, str) else 0
        return (order[row[0]], k, seed if k == 0 else 0, row[2] == "*", row[2], row[3] == "*", row[3])
    return key


def to_csv(rows, values) -> str:
    order = {v: i for i, v in enumerate(values)}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(rows, key=_sort_key(order)):
        w.writerow([r[0], r[1], r[2], r[3]] + [_fmt(x) for x in r[4:]])
    return buf.getvalue()


def summary_rows(rows) -> list[list]:
    """mean and stddev (sample, 0 for a single seed) over seeds per (value, wlan, node)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r[0], r[2], r[3]), []).append(r[4:])
    out = []
    for (v, wid, nid), vals in groups.items():
        cols = list(zip(*vals))
        out.append([v, "mean", wid, nid] + [statistics.fmean(c) for c in cols])
        out.append([v, "stddev", wid, nid] + [statistics.stdev(c) if len(c) > 1 else 0.0 for c in cols])
    return out


def _cell(args):
    scenario, axis, value, seed, t_end = args
    s = apply_axis(scenario, axis, value)
    report, _ = run(s, seed, t_end)
    return report_rows(report, value, seed)


def sweep(scenario, axis: str, values, seeds, t_end: int | None = None, jobs: int = 1) -> str:
    """CSV with one block of rows per (value, seed) plus mean/stddev rows per value."""
    values = [str(v) for v in values]
    if not values or not seeds:
        raise ConfigError("sweep needs at least one value and one seed")
    for v in values:  # fail fast on bad axis or value
        problems = validate(apply_axis(scenario, axis, v))
        if problems:
            raise InvariantViolation(problems)
    cells = [(scenario, axis, v, int(k), t_end) for v in values for k in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_cell, cells))
    else:
        parts = [_cell(c) for c in cells]
    rows = [r for p in parts for r in p]
    return to_csv(rows + summary_rows(rows), values)


def run_csv(report, seed) -> str:
    rows = report_rows(report, "-", seed)
    return to_csv(rows, ["-"])
