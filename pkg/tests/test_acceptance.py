"""End-to-end acceptance checks.  Each test records one PASS/FAIL line that
the conftest prints in the terminal summary."""
import statistics
import subprocess
import sys
import time
from functools import lru_cache
from pathlib import Path

from conftest import record
from hewsim.analytics.oracle import analytic_saturation_throughput
from hewsim.analytics.runner import run, run_csv
from hewsim.scenario import (S, SATURATED, PhyParams, ProtocolConfig, RadioParams, builtin_scenario,
                             single_bss)

SEEDS = (1, 2, 3, 4, 5)


# scenarios used by the criteria, keyed so the determinism check can replay them
def _scenario(key):
    kind, *args = key
    if kind == "oracle":
        width, streams, agg = args
        return single_bss(1, width, ap_antennas=streams, sta_antennas=streams,
                          protocol=ProtocolConfig(aggregation=agg))
    if kind == "fig2":
        return builtin_scenario("fig2-overlap")
    if kind == "contend":
        protocol, n, duration = args
        return single_bss(n, sta_traffic=SATURATED, ap_traffic=0.0, duration=duration,
                          protocol=ProtocolConfig(protocol=protocol))
    if kind == "ofdma":
        return single_bss(8, 160, protocol=ProtocolConfig(ofdma=args[0]))
    if kind == "mumimo":
        return single_bss(16, ap_antennas=16, sta_antennas=4, protocol=ProtocolConfig(mumimo=args[0]))
    if kind == "duplex":
        use_str = args[0]
        return single_bss(1, sta_traffic=SATURATED, radio=RadioParams(str_capable=use_str),
                          protocol=ProtocolConfig(protocol="csma-eca", str=use_str))
    raise KeyError(kind)


@lru_cache(maxsize=None)
def _run(key, seed, trace=False):
    tr = [] if trace else None
    t0 = time.perf_counter()
    report, _ = run(_scenario(key), seed, trace=tr)
    wall = time.perf_counter() - t0
    return report, wall, run_csv(report, seed), tr


def test_1_oracle_equivalence():
    worst_err, worst_wall, bad = 0.0, 0.0, []
    phy = PhyParams()
    for width in (20, 40, 80, 160):
        for streams in (1, 4):
            for agg in (1, 8, 64):
                report, wall, _, _ = _run(("oracle", width, streams, agg), 1)
                ref = analytic_saturation_throughput(phy, width, streams, agg)
                err = abs(report.throughput_bps - ref) / ref
                worst_err, worst_wall = max(worst_err, err), max(worst_wall, wall)
                if err >= 0.01 or wall > 5.0:
                    bad.append(f"{width}MHz/{streams}ss/agg{agg}: err {err:.4%} wall {wall:.2f}s")
    ok = not bad
    record("1 oracle equivalence", ok,
           f"24 configs, worst error {worst_err:.4%} (< 1%), slowest run {worst_wall:.2f}s (<= 5s)"
           + (f"; failing: {bad}" if bad else ""))
    assert ok, bad


def test_2_fig2_ordering():
    lines, ok = [], True
    for seed in SEEDS:
        r = _run(("fig2",), seed)[0]
        a, b, c = (r.wlans[w].throughput_bps for w in "ABC")
        sym = abs(a - b) / a
        good = c < min(a, b) and sym < 0.10
        ok &= good
        lines.append(f"s{seed}: A {a / 1e6:.1f} B {b / 1e6:.1f} C {c / 1e6:.2f} |A-B|/A {sym:.3f}")
    record("2 fig2 ordering", ok, "; ".join(lines))
    assert ok


def test_3_eca_convergence():
    thirty = 30 * S
    late_collisions, ca_probs = [], []
    for seed in SEEDS:
        _, _, _, tr = _run(("contend", "csma-eca", 8, thirty), seed, True)
        late_collisions.append(sum(1 for e in tr if e["event"] == "exchange"
                                   and e["t"] >= thirty // 2 and not e["success"]))
        ca_probs.append(_run(("contend", "csma-ca", 8, thirty), seed)[0].collision_prob)
    ok = all(n == 0 for n in late_collisions) and all(p > 0.05 for p in ca_probs)
    record("3 ECA convergence", ok,
           f"ECA collisions in final 15 s per seed {late_collisions}; "
           f"CA collision prob {[round(p, 3) for p in ca_probs]} (> 0.05)")
    assert ok


def test_4_eca_dominance():
    lines, ok = [], True
    for n in (2, 4, 8, 16):
        eca = [_run(("contend", "csma-eca", n, 10 * S), s)[0].throughput_bps for s in SEEDS]
        ca = [_run(("contend", "csma-ca", n, 10 * S), s)[0].throughput_bps for s in SEEDS]
        wins = sum(e >= c for e, c in zip(eca, ca))
        ok &= wins == len(SEEDS)
        lines.append(f"n={n}: ECA>=CA in {wins}/5 (mean {statistics.fmean(eca) / 1e6:.2f} vs "
                     f"{statistics.fmean(ca) / 1e6:.2f} Mb/s)")
    record("4 ECA dominance", ok, "; ".join(lines))
    assert ok


def test_5_ofdma_monotone():
    means, bits_ok = [], True
    for n in (1, 2, 4, 8):
        vals = []
        for seed in SEEDS:
            report, _, _, tr = _run(("ofdma", n), seed, seed == 1)
            vals.append(report.nodes["ap"].throughput_bps)
            if tr is not None:
                rts = [e["bits"] for e in tr if e["event"] == "tx" and e["kind"] == "RTS'"]
                bits_ok &= bool(rts) and all(b == 120 + 56 * n for b in rts)
        means.append(statistics.fmean(vals))
    mono = all(b >= a for a, b in zip(means, means[1:]))
    gain = means[-1] / means[0]
    ok = mono and gain > 1.2 and bits_ok
    record("5 OFDMA monotonicity", ok,
           f"mean AP Mb/s over N_tx 1,2,4,8: {[round(m / 1e6, 1) for m in means]}; "
           f"8 vs 1 ratio {gain:.3f} (> 1.2); RTS' bits exact: {bits_ok}")
    assert ok


def test_6_mumimo_gain():
    mean = {cfg: statistics.fmean(_run(("mumimo", cfg), s)[0].throughput_bps for s in SEEDS)
            for cfg in ("1:1:1", "16:4:4", "16:16:1")}
    oracle = analytic_saturation_throughput(PhyParams(), 20, 1, ProtocolConfig().aggregation)
    r1 = mean["16:4:4"] / mean["1:1:1"]
    r2 = mean["16:16:1"] / mean["1:1:1"]
    err = abs(mean["1:1:1"] - oracle) / oracle
    ok = r1 >= 4 and r2 >= 4 and err < 0.01
    record("6 MU-MIMO gain", ok,
           f"16:4:4 {r1:.2f}x, 16:16:1 {r2:.2f}x of 1:1:1 (>= 4x); 1:1:1 vs SU oracle {err:.4%} (< 1%)")
    assert ok


def test_7_str_gain():
    ratios = []
    for seed in SEEDS:
        full = _run(("duplex", True), seed)[0].throughput_bps
        half = _run(("duplex", False), seed)[0].throughput_bps
        ratios.append(full / half)
    ok = all(r >= 1.8 for r in ratios)
    record("7 STR gain", ok, f"STR / half-duplex per seed {[round(r, 3) for r in ratios]} (>= 1.8)")
    assert ok


REPLAY = [("oracle", 160, 4, 1), ("fig2",), ("contend", "csma-eca", 8, 30 * S), ("ofdma", 8),
          ("mumimo", "16:4:4"), ("duplex", True)]


def test_8_determinism():
    same = []
    for key in REPLAY:
        first = _run(key, 1)[2]
        again = run_csv(run(_scenario(key), 1)[0], 1)
        same.append(first.encode() == again.encode())
    ok = all(same)
    record("8 determinism", ok, f"{sum(same)}/{len(same)} acceptance runs replayed byte-identical")
    assert ok


INVARIANT_TESTS = [
    "test_channel.py::test_cca_monotone_in_interference",
    "test_channel.py::test_dbca_result_valid_and_monotone",
    "test_multiuser.py::test_allocation_is_partition",
    "test_multiuser.py::test_exchange_airtime_additive",
    "test_multiuser.py::test_rts_prime_affine",
    "test_mac.py::test_counter_never_negative",
    "test_mac.py::test_busy_freezes_counter",
    "test_mac.py::test_lone_node_transmit_probability",
    "test_mac.py::test_txop_structure",
    "test_sim.py::test_conservation",
    "test_sim.py::test_airtime_plus_idle_is_window",
    "test_sim.py::test_eca_converges_short",
    "test_sim.py::test_aggregation_monotone",
    "test_scenario.py::test_render_parse_roundtrip",
    "test_scenario.py::test_builtin_valid_and_pure",
    "test_engine.py",
]


def test_9_invariant_suite():
    here = Path(__file__).parent
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *[str(here / t) for t in INVARIANT_TESTS]],
                          capture_output=True, text=True, cwd=here.parent)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0
    record("9 invariant suite", ok, tail)
    assert ok, proc.stdout[-3000:]
