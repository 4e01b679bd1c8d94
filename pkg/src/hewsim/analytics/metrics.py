"""Raw tallies collected during a run and their reduction to a Report."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field


@dataclass
class NodeTally:
    attempts: int = 0
    successes: int = 0
    collisions: int = 0
    delivered_bits: int = 0
    airtime_ns: int = 0


@dataclass
class MetricsRaw:
    nodes: dict = field(default_factory=dict)  # node id -> NodeTally
    wlan_of: dict = field(default_factory=dict)  # node id -> wlan id
    window_ns: int = 0  # length of the measured window (after warm-up)
    idle_ns: int = 0  # time inside the window with no exchange on air
    exchange_bits: int = 0  # payload bits booked by finished exchanges
    events: dict = field(default_factory=dict)  # event kind -> fired count

    def add_node(self, node_id: str, wlan_id: str):
        self.nodes[node_id] = NodeTally()
        self.wlan_of[node_id] = wlan_id

    def snapshot(self) -> "MetricsRaw":
        return copy.deepcopy(self)

    def violations(self) -> list[str]:
        out = []
        for nid, t in self.nodes.items():
            if t.successes + t.collisions > t.attempts:
                out.append(f"node {nid}: successes + collisions > attempts")
            if t.delivered_bits > 0 and t.successes == 0:
                out.append(f"node {nid}: delivered bits without a success")
        return out


def jain(xs) -> float:
    """(sum x)^2 / (n sum x^2); 1.0 for an empty or all-zero vector."""
    xs = list(xs)
    sq = sum(x * x for x in xs)
    if not xs or sq == 0:
        return 1.0
    return sum(xs) ** 2 / (len(xs) * sq)


@dataclass
class NodeReport:
    node_id: str
    wlan_id: str
    throughput_bps: float
    collision_prob: float
    airtime_share: float
    attempts: int


@dataclass
class WlanReport:
    wlan_id: str
    throughput_bps: float
    collision_prob: float
    airtime_share: float
    jain: float


@dataclass
class Report:
    nodes: dict  # node id -> NodeReport
    wlans: dict  # wlan id -> WlanReport
    throughput_bps: float
    collision_prob: float
    airtime_share: float
    jain: float  # across WLAN throughputs
    duration_ns: int

    def wlan_throughput(self, wlan_id: str) -> float:
        return self.wlans[wlan_id].throughput_bps


def reduce(raw: MetricsRaw, duration: int | None = None) -> Report:
    """Turn tallies into rates.  duration defaults to the measured window."""
    duration = raw.window_ns if duration is None else duration
    if duration <= 0:
        raise ValueError("duration must be > 0")
    sec = duration / 1e9
    nodes = {}
    for nid, t in raw.nodes.items():
        nodes[nid] = NodeReport(
            nid, raw.wlan_of[nid], t.delivered_bits / sec,
            t.collisions / t.attempts if t.attempts else 0.0,
            t.airtime_ns / duration, t.attempts,
        )
    wlans = {}
    for wid in dict.fromkeys(raw.wlan_of.values()):
        members = [nid for nid in raw.nodes if raw.wlan_of[nid] == wid]
        att = sum(raw.nodes[n].attempts for n in members)
        col = sum(raw.nodes[n].collisions for n in members)
        active = [nodes[n].throughput_bps for n in members
                  if raw.nodes[n].attempts or raw.nodes[n].delivered_bits]
        wlans[wid] = WlanReport(
            wid,
            sum(nodes[n].throughput_bps for n in members),
            col / att if att else 0.0,
            sum(raw.nodes[n].airtime_ns for n in members) / duration,
            jain(active),
        )
    att = sum(t.attempts for t in raw.nodes.values())
    col = sum(t.collisions for t in raw.nodes.values())
    return Report(
        nodes, wlans,
        sum(n.throughput_bps for n in nodes.values()),
        col / att if att else 0.0,
        sum(t.airtime_ns for t in raw.nodes.values()) / duration,
        jain(w.throughput_bps for w in wlans.values()),
        duration,
    )
