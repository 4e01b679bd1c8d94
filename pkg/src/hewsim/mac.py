"""Contention state machines, frame airtime and TXOP construction.

Backoff follows the virtual-slot convention: after the medium has been idle
for DIFS the node reaches its first slot boundary, then one boundary per idle
slot.  A countdown interrupted by a busy period earns one extra decrement at
the first boundary after the medium clears again, so a busy period counts as
one slot for everybody who heard it.  A node transmits at the boundary where
its counter is zero.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

from .channel import ChannelSet

V_DET_OFFSET = 1  # deterministic backoff is cw_min/2 - 1


# -- airtime -------------------------------------------------------------------

def airtime(bits: int, rate: float, phy) -> int:
    """PHY header plus payload at `rate`, rounded up to whole ns."""
    return phy.phy_header + math.ceil(bits * 1e9 / rate - 1e-6)


def data_rate(phy, width_mhz: int, streams: int = 1, penalty: float = 1.0) -> float:
    return phy.base_rate_20mhz_1ss * phy.width_factors[width_mhz] * streams * penalty


def control_duration(bits: int, phy) -> int:
    return airtime(bits, phy.control_rate, phy)


def mpdu_bits(phy) -> int:
    return phy.mac_header + phy.mpdu_payload


def data_duration(n_mpdu: int, rate: float, phy, extra_bits: int = 0) -> int:
    return airtime(n_mpdu * mpdu_bits(phy) + extra_bits, rate, phy)


# -- backoff ---------------------------------------------------------------------

class Action(enum.Enum):
    DECREMENT = "decrement"
    FREEZE = "freeze"
    TRANSMIT = "transmit"


@dataclass
class BackoffState:
    counter: int | None = None  # None = not contending
    stage: int = 0
    mode: str = "random"  # random | deterministic
    last_outcome: str = "none"  # success | collision | none
    credit: bool = False  # owed one decrement after a busy interruption
    armed: bool = False  # first boundary since the medium went idle already passed
    cw_min: int = 16
    cw_max: int = 1024

    @property
    def cw(self) -> int:
        return min(self.cw_min << self.stage, self.cw_max)

    @property
    def v_det(self) -> int:
        return self.cw_min // 2 - V_DET_OFFSET


def sample_backoff(state: BackoffState, protocol: str, rng) -> int:
    """Draw a fresh counter; deterministic after an ECA success."""
    if protocol == "csma-eca" and state.last_outcome == "success":
        state.mode = "deterministic"
        state.counter = state.v_det
    else:
        state.mode = "random"
        state.counter = rng.uniform_int(state.cw)
    state.credit = False
    state.armed = False
    return state.counter


def record_outcome(state: BackoffState, success: bool, retry_limit: int) -> bool:
    """Update stage after an attempt.  Returns True when the frame is dropped."""
    if success:
        state.stage = 0
        state.last_outcome = "success"
        return False
    state.last_outcome = "collision"
    state.stage += 1
    if state.stage > retry_limit:
        state.stage = 0
        return True
    return False


def step_slot(state: BackoffState, busy: bool, idle_for: int | None, phy) -> Action:
    """Slot-by-slot reference for one node.

    Called with busy=True when the medium turns busy, and with busy=False at
    each slot boundary, idle_for being how long the medium has been idle.
    """
    if busy or idle_for is None:
        if state.counter is not None:
            state.credit = True
        state.armed = False
        return Action.FREEZE
    if idle_for < phy.difs or state.counter is None:
        return Action.FREEZE
    before = state.counter
    if not state.armed:
        state.armed = True
        if state.credit:
            state.credit = False
            state.counter = max(state.counter - 1, 0)
    elif state.counter > 0:
        state.counter -= 1
    if state.counter == 0:
        return Action.TRANSMIT
    return Action.DECREMENT if state.counter != before else Action.FREEZE


def first_boundary(idle_start: int, now: int, phy) -> int:
    """First slot boundary at or after `now` for a medium idle since idle_start."""
    t1 = idle_start + phy.difs
    if now <= t1:
        return t1
    return t1 + -(-(now - t1) // phy.slot) * phy.slot


def countdown_deadline(state: BackoffState, t_first: int, phy) -> tuple[int, int]:
    """(deadline, counter after the first boundary) for an uninterrupted countdown."""
    c = max(state.counter - (1 if state.credit else 0), 0)
    return t_first + c * phy.slot, c


def countdown_freeze(state: BackoffState, t_first: int, c_first: int, tb: int, phy):
    """Counter after a countdown started at t_first is interrupted at tb."""
    if tb >= t_first:
        state.counter = c_first - (tb - t_first) // phy.slot
        if state.counter < 0:
            raise AssertionError("backoff counter went negative")
    state.credit = True
    state.armed = False


# -- queues ----------------------------------------------------------------------

class TxQueue:
    """Per-destination MPDU backlog.  Saturated queues never run dry."""

    def __init__(self, saturated: bool = False, destinations=()):
        self.saturated = saturated
        self.backlog: dict[str, float] = {d: (math.inf if saturated else 0) for d in destinations}
        self.owed_ack: dict[str, bool] = {}  # peer -> piggyback ACK pending

    def add(self, dst: str, n: int = 1):
        self.backlog[dst] = self.backlog.get(dst, 0) + n

    def has_traffic(self) -> bool:
        return any(v > 0 for v in self.backlog.values())

    def has_traffic_for(self, dst: str) -> bool:
        return self.backlog.get(dst, 0) > 0

    def destinations(self) -> list[str]:
        return [d for d, v in self.backlog.items() if v > 0]

    def available(self, dst: str, limit: int) -> int:
        return int(min(self.backlog.get(dst, 0), limit))

    def take(self, dst: str, n: int):
        if self.backlog.get(dst, 0) < n:
            raise ValueError(f"queue for {dst} holds fewer than {n} MPDUs")
        self.backlog[dst] -= n

    def __len__(self):
        total = sum(self.backlog.values())
        return int(total) if math.isfinite(total) else (1 << 62)


# -- frame exchanges -------------------------------------------------------------

@dataclass(frozen=True)
class Flow:
    src: str
    dst: str
    mpdus: int
    ack_deferred: bool = False  # acknowledged later by piggyback, counted on DATA success

    def involves(self, node: str) -> bool:
        return node == self.src or node == self.dst


@dataclass(frozen=True)
class PhaseTx:
    src: str
    dsts: tuple[str, ...]
    channels: ChannelSet
    flows: frozenset  # flow indices this transmission serves
    split: int | None = None  # basic channels the total power is spread over


@dataclass(frozen=True)
class Phase:
    kind: str  # RTS, RTS', RTS'', CTS, DATA, ACK, NDPA+NDP, REPORT
    duration: int
    txs: tuple[PhaseTx, ...]
    bits: int = 0
    direction: str = "down"  # down | up | both

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"{self.kind} phase must last > 0 ns")


@dataclass
class FrameExchange:
    initiator: str
    phases: list[Phase]
    flows: list[Flow]
    sifs: int
    co_initiator: str | None = None  # STR partner that also contended
    kind: str = "su"
    meta: dict = field(default_factory=dict)

    @property
    def total_airtime(self) -> int:
        """Phases plus the SIFS gaps between them (leading DIFS/backoff excluded)."""
        return sum(p.duration for p in self.phases) + self.sifs * (len(self.phases) - 1)

    def payload_bits(self, phy) -> int:
        return sum(f.mpdus for f in self.flows) * phy.mpdu_payload

    @cached_property
    def participants(self) -> list[str]:
        seen = dict.fromkeys([self.initiator])
        for p in self.phases:
            for tx in p.txs:
                seen[tx.src] = None
                for d in tx.dsts:
                    seen[d] = None
        return list(seen)

    @cached_property
    def channels(self) -> tuple[int, ...]:
        chans = set()
        for p in self.phases:
            for tx in p.txs:
                chans.update(tx.channels.channels)
        return tuple(sorted(chans))

    def violations(self) -> list[str]:
        out = []
        for p in self.phases:
            if p.duration <= 0:
                out.append(f"{p.kind}: non-positive duration")
        if not self.phases:
            out.append("no phases")
        return out


def _rts_cts(src: str, dst: str, chans: ChannelSet, flows: frozenset, phy, rts_kind="RTS",
             rts_bits=None) -> list[Phase]:
    rts_bits = phy.rts_bits if rts_bits is None else rts_bits
    return [
        Phase(rts_kind, control_duration(rts_bits, phy), (PhaseTx(src, (dst,), chans, flows),),
              rts_bits, "down"),
        Phase("CTS", control_duration(phy.cts_bits, phy), (PhaseTx(dst, (src,), chans, flows),),
              phy.cts_bits, "up"),
    ]


def build_txop(src: str, dst: str, queue: TxQueue, phy, channels: ChannelSet, *,
               aggregation: int = 1, streams: int = 1, piggyback: bool = False,
               reverse_traffic: bool = False) -> FrameExchange:
    """RTS / CTS / aggregated DATA / block ACK from src to dst over `channels`.

    With piggyback on, an ACK owed to dst rides in the DATA (ack_bits extra),
    and if dst has traffic back to src the standalone ACK is left out: dst
    will acknowledge inside its own next DATA instead.
    """
    n = queue.available(dst, min(aggregation, phy.max_aggregation))
    if n < 1:
        raise ValueError(f"queue of {src} has nothing for {dst}")
    carries_ack = piggyback and queue.owed_ack.get(dst, False)
    defer_ack = piggyback and reverse_traffic
    flow = Flow(src, dst, n, ack_deferred=defer_ack)
    f = frozenset({0})
    rate = data_rate(phy, channels.width, streams)
    extra = phy.ack_bits if carries_ack else 0
    data_bits = n * mpdu_bits(phy) + extra
    phases = _rts_cts(src, dst, channels, f, phy)
    phases.append(Phase("DATA", data_duration(n, rate, phy, extra), (PhaseTx(src, (dst,), channels, f),),
                        data_bits, "down"))
    if not defer_ack:
        phases.append(Phase("ACK", control_duration(phy.ack_bits, phy),
                            (PhaseTx(dst, (src,), channels, f),), phy.ack_bits, "up"))
    ex = FrameExchange(src, phases, [flow], phy.sifs, kind="su")
    ex.meta["carries_ack_for"] = dst if carries_ack else None
    return ex


def str_pair(a, b, qa: TxQueue, qb: TxQueue, phy, channels: ChannelSet, *, protocol: str,
             simultaneous: bool, aggregation: int = 1, streams: int = 1) -> FrameExchange | None:
    """Joint full-duplex exchange between a and b, or None when not possible.

    Under CSMA/CA this only happens when both countdowns end together.  Under
    CSMA/ECA the partner's schedule is predictable, so b joins a's exchange
    whenever it has traffic for a.
    """
    if not (a.radio.str_capable and b.radio.str_capable):
        return None
    if not (qa.has_traffic_for(b.id) and qb.has_traffic_for(a.id)):
        return None
    if protocol != "csma-eca" and not simultaneous:
        return None
    agg = min(aggregation, phy.max_aggregation)
    na, nb = qa.available(b.id, agg), qb.available(a.id, agg)
    flows = [Flow(a.id, b.id, na), Flow(b.id, a.id, nb)]
    both = frozenset({0, 1})
    rate = data_rate(phy, channels.width, streams)
    rts = control_duration(phy.rts_bits, phy)
    cts = control_duration(phy.cts_bits, phy)
    ack = control_duration(phy.ack_bits, phy)
    if simultaneous:
        phases = [
            Phase("RTS", rts, (PhaseTx(a.id, (b.id,), channels, both),
                               PhaseTx(b.id, (a.id,), channels, both)), phy.rts_bits, "both"),
            Phase("CTS", cts, (PhaseTx(b.id, (a.id,), channels, both),
                               PhaseTx(a.id, (b.id,), channels, both)), phy.cts_bits, "both"),
        ]
    else:
        phases = _rts_cts(a.id, b.id, channels, both, phy)
    phases += [
        Phase("DATA", max(data_duration(na, rate, phy), data_duration(nb, rate, phy)),
              (PhaseTx(a.id, (b.id,), channels, frozenset({0})),
               PhaseTx(b.id, (a.id,), channels, frozenset({1}))),
              max(na, nb) * mpdu_bits(phy), "both"),
        Phase("ACK", ack, (PhaseTx(b.id, (a.id,), channels, frozenset({0})),), phy.ack_bits, "up"),
        Phase("ACK", ack, (PhaseTx(a.id, (b.id,), channels, frozenset({1})),), phy.ack_bits, "down"),
    ]
    return FrameExchange(a.id, phases, flows, phy.sifs, co_initiator=b.id, kind="str")
