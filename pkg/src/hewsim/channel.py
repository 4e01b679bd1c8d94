"""Spectrum occupancy, propagation, carrier sensing and reception outcomes.

Everything in here is a pure function of its arguments.  The simulator keeps
the mutable medium state and calls into these helpers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

VALID_WIDTHS = (1, 2, 4, 8)


class ProtocolInvariantError(RuntimeError):
    """A protocol state machine reached a state that must be impossible."""


@dataclass(frozen=True)
class ChannelSet:
    """Contiguous block of 20 MHz basic channels with a marked primary."""

    channels: tuple[int, ...]
    primary: int

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(sorted(set(self.channels))))

    @property
    def width(self) -> int:
        """Width in MHz."""
        return 20 * len(self.channels)

    def __len__(self):
        return len(self.channels)

    def __contains__(self, ch):
        return ch in self.channels

    def violations(self) -> list[str]:
        out = []
        if not self.channels:
            return ["channels empty"]
        if any(c < 0 for c in self.channels):
            out.append("channel index negative")
        if self.channels[-1] - self.channels[0] + 1 != len(self.channels):
            out.append("channels not contiguous")
        if len(self.channels) not in VALID_WIDTHS:
            out.append("width must be 1,2,4,8")
        if self.primary not in self.channels:
            out.append("primary not in channels")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    def aligned_block(self, size: int) -> "ChannelSet":
        """The size-channel block of this set that contains the primary."""
        base = self.channels[0]
        start = base + ((self.primary - base) // size) * size
        return ChannelSet(tuple(range(start, start + size)), self.primary)


@dataclass(frozen=True)
class PropagationModel:
    pl0: float = 40.0  # dB at 1 m
    exponent: float = 3.5
    noise_floor: float = -95.0  # dBm per 20 MHz

    def violations(self) -> list[str]:
        out = []
        if self.exponent < 2:
            out.append("path loss exponent must be >= 2")
        if self.pl0 <= 0:
            out.append("pl0 must be > 0")
        return out


@dataclass(frozen=True)
class AntennaPattern:
    """Omni, or a sector with a flat mainlobe and a flat backlobe."""

    kind: str = "omni"
    azimuth: float = 0.0  # degrees, beam centre
    beamwidth: float = 360.0
    gain: float = 0.0  # mainlobe dB
    backlobe: float = 0.0  # attenuation outside the beam, dB >= 0

    def violations(self) -> list[str]:
        out = []
        if self.kind not in ("omni", "sector"):
            out.append(f"unknown antenna pattern {self.kind!r}")
        if not 0 < self.beamwidth <= 360:
            out.append("beamwidth must be in (0, 360]")
        if self.backlobe < 0:
            out.append("backlobe attenuation must be >= 0")
        return out


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw) if mw > 0 else -math.inf


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def path_loss(d: float, model: PropagationModel) -> float:
    """Log-distance path loss in dB, clamped to the 1 m reference distance."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return model.pl0 + 10.0 * model.exponent * math.log10(max(d, 1.0))


def beam_gain(pattern: AntennaPattern, src: Sequence[float], dst: Sequence[float]) -> float:
    if pattern.kind == "omni":
        return 0.0
    bearing = math.degrees(math.atan2(dst[1] - src[1], dst[0] - src[0]))
    off = abs((bearing - pattern.azimuth + 180.0) % 360.0 - 180.0)
    if off <= pattern.beamwidth / 2.0:
        return pattern.gain
    return -pattern.backlobe


def link_gain_db(src_pos, dst_pos, pattern: AntennaPattern, model: PropagationModel) -> float:
    """Antenna gain minus path loss between two positions (co-located -> 1 m)."""
    d = distance(src_pos, dst_pos)
    pl = path_loss(d if d > 0 else 1.0, model)
    return beam_gain(pattern, src_pos, dst_pos) - pl


@dataclass
class Transmission:
    src: str
    channels: tuple[int, ...]
    start: int
    end: int
    tx_power: float  # total dBm, split equally over `split` basic channels
    position: tuple[float, float]
    beam: AntennaPattern = field(default_factory=AntennaPattern)
    receivers: tuple[str, ...] = ()
    split: int | None = None
    group: object = None  # transmissions sharing a group are spatially multiplexed

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError("transmission must have end > start")
        if self.split is None:
            self.split = len(self.channels)

    @property
    def power_per_channel(self) -> float:
        return self.tx_power - 10.0 * math.log10(self.split)

    def overlaps(self, other: "Transmission") -> bool:
        return self.start < other.end and other.start < self.end


def received_power(tx: Transmission, rx, ch: int, model: PropagationModel) -> float:
    """Power in dBm that `rx` (anything with a .position) sees from tx on basic channel ch."""
    if ch not in tx.channels:
        raise ValueError(f"channel {ch} not used by transmission from {tx.src}")
    return tx.power_per_channel + link_gain_db(tx.position, rx.position, tx.beam, model)


@dataclass(frozen=True)
class CcaVerdict:
    per_channel: Mapping[int, bool]  # True = busy
    overall: bool


def cca_assess(node, channels: ChannelSet, t: int, active: Iterable[Transmission],
               model: PropagationModel, sensed: Iterable[int] | None = None) -> CcaVerdict:
    """Energy-detect CCA on each basic channel of `channels` at time t.

    `node` needs .id, .position and .radio (cca_threshold, str_capable).  The
    overall verdict covers `sensed` (default: every channel of the set).
    """
    threshold = dbm_to_mw(node.radio.cca_threshold)
    energy = {ch: 0.0 for ch in channels.channels}
    own_busy = False
    for tx in active:
        if not tx.start <= t < tx.end:
            continue
        if tx.src == node.id:
            if not node.radio.str_capable:
                own_busy = True
            continue
        for ch in tx.channels:
            if ch in energy:
                energy[ch] += dbm_to_mw(received_power(tx, node, ch, model))
    per = {ch: own_busy or e >= threshold for ch, e in energy.items()}
    look = channels.channels if sensed is None else tuple(sensed)
    return CcaVerdict(per, any(per[ch] for ch in look))


def dbca_assess(channels: ChannelSet, idle_since: Mapping[int, int | None], t: int,
                window: int) -> ChannelSet:
    """Widest aligned block around the primary idle for the last `window` ns."""

    def idle(ch):
        since = idle_since.get(ch)
        return since is not None and since <= t - window

    p_since = idle_since.get(channels.primary)
    if p_since is None or p_since > t:
        raise ProtocolInvariantError(f"primary channel {channels.primary} busy at t={t}")
    best = ChannelSet((channels.primary,), channels.primary)
    for size in VALID_WIDTHS[1:]:
        if size > len(channels):
            break
        block = channels.aligned_block(size)
        if all(idle(ch) for ch in block.channels):
            best = block
        else:
            break
    return best


@dataclass(frozen=True)
class Reception:
    tx: Transmission
    rx: str
    ok: bool


def link_ok(signal_mw: Mapping[int, float], interference_mw: Mapping[int, float],
            loudest_mw: Mapping[int, float], noise_mw: float, capture_db: float) -> bool:
    """Per-channel success rule shared by the pure resolver and the simulator.

    A +inf capture threshold is the pure collision model: any single
    interferer above the noise floor kills the frame.  Otherwise the SINR
    against the summed interference must reach the threshold.
    """
    for ch, s in signal_mw.items():
        if s <= noise_mw:
            return False
        if capture_db == math.inf:
            if loudest_mw.get(ch, 0.0) > noise_mw:
                return False
        elif 10.0 * math.log10(s / (noise_mw + interference_mw.get(ch, 0.0))) < capture_db:
            return False
    return True


def resolve_receptions(ending: Sequence[Transmission], others: Iterable[Transmission],
                       nodes: Mapping[str, object], model: PropagationModel,
                       capture_db: float = math.inf) -> list[Reception]:
    """Outcome of every (transmission, intended receiver) pair in `ending`.

    `others` is every transmission that may have overlapped them (the ending
    ones may be included; self-pairs are skipped).  Overlap is strict interval
    intersection, so back-to-back frames never interfere.
    """
    others = list(others)
    noise = dbm_to_mw(model.noise_floor)
    out = []
    for tx in ending:
        for rx_id in tx.receivers:
            rx = nodes[rx_id]
            signal = {ch: dbm_to_mw(received_power(tx, rx, ch, model)) for ch in tx.channels}
            interference = {ch: 0.0 for ch in tx.channels}
            loudest = {ch: 0.0 for ch in tx.channels}
            ok = True
            for o in others:
                if o is tx or not o.overlaps(tx):
                    continue
                if o.group is not None and o.group == tx.group:
                    continue
                if o.src == rx_id:
                    if not rx.radio.str_capable:
                        ok = False
                    continue
                for ch in o.channels:
                    if ch in interference:
                        p = dbm_to_mw(received_power(o, rx, ch, model))
                        interference[ch] += p
                        loudest[ch] = max(loudest[ch], p)
            ok = ok and link_ok(signal, interference, loudest, noise, capture_db)
            out.append(Reception(tx, rx_id, ok))
    return out
