"""OFDMA allocation, extended RTS frames and DL/UL MU-MIMO exchanges."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .engine import RandomStream
from .mac import (FrameExchange, Flow, Phase, PhaseTx, control_duration, data_duration,
                  data_rate, mpdu_bits)

RTS_BASE_BITS = 120
RTS_PER_USER_BITS = 56


def rts_prime_bits(n_tx: int) -> int:
    """Length of the extended RTS announcing n_tx subchannels (or group members)."""
    if n_tx < 1:
        raise ValueError("n_tx must be >= 1")
    return RTS_BASE_BITS + RTS_PER_USER_BITS * n_tx


# -- OFDMA -----------------------------------------------------------------------

@dataclass(frozen=True)
class OfdmaAllocation:
    """Subchannel -> STA.  Subchannels are equal, contiguous, aligned blocks."""

    available: ChannelSet
    subchannels: tuple[tuple[ChannelSet, str], ...]  # in frequency order

    @property
    def n_tx(self) -> int:
        return len(self.subchannels)

    def stas(self) -> list[str]:
        return list(dict.fromkeys(sta for _, sta in self.subchannels))

    def blocks_of(self, sta: str) -> list[ChannelSet]:
        return [b for b, s in self.subchannels if s == sta]

    def violations(self) -> list[str]:
        out = []
        if not self.subchannels:
            out.append("no subchannels allocated")
        used = [ch for b, _ in self.subchannels for ch in b.channels]
        if len(used) != len(set(used)):
            out.append("subchannel assigned twice")
        if not set(used) <= set(self.available.channels):
            out.append("subchannel outside the available set")
        return out


def split_blocks(available: ChannelSet, n: int) -> list[ChannelSet]:
    """Cut the available set into n equal contiguous blocks (n a power of two)."""
    size = len(available) // n
    if size < 1 or size * n != len(available):
        raise ValueError(f"cannot split {len(available)} channels into {n} blocks")
    chans = available.channels
    out = []
    for i in range(n):
        block = chans[i * size:(i + 1) * size]
        prim = available.primary if available.primary in block else block[0]
        out.append(ChannelSet(block, prim))
    return out


def ofdma_allocate(available: ChannelSet, candidates, cap: int | None = None,
                   last_served: str | None = None, ranks: dict | None = None):
    """Round-robin subchannel allocation.

    Blocks are handed out cyclically, starting with the first candidate after
    `last_served` (by rank, default = position in `candidates`).  With fewer
    candidates than blocks the earliest candidates get one extra each.
    Returns (allocation, new last_served).
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates for OFDMA allocation")
    n = len(available) if cap is None else min(cap, len(available))
    blocks = split_blocks(available, n)
    ranks = ranks or {c: i for i, c in enumerate(candidates)}
    start = 0
    if last_served is not None and last_served in ranks:
        r = ranks[last_served]
        later = [i for i, c in enumerate(candidates) if ranks[c] > r]
        start = later[0] if later else 0
    order = candidates[start:] + candidates[:start]
    subs = tuple((b, order[i % len(order)]) for i, b in enumerate(blocks))
    served = order[:min(len(order), len(blocks))]
    return OfdmaAllocation(available, subs), served[-1]


def build_ofdma_exchange(ap: str, alloc: OfdmaAllocation, mpdus: dict, phy, streams=None) -> FrameExchange:
    """RTS' over the whole set, per-subchannel CTS, parallel DATA, parallel ACKs."""
    bad = alloc.violations()
    if bad:
        raise ValueError("; ".join(bad))
    streams = streams or {}
    stas = alloc.stas()
    flows = [Flow(ap, s, mpdus[s]) for s in stas]
    idx = {s: i for i, s in enumerate(stas)}
    full = alloc.available
    split = len(full)
    bits = rts_prime_bits(alloc.n_tx)
    phases = [Phase("RTS'", control_duration(bits, phy),
                    (PhaseTx(ap, tuple(stas), full, frozenset(idx.values()), split),), bits, "down")]
    cts = control_duration(phy.cts_bits, phy)
    phases.append(Phase("CTS", cts, tuple(
        PhaseTx(s, (ap,), b, frozenset({idx[s]})) for b, s in alloc.subchannels), phy.cts_bits, "up"))
    durs = []
    for s in stas:
        rate = sum(data_rate(phy, b.width, streams.get(s, 1)) for b in alloc.blocks_of(s))
        durs.append(data_duration(mpdus[s], rate, phy))
    phases.append(Phase("DATA", max(durs), tuple(
        PhaseTx(ap, (s,), b, frozenset({idx[s]}), split) for b, s in alloc.subchannels),
        max(mpdus[s] for s in stas) * mpdu_bits(phy), "down"))
    phases.append(Phase("ACK", control_duration(phy.ack_bits, phy), tuple(
        PhaseTx(s, (ap,), b, frozenset({idx[s]})) for b, s in alloc.subchannels), phy.ack_bits, "up"))
    ex = FrameExchange(ap, phases, flows, phy.sifs, kind="ofdma")
    ex.meta["n_tx"] = alloc.n_tx
    return ex


# -- MU-MIMO ---------------------------------------------------------------------

_CFG = re.compile(r"^\s*(\d+)\s*:\s*(\d+)\s*:\s*(\d+)\s*$")


@dataclass(frozen=True)
class MumimoConfig:
    x: int  # total spatial streams
    y: int  # destinations
    z: int  # streams per destination

    @classmethod
    def parse(cls, text: str) -> "MumimoConfig":
        m = _CFG.match(text)
        if not m:
            raise ValueError(f"MU-MIMO config {text!r} is not x:y:z")
        return cls(*map(int, m.groups()))

    def violations(self, ap_antennas: int | None = None, sta_antennas=()) -> list[str]:
        out = []
        if min(self.x, self.y, self.z) < 1:
            out.append("x, y, z must be >= 1")
        if self.x != self.y * self.z:
            out.append(f"x={self.x} differs from y*z={self.y * self.z}")
        if ap_antennas is not None and self.x > ap_antennas:
            out.append(f"x={self.x} exceeds the AP's {ap_antennas} antennas")
        for a in sta_antennas:
            if self.z > a:
                out.append(f"z={self.z} exceeds a destination's {a} antennas")
                break
        return out

    def __str__(self):
        return f"{self.x}:{self.y}:{self.z}"


@dataclass(frozen=True)
class CsiRecord:
    sta: str
    timestamp: int  # ns of the sounding that produced it
    quality: float  # linear SNR, same for every stream
    signature: tuple[float, ...]  # unit vector, one entry per AP antenna


def make_signature(seed: int, sta: str, dim: int) -> tuple[float, ...]:
    """Synthetic spatial signature: a seeded isotropic unit vector."""
    rng = np.random.default_rng(RandomStream(seed, sta, "csi").next_u64())
    v = rng.standard_normal(dim)
    return tuple(float(x) for x in v / np.linalg.norm(v))


def report_duration(phy) -> int:
    return control_duration(phy.report_bits, phy)


def sounding_overhead(n_stas: int, phy) -> int:
    """Announcement + NDP, then one SIFS-separated feedback report per STA."""
    if n_stas < 1:
        raise ValueError("n_stas must be >= 1")
    return phy.ndpa + phy.ndp + n_stas * (phy.sifs + report_duration(phy))


def sounding_phases(ap: str, stas, channels: ChannelSet, phy) -> list[Phase]:
    """Sounding as phases; durations plus the SIFS gaps between them sum to sounding_overhead."""
    stas = tuple(stas)
    phases = [Phase("NDPA+NDP", phy.ndpa + phy.ndp, (PhaseTx(ap, stas, channels, frozenset()),), 0, "down")]
    for s in stas:
        phases.append(Phase("REPORT", report_duration(phy), (PhaseTx(s, (ap,), channels, frozenset()),),
                            phy.report_bits, "up"))
    return phases


def select_group(csi, y: int, now: int | None = None, interval: float = math.inf) -> list[str]:
    """Greedy low-correlation grouping.

    Seed with the best channel, then keep adding the STA whose largest
    |correlation| with the chosen ones is smallest; ties go to the quality
    closest to the group mean, then to the smaller id.
    """
    fresh = [r for r in csi if now is None or now - r.timestamp < interval]
    if y < 1 or len(fresh) < y:
        raise ValueError(f"need {y} fresh CSI records, have {len(fresh)}")
    sig = {r.sta: np.asarray(r.signature) for r in fresh}
    chosen = [max(fresh, key=lambda r: (r.quality, _neg_id(r.sta))).sta]
    qual = {r.sta: r.quality for r in fresh}
    rest = [r.sta for r in fresh if r.sta != chosen[0]]
    while len(chosen) < y:
        mean_q = sum(qual[s] for s in chosen) / len(chosen)

        def key(s):
            corr = max(abs(float(sig[s] @ sig[c])) for c in chosen)
            return (round(corr, 12), abs(qual[s] - mean_q), s)

        best = min(rest, key=key)
        chosen.append(best)
        rest.remove(best)
    return chosen


def _neg_id(s: str):
    # max() picks the largest; invert the id so the smaller id wins ties
    return tuple(-ord(c) for c in s)


def build_dl_mumimo(ap: str, cfg: MumimoConfig, group, mpdus: dict, phy, channels: ChannelSet, *,
                    penalty: float = 1.0, ap_antennas: int | None = None, sta_antennas: dict | None = None,
                    sound=None) -> FrameExchange:
    """Optional sounding, RTS/CTS with the first member, one multi-user DATA, y sequential ACKs."""
    group = list(group)
    ants = [sta_antennas[s] for s in group] if sta_antennas else ()
    bad = cfg.violations(ap_antennas, ants)
    if len(group) != cfg.y:
        bad.append(f"group has {len(group)} STAs, config needs {cfg.y}")
    if bad:
        raise ValueError("; ".join(bad))
    flows = [Flow(ap, s, mpdus[s]) for s in group]
    all_f = frozenset(range(len(group)))
    phases = sounding_phases(ap, sound, channels, phy) if sound else []
    phases += [
        Phase("RTS", control_duration(phy.rts_bits, phy),
              (PhaseTx(ap, (group[0],), channels, all_f),), phy.rts_bits, "down"),
        Phase("CTS", control_duration(phy.cts_bits, phy),
              (PhaseTx(group[0], (ap,), channels, all_f),), phy.cts_bits, "up"),
    ]
    rate = data_rate(phy, channels.width, cfg.z, penalty ** (cfg.x - 1))
    phases.append(Phase("DATA", max(data_duration(mpdus[s], rate, phy) for s in group),
                        (PhaseTx(ap, tuple(group), channels, all_f),),
                        max(mpdus[s] for s in group) * mpdu_bits(phy), "down"))
    ack = control_duration(phy.ack_bits, phy)
    for i, s in enumerate(group):
        phases.append(Phase("ACK", ack, (PhaseTx(s, (ap,), channels, frozenset({i})),), phy.ack_bits, "up"))
    ex = FrameExchange(ap, phases, flows, phy.sifs, kind="dl-mumimo")
    ex.meta["config"] = str(cfg)
    ex.meta["sounded"] = len(sound) if sound else 0
    return ex


def build_ul_mumimo(ap: str, group, mpdus: dict, phy, channels: ChannelSet, *,
                    report_age: dict | None = None, staleness: float = math.inf,
                    penalty: float = 1.0) -> FrameExchange | None:
    """RTS'' naming the group, simultaneous uplink DATA, AP ACKs one by one.

    Returns None when the AP's buffer knowledge of any member is older than
    `staleness` ns.  Members with nothing queued send padding.
    """
    group = list(group)
    if not group:
        raise ValueError("empty uplink group")
    if report_age is not None and any(report_age.get(s, math.inf) > staleness for s in group):
        return None
    flows = [Flow(s, ap, mpdus.get(s, 0)) for s in group]
    all_f = frozenset(range(len(group)))
    bits = rts_prime_bits(len(group))
    phases = [Phase("RTS''", control_duration(bits, phy),
                    (PhaseTx(ap, tuple(group), channels, all_f),), bits, "down")]
    rate = data_rate(phy, channels.width, 1, penalty ** (len(group) - 1))
    longest = max(max(mpdus.get(s, 0) for s in group), 1)
    phases.append(Phase("DATA", data_duration(longest, rate, phy), tuple(
        PhaseTx(s, (ap,), channels, frozenset({i})) for i, s in enumerate(group)),
        longest * mpdu_bits(phy), "up"))
    ack = control_duration(phy.ack_bits, phy)
    for i, s in enumerate(group):
        phases.append(Phase("ACK", ack, (PhaseTx(ap, (s,), channels, frozenset({i})),), phy.ack_bits, "down"))
    ex = FrameExchange(ap, phases, flows, phy.sifs, kind="ul-mumimo")
    ex.meta["group"] = tuple(group)
    return ex
