"""Closed-form saturation throughput for a single contention-free transmitter."""
from __future__ import annotations

from ..mac import control_duration, data_duration, data_rate


def cycle_time(phy, width: int, streams: int = 1, aggregation: int = 1) -> float:
    """Mean ns per TXOP: DIFS + mean backoff + RTS/CTS/DATA/ACK with three SIFS."""
    mean_backoff = (phy.cw_min - 1) / 2 * phy.slot
    t_data = data_duration(aggregation, data_rate(phy, width, streams), phy)
    return (phy.difs + mean_backoff + control_duration(phy.rts_bits, phy) + 3 * phy.sifs
            + control_duration(phy.cts_bits, phy) + t_data + control_duration(phy.ack_bits, phy))


def analytic_saturation_throughput(phy, width: int, streams: int = 1, aggregation: int = 1,
                                   n_contenders: int = 1) -> float:
    """Payload bits per second of one saturated sender with nobody to collide with."""
    if n_contenders != 1:
        raise ValueError("the oracle only covers a single contender")
    return phy.mpdu_payload * aggregation / (cycle_time(phy, width, streams, aggregation) / 1e9)
