"""Simulation scenarios: types, the TOML file format, validation and builtins."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Any

import tomli
import tomli_w

from .channel import AntennaPattern, ChannelSet, PropagationModel

SATURATED = math.inf

NS = 1
US = 1_000
MS = 1_000_000
S = 1_000_000_000

PROTOCOLS = ("csma-ca", "csma-eca")
BUILTINS = ("fig2-overlap", "stadium-toy", "train-toy", "apartment-toy")


class ConfigError(ValueError):
    """Base class for everything wrong with a scenario document."""


class ScenarioSyntaxError(ConfigError):
    pass


class SchemaError(ConfigError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


class InvariantViolation(ConfigError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class RadioParams:
    tx_power: float = 20.0  # dBm
    cca_threshold: float = -82.0  # dBm
    antenna: AntennaPattern = AntennaPattern()
    str_capable: bool = False


@dataclass(frozen=True)
class Node:
    id: str
    role: str  # "AP" | "STA"
    position: tuple[float, float]
    radio: RadioParams = RadioParams()
    antennas: int = 1
    traffic: float = 0.0  # offered load in bit/s, SATURATED for full buffer

    @property
    def saturated(self) -> bool:
        return self.traffic == SATURATED


@dataclass(frozen=True)
class Wlan:
    id: str
    ap: Node
    stas: tuple[Node, ...]
    channels: ChannelSet

    @property
    def nodes(self) -> tuple[Node, ...]:
        return (self.ap,) + self.stas


def _default_widths():
    return {20: 1.0, 40: 2.1, 80: 4.5, 160: 9.0}


@dataclass(frozen=True)
class PhyParams:
    slot: int = 9 * US
    sifs: int = 16 * US
    difs: int = 34 * US
    phy_header: int = 40 * US
    control_rate: float = 24e6
    base_rate_20mhz_1ss: float = 65e6
    width_factors: dict = field(default_factory=_default_widths)
    cw_min: int = 16
    cw_max: int = 1024
    max_aggregation: int = 64
    mac_header: int = 288
    mpdu_payload: int = 12000
    rts_bits: int = 160
    cts_bits: int = 112
    ack_bits: int = 112
    # channel sounding frames
    ndpa: int = 40 * US
    ndp: int = 40 * US
    report_bits: int = 1024
    propagation: PropagationModel = PropagationModel()
    capture_threshold: float = math.inf  # dB; +inf = pure collision model

    def violations(self) -> list[str]:
        out = []

        def pow2(v):
            return v > 0 and v & (v - 1) == 0

        if not (pow2(self.cw_min) and pow2(self.cw_max)):
            out.append("cw_min and cw_max must be powers of two")
        if self.cw_min > self.cw_max:
            out.append("cw_min must be <= cw_max")
        for name in ("slot", "sifs", "difs", "phy_header", "ndpa", "ndp"):
            if getattr(self, name) <= 0:
                out.append(f"{name} must be > 0")
        for name in ("control_rate", "base_rate_20mhz_1ss"):
            if getattr(self, name) <= 0:
                out.append(f"{name} must be > 0")
        for w in (20, 40, 80, 160):
            if self.width_factors.get(w, 0) <= 0:
                out.append(f"width factor for {w} MHz missing or not positive")
        if self.max_aggregation < 1:
            out.append("max_aggregation must be >= 1")
        out.extend(self.propagation.violations())
        return out


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: str = "csma-ca"
    str: bool = False
    aggregation: int = 8
    piggyback: bool = False
    retry_limit: int = 7
    dbca: bool = False
    ofdma: int | None = None  # subchannel cap, None = off
    mumimo: str | None = None  # "x:y:z", None = off
    ul_mumimo: int | None = None  # max uplink group size, None = off
    sounding_interval_ms: float = 50.0
    mu_rate_penalty: float = 1.0
    buffer_staleness_ms: float = 100.0
    warmup: float = 0.1


@dataclass(frozen=True)
class Scenario:
    name: str
    duration: int  # ns
    seed: int
    wlans: tuple[Wlan, ...]
    radio_defaults: RadioParams = RadioParams()
    phy: PhyParams = PhyParams()
    protocol: ProtocolConfig = ProtocolConfig()

    def nodes(self):
        for w in self.wlans:
            yield from w.nodes

    def wlan(self, wlan_id: str) -> Wlan:
        for w in self.wlans:
            if w.id == wlan_id:
                return w
        raise KeyError(wlan_id)


# -- units -----------------------------------------------------------------

_TIME_UNITS = {"ns": NS, "us": US, "ms": MS, "s": S}
_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Z]*)\s*$")


def parse_time(value, field_name: str = "time") -> int:
    """Integer nanoseconds from 1500, "9us", "1.5ms", "10s"; bare numbers are ns."""
    if isinstance(value, bool):
        raise SchemaError(field_name, "expected a duration")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return round(value)
    if isinstance(value, str):
        m = _QTY.match(value)
        if m and m.group(2).lower() in ("",) + tuple(_TIME_UNITS):
            unit = _TIME_UNITS.get(m.group(2).lower(), NS)
            return round(float(m.group(1)) * unit)
    raise SchemaError(field_name, f"cannot read duration {value!r}")


def format_time(ns: int) -> str:
    for unit, scale in (("s", S), ("ms", MS), ("us", US)):
        if ns % scale == 0 and ns != 0:
            return f"{ns // scale}{unit}"
    return f"{ns}ns"


def parse_dbm(value, field_name: str) -> float:
    if isinstance(value, bool):
        raise SchemaError(field_name, "expected a power")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _QTY.match(value)
        if m and m.group(2).lower() in ("", "dbm", "db"):
            return float(m.group(1))
        if value.strip().lower() in ("inf", "+inf", "-inf"):
            return float(value)
    raise SchemaError(field_name, f"cannot read power {value!r}")


def format_dbm(v: float) -> str:
    return f"{v!r}dBm"


def _parse_traffic(value, field_name: str) -> float:
    if value == "saturated":
        return SATURATED
    if value in ("none", "off"):
        return 0.0
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = _QTY.match(value)
        scale = {"": 1, "bps": 1, "kbps": 1e3, "mbps": 1e6, "gbps": 1e9}
        if m and m.group(2).lower() in scale:
            return float(m.group(1)) * scale[m.group(2).lower()]
    raise SchemaError(field_name, f"traffic must be 'saturated' or a load in bit/s, got {value!r}")


def _format_traffic(v: float):
    return "saturated" if v == SATURATED else v


# -- parsing -----------------------------------------------------------------

def _take(table: dict, key: str, where: str, conv, default=None, required=False):
    if key not in table:
        if required:
            raise SchemaError(f"{where}.{key}" if where else key, "missing required field")
        return default
    return conv(table.pop(key), f"{where}.{key}" if where else key)


def _check_empty(table: dict, where: str):
    if table:
        key = sorted(table)[0]
        raise SchemaError(f"{where}.{key}" if where else key, "unknown field")


def _as_int(v, name):
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(name, f"expected an integer, got {v!r}")
    return v


def _as_float(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", "-inf"):
            return float(v)
        raise SchemaError(name, f"expected a number, got {v!r}")
    return float(v)


def _as_str(v, name):
    if not isinstance(v, str):
        raise SchemaError(name, f"expected a string, got {v!r}")
    return v


def _as_bool(v, name):
    if isinstance(v, bool):
        return v
    if v in ("on", "true", "yes"):
        return True
    if v in ("off", "false", "no"):
        return False
    raise SchemaError(name, f"expected on/off, got {v!r}")


def _as_position(v, name):
    if (not isinstance(v, list) or len(v) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
        raise SchemaError(name, "position must be [x, y] in meters")
    return (float(v[0]), float(v[1]))


def _as_off_or_int(v, name):
    if v in ("off", "none", False):
        return None
    return _as_int(v, name)


def _as_off_or_str(v, name):
    if v in ("off", "none", False):
        return None
    return _as_str(v, name)


def _parse_antenna(v, name) -> AntennaPattern:
    if v == "omni":
        return AntennaPattern()
    if isinstance(v, dict):
        t = dict(v)
        kind = _take(t, "type", name, _as_str, "sector")
        pat = AntennaPattern(
            kind=kind,
            azimuth=_take(t, "azimuth", name, _as_float, 0.0),
            beamwidth=_take(t, "beamwidth", name, _as_float, 360.0),
            gain=_take(t, "gain", name, _as_float, 0.0),
            backlobe=_take(t, "backlobe", name, _as_float, 0.0),
        )
        _check_empty(t, name)
        return pat
    raise SchemaError(name, "antenna must be 'omni' or a sector table")


def _parse_radio(t: dict, where: str, base: RadioParams) -> RadioParams:
    return RadioParams(
        tx_power=_take(t, "tx_power", where, parse_dbm, base.tx_power),
        cca_threshold=_take(t, "cca_threshold", where, parse_dbm, base.cca_threshold),
        antenna=_take(t, "antenna", where, _parse_antenna, base.antenna),
        str_capable=_take(t, "str_capable", where, _as_bool, base.str_capable),
    )


def _parse_node(t: dict, where: str, role: str, defaults: RadioParams) -> Node:
    t = dict(t)
    node = Node(
        id=_take(t, "id", where, _as_str, required=True),
        role=role,
        position=_take(t, "position", where, _as_position, required=True),
        antennas=_take(t, "antennas", where, _as_int, 1),
        traffic=_take(t, "traffic", where, _parse_traffic, 0.0),
        radio=_parse_radio(t, where, defaults),
    )
    _check_empty(t, where)
    return node


def _parse_phy(t: dict) -> PhyParams:
    t = dict(t)
    d = PhyParams()
    w = "phy"
    widths = t.pop("width_factors", None)
    if widths is not None:
        if not isinstance(widths, dict):
            raise SchemaError("phy.width_factors", "expected a table of MHz = factor")
        try:
            widths = {int(k): _as_float(v, f"phy.width_factors.{k}") for k, v in widths.items()}
        except ValueError:
            raise SchemaError("phy.width_factors", "keys must be widths in MHz") from None
    prop = PropagationModel(
        pl0=_take(t, "pl0", w, _as_float, d.propagation.pl0),
        exponent=_take(t, "exponent", w, _as_float, d.propagation.exponent),
        noise_floor=_take(t, "noise_floor", w, parse_dbm, d.propagation.noise_floor),
    )
    phy = PhyParams(
        slot=_take(t, "slot", w, parse_time, d.slot),
        sifs=_take(t, "sifs", w, parse_time, d.sifs),
        difs=_take(t, "difs", w, parse_time, d.difs),
        phy_header=_take(t, "phy_header", w, parse_time, d.phy_header),
        control_rate=_take(t, "control_rate", w, _as_float, d.control_rate),
        base_rate_20mhz_1ss=_take(t, "base_rate_20mhz_1ss", w, _as_float, d.base_rate_20mhz_1ss),
        width_factors=widths if widths is not None else _default_widths(),
        cw_min=_take(t, "cw_min", w, _as_int, d.cw_min),
        cw_max=_take(t, "cw_max", w, _as_int, d.cw_max),
        max_aggregation=_take(t, "max_aggregation", w, _as_int, d.max_aggregation),
        mac_header=_take(t, "mac_header", w, _as_int, d.mac_header),
        mpdu_payload=_take(t, "mpdu_payload", w, _as_int, d.mpdu_payload),
        rts_bits=_take(t, "rts_bits", w, _as_int, d.rts_bits),
        cts_bits=_take(t, "cts_bits", w, _as_int, d.cts_bits),
        ack_bits=_take(t, "ack_bits", w, _as_int, d.ack_bits),
        ndpa=_take(t, "ndpa", w, parse_time, d.ndpa),
        ndp=_take(t, "ndp", w, parse_time, d.ndp),
        report_bits=_take(t, "report_bits", w, _as_int, d.report_bits),
        propagation=prop,
        capture_threshold=_take(t, "capture_threshold", w, _as_float, d.capture_threshold),
    )
    _check_empty(t, w)
    return phy


def _parse_protocol(t: dict) -> ProtocolConfig:
    t = dict(t)
    d = ProtocolConfig()
    w = "protocol"
    p = ProtocolConfig(
        protocol=_take(t, "protocol", w, _as_str, d.protocol),
        str=_take(t, "str", w, _as_bool, d.str),
        aggregation=_take(t, "aggregation", w, _as_int, d.aggregation),
        piggyback=_take(t, "piggyback", w, _as_bool, d.piggyback),
        retry_limit=_take(t, "retry_limit", w, _as_int, d.retry_limit),
        dbca=_take(t, "dbca", w, _as_bool, d.dbca),
        ofdma=_take(t, "ofdma", w, _as_off_or_int, d.ofdma),
        mumimo=_take(t, "mumimo", w, _as_off_or_str, d.mumimo),
        ul_mumimo=_take(t, "ul_mumimo", w, _as_off_or_int, d.ul_mumimo),
        sounding_interval_ms=_take(t, "sounding_interval_ms", w, _as_float, d.sounding_interval_ms),
        mu_rate_penalty=_take(t, "mu_rate_penalty", w, _as_float, d.mu_rate_penalty),
        buffer_staleness_ms=_take(t, "buffer_staleness_ms", w, _as_float, d.buffer_staleness_ms),
        warmup=_take(t, "warmup", w, _as_float, d.warmup),
    )
    _check_empty(t, w)
    return p


def _parse_wlan(t: dict, i: int, defaults: RadioParams) -> Wlan:
    t = dict(t)
    where = f"wlan[{i}]"
    wid = _take(t, "id", where, _as_str, required=True)
    chans = t.pop("channels", None)
    if (not isinstance(chans, list) or not chans
            or not all(isinstance(c, int) and not isinstance(c, bool) for c in chans)):
        raise SchemaError(f"{where}.channels", "expected a non-empty list of channel indices")
    primary = _take(t, "primary", where, _as_int, chans[0])
    ap_t = t.pop("ap", None)
    if not isinstance(ap_t, dict):
        raise SchemaError(f"{where}.ap", "missing [wlan.ap] table")
    ap = _parse_node(ap_t, f"{where}.ap", "AP", defaults)
    stas_t = t.pop("sta", [])
    if not isinstance(stas_t, list):
        raise SchemaError(f"{where}.sta", "expected [[wlan.sta]] tables")
    stas = tuple(_parse_node(s, f"{where}.sta[{j}]", "STA", defaults) for j, s in enumerate(stas_t))
    _check_empty(t, where)
    if len(set(chans)) != len(chans):
        raise InvariantViolation([f"wlan {wid}: channels repeated"])
    return Wlan(wid, ap, stas, ChannelSet(tuple(chans), primary))


def parse_scenario(text: str) -> Scenario:
    """Parse a TOML scenario document, fill defaults and check every invariant."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioSyntaxError(f"syntax error: {exc}") from None
    doc = dict(doc)
    radio_t = doc.pop("radio", {})
    if not isinstance(radio_t, dict):
        raise SchemaError("radio", "expected a table")
    radio_t = dict(radio_t)
    defaults = _parse_radio(radio_t, "radio", RadioParams())
    _check_empty(radio_t, "radio")
    wlans_t = doc.pop("wlan", None)
    if not isinstance(wlans_t, list):
        raise SchemaError("wlan", "at least one [[wlan]] table is required")
    s = Scenario(
        name=_take(doc, "name", "", _as_str, "unnamed"),
        duration=_take(doc, "duration", "", parse_time, 10 * S),
        seed=_take(doc, "seed", "", _as_int, 1),
        wlans=tuple(_parse_wlan(w, i, defaults) for i, w in enumerate(wlans_t)),
        radio_defaults=defaults,
        phy=_parse_phy(doc.pop("phy", {})),
        protocol=_parse_protocol(doc.pop("protocol", {})),
    )
    _check_empty(doc, "")
    problems = validate(s)
    if problems:
        raise InvariantViolation(problems)
    return s


# -- rendering ---------------------------------------------------------------

def _render_antenna(a: AntennaPattern):
    if a.kind == "omni":
        return "omni"
    return {"type": a.kind, "azimuth": a.azimuth, "beamwidth": a.beamwidth,
            "gain": a.gain, "backlobe": a.backlobe}


def _render_node(n: Node) -> dict:
    return {
        "id": n.id,
        "position": list(n.position),
        "antennas": n.antennas,
        "traffic": _format_traffic(n.traffic),
        "tx_power": format_dbm(n.radio.tx_power),
        "cca_threshold": format_dbm(n.radio.cca_threshold),
        "antenna": _render_antenna(n.radio.antenna),
        "str_capable": n.radio.str_capable,
    }


def _float_or_str(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def render_scenario(s: Scenario) -> str:
    """Inverse of parse_scenario: parse_scenario(render_scenario(s)) == s."""
    phy, p, r = s.phy, s.protocol, s.radio_defaults
    doc: dict[str, Any] = {
        "name": s.name,
        "duration": format_time(s.duration),
        "seed": s.seed,
        "radio": {
            "tx_power": format_dbm(r.tx_power),
            "cca_threshold": format_dbm(r.cca_threshold),
            "antenna": _render_antenna(r.antenna),
            "str_capable": r.str_capable,
        },
        "phy": {
            "slot": format_time(phy.slot),
            "sifs": format_time(phy.sifs),
            "difs": format_time(phy.difs),
            "phy_header": format_time(phy.phy_header),
            "control_rate": phy.control_rate,
            "base_rate_20mhz_1ss": phy.base_rate_20mhz_1ss,
            "width_factors": {str(k): v for k, v in sorted(phy.width_factors.items())},
            "cw_min": phy.cw_min,
            "cw_max": phy.cw_max,
            "max_aggregation": phy.max_aggregation,
            "mac_header": phy.mac_header,
            "mpdu_payload": phy.mpdu_payload,
            "rts_bits": phy.rts_bits,
            "cts_bits": phy.cts_bits,
            "ack_bits": phy.ack_bits,
            "ndpa": format_time(phy.ndpa),
            "ndp": format_time(phy.ndp),
            "report_bits": phy.report_bits,
            "pl0": phy.propagation.pl0,
            "exponent": phy.propagation.exponent,
            "noise_floor": format_dbm(phy.propagation.noise_floor),
            "capture_threshold": _float_or_str(phy.capture_threshold),
        },
        "protocol": {
            "protocol": p.protocol,
            "str": p.str,
            "aggregation": p.aggregation,
            "piggyback": p.piggyback,
            "retry_limit": p.retry_limit,
            "dbca": p.dbca,
            "ofdma": "off" if p.ofdma is None else p.ofdma,
            "mumimo": "off" if p.mumimo is None else p.mumimo,
            "ul_mumimo": "off" if p.ul_mumimo is None else p.ul_mumimo,
            "sounding_interval_ms": _float_or_str(p.sounding_interval_ms),
            "mu_rate_penalty": p.mu_rate_penalty,
            "buffer_staleness_ms": _float_or_str(p.buffer_staleness_ms),
            "warmup": p.warmup,
        },
        "wlan": [
            {
                "id": w.id,
                "channels": list(w.channels.channels),
                "primary": w.channels.primary,
                "ap": _render_node(w.ap),
                "sta": [_render_node(n) for n in w.stas],
            }
            for w in s.wlans
        ],
    }
    return tomli_w.dumps(doc)


# -- validation --------------------------------------------------------------

_MUMIMO = re.compile(r"^(\d+):(\d+):(\d+)$")


def validate(s: Scenario) -> list[str]:
    """Every violated invariant, each naming the offending WLAN or node."""
    out = []
    if s.duration <= 0:
        out.append("duration must be > 0")
    if not s.wlans:
        out.append("at least one wlan required")
    seen_nodes: set[str] = set()
    seen_wlans: set[str] = set()
    for w in s.wlans:
        if w.id in seen_wlans:
            out.append(f"wlan id {w.id} duplicated")
        seen_wlans.add(w.id)
        out.extend(f"wlan {w.id}: {v}" for v in w.channels.violations())
        if w.ap.role != "AP":
            out.append(f"wlan {w.id}: ap {w.ap.id} must have role AP")
        for n in w.stas:
            if n.role != "STA":
                out.append(f"wlan {w.id}: node {n.id} must have role STA")
        for n in w.nodes:
            if n.id in seen_nodes:
                out.append(f"node id {n.id} duplicated")
            seen_nodes.add(n.id)
            if n.antennas < 1:
                out.append(f"node {n.id}: antennas must be >= 1")
            if not n.traffic >= 0:
                out.append(f"node {n.id}: offered load must be >= 0")
            out.extend(f"node {n.id}: {v}" for v in n.radio.antenna.violations())
    out.extend(f"phy: {v}" for v in s.phy.violations())
    p = s.protocol
    if p.protocol not in PROTOCOLS:
        out.append(f"protocol: unknown protocol {p.protocol!r}")
    if not 1 <= p.aggregation <= s.phy.max_aggregation:
        out.append(f"protocol: aggregation must be in 1..{s.phy.max_aggregation}")
    if p.retry_limit < 0:
        out.append("protocol: retry_limit must be >= 0")
    if p.ofdma is not None and p.ofdma not in (1, 2, 4, 8):
        out.append("protocol: ofdma subchannel cap must be 1, 2, 4 or 8")
    if p.ofdma is not None and p.mumimo is not None:
        out.append("protocol: ofdma and mumimo are mutually exclusive")
    if p.ul_mumimo is not None and p.ul_mumimo < 1:
        out.append("protocol: ul_mumimo group size must be >= 1")
    if not 0 <= p.warmup < 1:
        out.append("protocol: warmup must be in [0, 1)")
    if not p.sounding_interval_ms > 0:
        out.append("protocol: sounding_interval_ms must be > 0")
    if not p.mu_rate_penalty > 0:
        out.append("protocol: mu_rate_penalty must be > 0")
    if p.mumimo is not None:
        m = _MUMIMO.match(p.mumimo)
        if not m:
            out.append(f"protocol: mumimo {p.mumimo!r} is not x:y:z")
        else:
            x, y, z = map(int, m.groups())
            if x < 1 or y < 1 or z < 1 or x != y * z:
                out.append(f"protocol: mumimo {p.mumimo} needs x = y*z")
            for w in s.wlans:
                if x > w.ap.antennas:
                    out.append(f"wlan {w.id}: mumimo needs {x} AP antennas, ap has {w.ap.antennas}")
                for n in w.stas:
                    if z > n.antennas:
                        out.append(f"node {n.id}: mumimo needs {z} antennas per destination")
    return out


# -- builders ----------------------------------------------------------------

def single_bss(n_stas: int = 1, width: int = 20, *, ap_traffic: float = SATURATED,
               sta_traffic: float = 0.0, ap_antennas: int = 1, sta_antennas: int = 1,
               protocol: ProtocolConfig | None = None, phy: PhyParams | None = None,
               radio: RadioParams | None = None, duration: int = 10 * S, seed: int = 1,
               name: str = "single-bss") -> Scenario:
    """One AP on channels 0..width/20-1 with STAs on a 3 m circle around it."""
    radio = radio or RadioParams()
    n_ch = width // 20
    ap = Node("ap", "AP", (0.0, 0.0), radio, ap_antennas, ap_traffic)
    stas = tuple(
        Node(f"sta{i + 1}", "STA",
             (round(3.0 * math.cos(2 * math.pi * i / max(n_stas, 1)), 6),
              round(3.0 * math.sin(2 * math.pi * i / max(n_stas, 1)), 6)),
             radio, sta_antennas, sta_traffic)
        for i in range(n_stas)
    )
    w = Wlan("W", ap, stas, ChannelSet(tuple(range(n_ch)), 0))
    return Scenario(name, duration, seed, (w,), radio, phy or PhyParams(),
                    protocol or ProtocolConfig())


def _fig2_overlap() -> Scenario:
    # APs on a 10 m equilateral triangle, each STA 2 m from its AP, away from the centre.
    radio = RadioParams()
    h = 10.0 * math.sqrt(3) / 2
    layout = {
        "A": ((0.0, 0.0), (-2.0, 0.0), ChannelSet((0, 1), 0)),
        "B": ((10.0, 0.0), (12.0, 0.0), ChannelSet((2, 3), 2)),
        "C": ((5.0, h), (5.0, h + 2.0), ChannelSet((0, 1, 2, 3), 1)),
    }
    wlans = []
    for wid, (ap_pos, sta_pos, chans) in layout.items():
        ap = Node(f"{wid}.ap", "AP", ap_pos, radio, 1, SATURATED)
        sta = Node(f"{wid}.sta", "STA", sta_pos, radio, 1, SATURATED)
        wlans.append(Wlan(wid, ap, (sta,), chans))
    return Scenario("fig2-overlap", 10 * S, 1, tuple(wlans), radio, PhyParams(), ProtocolConfig())


# Toy scalings of the dense-deployment table.  Counts are our choice; see docs.
_TOYS = {
    # name: (APs, STAs, area m^2)
    "stadium-toy": (10, 100, 125.0),
    "train-toy": (1, 120, 72.0),
    "apartment-toy": (6, 24, 120.0),
}


def _toy(name: str) -> Scenario:
    from .engine import RandomStream

    n_ap, n_sta, area = _TOYS[name]
    side = math.sqrt(area)
    rng = RandomStream(0, name, "layout")
    radio = RadioParams()

    def place():
        return (round(rng.random() * side, 3), round(rng.random() * side, 3))

    ap_pos = [place() for _ in range(n_ap)]
    chans = []
    for _ in range(n_ap):
        size = (1, 2, 4)[rng.uniform_int(3)]
        start = rng.uniform_int(8 // size) * size
        chans.append(ChannelSet(tuple(range(start, start + size)), start + rng.uniform_int(size)))
    members: list[list[Node]] = [[] for _ in range(n_ap)]
    for i in range(n_sta):
        pos = place()
        near = min(range(n_ap), key=lambda a: (ap_pos[a][0] - pos[0]) ** 2 + (ap_pos[a][1] - pos[1]) ** 2)
        members[near].append(Node(f"w{near + 1}.sta{len(members[near]) + 1}", "STA", pos, radio, 1, 0.0))
    wlans = tuple(
        Wlan(f"w{a + 1}", Node(f"w{a + 1}.ap", "AP", ap_pos[a], radio, 1, SATURATED),
             tuple(members[a]), chans[a])
        for a in range(n_ap)
    )
    return Scenario(name, 1 * S, 1, wlans, radio, PhyParams(), ProtocolConfig())


def builtin_scenario(name: str) -> Scenario:
    """One of the reference topologies: fig2-overlap, stadium-toy, train-toy, apartment-toy."""
    if name == "fig2-overlap":
        return _fig2_overlap()
    if name in _TOYS:
        return _toy(name)
    raise ConfigError(f"unknown builtin scenario {name!r}; choose from {', '.join(BUILTINS)}")


def with_protocol(s: Scenario, **changes) -> Scenario:
    return replace(s, protocol=replace(s.protocol, **changes))


def map_nodes(s: Scenario, fn, wlan_id: str | None = None) -> Scenario:
    """New scenario with fn(node) applied to every node (of one WLAN if given)."""
    wlans = []
    for w in s.wlans:
        if wlan_id is None or w.id == wlan_id:
            w = replace(w, ap=fn(w.ap), stas=tuple(fn(n) for n in w.stas))
        wlans.append(w)
    return replace(s, wlans=tuple(wlans))


__all__ = [
    "AntennaPattern", "BUILTINS", "ChannelSet", "ConfigError", "InvariantViolation", "Node",
    "PhyParams", "PropagationModel", "ProtocolConfig", "RadioParams", "SATURATED", "Scenario",
    "ScenarioSyntaxError", "SchemaError", "Wlan", "builtin_scenario", "map_nodes",
    "parse_scenario", "parse_time", "render_scenario", "single_bss", "validate", "with_protocol",
]
