"""Wires scenario, engine, channel and MAC together into one simulation run.

Medium model in brief:

* every node keeps per-channel received energy from the transmissions on
  air; CCA compares it with the node's threshold on its sensed channels;
* a node taking part in a frame exchange counts as busy for contention;
* frame exchanges run phase by phase with SIFS gaps; a failed reception
  kills the flows that depended on it and an exchange with no live flow
  aborts (the initiator waits out the response timeout);
* all backoff expiries of one instant are committed before anyone re-senses
  the medium, so equal-time starts always collide regardless of tie order.
"""
from __future__ import annotations

import math

from .analytics.metrics import MetricsRaw
from .channel import ProtocolInvariantError, dbca_assess, dbm_to_mw, link_gain_db, link_ok
from .engine import Engine, EventKind, RandomStream
from .mac import (Action, BackoffState, TxQueue, build_txop, countdown_deadline, countdown_freeze,
                  first_boundary, record_outcome, sample_backoff, step_slot, str_pair)
from .multiuser import (CsiRecord, MumimoConfig, build_dl_mumimo, build_ofdma_exchange, build_ul_mumimo,
                        make_signature, ofdma_allocate, select_group)


class NodeRt:
    __slots__ = ("idx", "id", "spec", "wlan", "is_ap", "ap", "chset", "sensed", "str", "thr",
                 "queue", "bo", "rng", "traffic_rng", "engaged", "idle_start", "ch_idle",
                 "pending", "t_first", "c_first", "energy", "ecount", "antennas", "stas",
                 "rr_last", "served_at", "known", "last_was_ul", "csi", "arrival_rr", "lam")

    def __init__(self, idx, spec, wlan):
        self.idx = idx
        self.id = spec.id
        self.spec = spec
        self.wlan = wlan
        self.is_ap = spec.role == "AP"
        self.chset = wlan.channels
        self.str = spec.radio.str_capable
        self.thr = dbm_to_mw(spec.radio.cca_threshold)
        self.antennas = spec.antennas
        self.engaged = None
        self.idle_start = 0
        self.ch_idle = {ch: 0 for ch in wlan.channels.channels}
        self.pending = None
        self.t_first = 0
        self.c_first = 0
        self.energy = {ch: 0.0 for ch in wlan.channels.channels}
        self.ecount = {ch: 0 for ch in wlan.channels.channels}
        self.rr_last = None  # last STA served (AP round robin)
        self.served_at = {}  # sta -> last time it was served
        self.known = {}  # sta -> (report time, backlog > 0)
        self.last_was_ul = False
        self.csi = {}  # sta -> CsiRecord
        self.arrival_rr = 0


class ATx:
    """A transmission on air."""

    __slots__ = ("src", "dsts", "channels", "start", "end", "split", "group", "ptx", "run", "failed", "phase")

    def __init__(self, src, dsts, channels, start, end, split, group, ptx, run, phase):
        self.src = src
        self.dsts = dsts
        self.channels = channels
        self.start = start
        self.end = end
        self.split = split
        self.group = group
        self.ptx = ptx
        self.run = run
        self.phase = phase
        self.failed = set()


class Run:
    """Runtime state of one frame exchange."""

    __slots__ = ("id", "ex", "owner", "owners", "members", "alive", "delivered", "idx", "launch",
                 "txs", "chanset", "dominant", "done")

    def __init__(self, rid, ex, owner, owners, launch):
        self.id = rid
        self.ex = ex
        self.owner = owner
        self.owners = owners
        self.members = []
        self.alive = set(range(len(ex.flows)))
        self.delivered = set()
        self.idx = 0
        self.launch = launch
        self.txs = []
        self.chanset = frozenset(ex.channels)
        self.dominant = True
        self.done = False


class Simulation:
    def __init__(self, scenario, seed: int | None = None, *, stepped: bool = False,
                 reverse_ties: bool = False, trace: list | None = None):
        self.s = scenario
        self.seed = scenario.seed if seed is None else seed
        self.phy = scenario.phy
        self.proto = scenario.protocol
        self.stepped = stepped
        self.trace = trace
        self.metrics = MetricsRaw()
        self.engine = Engine(self.metrics, reverse_ties)
        self.noise = dbm_to_mw(self.phy.propagation.noise_floor)
        self.capture = self.phy.capture_threshold
        self.nodes: list[NodeRt] = []
        self.by_id: dict[str, NodeRt] = {}
        for w in scenario.wlans:
            for spec in w.nodes:
                n = NodeRt(len(self.nodes), spec, w)
                self.nodes.append(n)
                self.by_id[n.id] = n
                self.metrics.add_node(n.id, w.id)
        for n in self.nodes:
            self._setup_node(n)
        prop = self.phy.propagation
        self.rxmw = [[0.0 if a is b else
                      dbm_to_mw(a.spec.radio.tx_power +
                                link_gain_db(a.spec.position, b.spec.position, a.spec.radio.antenna, prop))
                      for b in self.nodes] for a in self.nodes]
        self.mumimo = MumimoConfig.parse(self.proto.mumimo) if self.proto.mumimo else None
        self.active: list[ATx] = []
        self.starters: set = set()
        self.occupying: list[Run] = []
        self._rid = 0
        self.air_t = 0
        self.w0 = 0
        self.t_end = 0
        eng = self.engine
        eng.on(EventKind.TX_START, self._on_backoff_expiry)
        eng.on(EventKind.SLOT_BOUNDARY, self._on_slot)
        eng.on(EventKind.TX_END, self._on_phase_end)
        eng.on(EventKind.TIMER_EXPIRY, self._on_timer)
        eng.on(EventKind.TRAFFIC_ARRIVAL, self._on_arrival)
        self._started = False
        self._txop_cache = {}  # exchanges are immutable once built
        self._alone = {}  # (src, dst, split, channels) -> reception ok without interference
        self._fan = {}  # (src, split, channels) -> energy fan-out

    # -- setup -------------------------------------------------------------------

    def _setup_node(self, n: NodeRt):
        spec, w = n.spec, n.wlan
        n.sensed = (n.chset.primary,) if self.proto.dbca else n.chset.channels
        n.stas = [s.id for s in w.stas] if n.is_ap else []
        n.ap = w.ap.id
        dests = n.stas if n.is_ap else [w.ap.id]
        n.queue = TxQueue(spec.saturated and bool(dests), dests)
        n.bo = BackoffState(cw_min=self.phy.cw_min, cw_max=self.phy.cw_max)
        n.rng = RandomStream(self.seed, n.id, "backoff")
        n.traffic_rng = RandomStream(self.seed, n.id, "traffic")
        n.lam = 0.0
        if not spec.saturated and spec.traffic > 0 and dests:
            n.lam = spec.traffic / self.phy.mpdu_payload  # MPDUs per second

    def _start(self):
        self._started = True
        for n in self.nodes:
            if n.lam > 0:
                self._schedule_arrival(n)
            if self._has_work(n):
                sample_backoff(n.bo, self.proto.protocol, n.rng)
        self.engine.defer(self._settle, "settle")

    # -- public ------------------------------------------------------------------

    def run(self, t_end: int | None = None) -> MetricsRaw:
        t_end = self.s.duration if t_end is None else t_end
        if t_end > self.s.duration:
            raise ValueError("t_end beyond scenario duration")
        self.t_end = t_end
        self.w0 = int(self.proto.warmup * t_end)
        self.metrics.window_ns = t_end - self.w0
        if not self._started:
            self._start()
        self.engine.run_until(t_end)
        self._air_advance(t_end)
        return self.metrics.snapshot()

    # -- traffic -------------------------------------------------------------------

    def _schedule_arrival(self, n):
        u = n.traffic_rng.random()
        gap = max(1, round(-math.log1p(-u) / n.lam * 1e9))
        self.engine.schedule(self.engine.now + gap, EventKind.TRAFFIC_ARRIVAL, n.id, n)

    def _on_arrival(self, ev):
        n = ev.payload
        dests = n.stas if n.is_ap else [n.ap]
        dst = dests[n.arrival_rr % len(dests)]
        n.arrival_rr += 1
        n.queue.add(dst)
        self._schedule_arrival(n)
        if n.bo.counter is None and n.engaged is None:
            sample_backoff(n.bo, self.proto.protocol, n.rng)
            self.engine.defer(self._settle, "settle")

    def _ul_candidates(self, ap):
        if self.proto.ul_mumimo is None:
            return []
        horizon = self.engine.now - self.proto.buffer_staleness_ms * 1e6
        return [s for s in ap.stas if s in ap.known and ap.known[s][1] and ap.known[s][0] >= horizon]

    def _has_work(self, n) -> bool:
        if n.queue.has_traffic():
            return True
        return n.is_ap and bool(self._ul_candidates(n))

    # -- contention ------------------------------------------------------------------

    def _on_backoff_expiry(self, ev):
        n = ev.payload
        n.pending = None
        n.bo.counter = 0
        self.starters.add(n)
        self.engine.defer(self._settle, "settle")

    def _on_slot(self, ev):
        n = ev.payload
        n.pending = None
        act = step_slot(n.bo, False, self.engine.now - n.idle_start, self.phy)
        if act is Action.TRANSMIT:
            self.starters.add(n)
            self.engine.defer(self._settle, "settle")
        else:
            n.pending = self.engine.schedule(self.engine.now + self.phy.slot, EventKind.SLOT_BOUNDARY, n.id, n)

    def _arm(self, n, now):
        t_first = first_boundary(n.idle_start, now, self.phy)
        n.t_first = t_first
        if self.stepped:
            n.pending = self.engine.schedule(t_first, EventKind.SLOT_BOUNDARY, n.id, n)
        else:
            deadline, n.c_first = countdown_deadline(n.bo, t_first, self.phy)
            n.pending = self.engine.schedule(deadline, EventKind.TX_START, n.id, n)

    def _freeze(self, n, now):
        n.pending.cancelled = True
        n.pending = None
        if self.stepped:
            step_slot(n.bo, True, None, self.phy)
        else:
            countdown_freeze(n.bo, n.t_first, n.c_first, now, self.phy)

    def _settle(self):
        now = self.engine.now
        if self.starters:
            self._commit(now)
        dbca = self.proto.dbca
        for n in self.nodes:
            e = n.energy
            if dbca:
                thr = n.thr
                for ch in n.ch_idle:
                    if e[ch] >= thr:
                        n.ch_idle[ch] = None
                    elif n.ch_idle[ch] is None:
                        n.ch_idle[ch] = now
            if n.engaged is not None:
                busy = True
            else:
                thr = n.thr
                busy = False
                for ch in n.sensed:
                    if e[ch] >= thr:
                        busy = True
                        break
            if busy:
                n.idle_start = None
                if n.pending is not None:
                    self._freeze(n, now)
            else:
                if n.idle_start is None:
                    n.idle_start = now
                if n.pending is None and n.bo.counter is not None:
                    self._arm(n, now)

    # -- building exchanges ------------------------------------------------------------

    def _tx_channels(self, n, now):
        if not self.proto.dbca:
            return n.chset
        return dbca_assess(n.chset, n.ch_idle, now, self.phy.slot + self.phy.sifs)

    def _next_dst(self, n):
        if not n.is_ap:
            return n.ap
        dests = n.queue.destinations()
        if not dests:
            return None
        if n.rr_last in n.stas:
            r = n.stas.index(n.rr_last)
            later = [d for d in dests if n.stas.index(d) > r]
            if later:
                return later[0]
        return dests[0]

    def _build(self, n, sset, taken, now):
        chans = self._tx_channels(n, now)
        p = self.proto
        if n.is_ap:
            ul = self._ul_candidates(n)
            if ul and (not n.last_was_ul or not n.queue.has_traffic()):
                ex = self._build_ul(n, ul, chans, now)
                if ex is not None:
                    n.last_was_ul = True
                    return ex
            n.last_was_ul = False
            if not n.queue.has_traffic():
                return None
            if p.ofdma is not None:
                return self._build_ofdma(n, chans)
            if self.mumimo is not None:
                return self._build_mumimo(n, chans, now)
        dst_id = self._next_dst(n)
        if dst_id is None:
            return None
        agg = p.aggregation
        if p.str and n.str:
            peer = None
            if n.is_ap:
                for s in n.stas:
                    r = self.by_id[s]
                    if r in sset and r not in taken and n.queue.has_traffic_for(s) and r.queue.has_traffic_for(n.id):
                        peer = r
                        break
            else:
                r = self.by_id[n.ap]
                if r in sset and r not in taken:
                    peer = r
            simultaneous = peer is not None
            if peer is None and p.protocol == "csma-eca":
                r = self.by_id[dst_id]
                if r not in sset and r not in taken and r.engaged is None:
                    peer = r
            if peer is not None:
                streams = min(n.antennas, peer.antennas)
                ex = str_pair(n.spec, peer.spec, n.queue, peer.queue, self.phy, chans, protocol=p.protocol,
                              simultaneous=simultaneous, aggregation=agg, streams=streams)
                if ex is not None:
                    taken.add(peer)
                    if n.is_ap:
                        n.rr_last = peer.id
                    return ex
        dst = self.by_id[dst_id]
        if n.is_ap:
            n.rr_last = dst_id
        streams = min(n.antennas, dst.antennas)
        rev = dst.queue.has_traffic_for(n.id)
        owed = p.piggyback and n.queue.owed_ack.get(dst_id, False)
        key = (n.id, dst_id, n.queue.available(dst_id, agg), chans, streams, rev, owed)
        ex = self._txop_cache.get(key)
        if ex is None:
            ex = build_txop(n.id, dst_id, n.queue, self.phy, chans, aggregation=agg, streams=streams,
                            piggyback=p.piggyback, reverse_traffic=rev)
            self._txop_cache[key] = ex
        if ex.meta.get("carries_ack_for"):
            n.queue.owed_ack[dst_id] = False
        return ex

    def _build_ofdma(self, ap, chans):
        cands = ap.queue.destinations()
        ranks = {s: i for i, s in enumerate(ap.stas)}
        alloc, ap.rr_last = ofdma_allocate(chans, cands, self.proto.ofdma, ap.rr_last, ranks)
        agg = min(self.proto.aggregation, self.phy.max_aggregation)
        mpdus = {s: ap.queue.available(s, agg) for s in alloc.stas()}
        streams = {s: min(ap.antennas, self.by_id[s].antennas) for s in alloc.stas()}
        return build_ofdma_exchange(ap.id, alloc, mpdus, self.phy, streams)

    def _build_mumimo(self, ap, chans, now):
        cfg = self.mumimo
        cands = ap.queue.destinations()
        cands.sort(key=lambda s: (ap.served_at.get(s, -1), ap.stas.index(s)))
        y = min(cfg.y, len(cands))
        if y < cfg.y:
            cfg = MumimoConfig(y * cfg.z, y, cfg.z)
        sound = None
        if y == 1:
            group = cands[:1]
        else:
            interval = self.proto.sounding_interval_ms * 1e6
            stale = [s for s in cands if s not in ap.csi or now - ap.csi[s].timestamp >= interval]
            if stale:
                sound = cands
                for s in cands:
                    ap.csi[s] = self._sound(ap, s, now)
            pool = cands[:max(2 * y, y)]
            group = select_group([ap.csi[s] for s in pool], y, now, interval)
        for s in group:
            ap.served_at[s] = now
        agg = min(self.proto.aggregation, self.phy.max_aggregation)
        mpdus = {s: ap.queue.available(s, agg) for s in group}
        return build_dl_mumimo(ap.id, cfg, group, mpdus, self.phy, chans, penalty=self.proto.mu_rate_penalty,
                               ap_antennas=ap.antennas,
                               sta_antennas={s: self.by_id[s].antennas for s in group}, sound=sound)

    def _sound(self, ap, sta, now):
        q = self.rxmw[ap.idx][self.by_id[sta].idx] / self.noise
        return CsiRecord(sta, now, q, make_signature(self.seed, sta, ap.antennas))

    def _build_ul(self, ap, cands, chans, now):
        cap = min(self.proto.ul_mumimo, ap.antennas)
        cands = sorted(cands, key=lambda s: (ap.served_at.get(("ul", s), -1), ap.stas.index(s)))
        group = cands[:cap]
        agg = min(self.proto.aggregation, self.phy.max_aggregation)
        mpdus = {s: self.by_id[s].queue.available(ap.id, agg) for s in group}
        ages = {s: now - ap.known[s][0] for s in group}
        ex = build_ul_mumimo(ap.id, group, mpdus, self.phy, chans, report_age=ages,
                             staleness=self.proto.buffer_staleness_ms * 1e6,
                             penalty=self.proto.mu_rate_penalty)
        if ex is not None:
            for s in group:
                ap.served_at[("ul", s)] = now
        return ex

    # -- launching -------------------------------------------------------------------------

    def _commit(self, now):
        starters = sorted(self.starters, key=lambda r: r.idx)
        self.starters = set()
        sset = set(starters)
        taken = set()
        runs = []
        for n in starters:
            if n in taken:
                continue
            taken.add(n)
            ex = self._build(n, sset, taken, now)
            if ex is None:
                n.bo.counter = None
                if self._has_work(n):
                    sample_backoff(n.bo, self.proto.protocol, n.rng)
                continue
            self._rid += 1
            owners = [n] + ([self.by_id[ex.co_initiator]] if ex.co_initiator else [])
            runs.append(Run(self._rid, ex, n, owners, now))
        for run in runs:
            for r in run.owners:
                if r.engaged is not None and r.engaged.owner is not r:
                    r.engaged.members.remove(r)
                r.engaged = run
                run.members.append(r)
        for run in runs:
            for pid in run.ex.participants:
                r = self.by_id[pid]
                if r.engaged is None:
                    r.engaged = run
                    run.members.append(r)
        for run in runs:
            self._air_advance(now)
            self.occupying.append(run)
            self._recompute_dominance()
            self._start_phase(run, 0)

    def _start_phase(self, run, i):
        now = self.engine.now
        ph = run.ex.phases[i]
        run.idx = i
        end = now + ph.duration
        new = []
        for ptx in ph.txs:
            if ptx.flows and not (ptx.flows & run.alive):
                continue
            src = self.by_id[ptx.src]
            if src.engaged is not run:
                run.alive -= ptx.flows  # partner busy elsewhere never answers
                continue
            chans = ptx.channels.channels
            a = ATx(src, [self.by_id[d] for d in ptx.dsts], chans, now, end,
                    ptx.split or len(chans), (run.id, i), ptx, run, ph)
            new.append(a)
        for a in new:
            self._add_energy(a)
        self.active.extend(new)
        run.txs = new
        self._check_receptions()
        if self.trace is not None:
            for a in new:
                self.trace.append({
                    "event": "tx", "t": now, "exchange": run.id, "phase": i, "kind": ph.kind,
                    "src": a.src.id, "dsts": [d.id for d in a.dsts], "channels": list(a.channels),
                    "start": now, "end": end, "bits": ph.bits, "wlan": a.src.wlan.id,
                })
        self.engine.schedule(end, EventKind.TX_END, run.owner.id, run)
        self.engine.defer(self._settle, "settle")

    def _fanout(self, a):
        """(energy, count, power, channels heard) for every other node; cached per source setup."""
        key = (a.src.idx, a.split, a.channels)
        out = self._fan.get(key)
        if out is None:
            row = self.rxmw[a.src.idx]
            out = []
            for n in self.nodes:
                if n is a.src:
                    continue
                heard = tuple(ch for ch in a.channels if ch in n.energy)
                if heard:
                    out.append((n.energy, n.ecount, row[n.idx] / a.split, heard))
            self._fan[key] = out
        return out

    def _add_energy(self, a):
        for e, c, p, heard in self._fanout(a):
            for ch in heard:
                e[ch] += p
                c[ch] += 1

    def _remove_energy(self, a):
        for e, c, p, heard in self._fanout(a):
            for ch in heard:
                c[ch] -= 1
                e[ch] = e[ch] - p if c[ch] else 0.0

    def _check_receptions(self):
        active = self.active
        rxmw = self.rxmw
        noise = self.noise
        if all(o.group == active[0].group for o in active):
            # one phase on air: no interference, outcome depends on the link alone
            for a in active:
                for d in a.dsts:
                    if d in a.failed:
                        continue
                    if d.engaged is not a.run or not self._alone_ok(a, d):
                        a.failed.add(d)
            return
        for a in active:
            for d in a.dsts:
                if d in a.failed:
                    continue
                if d.engaged is not a.run:
                    a.failed.add(d)
                    continue
                sig_row = rxmw[a.src.idx][d.idx] / a.split
                signal = {ch: sig_row for ch in a.channels}
                interf = dict.fromkeys(a.channels, 0.0)
                loud = dict.fromkeys(a.channels, 0.0)
                ok = True
                for o in active:
                    if o is a or o.group == a.group:
                        continue
                    if o.src is d:
                        if not d.str:
                            ok = False
                            break
                        continue
                    p = rxmw[o.src.idx][d.idx] / o.split
                    for ch in o.channels:
                        if ch in interf:
                            interf[ch] += p
                            if p > loud[ch]:
                                loud[ch] = p
                if not ok or not link_ok(signal, interf, loud, noise, self.capture):
                    a.failed.add(d)

    def _alone_ok(self, a, d) -> bool:
        key = (a.src.idx, d.idx, a.split, a.channels)
        ok = self._alone.get(key)
        if ok is None:
            sig = self.rxmw[a.src.idx][d.idx] / a.split
            zero = dict.fromkeys(a.channels, 0.0)
            ok = self._alone[key] = link_ok(dict.fromkeys(a.channels, sig), zero, zero, self.noise, self.capture)
        return ok

    # -- phase ends ----------------------------------------------------------------------

    def _on_phase_end(self, ev):
        run = ev.payload
        now = self.engine.now
        ex = run.ex
        ph = ex.phases[run.idx]
        for a in run.txs:
            self.active.remove(a)
            self._remove_energy(a)
        for a in run.txs:
            for d in a.dsts:
                if d in a.failed:
                    hit = {f for f in a.ptx.flows if ex.flows[f].involves(d.id)} or set(a.ptx.flows)
                    run.alive -= hit
                elif d.is_ap and a.src.id in d.stas:
                    d.known[a.src.id] = (now, a.src.queue.has_traffic_for(d.id))
                    if d.bo.counter is None and d.engaged is None and self._has_work(d):
                        sample_backoff(d.bo, self.proto.protocol, d.rng)
        run.txs = []
        if ph.kind == "DATA":
            for f in list(run.alive):
                fl = ex.flows[f]
                if fl.ack_deferred:
                    run.delivered.add(f)
                    run.alive.discard(f)
                    self.by_id[fl.dst].queue.owed_ack[fl.src] = True
        if self.trace is not None:
            self.trace.append({"event": "phase_end", "t": now, "exchange": run.id, "phase": run.idx,
                               "kind": ph.kind, "alive": sorted(run.alive)})
        last = run.idx + 1 >= len(ex.phases)
        if not run.alive and not (last and run.delivered):
            if last:
                self._finish(run, now)
            else:
                nxt = ex.phases[run.idx + 1]
                for r in list(run.members):
                    if r not in run.owners:
                        self._release(r, run)
                self.engine.schedule(now + ex.sifs + nxt.duration, EventKind.TIMER_EXPIRY,
                                     run.owner.id, ("release", run))
        elif last or not run.alive:
            self._finish(run, now)
        else:
            self.engine.schedule(now + ex.sifs, EventKind.TIMER_EXPIRY, run.owner.id, ("phase", run, run.idx + 1))
        self.engine.defer(self._settle, "settle")

    def _on_timer(self, ev):
        what = ev.payload
        if what[0] == "phase":
            self._start_phase(what[1], what[2])
        else:
            self._finish(what[1], self.engine.now)
            self.engine.defer(self._settle, "settle")

    def _release(self, r, run):
        if r.engaged is run:
            r.engaged = None
        run.members.remove(r)
        if r.bo.counter is None and r not in run.owners and self._has_work(r):
            sample_backoff(r.bo, self.proto.protocol, r.rng)

    def _finish(self, run, now):
        if run.done:
            raise ProtocolInvariantError(f"exchange {run.id} finished twice")
        run.done = True
        ex = run.ex
        delivered = run.delivered | run.alive
        for r in list(run.members):
            self._release(r, run)
        self._air_advance(now)
        self.occupying.remove(run)
        self._recompute_dominance()
        payload = self.phy.mpdu_payload
        counted = now >= self.w0
        tallied = list(run.owners)
        for f in ex.flows:
            src = self.by_id[f.src]
            if src not in tallied:
                tallied.append(src)
        bits = 0
        for f in delivered:
            fl = ex.flows[f]
            self.by_id[fl.src].queue.take(fl.dst, fl.mpdus)
            bits += fl.mpdus * payload
        if counted:
            m = self.metrics.nodes
            for r in tallied:
                own = [f for f, fl in enumerate(ex.flows) if fl.src == r.id]
                ok = bool(delivered & set(own)) if own else bool(delivered)
                t = m[r.id]
                t.attempts += 1
                if ok:
                    t.successes += 1
                else:
                    t.collisions += 1
            for f in delivered:
                fl = ex.flows[f]
                m[fl.src].delivered_bits += fl.mpdus * payload
            self.metrics.exchange_bits += bits
        for r in run.owners:
            own = [f for f, fl in enumerate(ex.flows) if fl.src == r.id]
            ok = bool(delivered & set(own)) if own else bool(delivered)
            dropped = record_outcome(r.bo, ok, self.proto.retry_limit)
            if dropped and not r.queue.saturated:
                for f in own:
                    if f not in delivered:
                        fl = ex.flows[f]
                        r.queue.take(fl.dst, min(fl.mpdus, r.queue.backlog.get(fl.dst, 0)))
            r.bo.counter = None
            if self._has_work(r):
                sample_backoff(r.bo, self.proto.protocol, r.rng)
        if self.trace is not None:
            self.trace.append({
                "event": "exchange", "t": now, "exchange": run.id, "kind": ex.kind,
                "initiator": run.owner.id, "owners": [r.id for r in run.owners], "launch": run.launch,
                "end": now, "channels": sorted(run.chanset),
                "delivered": [[ex.flows[f].src, ex.flows[f].dst, ex.flows[f].mpdus] for f in sorted(delivered)],
                "success": bool(delivered),
            })

    # -- airtime ---------------------------------------------------------------------------

    def _recompute_dominance(self):
        occ = sorted(self.occupying, key=lambda r: (r.launch, r.owner.idx))
        for i, r in enumerate(occ):
            r.dominant = not any(o.chanset & r.chanset for o in occ[:i])

    def _air_advance(self, now):
        lo = max(self.air_t, self.w0)
        hi = min(now, self.t_end)
        if hi > lo:
            if not self.occupying:
                self.metrics.idle_ns += hi - lo
            else:
                m = self.metrics.nodes
                for r in self.occupying:
                    if r.dominant:
                        m[r.owner.id].airtime_ns += hi - lo
        if now > self.air_t:
            self.air_t = now


def simulate(scenario, seed: int | None = None, t_end: int | None = None, **kw) -> MetricsRaw:
    return Simulation(scenario, seed, **kw).run(t_end)
