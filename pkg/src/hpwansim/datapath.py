"""Per-trial wiring of the massive-transfer data path.

Forward chain of one VC:

  sender DTN --(NIC link)--> edge router [forwarder, optional per-VC shaper]
    --(link)--> source router [forwarder] -> VC ingress policer
    --> WAN link 1 [EF scheduler] --> WAN link 2 [EF scheduler]
    --> destination router [forwarder] --(propagation)--> access hop
    [microburst gate] --> receiver DTN

Every element along the chain is clock-based, so a packet is pushed through
the entire chain inside the event that releases it (pacing release, or shaper
release when shaping is on). Only three event classes exist per packet: the
paced send, the optional shaper release, and a single receive event that runs
the receiver and, shifted by the ACK path delay, the sender's ACK processing.
Propagation is applied as a per-VC constant after the shared elements, which
is statistically equivalent and keeps shared clocks hot.

ACKs ride an ideal reverse path (no loss, no jitter, half the base RTT), per
the modeling default.
"""

from .engine import Engine
from .netmodel import ByteQueue, ForwarderStation, ForwarderModel, Link, \
    MicroburstGate, MicroburstModel
from .packets import CE
import gc

from .traffic import EfScheduler, LeakyBucketProfile, Policer, VcShaper
from .transport import Flow, Transfer
from .cc import make_cc
from .scenarios import ScenarioConfig, resolve_topology

NS = 1_000_000_000

ACK_FLUSH_DELAY_NS = 500_000  # delayed-ack flush when decimation holds acks

# A shaper release this close in the future is processed inline instead of
# through an event. Cross-VC service order at shared downstream stations can
# then skew by up to this horizon (per-VC FIFO stays exact); the bound keeps
# the skew well under a propagation delay while removing one event per packet
# whenever the shaper runs without backlog.
INLINE_HORIZON_NS = 50_000


class VcRuntime:
    __slots__ = ("vc_id", "rate_bps", "base_rtt_ns", "prop_oneway_ns",
                 "ack_delay_ns", "transfer", "flows", "nic", "er", "shaper",
                 "er_link", "router", "policer", "wan1", "wan2", "rx_fwd",
                 "access", "tx_gate", "sent_pkts", "delivered_pkts",
                 "drops_forwarder", "drops_queue", "drops_microburst",
                 "drops_shaper", "ce_marks")

    def __init__(self, vc_id, rate_bps, base_rtt_ns):
        self.vc_id = vc_id
        self.rate_bps = rate_bps
        self.base_rtt_ns = base_rtt_ns
        self.prop_oneway_ns = base_rtt_ns // 2
        self.ack_delay_ns = base_rtt_ns - self.prop_oneway_ns
        self.transfer = None
        self.flows = []
        self.nic = None
        self.er = None
        self.shaper = None
        self.er_link = None
        self.router = None
        self.policer = None
        self.wan1 = None
        self.wan2 = None
        self.rx_fwd = None
        self.access = None
        self.tx_gate = None
        self.sent_pkts = 0
        self.delivered_pkts = 0
        self.drops_forwarder = 0
        self.drops_queue = 0
        self.drops_microburst = 0
        self.drops_shaper = 0
        self.ce_marks = 0


class VcTrialStats:
    __slots__ = ("vc_id", "rate_bps", "fct_ns", "retx_bytes", "packets_sent",
                 "packets_delivered", "drops_policer", "drops_queue",
                 "drops_microburst", "drops_forwarder", "drops_shaper",
                 "ce_marks")

    def __init__(self, **kw):
        for k, v in kw.items():
            setattr(self, k, v)


def _bdp_bytes(rate_bps: int, rtt_ns: int) -> int:
    return max(int(rate_bps * rtt_ns / (8 * NS)), 1)


class TrialSim:
    """One deterministic trial: builds the station graph for the scenario,
    runs all transfers to completion, and reports per-VC statistics."""

    def __init__(self, cfg: ScenarioConfig, seed: int,
                 goodput_sample_ns: int | None = None):
        self.cfg = cfg
        self.seed = seed
        self.engine = Engine(seed, cfg.event_cap)
        self.goodput_sample_ns = goodput_sample_ns
        self.goodput_samples = {}  # vc_id -> [(t_ns, delivered_bytes)]
        topo = resolve_topology(cfg)
        fwd_kind = cfg.forwarder_kind()
        shaping = cfg.shaping_enabled()
        wire = cfg.wire_bytes

        def forwarder_model():
            f = cfg.forwarder
            return ForwarderModel(
                fwd_kind,
                pps_capacity=f.linux_pps if fwd_kind == "linux" else None,
                delay_median_ns=f.linux_jitter_median_ns,
                delay_sigma=f.linux_jitter_sigma,
                delay_cap_ns=f.linux_jitter_cap_ns,
                dpdk_delay_ns=f.dpdk_delay_ns)

        # shared-station queue sizing uses the largest BDP among its VCs
        def station_queue(vc_ids):
            bdp = max(_bdp_bytes(v.rate_bps, v.base_rtt_ns)
                      for v in topo.vcs if v.vc_id in vc_ids)
            return ByteQueue(int(cfg.queue.capacity_bdp * bdp),
                             int(cfg.queue.ecn_threshold_bdp * bdp))

        def group_members(grouping, idx):
            return {v.vc_id for v in topo.vcs if grouping[v.vc_id] == idx}

        ers = [ForwarderStation(forwarder_model(),
                                station_queue(group_members(topo.er_group, g)),
                                self.engine.rng(f"fwd.er{g}"))
               for g in range(topo.n_er)]
        routers = [ForwarderStation(forwarder_model(),
                                    station_queue(group_members(topo.r_group, g)),
                                    self.engine.rng(f"fwd.r{g}"))
                   for g in range(topo.n_r)]
        rx_fwds = [ForwarderStation(forwarder_model(),
                                    station_queue(group_members(topo.dest_group, g)),
                                    self.engine.rng(f"fwd.rx{g}"))
                   for g in range(topo.n_dest)]
        er_links = [Link(cfg.link_rate_bps) for _ in range(topo.n_er)]
        ef_burst = cfg.ef.burst_packets * wire
        wan1 = [EfScheduler(cfg.link_rate_bps, cfg.ef.fraction, ef_burst,
                            cfg.ef.queue_bytes) for _ in range(topo.n_r)]
        wan2 = [EfScheduler(cfg.link_rate_bps, cfg.ef.fraction, ef_burst,
                            cfg.ef.queue_bytes) for _ in range(topo.n_dest)]

        max_id = max(v.vc_id for v in topo.vcs)
        self.vcs = [None] * (max_id + 1)  # indexed by vc_id
        self.vc_list = []
        self.flows = []
        ect = cfg.cc == "cubic" if "ect" not in cfg.cc_params \
            else bool(cfg.cc_params["ect"])
        for v in topo.vcs:
            vc = VcRuntime(v.vc_id, v.rate_bps, v.base_rtt_ns)
            vc.nic = Link(cfg.link_rate_bps)
            vc.er = ers[topo.er_group[v.vc_id]]
            vc.er_link = er_links[topo.er_group[v.vc_id]]
            vc.router = routers[topo.r_group[v.vc_id]]
            cir = cfg.policer.cir_bps or v.rate_bps
            vc.policer = Policer(LeakyBucketProfile(cir, cfg.policer.cbs_bytes))
            if shaping:
                rate = cfg.shaper.rate_bps or v.rate_bps
                bdp = _bdp_bytes(v.rate_bps, v.base_rtt_ns)
                vc.shaper = VcShaper(
                    rate, int(cfg.shaper.backlog_bdp * bdp),
                    int(cfg.queue.ecn_threshold_bdp * bdp))
            vc.wan1 = wan1[topo.r_group[v.vc_id]]
            vc.wan2 = wan2[topo.dest_group[v.vc_id]]
            vc.rx_fwd = rx_fwds[topo.dest_group[v.vc_id]]
            mb = cfg.microburst
            if mb.enabled:
                model = MicroburstModel(
                    enabled=True, location=mb.location,
                    shallow_buffer_bytes=mb.shallow_buffer_bytes,
                    burst_rate_hz=mb.burst_rate_hz,
                    burst_mean_bytes=mb.burst_mean_bytes,
                    line_rate_bps=mb.line_rate_bps,
                    train_mean_bursts=mb.train_mean_bursts,
                    train_gap_ns=mb.train_gap_ns)
                gate = MicroburstGate(model, self.engine.rng(f"uburst.vc{v.vc_id}"))
                if mb.location == "rx-access":
                    vc.access = gate
                else:
                    vc.tx_gate = gate
            transfer = Transfer(v.vc_id, cfg.file_bytes)
            vc.transfer = transfer
            for i in range(cfg.flows_per_vc):
                cc = make_cc(cfg.cc, cfg.mss, cfg.cc_params,
                             self.engine.rng(f"cc.vc{v.vc_id}.f{i}"))
                flow = Flow(len(self.flows), transfer, cfg.mss,
                            cfg.framing_bytes, cc, ect, cfg.ack_decimation)
                if cfg.trace_cc:
                    flow.cwnd_trace = []
                transfer.flows.append(flow)
                vc.flows.append(flow)
                self.flows.append(flow)
            self.vcs[v.vc_id] = vc
            self.vc_list.append(vc)

    # ------------------------------------------------------------- handlers

    def _pump(self, flow, now):
        # pacing-gated with a wakeup already armed: nothing can send yet
        if flow.pace_armed_ns is None or flow.next_pace_ns <= now + flow.pace_slot_ns:
            wake = flow.try_send(now, self._chain)
            if wake is not None and flow.pace_armed_ns is None:
                flow.pace_armed_ns = wake
                self.engine.schedule(wake, self._on_pace, flow)
        if flow.outstanding and not flow.rto_armed:
            deadline = flow.rto_deadline_ns()
            if deadline is not None:
                flow.rto_armed = True
                self.engine.schedule(max(deadline, now), self._on_rto, flow)

    def _on_pace(self, t, flow):
        flow.pace_armed_ns = None
        self._pump(flow, t)

    def _on_rto(self, t, flow):
        flow.rto_armed = False
        deadline = flow.rto_deadline_ns()
        if deadline is None:
            return
        if deadline > t:
            flow.rto_armed = True
            self.engine.schedule(deadline, self._on_rto, flow)
            return
        lost = flow.on_rto_fire(t)
        if lost:
            self._pump(flow, t)
        elif flow.outstanding:
            flow.rto_armed = True
            self.engine.schedule(flow.rto_deadline_ns(), self._on_rto, flow)

    def _chain(self, pkt, now):
        """Sender-side chain: NIC, edge router, (shaper), and onward."""
        vc = self.vcs[pkt.vc_id]
        vc.sent_pkts += 1
        w = pkt.wire_bytes
        if vc.tx_gate is not None:
            ok, qdelay = vc.tx_gate.step(now, w)
            if not ok:
                vc.drops_microburst += 1
                return
            now += qdelay
        # NIC serialization, inlined Link.transmit
        nic = vc.nic
        start = now if now > nic._free_ns else nic._free_ns
        ser, nic._rem = divmod(w * 8_000_000_000 + nic._rem, nic.rate_bps)
        nic._free_ns = t = start + ser
        dep, ecn = vc.er.process(t, w, pkt.ecn)
        if dep is None:
            vc.drops_forwarder += 1
            return
        pkt.ecn = ecn
        shaper = vc.shaper
        if shaper is not None:
            release, ce = shaper.offer(dep, w, ecn == 1)
            if release is None:
                vc.drops_shaper += 1
                return
            if ce:
                pkt.ecn = CE
            if release - now > INLINE_HORIZON_NS:
                self.engine.schedule(release, self._on_shaper_release, pkt)
                return
            shaper.released(w)
            dep = release
        self._chain_tail(vc, pkt, dep)

    def _on_shaper_release(self, t, pkt):
        vc = self.vcs[pkt.vc_id]
        vc.shaper.released(pkt.wire_bytes)
        self._chain_tail(vc, pkt, t)

    def _chain_tail(self, vc, pkt, t):
        w = pkt.wire_bytes
        # edge-router-to-router link, inlined Link.transmit
        link = vc.er_link
        start = t if t > link._free_ns else link._free_ns
        ser, link._rem = divmod(w * 8_000_000_000 + link._rem, link.rate_bps)
        link._free_ns = t = start + ser
        dep, ecn = vc.router.process(t, w, pkt.ecn)
        if dep is None:
            vc.drops_forwarder += 1
            return
        pkt.ecn = ecn
        # VC ingress policer, inlined Policer.police
        pol = vc.policer
        tokens = pol._tokens + pol.cir_bps * (dep - pol._last_ns)
        if tokens > pol._cap:
            tokens = pol._cap
        pol._last_ns = dep
        cost = w * 8_000_000_000
        if tokens < cost:
            pol._tokens = tokens
            pol.drops += 1
            return
        pol._tokens = tokens - cost
        # two WAN hops, inlined EfScheduler.transit
        t = dep
        for ef in (vc.wan1, vc.wan2):
            inflight = ef._inflight
            occ = ef.ef_occupancy
            while inflight and inflight[0][0] <= t:
                occ -= inflight.popleft()[1]
            if occ + w > ef.ef_capacity_bytes:
                ef.ef_occupancy = occ
                ef.drops += 1
                vc.drops_queue += 1
                return
            bucket = ef.bucket
            rate = bucket.rate_bps
            cap = bucket._cap
            tokens = bucket._tokens + rate * (t - bucket._last_ns)
            if tokens > cap:
                tokens = cap
            if tokens >= cost:
                start = t
            else:
                start = t + (cost - tokens + rate - 1) // rate
                tokens = bucket._tokens + rate * (start - bucket._last_ns)
                if tokens > cap:
                    tokens = cap
            if start < ef._link_free_ns:
                start = ef._link_free_ns
                tokens = bucket._tokens + rate * (start - bucket._last_ns)
                if tokens > cap:
                    tokens = cap
            bucket._tokens = tokens - cost
            bucket._last_ns = start
            ser, ef._link_rem = divmod(cost + ef._link_rem, ef.link_rate_bps)
            t = start + ser
            ef._link_free_ns = t
            ef.ef_occupancy = occ + w
            inflight.append((t, w))
        dep, ecn = vc.rx_fwd.process(t, w, pkt.ecn)
        if dep is None:
            vc.drops_forwarder += 1
            return
        pkt.ecn = ecn
        self.engine.schedule(dep + vc.prop_oneway_ns + vc.ack_delay_ns,
                             self._on_rx, pkt)

    def _on_rx(self, t_event, pkt):
        """Receiver processing (at the packet's logical arrival time) merged
        with the sender's ACK processing (now, one ACK delay later)."""
        vc = self.vcs[pkt.vc_id]
        t_rx = t_event - vc.ack_delay_ns
        if vc.access is not None:
            ok, qdelay = vc.access.step(t_rx, pkt.wire_bytes)
            if not ok:
                vc.drops_microburst += 1
                return
            t_rx += qdelay
        vc.delivered_pkts += 1
        if pkt.ecn == CE:
            vc.ce_marks += 1
        flow = self.flows[pkt.flow_id]
        ack = flow.receive(pkt.seq_start, pkt.seq_end, pkt.ecn, t_rx)
        if ack is None:
            if not flow.flush_armed:
                flow.flush_armed = True
                self.engine.schedule(t_event + ACK_FLUSH_DELAY_NS,
                                     self._on_ack_flush, flow)
            return
        flow.handle_ack(ack[0], ack[1], ack[2], ack[3], t_event)
        self._pump(flow, t_event)

    def _on_ack_flush(self, t, flow):
        flow.flush_armed = False
        ack = flow.flush_ack()
        if ack is not None:
            flow.handle_ack(ack[0], ack[1], ack[2], ack[3], t)
            self._pump(flow, t)

    def _on_goodput_sample(self, t, _):
        done = True
        for vc in self.vc_list:
            self.goodput_samples.setdefault(vc.vc_id, []).append(
                (t, vc.transfer.delivered_bytes))
            if not vc.transfer.complete:
                done = False
        if not done:
            self.engine.schedule(t + self.goodput_sample_ns,
                                 self._on_goodput_sample, None)

    # ------------------------------------------------------------------ run

    def run(self):
        """Returns (vc_stats, problems). problems is non-empty when a
        conservation or completion check failed."""
        cfg = self.cfg
        if cfg.file_bytes > 0:
            for flow in self.flows:
                self._pump(flow, 0)
            if self.goodput_sample_ns:
                self.engine.schedule(self.goodput_sample_ns,
                                     self._on_goodput_sample, None)
            # the event loop allocates heavily but acyclically; cycle
            # collection only adds scan pauses
            gc_was_enabled = gc.isenabled()
            gc.disable()
            try:
                self.engine.run_until(None)
            finally:
                if gc_was_enabled:
                    gc.enable()
        problems = []
        stats = []
        for vc in self.vc_list:
            vc_id = vc.vc_id
            if cfg.file_bytes > 0 and not vc.transfer.complete:
                problems.append(
                    f"vc {vc_id}: transfer incomplete "
                    f"({vc.transfer.delivered_bytes}/{vc.transfer.total_bytes} bytes)")
                continue
            accounted = (vc.delivered_pkts + vc.policer.drops + vc.drops_queue
                         + vc.drops_microburst + vc.drops_forwarder
                         + vc.drops_shaper)
            if vc.sent_pkts != accounted:
                problems.append(
                    f"vc {vc_id}: conservation violated: sent {vc.sent_pkts} "
                    f"!= delivered+drops {accounted}")
                continue
            stats.append(VcTrialStats(
                vc_id=vc_id, rate_bps=vc.rate_bps,
                fct_ns=vc.transfer.fct_ns(),
                retx_bytes=sum(f.retx_bytes for f in vc.flows),
                packets_sent=vc.sent_pkts,
                packets_delivered=vc.delivered_pkts,
                drops_policer=vc.policer.drops,
                drops_queue=vc.drops_queue,
                drops_microburst=vc.drops_microburst,
                drops_forwarder=vc.drops_forwarder,
                drops_shaper=vc.drops_shaper,
                ce_marks=vc.ce_marks))
        return stats, problems
