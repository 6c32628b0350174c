"""Reliable byte-stream transport: paced sending, exact-SACK loss recovery,
delivery-rate sampling, and ideal striping of one transfer across N flows.

Striping uses a shared byte pool: every flow claims its next segment from the
transfer's remaining pool, so all flows of a transfer run out of data at the
same time regardless of their individual throughput (the ideal load-balancer
behavior of multi-connection transfer tools).

The receiver keeps full received-range state and the ACK channel is lossless,
so the sender's scoreboard mirrors the receiver exactly and recovery never
retransmits spuriously. A sent range is declared lost after three later
ranges have been SACKed above it, or when it outlives the RTO.
"""

from collections import deque

from .packets import Packet, CE

NS = 1_000_000_000

DUPACK_THRESH = 3
RTO_FLOOR_NS = 200_000_000
RTO_INITIAL_NS = 1_000_000_000
RTO_MAX_NS = 60 * NS

# A packet may leave up to one pacing slot ahead of its schedule. The pacing
# clock still advances from the slot itself, so the cumulative schedule and
# the long-run rate stay exact; inter-packet spacing never shrinks below the
# slot in steady state. The slack lets ACK-clocked sends proceed inline
# instead of arming a wakeup event per packet.
PACE_SLACK_NS = 500


class RateSample:
    """Delivery measurement handed to the congestion control on each ACK."""

    __slots__ = ("delivered_delta_bytes", "interval_ns", "rtt_sample_ns",
                 "is_app_limited", "newly_lost_bytes", "ce_marked",
                 "newly_acked_bytes", "delivered_total_bytes",
                 "prior_delivered_bytes", "inflight_bytes")

    def __init__(self):
        self.delivered_delta_bytes = 0
        self.interval_ns = 0
        self.rtt_sample_ns = 0
        self.is_app_limited = False
        self.newly_lost_bytes = 0
        self.ce_marked = False
        self.newly_acked_bytes = 0
        self.delivered_total_bytes = 0
        self.prior_delivered_bytes = 0
        self.inflight_bytes = 0

    @property
    def delivery_rate_bps(self) -> float:
        if self.interval_ns <= 0:
            return 0.0
        return self.delivered_delta_bytes * 8 * NS / self.interval_ns


class SegRecord:
    __slots__ = ("start", "end", "sent_ns", "is_retx", "delivered_snap",
                 "delivered_t_snap", "first_sent_snap", "app_limited",
                 "epoch", "hole_from")

    def __init__(self, start, end, sent_ns, is_retx, delivered_snap,
                 delivered_t_snap, first_sent_snap, app_limited, epoch):
        self.start = start
        self.end = end
        self.sent_ns = sent_ns
        self.is_retx = is_retx
        self.delivered_snap = delivered_snap
        self.delivered_t_snap = delivered_t_snap
        self.first_sent_snap = first_sent_snap
        self.app_limited = app_limited
        self.epoch = epoch
        self.hole_from = -1


class Transfer:
    """One file moving over one VC, striped across its flows."""

    __slots__ = ("vc_id", "total_bytes", "remaining_pool_bytes", "flows",
                 "start_ns", "end_ns", "delivered_bytes")

    def __init__(self, vc_id: int, total_bytes: int, start_ns: int = 0):
        self.vc_id = vc_id
        self.total_bytes = total_bytes
        self.remaining_pool_bytes = total_bytes
        self.flows = []
        self.start_ns = start_ns
        self.end_ns = None
        self.delivered_bytes = 0

    def claim(self, want: int) -> int:
        take = self.remaining_pool_bytes
        if take > want:
            take = want
        self.remaining_pool_bytes -= take
        return take

    def account_delivered(self, fresh_bytes: int, now_ns: int) -> None:
        self.delivered_bytes += fresh_bytes
        if self.delivered_bytes >= self.total_bytes and self.end_ns is None:
            self.end_ns = now_ns

    @property
    def complete(self) -> bool:
        return self.end_ns is not None or self.total_bytes == 0

    def fct_ns(self) -> int:
        if self.total_bytes == 0:
            return 0
        if self.end_ns is None:
            raise RuntimeError(f"transfer on vc {self.vc_id} not complete")
        return self.end_ns - self.start_ns


class Flow:
    """Sender and receiver state of one TCP-like flow."""

    __slots__ = (
        "flow_id", "vc_id", "transfer", "mss", "wire_overhead", "cc", "ect",
        # cached CC outputs, refreshed after every hook invocation
        "cwnd_bytes", "pacing_rate_bps",
        # sender
        "send_next", "inflight_bytes", "delivered_bytes", "delivered_t_ns",
        "first_sent_ns", "retx_bytes", "packets_sent", "srtt_ns", "rttvar_ns",
        "min_rtt_ns", "rto_ns", "rto_backoff", "next_pace_ns", "pace_slot_ns",
        "outstanding", "send_order", "retx_queue", "max_sacked_end",
        "sack_events", "epoch_counter", "app_limited",
        # receiver
        "rcv_next", "islands", "ack_decimation", "decim_count", "pending_ce",
        "pending_ack_dirty",
        # datapath scheduling marks
        "pace_armed_ns", "rto_armed", "flush_armed",
        # reused rate-sample scratch and trace hooks
        "_rs", "cwnd_trace",
    )

    def __init__(self, flow_id: int, transfer: Transfer, mss: int,
                 wire_overhead: int, cc, ect: bool, ack_decimation: int = 1):
        self.flow_id = flow_id
        self.vc_id = transfer.vc_id
        self.transfer = transfer
        self.mss = mss
        self.wire_overhead = wire_overhead
        self.cc = cc
        self.ect = ect
        cc.attach_flow(self)
        self.cwnd_bytes = cc.cwnd()
        self.pacing_rate_bps = cc.pacing_rate()

        self.send_next = 0
        self.inflight_bytes = 0
        self.delivered_bytes = 0
        self.delivered_t_ns = 0
        self.first_sent_ns = 0
        self.retx_bytes = 0
        self.packets_sent = 0
        self.srtt_ns = None
        self.rttvar_ns = 0
        self.min_rtt_ns = None
        self.rto_ns = RTO_INITIAL_NS
        self.rto_backoff = 1
        self.next_pace_ns = 0.0
        self.pace_slot_ns = PACE_SLACK_NS
        self.outstanding = {}       # start -> SegRecord
        self.send_order = deque()   # (start, epoch) in send order
        self.retx_queue = deque()   # (start, end)
        self.max_sacked_end = 0
        self.sack_events = 0
        self.epoch_counter = 0
        self.app_limited = False

        self.rcv_next = 0
        self.islands = []           # disjoint sorted [start, end) above rcv_next
        self.ack_decimation = ack_decimation
        self.decim_count = 0
        self.pending_ce = False
        self.pending_ack_dirty = False

        self.pace_armed_ns = None
        self.rto_armed = False
        self.flush_armed = False

        self._rs = RateSample()  # reused every ack; CC reads it synchronously
        self.cwnd_trace = None

    # ------------------------------------------------------------------ send

    def try_send(self, now_ns: int, emit):
        """Send as many segments as cwnd and pacing allow. emit(pkt) hands a
        packet to the datapath. Returns the pacing wake time if blocked by
        pacing with quota left, else None."""
        transfer = self.transfer
        retx_queue = self.retx_queue
        outstanding = self.outstanding
        send_order = self.send_order
        cwnd = self.cwnd_bytes
        rate = self.pacing_rate_bps
        ecn = 1 if self.ect else 0
        while True:
            if not retx_queue and transfer.remaining_pool_bytes <= 0:
                return None
            if self.inflight_bytes >= cwnd:
                return None
            if self.next_pace_ns > now_ns + self.pace_slot_ns:
                return int(self.next_pace_ns) + 1
            if retx_queue:
                start, end = retx_queue.popleft()
                is_retx = True
            else:
                take = transfer.claim(self.mss)
                start = self.send_next
                end = start + take
                self.send_next = end
                is_retx = False
            payload = end - start
            if self.inflight_bytes == 0:
                # idle restart: re-anchor the rate-sample window
                self.first_sent_ns = now_ns
                self.delivered_t_ns = now_ns
            epoch = self.epoch_counter + 1
            self.epoch_counter = epoch
            seg = SegRecord(start, end, now_ns, is_retx, self.delivered_bytes,
                            self.delivered_t_ns or now_ns, self.first_sent_ns,
                            transfer.remaining_pool_bytes == 0, epoch)
            outstanding[start] = seg
            send_order.append((start, epoch))
            self.inflight_bytes += payload
            self.packets_sent += 1
            if is_retx:
                self.retx_bytes += payload
            pkt = Packet(self.packets_sent, self.flow_id, self.vc_id,
                         start, end, payload, payload + self.wire_overhead,
                         ecn=ecn, is_retx=is_retx, sent_at=now_ns)
            base = self.next_pace_ns
            if base < now_ns:
                base = now_ns
            slot = payload * 8 * NS / rate
            self.pace_slot_ns = slot
            self.next_pace_ns = base + slot
            emit(pkt, now_ns)

    # --------------------------------------------------------------- receive

    def receive(self, seq_start: int, seq_end: int, ecn: int, t_rx_ns: int):
        """Receiver-side processing of one delivered data packet. Returns an
        ack tuple (cum, sack_lo, sack_hi, ce) or None when the ack is held
        back by decimation."""
        if (seq_start == self.rcv_next and not self.islands and ecn != CE
                and self.ack_decimation == 1):
            # fast path: in-order segment, immediate ack
            self.rcv_next = seq_end
            self.transfer.account_delivered(seq_end - seq_start, t_rx_ns)
            return (seq_end, seq_start, seq_end, False)
        fresh = 0
        if seq_end <= self.rcv_next:
            pass  # duplicate of already-consumed data
        elif seq_start <= self.rcv_next:
            fresh = seq_end - self.rcv_next
            fresh -= self._covered_by_islands(self.rcv_next, seq_end)
            self.rcv_next = seq_end
            islands = self.islands
            while islands and islands[0][0] <= self.rcv_next:
                s, e = islands.pop(0)
                if e > self.rcv_next:
                    self.rcv_next = e
        else:
            fresh = self._insert_island(seq_start, seq_end)
        if fresh > 0:
            self.transfer.account_delivered(fresh, t_rx_ns)
        ce = ecn == CE
        if ce:
            self.pending_ce = True
        self.decim_count += 1
        out_of_order = seq_start > self.rcv_next or bool(self.islands)
        if out_of_order or self.decim_count >= self.ack_decimation or ce:
            ack = (self.rcv_next, seq_start, seq_end, self.pending_ce)
            self.decim_count = 0
            self.pending_ce = False
            self.pending_ack_dirty = False
            return ack
        self.pending_ack_dirty = True
        return None

    def flush_ack(self):
        """Delayed-ack flush (only reachable with ack_decimation > 1)."""
        if not self.pending_ack_dirty:
            return None
        self.decim_count = 0
        self.pending_ack_dirty = False
        ce = self.pending_ce
        self.pending_ce = False
        return (self.rcv_next, self.rcv_next, self.rcv_next, ce)

    def _island_index(self, start):
        """Index of the first island whose start is >= start."""
        islands = self.islands
        lo, hi = 0, len(islands)
        while lo < hi:
            mid = (lo + hi) // 2
            if islands[mid][0] < start:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def _covered_by_islands(self, start, end):
        islands = self.islands
        if not islands:
            return 0
        i = self._island_index(start)
        if i > 0 and islands[i - 1][1] > start:
            i -= 1
        covered = 0
        while i < len(islands):
            s, e = islands[i]
            if s >= end:
                break
            o = (e if e < end else end) - (s if s > start else start)
            if o > 0:
                covered += o
            i += 1
        return covered

    def _insert_island(self, start, end):
        """Insert [start,end) above rcv_next; returns newly covered bytes."""
        islands = self.islands
        if not islands:
            islands.append([start, end])
            return end - start
        last = islands[-1]
        if start == last[1]:  # extend-at-end: the dominant recovery pattern
            last[1] = end
            return end - start
        if start > last[1]:
            islands.append([start, end])
            return end - start
        i = self._island_index(start)
        if i > 0 and islands[i - 1][1] >= start:
            i -= 1
        # merge every island overlapping or adjacent to [start, end)
        fresh = end - start
        j = i
        while j < len(islands) and islands[j][0] <= end:
            s, e = islands[j]
            o = (e if e < end else end) - (s if s > start else start)
            if o > 0:
                fresh -= o
            if s < start:
                start = s
            if e > end:
                end = e
            j += 1
        if j == i:  # no overlap: plain insert before i
            islands.insert(i, [start, end])
        else:
            islands[i:j] = [[start, end]]
        return fresh if fresh > 0 else 0

    # ------------------------------------------------------------------ acks

    def handle_ack(self, cum: int, sack_lo: int, sack_hi: int, ce: bool,
                   now_ns: int) -> bool:
        """Integrate one ack at the sender. Returns True when sending may
        resume (window space or queued retransmissions)."""
        od = self.outstanding
        order = self.send_order
        newly_acked = 0
        newest = None

        seg = od.get(sack_lo)
        if seg is not None and seg.end <= sack_hi:
            del od[sack_lo]
            newly_acked += seg.end - seg.start
            newest = seg
        # sweep cum-covered segments off the front (decimated/cumulative acks)
        while order:
            start, epoch = order[0]
            s = od.get(start)
            if s is None or s.epoch != epoch:
                order.popleft()
                continue
            if s.end <= cum:
                order.popleft()
                del od[start]
                newly_acked += s.end - s.start
                if newest is None or s.sent_ns > newest.sent_ns:
                    newest = s
                continue
            break

        if newly_acked:
            self.inflight_bytes -= newly_acked
            self.delivered_bytes += newly_acked
            self.delivered_t_ns = now_ns
            self.rto_backoff = 1

        rtt_sample = 0
        if newest is not None:
            self.first_sent_ns = newest.sent_ns  # advance rate-window anchor
            if not newest.is_retx:
                rtt_sample = now_ns - newest.sent_ns
                self._update_rtt(rtt_sample)

        # every SACK above the cumulative point is a dup indication for the
        # holes below it (retransmission deliveries count too)
        if sack_lo > cum:
            self.sack_events += 1
            if sack_hi > self.max_sacked_end:
                self.max_sacked_end = sack_hi
        if self.max_sacked_end > cum:
            newly_lost = self._detect_losses(now_ns)
        else:
            newly_lost = 0  # no hole below the highest SACK: nothing to scan

        rs = self._rs
        rs.newly_acked_bytes = newly_acked
        rs.newly_lost_bytes = newly_lost
        rs.ce_marked = ce
        rs.inflight_bytes = self.inflight_bytes
        rs.delivered_total_bytes = self.delivered_bytes
        if newest is not None:
            rs.rtt_sample_ns = rtt_sample
            rs.prior_delivered_bytes = newest.delivered_snap
            rs.delivered_delta_bytes = self.delivered_bytes - newest.delivered_snap
            ack_elapsed = now_ns - newest.delivered_t_snap
            send_elapsed = newest.sent_ns - newest.first_sent_snap
            rs.interval_ns = max(ack_elapsed, send_elapsed)
            rs.is_app_limited = newest.app_limited

        cc = self.cc
        if newly_lost:
            cc.on_loss(newly_lost, now_ns)
        if ce:
            cc.on_ce(now_ns)
        if newest is not None:
            cc.on_ack(rs, now_ns)
        self.cwnd_bytes = cc.cwnd()
        self.pacing_rate_bps = cc.pacing_rate()
        if self.cwnd_trace is not None:
            self.cwnd_trace.append((now_ns, self.cwnd_bytes))
        return newly_acked > 0 or newly_lost > 0

    def _update_rtt(self, sample_ns):
        if self.min_rtt_ns is None or sample_ns < self.min_rtt_ns:
            self.min_rtt_ns = sample_ns
        if self.srtt_ns is None:
            self.srtt_ns = sample_ns
            self.rttvar_ns = sample_ns // 2
        else:
            err = sample_ns - self.srtt_ns
            self.srtt_ns += err >> 3
            self.rttvar_ns += (abs(err) - self.rttvar_ns) >> 2
        rto = self.srtt_ns + 4 * self.rttvar_ns
        self.rto_ns = rto if rto > RTO_FLOOR_NS else RTO_FLOOR_NS

    def _detect_losses(self, now_ns) -> int:
        """Front-scan the send-order queue for ranges with >= DUPACK_THRESH
        SACK events above them. Returns payload bytes newly marked lost."""
        od = self.outstanding
        order = self.send_order
        lost = 0
        while order:
            start, epoch = order[0]
            seg = od.get(start)
            if seg is None or seg.epoch != epoch:
                order.popleft()
                continue
            if seg.end > self.max_sacked_end:
                break
            if seg.hole_from < 0:
                seg.hole_from = self.sack_events - 1
            if self.sack_events - seg.hole_from >= DUPACK_THRESH:
                order.popleft()
                del od[start]
                payload = seg.end - seg.start
                self.inflight_bytes -= payload
                lost += payload
                self.retx_queue.append((seg.start, seg.end))
                continue
            break
        return lost

    # ------------------------------------------------------------------- rto

    def rto_deadline_ns(self):
        """Absolute deadline of the oldest outstanding segment, or None."""
        od = self.outstanding
        order = self.send_order
        while order:
            start, epoch = order[0]
            seg = od.get(start)
            if seg is None or seg.epoch != epoch:
                order.popleft()
                continue
            return seg.sent_ns + self.rto_ns * self.rto_backoff
        return None

    def on_rto_fire(self, now_ns) -> int:
        """Mark every outstanding segment older than the RTO as lost.
        Returns payload bytes marked; 0 means the timer was stale."""
        od = self.outstanding
        order = self.send_order
        horizon = now_ns - self.rto_ns * self.rto_backoff
        lost = 0
        while order:
            start, epoch = order[0]
            seg = od.get(start)
            if seg is None or seg.epoch != epoch:
                order.popleft()
                continue
            if seg.sent_ns > horizon:
                break
            order.popleft()
            del od[start]
            payload = seg.end - seg.start
            self.inflight_bytes -= payload
            lost += payload
            self.retx_queue.append((seg.start, seg.end))
        if lost:
            self.rto_backoff = min(self.rto_backoff * 2, 64)
            self.cc.on_rto(now_ns)
            self.cwnd_bytes = self.cc.cwnd()
            self.pacing_rate_bps = self.cc.pacing_rate()
        return lost
