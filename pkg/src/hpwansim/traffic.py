"""Traffic conditioning: hard leaky-bucket policer, per-VC shaper, EF scheduler.

All token arithmetic is exact. Token state is kept in scaled integer units of
byte-per-8e9 (so a refill over dt nanoseconds is exactly cir_bps * dt), and
paced release clocks carry their division remainder forward, so no float
drift accumulates over billion-packet runs.
"""

from collections import deque
from dataclasses import dataclass

_SCALE = 8 * 10**9  # token units per byte


@dataclass
class LeakyBucketProfile:
    """Committed rate / burst of a VC's ingress profile."""
    cir_bps: int
    cbs_bytes: int

    def __post_init__(self):
        if self.cir_bps <= 0:
            raise ValueError("cir_bps must be positive")
        if self.cbs_bytes <= 0:
            raise ValueError("cbs_bytes must be positive")


class Policer:
    """Hard ingress policer: drops every packet that violates the profile.

    No buffering, no marking. Tokens refill at cir since the last update,
    capped at cbs; a packet passes iff a full wire_bytes worth of tokens is
    available at its arrival instant.
    """

    __slots__ = ("cir_bps", "cbs_bytes", "_tokens", "_cap", "_last_ns", "drops")

    def __init__(self, profile: LeakyBucketProfile, start_ns: int = 0):
        self.cir_bps = profile.cir_bps
        self.cbs_bytes = profile.cbs_bytes
        self._cap = profile.cbs_bytes * _SCALE
        self._tokens = self._cap  # bucket starts full
        self._last_ns = start_ns
        self.drops = 0

    @property
    def tokens_bytes(self) -> float:
        return self._tokens / _SCALE

    def police(self, now_ns: int, wire_bytes: int) -> bool:
        """True = Pass, False = Drop. Tokens are refilled either way."""
        tokens = self._tokens + self.cir_bps * (now_ns - self._last_ns)
        if tokens > self._cap:
            tokens = self._cap
        self._last_ns = now_ns
        cost = wire_bytes * _SCALE
        if tokens >= cost:
            self._tokens = tokens - cost
            return True
        self._tokens = tokens
        self.drops += 1
        return False


class VcShaper:
    """Per-VC paced release: delays packets so departures never exceed the
    rate envelope (rate_bps * t plus a single packet of burst).

    Packets queue FIFO; a packet offered while the backlog exceeds the cap is
    dropped and counted (an unbounded shaper queue would mask congestion
    control misbehavior). The shaper queue lives on a routing VM, so it also
    carries the ECN marking threshold; ECT packets offered above it report a
    CE mark.
    """

    __slots__ = ("rate_bps", "backlog_cap_bytes", "ecn_threshold_bytes",
                 "backlog_bytes", "_next_release_ns", "_rem", "drops",
                 "ce_marks")

    def __init__(self, rate_bps: int, backlog_cap_bytes: int,
                 ecn_threshold_bytes: int | None = None):
        if rate_bps <= 0:
            raise ValueError("shaper rate must be positive")
        self.rate_bps = rate_bps
        self.backlog_cap_bytes = backlog_cap_bytes
        self.ecn_threshold_bytes = (backlog_cap_bytes if ecn_threshold_bytes is None
                                    else ecn_threshold_bytes)
        self.backlog_bytes = 0
        self._next_release_ns = 0
        self._rem = 0
        self.drops = 0
        self.ce_marks = 0

    def offer(self, now_ns: int, wire_bytes: int, ect: bool = False):
        """(release_ns, ce) for this packet, or (None, False) if the backlog
        cap rejects it."""
        backlog = self.backlog_bytes + wire_bytes
        if backlog > self.backlog_cap_bytes:
            self.drops += 1
            return None, False
        release = self._next_release_ns
        if release < now_ns:
            release = now_ns
        delta, self._rem = divmod(wire_bytes * _SCALE + self._rem, self.rate_bps)
        self._next_release_ns = release + delta
        self.backlog_bytes = backlog
        ce = ect and backlog > self.ecn_threshold_bytes
        if ce:
            self.ce_marks += 1
        return release, ce

    def released(self, wire_bytes: int) -> None:
        """Account a packet leaving the shaper (called at its release time)."""
        self.backlog_bytes -= wire_bytes


class TokenBucket:
    """Generic exact token bucket used for EF shaping."""

    __slots__ = ("rate_bps", "_cap", "_tokens", "_last_ns")

    def __init__(self, rate_bps: int, burst_bytes: int, start_ns: int = 0):
        self.rate_bps = rate_bps
        self._cap = burst_bytes * _SCALE
        self._tokens = self._cap
        self._last_ns = start_ns

    def _refill(self, now_ns: int) -> int:
        tokens = self._tokens + self.rate_bps * (now_ns - self._last_ns)
        return tokens if tokens < self._cap else self._cap

    def conforms(self, now_ns: int, wire_bytes: int) -> bool:
        return self._refill(now_ns) >= wire_bytes * _SCALE

    def eligible_at(self, now_ns: int, wire_bytes: int) -> int:
        """Earliest instant >= now at which wire_bytes conforms."""
        tokens = self._refill(now_ns)
        cost = wire_bytes * _SCALE
        if tokens >= cost:
            return now_ns
        deficit = cost - tokens
        # ceil division: wait until the deficit has refilled
        return now_ns + (deficit + self.rate_bps - 1) // self.rate_bps

    def consume(self, now_ns: int, wire_bytes: int) -> None:
        self._tokens = self._refill(now_ns) - wire_bytes * _SCALE
        self._last_ns = now_ns


class EfScheduler:
    """Strict-priority two-class scheduler: an expedited-forwarding queue
    shaped to a fraction of the link rate, plus a best-effort queue.

    An EF packet is served whenever the EF bucket permits; best-effort is
    served only when EF is empty or out of tokens. ef_dequeue() is the
    pull-model contract; transit() is the equivalent fast path used by the
    datapath, valid because simulated scenarios carry EF traffic only.
    """

    __slots__ = ("link_rate_bps", "ef_rate_bps", "bucket", "ef_queue",
                 "be_queue", "ef_occupancy", "ef_capacity_bytes", "drops",
                 "_link_free_ns", "_link_rem", "_inflight")

    def __init__(self, link_rate_bps: int, ef_fraction: float,
                 burst_bytes: int, ef_capacity_bytes: int):
        self.link_rate_bps = link_rate_bps
        self.ef_rate_bps = int(link_rate_bps * ef_fraction)
        self.bucket = TokenBucket(self.ef_rate_bps, burst_bytes)
        self.ef_queue = deque()
        self.be_queue = deque()
        self.ef_occupancy = 0
        self.ef_capacity_bytes = ef_capacity_bytes
        self.drops = 0
        self._link_free_ns = 0
        self._link_rem = 0
        self._inflight = deque()  # (departure_ns, wire_bytes) for occupancy expiry

    # -- pull-model contract ------------------------------------------------

    def enqueue_ef(self, pkt) -> bool:
        if self.ef_occupancy + pkt.wire_bytes > self.ef_capacity_bytes:
            self.drops += 1
            return False
        self.ef_queue.append(pkt)
        self.ef_occupancy += pkt.wire_bytes
        return True

    def enqueue_be(self, pkt) -> None:
        self.be_queue.append(pkt)

    def ef_dequeue(self, now_ns: int):
        """Next packet to transmit at now_ns, or None if nothing is eligible."""
        if self.ef_queue and self.bucket.conforms(now_ns, self.ef_queue[0].wire_bytes):
            pkt = self.ef_queue.popleft()
            self.ef_occupancy -= pkt.wire_bytes
            self.bucket.consume(now_ns, pkt.wire_bytes)
            return pkt
        if self.be_queue:
            return self.be_queue.popleft()
        return None

    # -- push-model fast path -----------------------------------------------

    def transit(self, now_ns: int, wire_bytes: int):
        """Departure time of an EF packet entering at now_ns, or None if the
        EF buffer is full. Shares the token bucket with ef_dequeue()."""
        inflight = self._inflight
        occ = self.ef_occupancy
        while inflight and inflight[0][0] <= now_ns:
            occ -= inflight.popleft()[1]
        if occ + wire_bytes > self.ef_capacity_bytes:
            self.ef_occupancy = occ
            self.drops += 1
            return None
        # inlined bucket eligible_at + consume, settled at the service start
        bucket = self.bucket
        rate = bucket.rate_bps
        cap = bucket._cap
        cost = wire_bytes * _SCALE
        tokens_now = bucket._tokens + rate * (now_ns - bucket._last_ns)
        if tokens_now > cap:
            tokens_now = cap
        if tokens_now >= cost:
            start = now_ns
        else:
            start = now_ns + (cost - tokens_now + rate - 1) // rate
        if start < self._link_free_ns:
            start = self._link_free_ns
        tokens = bucket._tokens + rate * (start - bucket._last_ns)
        if tokens > cap:
            tokens = cap
        bucket._tokens = tokens - cost
        bucket._last_ns = start
        ser, self._link_rem = divmod(wire_bytes * 8 * 10**9 + self._link_rem,
                                     self.link_rate_bps)
        departure = start + ser
        self._link_free_ns = departure
        self.ef_occupancy = occ + wire_bytes
        inflight.append((departure, wire_bytes))
        return departure
