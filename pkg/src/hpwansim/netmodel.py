"""Network path elements: links, router queues, forwarder models, and the
microburst cross-traffic loss injector.

Every element keeps O(1) clock state and is driven in packet-arrival order,
so the datapath can push a packet through a whole chain of elements inside a
single event. Serialization clocks carry division remainders, keeping link
timing exact under the integer-nanosecond time base.
"""

import math
from collections import deque

from .packets import NOT_ECT, CE

# enqueue outcomes
ACCEPTED = 0
ACCEPTED_CE = 1
DROPPED = 2


class Link:
    """Point-to-point link: FIFO serialization at rate_bps plus fixed
    propagation delay."""

    __slots__ = ("rate_bps", "prop_delay_ns", "_free_ns", "_rem")

    def __init__(self, rate_bps: int, prop_delay_ns: int = 0):
        if rate_bps <= 0:
            raise ValueError("link rate must be positive")
        self.rate_bps = rate_bps
        self.prop_delay_ns = prop_delay_ns
        self._free_ns = 0
        self._rem = 0

    def transmit(self, now_ns: int, wire_bytes: int) -> int:
        """Arrival time at the far end for a packet handed over at now_ns."""
        start = now_ns if now_ns > self._free_ns else self._free_ns
        ser, self._rem = divmod(wire_bytes * 8 * 10**9 + self._rem, self.rate_bps)
        self._free_ns = start + ser
        return self._free_ns + self.prop_delay_ns


class ByteQueue:
    """Tail-drop byte queue with an ECN marking threshold.

    Occupancy is whatever has been committed but not yet departed; expiry is
    lazy against the caller-supplied clock.
    """

    __slots__ = ("capacity_bytes", "ecn_threshold_bytes", "occupancy_bytes",
                 "drops", "ce_marks", "_pending")

    def __init__(self, capacity_bytes: int, ecn_threshold_bytes: int):
        self.capacity_bytes = capacity_bytes
        self.ecn_threshold_bytes = ecn_threshold_bytes
        self.occupancy_bytes = 0
        self.drops = 0
        self.ce_marks = 0
        self._pending = deque()  # (departure_ns, wire_bytes)

    def expire(self, now_ns: int) -> None:
        pending = self._pending
        while pending and pending[0][0] <= now_ns:
            self.occupancy_bytes -= pending.popleft()[1]

    def enqueue(self, wire_bytes: int, ecn: int) -> int:
        """ACCEPTED / ACCEPTED_CE / DROPPED for a packet arriving now.
        On accept the caller must follow up with commit(departure_ns)."""
        after = self.occupancy_bytes + wire_bytes
        if after > self.capacity_bytes:
            self.drops += 1
            return DROPPED
        self.occupancy_bytes = after
        if ecn != NOT_ECT and after > self.ecn_threshold_bytes:
            self.ce_marks += 1
            return ACCEPTED_CE
        return ACCEPTED

    def commit(self, departure_ns: int, wire_bytes: int) -> None:
        self._pending.append((departure_ns, wire_bytes))


class ForwarderModel:
    """Per-packet forwarding model of a routing VM.

    dpdk: near-constant per-packet delay, effectively unbounded pps.
    linux: deterministic service slot of 1/pps_capacity plus a heavy-tailed
    latency sample (lognormal, capped). The latency is FIFO-preserving: a
    stalled packet delays everything behind it, and the backlog then drains
    at the pps capacity, re-bursting the output the way a kernel datapath
    does after a scheduling stall.
    """

    __slots__ = ("kind", "pps_capacity", "delay_median_ns", "delay_sigma",
                 "delay_cap_ns", "dpdk_delay_ns", "_mu")

    def __init__(self, kind: str, pps_capacity: int | None = 1_200_000,
                 delay_median_ns: int = 20_000, delay_sigma: float = 1.0,
                 delay_cap_ns: int = 5_000_000, dpdk_delay_ns: int = 2_000):
        if kind not in ("linux", "dpdk"):
            raise ValueError(f"unknown forwarder kind: {kind!r}")
        self.kind = kind
        self.pps_capacity = pps_capacity
        self.delay_median_ns = delay_median_ns
        self.delay_sigma = delay_sigma
        self.delay_cap_ns = delay_cap_ns
        self.dpdk_delay_ns = dpdk_delay_ns
        self._mu = math.log(delay_median_ns) if delay_median_ns > 0 else 0.0

    def delay_ns(self, rng) -> int:
        """One per-packet delay sample."""
        if self.kind == "dpdk":
            return self.dpdk_delay_ns
        if self.delay_sigma == 0.0:
            return self.delay_median_ns
        sample = int(rng.lognormvariate(self._mu, self.delay_sigma))
        return sample if sample < self.delay_cap_ns else self.delay_cap_ns


class ForwarderStation:
    """A shared forwarder instance: model + input queue + service clock."""

    __slots__ = ("model", "queue", "rng", "_dep_ns", "_svc_num", "_svc_rem")

    def __init__(self, model: ForwarderModel, queue: ByteQueue, rng):
        self.model = model
        self.queue = queue
        self.rng = rng
        self._dep_ns = 0
        # service slot as exact ns fraction: 1e9 / pps
        self._svc_num = 0 if model.pps_capacity is None else 10**9
        self._svc_rem = 0

    def process(self, now_ns: int, wire_bytes: int, ecn: int):
        """(departure_ns, ecn_out) or (None, ecn) if the input queue tail-drops.

        Equivalent to queue.expire + enqueue + commit, inlined for the
        per-packet hot path. A dpdk forwarder holds each packet for a fixed
        couple of microseconds, so its input queue can never approach the
        multi-megabyte capacity or ECN threshold; the bookkeeping is skipped
        outright.
        """
        model = self.model
        if model.kind == "dpdk":
            dep = now_ns + model.dpdk_delay_ns
            if dep < self._dep_ns:
                dep = self._dep_ns
            self._dep_ns = dep
            return dep, ecn
        q = self.queue
        pending = q._pending
        occ = q.occupancy_bytes
        while pending and pending[0][0] <= now_ns:
            occ -= pending.popleft()[1]
        after = occ + wire_bytes
        if after > q.capacity_bytes:
            q.occupancy_bytes = occ
            q.drops += 1
            return None, ecn
        if ecn and after > q.ecn_threshold_bytes:
            q.ce_marks += 1
            ecn = CE
        if model.delay_sigma == 0.0:
            ready = now_ns + model.delay_median_ns
        else:
            jit = int(self.rng.lognormvariate(model._mu, model.delay_sigma))
            cap = model.delay_cap_ns
            ready = now_ns + (jit if jit < cap else cap)
        if self._svc_num:
            slot, self._svc_rem = divmod(self._svc_num + self._svc_rem,
                                         model.pps_capacity)
            line = self._dep_ns + slot
            dep = line if line > ready else ready
        else:
            dep = ready if ready > self._dep_ns else self._dep_ns
        self._dep_ns = dep
        q.occupancy_bytes = after
        pending.append((dep, wire_bytes))
        return dep, ecn


class MicroburstModel:
    """Parameters of the shallow-buffer cross-traffic loss injector.

    Cross traffic arrives in short trains of back-to-back bursts (a remote
    sender's flight transiting the switch), which is what actually pins a
    shallow buffer long enough to shed packets.
    """

    __slots__ = ("enabled", "location", "shallow_buffer_bytes", "burst_rate_hz",
                 "burst_mean_bytes", "line_rate_bps", "train_mean_bursts",
                 "train_gap_ns")

    def __init__(self, enabled=True, location="rx-access",
                 shallow_buffer_bytes=150_000, burst_rate_hz=2.0,
                 burst_mean_bytes=120_000, line_rate_bps=100 * 10**9,
                 train_mean_bursts=80.0, train_gap_ns=800):
        if location not in ("rx-access", "tx-access"):
            raise ValueError(f"unknown microburst location: {location!r}")
        self.enabled = enabled
        self.location = location
        self.shallow_buffer_bytes = shallow_buffer_bytes
        self.burst_rate_hz = burst_rate_hz
        self.burst_mean_bytes = burst_mean_bytes
        self.line_rate_bps = line_rate_bps
        self.train_mean_bursts = train_mean_bursts
        self.train_gap_ns = train_gap_ns


class MicroburstGate:
    """Fluid model of one shallow-buffer hop crossed by Poisson cross-traffic
    burst trains.

    Each sub-burst deposits its bytes into the buffer instantaneously (it
    arrives at line rate from another port); the buffer drains at line rate.
    A VC packet is dropped iff the buffer cannot admit its wire bytes on
    arrival, so losses cluster inside trains and the added queueing delay
    stays below shallow_buffer_bytes * 8 / line_rate, keeping losses
    uncorrelated with delay.

    The burst process is sampled lazily as VC packets arrive, which keeps the
    gate event-free and lets the engine drain naturally at end of trial.
    """

    __slots__ = ("model", "rng", "drops", "_occ_scaled", "_last_ns",
                 "_next_burst_ns", "_cap_scaled", "_line_bps",
                 "_burst_gap_mean_ns", "_train_left")

    def __init__(self, model: MicroburstModel, rng):
        self.model = model
        self.rng = rng
        self.drops = 0
        # occupancy in byte*8e9 units so drain (line_bps * dt_ns) stays exact
        self._occ_scaled = 0
        self._last_ns = 0
        self._cap_scaled = model.shallow_buffer_bytes * 8 * 10**9
        self._line_bps = model.line_rate_bps
        self._train_left = 0
        if model.enabled and model.burst_rate_hz > 0:
            self._burst_gap_mean_ns = 1e9 / model.burst_rate_hz
            self._next_burst_ns = self._draw_train_gap(0)
        else:
            self._burst_gap_mean_ns = 0.0
            self._next_burst_ns = None

    def _draw_train_gap(self, from_ns: int) -> int:
        return from_ns + int(self.rng.expovariate(1.0) * self._burst_gap_mean_ns) + 1

    def _drain_to(self, t_ns: int) -> None:
        occ = self._occ_scaled - self._line_bps * (t_ns - self._last_ns)
        self._occ_scaled = occ if occ > 0 else 0
        self._last_ns = t_ns

    def step(self, now_ns: int, wire_bytes: int):
        """(admitted, queueing_delay_ns) for a VC packet arriving at now_ns."""
        if not self.model.enabled:
            return True, 0
        nxt = self._next_burst_ns
        while nxt is not None and nxt <= now_ns:
            self._drain_to(nxt)
            rng = self.rng
            model = self.model
            if self._train_left == 0:
                # this burst opens a train: geometric length >= 1
                p = 1.0 / model.train_mean_bursts
                length = 1
                while rng.random() > p:
                    length += 1
                self._train_left = length
            burst = int(rng.expovariate(1.0) * model.burst_mean_bytes)
            occ = self._occ_scaled + burst * 8 * 10**9
            # burst bytes beyond the buffer are cross-traffic's own loss
            self._occ_scaled = occ if occ < self._cap_scaled else self._cap_scaled
            self._train_left -= 1
            if self._train_left > 0:
                nxt += int(rng.expovariate(1.0) * model.train_gap_ns) + 1
            else:
                nxt = self._draw_train_gap(nxt)
        self._next_burst_ns = nxt
        self._drain_to(now_ns)
        cost = wire_bytes * 8 * 10**9
        if self._occ_scaled + cost > self._cap_scaled:
            self.drops += 1
            return False, 0
        delay_ns = self._occ_scaled // self._line_bps
        self._occ_scaled += cost
        return True, delay_ns
