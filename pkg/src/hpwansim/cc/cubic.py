"""CUBIC congestion control (RFC 8312 constants C=0.4, beta=0.7).

Window growth in congestion avoidance follows the closed form
W(t) = C*(t-K)^3 + W_max directly (segment units), floored by the
TCP-friendly estimate, so the simulated trajectory between loss events is
the formula itself. Every loss and CE mark is treated as a congestion
signal, with at most one multiplicative decrease per round trip.
"""

import math

NS = 1_000_000_000


def cubic_window(t_since_epoch_s: float, w_max_seg: float, k_s: float,
                 c: float = 0.4) -> float:
    """Closed-form CUBIC window in segments at t seconds past the epoch."""
    d = t_since_epoch_s - k_s
    return c * d * d * d + w_max_seg


def cubic_k(w_max_seg: float, cwnd_seg: float, c: float = 0.4) -> float:
    """Time (s) for the cubic to climb from cwnd back to w_max."""
    diff = w_max_seg - cwnd_seg
    if diff <= 0:
        return 0.0
    return (diff / c) ** (1.0 / 3.0)


class Cubic:
    BETA = 0.7
    C = 0.4

    def __init__(self, mss: int, params: dict, rng=None):
        self.mss = mss
        self.beta = params.get("beta", self.BETA)
        self.c = params.get("c", self.C)
        self._cwnd = params.get("init_cwnd_mss", 10) * mss
        self.ssthresh = math.inf
        self.w_max_seg = 0.0
        self.k_s = 0.0
        self.epoch_start_ns = None
        self.epoch_cwnd_seg = 0.0
        self._srtt_ns = None
        self._last_reduction_ns = None
        self._post_rto = False
        self.flow = None
        # (epoch_start_ns, w_max_seg, k_s, cwnd0_seg) per congestion epoch
        self.epochs = []

    def attach_flow(self, flow):
        self.flow = flow

    # α of the TCP-friendly region, 3(1-β)/(1+β)
    @property
    def _friendly_slope(self):
        return 3.0 * (1.0 - self.beta) / (1.0 + self.beta)

    def _enter_epoch(self, now_ns, w_max_seg, cwnd_seg):
        self.w_max_seg = w_max_seg
        self.k_s = cubic_k(w_max_seg, cwnd_seg, self.c)
        self.epoch_start_ns = now_ns
        self.epoch_cwnd_seg = cwnd_seg
        self.epochs.append((now_ns, w_max_seg, self.k_s, cwnd_seg))

    def on_ack(self, rs, now_ns):
        self._post_rto = False
        if rs.rtt_sample_ns > 0:
            if self._srtt_ns is None:
                self._srtt_ns = rs.rtt_sample_ns
            else:
                self._srtt_ns += (rs.rtt_sample_ns - self._srtt_ns) >> 3
        if self._cwnd < self.ssthresh and self.epoch_start_ns is None:
            self._cwnd += rs.newly_acked_bytes  # slow start
            if self._cwnd >= self.ssthresh:
                self._cwnd = self.ssthresh
                self._enter_epoch(now_ns, self.w_max_seg, self._cwnd / self.mss)
            return
        if self.epoch_start_ns is None:
            self._enter_epoch(now_ns, self._cwnd / self.mss, self._cwnd / self.mss)
        t = (now_ns - self.epoch_start_ns) / NS
        w = cubic_window(t, self.w_max_seg, self.k_s, self.c)
        if self._srtt_ns:
            friendly = (self.w_max_seg * self.beta
                        + self._friendly_slope * (t * NS / self._srtt_ns))
            if friendly > w:
                w = friendly
        if w < 2.0:
            w = 2.0
        self._cwnd = w * self.mss

    def _reduce(self, now_ns):
        # one multiplicative decrease per round trip
        srtt = self._srtt_ns or 0
        if (self._last_reduction_ns is not None
                and now_ns - self._last_reduction_ns < srtt):
            return
        self._last_reduction_ns = now_ns
        w_max = self._cwnd / self.mss
        self._cwnd = max(self._cwnd * self.beta, 2.0 * self.mss)
        self.ssthresh = self._cwnd
        self._enter_epoch(now_ns, w_max, self._cwnd / self.mss)

    def on_loss(self, lost_bytes, now_ns):
        self._reduce(now_ns)

    def on_ce(self, now_ns):
        self._reduce(now_ns)

    def on_rto(self, now_ns):
        w_max = self._cwnd / self.mss
        self.ssthresh = max(self._cwnd * self.beta, 2.0 * self.mss)
        self.w_max_seg = w_max
        self._cwnd = float(self.mss)
        self.epoch_start_ns = None  # re-enter via slow start
        self._last_reduction_ns = now_ns
        self._post_rto = True

    def cwnd(self):
        if self._post_rto:
            return float(self.mss)
        return self._cwnd

    def pacing_rate(self):
        srtt = self._srtt_ns or 1_000_000  # pre-sample: assume 1 ms
        gain = 2.0 if (self.epoch_start_ns is None and self._cwnd < self.ssthresh) else 1.2
        return gain * self._cwnd * 8 * NS / srtt
