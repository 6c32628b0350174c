"""BBRv1: model-based congestion control with windowed btl_bw/min_rtt filters.

Packet loss never touches the model filters; the delivery-rate estimate and
min-RTT alone drive pacing and cwnd. ProbeRTT clamps the window to exactly
four segments and holds it there for 200 ms plus one round trip whenever the
min-RTT sample goes stale (10 s window).
"""

import math

NS = 1_000_000_000

STARTUP_GAIN = 2.0 / math.log(2.0)  # 2.885
CYCLE_GAINS = (1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
CWND_GAIN = 2.0
MIN_PIPE_SEGS = 4
PROBE_RTT_INTERVAL_NS = 10 * NS
PROBE_RTT_HOLD_NS = 200_000_000
MIN_RTT_WIN_NS = 10 * NS

STARTUP, DRAIN, PROBE_BW, PROBE_RTT = range(4)
MODE_NAMES = {STARTUP: "startup", DRAIN: "drain",
              PROBE_BW: "probe_bw", PROBE_RTT: "probe_rtt"}


class WindowedMax:
    """Max filter over a sliding window of round counts."""

    __slots__ = ("window", "_samples")

    def __init__(self, window_rounds: int):
        self.window = window_rounds
        self._samples = []  # (round, value), values strictly decreasing

    def update(self, rnd: int, value: float) -> None:
        samples = self._samples
        while samples and samples[-1][1] <= value:
            samples.pop()
        samples.append((rnd, value))
        lo = rnd - self.window
        while samples and samples[0][0] <= lo:
            samples.pop(0)

    def get(self) -> float:
        return self._samples[0][1] if self._samples else 0.0


class Bbr1:
    def __init__(self, mss: int, params: dict, rng=None):
        self.mss = mss
        self.rng = rng
        self.probe_rtt_interval_ns = int(params.get(
            "probe_rtt_interval_s", 10.0) * NS)
        self.flow = None
        self.mode = STARTUP
        self.pacing_gain = STARTUP_GAIN
        self.cwnd_gain = STARTUP_GAIN
        self.btl_bw_filter = WindowedMax(int(params.get("bw_window_rounds", 10)))
        self.min_rtt_ns = None
        self.min_rtt_stamp_ns = 0
        self.round_count = 0
        self.round_start = False
        self.next_round_delivered = 0
        self.full_bw = 0.0
        self.full_bw_count = 0
        self.filled_pipe = False
        self.cycle_index = 0
        self.cycle_stamp_ns = 0
        self.prior_cwnd = 0.0
        self.probe_rtt_done_ns = None
        self.probe_rtt_round_delivered = None
        self.probe_rtt_enter_ns = None
        self.probe_rtt_log = []  # (enter_ns, clamp_ns, exit_ns)
        self._probe_rtt_clamp_ns = None
        self._post_rto = False
        self._cwnd = 10.0 * mss
        init_rtt = params.get("init_rtt_ns", 1_000_000)
        self._pacing = STARTUP_GAIN * self._cwnd * 8 * NS / init_rtt

    def attach_flow(self, flow):
        self.flow = flow

    def btl_bw(self) -> float:
        return self.btl_bw_filter.get()

    def bdp_bytes(self, gain: float = 1.0) -> float:
        bw = self.btl_bw()
        if not bw or self.min_rtt_ns is None:
            return self._cwnd
        return gain * bw * self.min_rtt_ns / (8 * NS)

    def _start_probe_bw(self, now_ns):
        self.mode = PROBE_BW
        # random initial phase, skipping the 0.75 drain slot
        if self.rng is not None:
            idx = self.rng.randrange(len(CYCLE_GAINS) - 1)
            self.cycle_index = idx if idx < 1 else idx + 1
        else:
            self.cycle_index = 2
        self.cycle_stamp_ns = now_ns
        self.pacing_gain = CYCLE_GAINS[self.cycle_index]
        self.cwnd_gain = CWND_GAIN

    def _advance_cycle(self, now_ns, inflight, bdp):
        elapsed = now_ns - self.cycle_stamp_ns
        gain = CYCLE_GAINS[self.cycle_index]
        advance = elapsed > self.min_rtt_ns
        if gain == 0.75 and inflight <= bdp:
            advance = True  # queue drained, no need to keep deflating
        if advance:
            self.cycle_index = (self.cycle_index + 1) % len(CYCLE_GAINS)
            self.cycle_stamp_ns = now_ns
            self.pacing_gain = CYCLE_GAINS[self.cycle_index]

    def _check_full_pipe(self, rs):
        if self.filled_pipe or not self.round_start or rs.is_app_limited:
            return
        bw = self.btl_bw()
        if bw >= self.full_bw * 1.25:
            self.full_bw = bw
            self.full_bw_count = 0
            return
        self.full_bw_count += 1
        if self.full_bw_count >= 3:
            self.filled_pipe = True

    def _update_min_rtt(self, rs, now_ns):
        rtt = rs.rtt_sample_ns
        if rtt <= 0:
            return
        if (self.min_rtt_ns is None or rtt < self.min_rtt_ns
                or now_ns - self.min_rtt_stamp_ns > MIN_RTT_WIN_NS):
            self.min_rtt_ns = rtt
            self.min_rtt_stamp_ns = now_ns

    def _handle_probe_rtt(self, rs, now_ns):
        inflight = self.flow.inflight_bytes if self.flow is not None else 0
        if self.probe_rtt_done_ns is None:
            if inflight <= MIN_PIPE_SEGS * self.mss:
                self.probe_rtt_done_ns = now_ns + PROBE_RTT_HOLD_NS
                self.probe_rtt_round_delivered = rs.delivered_total_bytes
                self._probe_rtt_clamp_ns = now_ns
            return
        round_done = rs.prior_delivered_bytes >= self.probe_rtt_round_delivered
        if now_ns >= self.probe_rtt_done_ns and round_done:
            self.min_rtt_stamp_ns = now_ns
            self.probe_rtt_log.append(
                (self.probe_rtt_enter_ns, self._probe_rtt_clamp_ns, now_ns))
            self._cwnd = max(self.prior_cwnd, self._cwnd)
            if self.filled_pipe:
                self._start_probe_bw(now_ns)
            else:
                self.mode = STARTUP
                self.pacing_gain = STARTUP_GAIN
                self.cwnd_gain = STARTUP_GAIN
            self.probe_rtt_done_ns = None

    def on_ack(self, rs, now_ns):
        self._post_rto = False
        # round accounting pins filter windows to round trips
        if rs.prior_delivered_bytes >= self.next_round_delivered:
            self.round_count += 1
            self.next_round_delivered = rs.delivered_total_bytes
            self.round_start = True
        else:
            self.round_start = False
        bw = self.btl_bw_filter.get()
        if rs.interval_ns > 0:
            rate = rs.delivered_delta_bytes * 8 * NS / rs.interval_ns
            if rate >= bw or not rs.is_app_limited:
                self.btl_bw_filter.update(self.round_count, rate)
                bw = self.btl_bw_filter.get()
        self._update_min_rtt(rs, now_ns)
        min_rtt = self.min_rtt_ns
        bdp = (bw * min_rtt / (8 * NS)) if (bw and min_rtt is not None) \
            else self._cwnd

        inflight = self.flow.inflight_bytes
        mode = self.mode
        if mode == STARTUP:
            self._check_full_pipe(rs)
            if self.filled_pipe:
                self.mode = mode = DRAIN
                self.pacing_gain = 1.0 / STARTUP_GAIN
                self.cwnd_gain = STARTUP_GAIN
        if mode == DRAIN and inflight <= bdp:
            self._start_probe_bw(now_ns)
            mode = PROBE_BW
        if mode == PROBE_BW and min_rtt is not None:
            self._advance_cycle(now_ns, inflight, bdp)
        if (mode != PROBE_RTT
                and now_ns - self.min_rtt_stamp_ns > self.probe_rtt_interval_ns):
            self.mode = mode = PROBE_RTT
            self.pacing_gain = 1.0
            self.prior_cwnd = self._cwnd
            self.probe_rtt_done_ns = None
            self.probe_rtt_enter_ns = now_ns
        if mode == PROBE_RTT:
            self._handle_probe_rtt(rs, now_ns)

        if bw:
            self._pacing = self.pacing_gain * bw
        if self.mode != PROBE_RTT:
            target = self.cwnd_gain * bdp
            floor = MIN_PIPE_SEGS * self.mss
            self._cwnd = target if target > floor else float(floor)

    def on_loss(self, lost_bytes, now_ns):
        pass  # losses do not touch the model

    def on_ce(self, now_ns):
        pass

    def on_rto(self, now_ns):
        self.prior_cwnd = max(self.prior_cwnd, self._cwnd)
        self._post_rto = True

    def cwnd(self):
        if self.mode == PROBE_RTT:
            return float(MIN_PIPE_SEGS * self.mss)
        if self._post_rto:
            return float(self.mss)
        return self._cwnd

    def pacing_rate(self):
        return self._pacing
