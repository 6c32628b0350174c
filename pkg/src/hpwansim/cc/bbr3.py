"""Simplified BBRv3: BBRv1-style model filters plus bounded-sending logic.

Differences from the v1 engine that matter here:
  * ProbeBW runs the Down/Cruise/Refill/Up sub-phase machine; probing Up is
    abandoned as soon as a round carries loss.
  * A round whose loss rate crosses the 2% threshold cuts inflight_hi by
    beta=0.3 and retreats to Down; cruising is bounded below inflight_hi
    with 0.85 headroom. Lossy rounds outside probing decay inflight_lo,
    which recovers at the next Refill.
  * ProbeRTT fires every 5 s and floors the window at 0.5*BDP instead of
    four segments, sustaining a much higher rate through the episode.

This is a deliberately reduced model: it reproduces the qualitative loss
sensitivity and ProbeRTT contrast with BBRv1, not the full upstream
algorithm.
"""

import math

NS = 1_000_000_000

STARTUP_GAIN = 2.77
CWND_GAIN = 2.0
MIN_PIPE_SEGS = 4

DOWN_GAIN = 0.9
UP_GAIN = 1.25

LOSS_THRESH = 0.02
BETA = 0.3          # inflight_hi multiplier is (1 - BETA)
HEADROOM = 0.85
PROBE_RTT_INTERVAL_NS = 5 * NS
PROBE_RTT_HOLD_NS = 200_000_000
MIN_RTT_WIN_NS = 10 * NS

STARTUP, DRAIN, PROBE_RTT = "startup", "drain", "probe_rtt"
DOWN, CRUISE, REFILL, UP = "down", "cruise", "refill", "up"

_GAINS = {STARTUP: STARTUP_GAIN, DRAIN: 1.0 / STARTUP_GAIN, PROBE_RTT: 1.0,
          DOWN: DOWN_GAIN, CRUISE: 1.0, REFILL: 1.0, UP: UP_GAIN}

from .bbr1 import WindowedMax


class Bbr3:
    def __init__(self, mss: int, params: dict, rng=None):
        self.mss = mss
        self.rng = rng
        self.loss_thresh = params.get("loss_thresh", LOSS_THRESH)
        self.beta = params.get("beta", BETA)
        self.headroom = params.get("headroom", HEADROOM)
        self.probe_rtt_interval_ns = int(params.get(
            "probe_rtt_interval_s", 5.0) * NS)
        self.flow = None
        self.mode = STARTUP
        self.btl_bw_filter = WindowedMax(int(params.get("bw_window_rounds", 10)))
        self.min_rtt_ns = None
        self.min_rtt_stamp_ns = 0
        self.round_count = 0
        self.next_round_delivered = 0
        self.full_bw = 0.0
        self.full_bw_count = 0
        self.filled_pipe = False
        self.inflight_hi = math.inf
        self.inflight_lo = math.inf
        self.bw_lo = math.inf
        # per-round loss bookkeeping
        self._round_lost = 0
        self._round_delivered_mark = 0
        self._round_max_inflight = 0.0
        self._round_bw_latest = 0.0
        self._cut_this_probe = False
        self._cruise_until_ns = None
        self._refill_round = None
        self._up_rounds = 0
        self._phase_stamp_ns = 0
        self.prior_cwnd = 0.0
        self.probe_rtt_done_ns = None
        self.probe_rtt_round_delivered = None
        self.probe_rtt_enter_ns = None
        self.probe_rtt_log = []
        self.probe_rtt_floor_bytes = 0.0
        self._post_rto = False
        self._cwnd = 10.0 * mss
        init_rtt = params.get("init_rtt_ns", 1_000_000)
        self._pacing = STARTUP_GAIN * self._cwnd * 8 * NS / init_rtt

    def attach_flow(self, flow):
        self.flow = flow

    def btl_bw(self):
        return self.btl_bw_filter.get()

    def bdp_bytes(self, gain=1.0):
        bw = self.btl_bw()
        if not bw or self.min_rtt_ns is None:
            return self._cwnd
        return gain * bw * self.min_rtt_ns / (8 * NS)

    def _enter(self, mode, now_ns):
        self.mode = mode
        self._phase_stamp_ns = now_ns
        if mode == CRUISE:
            wait = 2.0 + (self.rng.random() if self.rng is not None else 0.5)
            self._cruise_until_ns = now_ns + int(wait * NS)
        elif mode == REFILL:
            # release the lower bounds and allow one fresh cut this probe
            self.inflight_lo = math.inf
            self.bw_lo = math.inf
            self._cut_this_probe = False
            self._refill_round = self.round_count
        elif mode == UP:
            self._up_rounds = 0

    def _check_full_pipe(self, rs, round_start):
        if self.filled_pipe or not round_start or rs.is_app_limited:
            return
        bw = self.btl_bw()
        if bw >= self.full_bw * 1.25:
            self.full_bw = bw
            self.full_bw_count = 0
            return
        self.full_bw_count += 1
        if self.full_bw_count >= 3:
            self.filled_pipe = True

    def _on_round_end(self, now_ns):
        """Evaluate the closed round's loss signals."""
        lost = self._round_lost
        if lost <= 0:
            if self.mode == UP and self.inflight_hi != math.inf:
                # clean probing round: raise the bound with escalating steps
                # so collapsed bounds can climb back toward the BDP
                step = self.mss << self._up_rounds if self._up_rounds < 12 \
                    else self.mss << 12
                self._up_rounds += 1
                grown = max(self._round_max_inflight, self.inflight_hi + step)
                self.inflight_hi = grown
            return
        delivered = max(self.flow.delivered_bytes - self._round_delivered_mark, 0) \
            if self.flow is not None else 0
        loss_rate = lost / (lost + delivered) if (lost + delivered) > 0 else 0.0
        if (loss_rate >= self.loss_thresh
                and self.mode in (REFILL, UP, STARTUP)
                and not self._cut_this_probe):
            # upper bounds adapt while probing, at most once per probe
            base = self.inflight_hi
            if base == math.inf:
                base = max(self._round_max_inflight, self.bdp_bytes(1.0))
            self.inflight_hi = max((1.0 - self.beta) * base,
                                   MIN_PIPE_SEGS * self.mss)
            if self.mode in (UP, REFILL):
                self._cut_this_probe = True
                self._enter(DOWN, now_ns)
        elif self.mode == UP:
            # any loss while probing: stop the probe without raising bounds
            self._enter(DOWN, now_ns)
        elif self.mode in (CRUISE, DOWN):
            # rate follows what lossy rounds actually delivered; released at
            # the next Refill
            bw = self.btl_bw()
            ref = self.bw_lo if self.bw_lo != math.inf else bw
            self.bw_lo = max(self._round_bw_latest, 0.7 * ref)

    def _probe_bw_step(self, now_ns, inflight):
        if self.min_rtt_ns is None:
            return
        elapsed = now_ns - self._phase_stamp_ns
        if self.mode == DOWN:
            if inflight <= self.bdp_bytes(1.0) or elapsed > self.min_rtt_ns:
                self._enter(CRUISE, now_ns)
        elif self.mode == CRUISE:
            if now_ns >= self._cruise_until_ns:
                self._enter(REFILL, now_ns)
        elif self.mode == REFILL:
            if self.round_count > self._refill_round:
                self._enter(UP, now_ns)
        elif self.mode == UP:
            if inflight > self._round_max_inflight:
                self._round_max_inflight = inflight
            if elapsed > self.min_rtt_ns and inflight >= self.bdp_bytes(UP_GAIN):
                if self.inflight_hi != math.inf:
                    self.inflight_hi = max(self.inflight_hi, inflight)
                self._enter(DOWN, now_ns)

    def _handle_probe_rtt(self, rs, now_ns):
        floor = self.probe_rtt_floor_bytes
        inflight = self.flow.inflight_bytes if self.flow is not None else 0
        if self.probe_rtt_done_ns is None:
            if inflight <= floor + self.mss:
                self.probe_rtt_done_ns = now_ns + PROBE_RTT_HOLD_NS
                self.probe_rtt_round_delivered = rs.delivered_total_bytes
            return
        round_done = rs.prior_delivered_bytes >= self.probe_rtt_round_delivered
        if now_ns >= self.probe_rtt_done_ns and round_done:
            self.min_rtt_stamp_ns = now_ns
            self.probe_rtt_log.append((self.probe_rtt_enter_ns, now_ns))
            self._cwnd = max(self.prior_cwnd, self._cwnd)
            self.probe_rtt_done_ns = None
            if self.filled_pipe:
                self._enter(CRUISE, now_ns)
            else:
                self.mode = STARTUP

    def on_ack(self, rs, now_ns):
        self._post_rto = False
        round_start = rs.prior_delivered_bytes >= self.next_round_delivered
        if round_start:
            self._on_round_end(now_ns)
            self.round_count += 1
            self.next_round_delivered = rs.delivered_total_bytes
            self._round_lost = 0
            self._round_delivered_mark = (
                self.flow.delivered_bytes if self.flow is not None else 0)
            self._round_max_inflight = 0.0
            self._round_bw_latest = 0.0
        if rs.interval_ns > 0:
            rate = rs.delivered_delta_bytes * 8 * NS / rs.interval_ns
            if rate > self._round_bw_latest:
                self._round_bw_latest = rate
            if rate >= self.btl_bw() or not rs.is_app_limited:
                self.btl_bw_filter.update(self.round_count, rate)
        rtt = rs.rtt_sample_ns
        if rtt > 0 and (self.min_rtt_ns is None or rtt < self.min_rtt_ns
                        or now_ns - self.min_rtt_stamp_ns > MIN_RTT_WIN_NS):
            self.min_rtt_ns = rtt
            self.min_rtt_stamp_ns = now_ns

        inflight = self.flow.inflight_bytes if self.flow is not None else 0
        if self.mode == STARTUP:
            self._check_full_pipe(rs, round_start)
            if self.filled_pipe:
                self.mode = DRAIN
        if self.mode == DRAIN and inflight <= self.bdp_bytes(1.0):
            self._enter(DOWN, now_ns)
        if self.mode in (DOWN, CRUISE, REFILL, UP):
            self._probe_bw_step(now_ns, inflight)
        if (self.mode != PROBE_RTT
                and now_ns - self.min_rtt_stamp_ns > self.probe_rtt_interval_ns):
            self.mode = PROBE_RTT
            self.prior_cwnd = self._cwnd
            self.probe_rtt_done_ns = None
            self.probe_rtt_enter_ns = now_ns
            self.probe_rtt_floor_bytes = max(0.5 * self.bdp_bytes(1.0),
                                             MIN_PIPE_SEGS * self.mss)
        if self.mode == PROBE_RTT:
            self._handle_probe_rtt(rs, now_ns)

        bw = self.btl_bw()
        if bw:
            if self.bw_lo < bw and self.mode in (CRUISE, DOWN):
                bw = self.bw_lo
            self._pacing = _GAINS[self.mode] * bw
        if self.mode != PROBE_RTT:
            target = CWND_GAIN * self.bdp_bytes(1.0)
            cap = self.inflight_hi
            if cap != math.inf and self.mode in (CRUISE, DOWN):
                cap *= self.headroom
            if self.inflight_lo != math.inf and self.mode in (CRUISE, DOWN):
                cap = min(cap, self.inflight_lo)
            if target > cap:
                target = cap
            floor = MIN_PIPE_SEGS * self.mss
            self._cwnd = target if target > floor else float(floor)

    def on_loss(self, lost_bytes, now_ns):
        self._round_lost += lost_bytes

    def on_ce(self, now_ns):
        pass  # classic CE ignored; v3 ECN mode out of scope

    def on_rto(self, now_ns):
        self.prior_cwnd = max(self.prior_cwnd, self._cwnd)
        self._post_rto = True

    def cwnd(self):
        if self.mode == PROBE_RTT:
            return self.probe_rtt_floor_bytes
        if self._post_rto:
            return float(self.mss)
        return self._cwnd

    def pacing_rate(self):
        return self._pacing
