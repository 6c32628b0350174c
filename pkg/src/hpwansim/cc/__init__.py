"""Pluggable congestion control engines behind a uniform hook interface.

A CC engine consumes rate samples and loss/CE signals and exposes the two
control outputs the transport needs: congestion window (payload bytes) and
pacing rate (payload bits/s). All engines keep per-flow state only.
"""

from .cubic import Cubic
from .bbr1 import Bbr1
from .bbr3 import Bbr3


class CcHooks:
    """Base interface. cwnd() stays >= 2*MSS except where an algorithm's own
    rule takes precedence (BBR ProbeRTT floors, 1*MSS post-RTO recovery)."""

    def attach_flow(self, flow) -> None:
        self.flow = flow

    def on_ack(self, rs, now_ns: int) -> None:
        raise NotImplementedError

    def on_loss(self, lost_bytes: int, now_ns: int) -> None:
        raise NotImplementedError

    def on_ce(self, now_ns: int) -> None:
        raise NotImplementedError

    def on_rto(self, now_ns: int) -> None:
        raise NotImplementedError

    def cwnd(self) -> float:
        raise NotImplementedError

    def pacing_rate(self) -> float:
        raise NotImplementedError


CC_REGISTRY = {
    "cubic": Cubic,
    "bbr1": Bbr1,
    "bbr3": Bbr3,
}


def make_cc(name: str, mss: int, params: dict | None = None, rng=None):
    try:
        cls = CC_REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown congestion control: {name!r} "
                         f"(choose from {sorted(CC_REGISTRY)})") from None
    return cls(mss, params or {}, rng)
