"""FCT efficiency, predictability and retransmission-overhead metrics.

FCT efficiency is the ratio of the ideal completion time (file size over the
reserved VC rate, adjusted for per-segment header/framing overhead) to the
measured one. Predictability of a configuration is characterized by the
minimum efficiency observed across its repeated trials: that minimum is the
safety margin a reservation must budget for.
"""

import warnings
from dataclasses import dataclass, fields


@dataclass
class TrialResult:
    scenario: str
    config: str
    cc: str
    flows: int
    vc_id: int
    trial: int
    seed: int
    fct_s: float
    ideal_fct_s: float
    fct_efficiency: float
    retx_bytes: int
    overhead_pct: float
    drops_policer: int
    drops_queue: int
    drops_microburst: int
    drops_forwarder: int
    drops_shaper: int
    ce_marks: int


RESULT_FIELDS = tuple(f.name for f in fields(TrialResult))


@dataclass
class VcSummary:
    vc_id: int
    min_eff: float
    max_eff: float
    avg_overhead_pct: float


def ideal_fct(file_bytes: int, vc_rate_bps: float, mss: int,
              framing_overhead_bytes: int) -> float:
    """Seconds to move file_bytes of payload over a vc_rate_bps bottleneck,
    accounting for the wire overhead each segment carries."""
    if vc_rate_bps <= 0:
        raise ValueError("vc_rate_bps must be positive")
    if file_bytes < 0 or mss <= 0 or framing_overhead_bytes < 0:
        raise ValueError("file_bytes/mss/framing must be non-negative")
    if file_bytes == 0:
        return 0.0
    goodput_fraction = mss / (mss + framing_overhead_bytes)
    return file_bytes * 8 / (vc_rate_bps * goodput_fraction)


def fct_efficiency(ideal_s: float, measured_s: float) -> float:
    """ideal/measured, clamped at 1.0. A measured FCT below ideal means the
    framing accounting is off somewhere, so it must warn, not silently
    report a ratio above 1."""
    if measured_s <= 0:
        raise ValueError("measured FCT must be positive")
    ratio = ideal_s / measured_s
    if ratio > 1.0:
        warnings.warn(
            f"measured FCT {measured_s:.6g}s is below ideal {ideal_s:.6g}s; "
            "clamping efficiency to 1.0 (model accounting mismatch)",
            stacklevel=2)
        return 1.0
    return ratio


def overhead_pct(retx_bytes: int, duration_s: float, vc_rate_bps: float) -> float:
    """Retransmission bandwidth as a percentage of the nominal VC rate."""
    if retx_bytes == 0:
        return 0.0
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    return 100.0 * (retx_bytes * 8 / duration_s) / vc_rate_bps


def aggregate(results: list[TrialResult]):
    """Per-VC min/max efficiency and average overhead, plus the scenario-level
    minimum efficiency and maximum average overhead (the headline pair
    annotated on per-configuration result plots).

    Returns (vc_summaries, scenario_min_eff, scenario_max_avg_overhead).
    """
    if not results:
        raise ValueError("no results to aggregate")
    key = (results[0].scenario, results[0].config, results[0].cc, results[0].flows)
    by_vc: dict[int, list[TrialResult]] = {}
    for r in results:
        if (r.scenario, r.config, r.cc, r.flows) != key:
            raise ValueError("aggregate() requires a single scenario/config/cc/flows set")
        by_vc.setdefault(r.vc_id, []).append(r)
    summaries = []
    for vc_id in sorted(by_vc):
        rows = by_vc[vc_id]
        effs = [r.fct_efficiency for r in rows]
        overheads = [r.overhead_pct for r in rows]
        summaries.append(VcSummary(
            vc_id=vc_id,
            min_eff=min(effs),
            max_eff=max(effs),
            avg_overhead_pct=sum(overheads) / len(overheads),
        ))
    scenario_min_eff = min(s.min_eff for s in summaries)
    scenario_max_avg_overhead = max(s.avg_overhead_pct for s in summaries)
    return summaries, scenario_min_eff, scenario_max_avg_overhead
