"""Scenario presets, configuration schema, and the experiment runner.

A scenario bundles the topology (8 reserved VCs on shared 100 Gb/s links, or
a single system-limit VC), one of the three data-path rows (Linux forwarding,
DPDK forwarding, DPDK forwarding with per-VC shaping), the congestion
control, the workload, and the trial/seed plan. Presets enumerate the full
experiment matrix; everything they pin can also be overridden from a config
file or the CLI.
"""

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .engine import derive_seed
from .metrics import TrialResult, ideal_fct, fct_efficiency, overhead_pct
from .packets import DEFAULT_MSS, FRAMING_OVERHEAD

CONFIG_ROWS = ("linux-fwd", "dpdk-fwd", "dpdk-shaping")
TOPOLOGIES = ("full8", "single-link")
CC_NAMES = ("cubic", "bbr1", "bbr3")


class ConfigError(ValueError):
    """Scenario configuration rejected (unknown key, bad value, cap violated)."""


@dataclass
class VcDef:
    vc_id: int
    rate_bps: int = 20_000_000_000
    base_rtt_ms: float = 14.0

    @property
    def base_rtt_ns(self) -> int:
        return int(self.base_rtt_ms * 1e6)


@dataclass
class EfParams:
    fraction: float = 0.8
    burst_packets: int = 2
    queue_bytes: int = 67_108_864


@dataclass
class QueueParams:
    capacity_bdp: float = 8.0
    ecn_threshold_bdp: float = 1.0


@dataclass
class PolicerParams:
    cbs_bytes: int = 262_144
    cir_bps: int | None = None  # None: the VC reserved rate


@dataclass
class ShaperParams:
    enabled: bool | None = None  # None: decided by the data-path row
    rate_bps: int | None = None  # None: the VC reserved rate
    backlog_bdp: float = 4.0


@dataclass
class ForwarderParams:
    linux_pps: int = 1_200_000
    linux_jitter_median_ns: int = 20_000
    linux_jitter_sigma: float = 1.0
    linux_jitter_cap_ns: int = 5_000_000
    dpdk_delay_ns: int = 2_000


@dataclass
class MicroburstParams:
    enabled: bool = True
    location: str = "rx-access"
    shallow_buffer_bytes: int = 150_000
    burst_rate_hz: float = 2.0
    burst_mean_bytes: int = 120_000
    line_rate_bps: int = 100_000_000_000
    train_mean_bursts: float = 80.0
    train_gap_ns: int = 800


@dataclass
class ScenarioConfig:
    name: str = "custom"
    topology: str = "full8"
    config: str = "dpdk-shaping"
    cc: str = "bbr1"
    flows_per_vc: int = 10
    file_bytes: int = 10_000_000_000
    trials: int = 20
    master_seed: int = 42
    mss: int = DEFAULT_MSS
    framing_bytes: int = FRAMING_OVERHEAD
    ack_decimation: int = 1
    ack_extra_delay_ns: int = 0
    link_rate_bps: int = 100_000_000_000
    vcs: list[VcDef] | None = None  # None: topology defaults
    ef: EfParams = field(default_factory=EfParams)
    queue: QueueParams = field(default_factory=QueueParams)
    policer: PolicerParams = field(default_factory=PolicerParams)
    shaper: ShaperParams = field(default_factory=ShaperParams)
    forwarder: ForwarderParams = field(default_factory=ForwarderParams)
    microburst: MicroburstParams = field(default_factory=MicroburstParams)
    cc_params: dict = field(default_factory=dict)
    event_cap: int = 5_000_000_000
    trace_cc: bool = False

    # -- derived views -------------------------------------------------------

    @property
    def wire_bytes(self) -> int:
        return self.mss + self.framing_bytes

    def shaping_enabled(self) -> bool:
        if self.shaper.enabled is not None:
            return self.shaper.enabled
        return self.config == "dpdk-shaping"

    def forwarder_kind(self) -> str:
        return "linux" if self.config == "linux-fwd" else "dpdk"

    def resolved_vcs(self) -> list[VcDef]:
        if self.vcs is not None:
            return self.vcs
        if self.topology == "full8":
            rtts = (14.0, 14.0, 7.0, 7.0, 16.0, 16.0, 10.0, 10.0)
            return [VcDef(i + 1, 20_000_000_000, rtts[i]) for i in range(8)]
        return [VcDef(1, 80_000_000_000, 14.0)]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["vcs"] is None:
            del d["vcs"]
        return d


# topology sharing structure: which VCs share which stations
@dataclass
class TopologySpec:
    vcs: list[VcDef]
    er_group: dict  # vc_id -> edge-router index (forwarder + optional shaper)
    r_group: dict   # vc_id -> source router index (forwarder, WAN ingress link)
    dest_group: dict  # vc_id -> destination router index (WAN egress link, rx forwarder)
    n_er: int
    n_r: int
    n_dest: int


def resolve_topology(cfg: ScenarioConfig) -> TopologySpec:
    vcs = cfg.resolved_vcs()
    if cfg.topology == "full8":
        if len(vcs) != 8:
            raise ConfigError(f"full8 topology needs exactly 8 VCs, got {len(vcs)}")
        er = {v.vc_id: (v.vc_id - 1) // 2 for v in vcs}
        r = {v.vc_id: (v.vc_id - 1) // 4 for v in vcs}
        # two VCs per edge router, four per central link; destination links
        # remix the source groups so both WAN hops see inter-VC interference
        dest = {1: 0, 2: 0, 7: 0, 8: 0, 3: 1, 4: 1, 5: 1, 6: 1}
        return TopologySpec(vcs, er, r, dest, 4, 2, 2)
    if cfg.topology == "single-link":
        er = {v.vc_id: 0 for v in vcs}
        return TopologySpec(vcs, er, dict(er), dict(er), 1, 1, 1)
    raise ConfigError(f"unknown topology: {cfg.topology!r}")


# ---------------------------------------------------------------------------
# dict <-> config with unknown-key detection

_NESTED = {
    "ef": EfParams,
    "queue": QueueParams,
    "policer": PolicerParams,
    "shaper": ShaperParams,
    "forwarder": ForwarderParams,
    "microburst": MicroburstParams,
}


def _coerce(value, target_type, path):
    if target_type == int | None:
        if value is None:
            return None
        target_type = int
    if target_type == bool | None:
        if value is None:
            return None
        target_type = bool
    if target_type is int:
        if isinstance(value, bool):
            raise ConfigError(f"{path}: expected a number, got a boolean")
        if isinstance(value, float):
            if value != int(value):
                raise ConfigError(f"{path}: expected an integer, got {value}")
            return int(value)
        if isinstance(value, int):
            return value
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if target_type is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if target_type is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{path}: expected a boolean, got {value!r}")
    if target_type is str:
        if isinstance(value, str):
            return value
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _build_dataclass(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {data!r}")
    valid = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        f = valid.get(key)
        if f is None:
            raise ConfigError(f"unknown key at {path}.{key}")
        kwargs[key] = _coerce(value, f.type, f"{path}.{key}")
    return cls(**kwargs)


def config_from_dict(data: dict) -> "ScenarioConfig":
    if not isinstance(data, dict):
        raise ConfigError("scenario config must be a mapping")
    kwargs = {}
    valid = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    for key, value in data.items():
        if key not in valid:
            raise ConfigError(f"unknown key: {key}")
        if key in _NESTED:
            kwargs[key] = _build_dataclass(_NESTED[key], value or {}, key)
        elif key == "vcs":
            if value is None:
                kwargs[key] = None
            else:
                kwargs[key] = [_build_dataclass(VcDef, v, f"vcs[{i}]")
                               for i, v in enumerate(value)]
        elif key == "cc_params":
            if not isinstance(value, dict):
                raise ConfigError("cc_params: expected a mapping")
            kwargs[key] = value
        else:
            kwargs[key] = _coerce(value, valid[key].type, key)
    cfg = ScenarioConfig(**kwargs)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ScenarioConfig) -> None:
    if cfg.topology not in TOPOLOGIES:
        raise ConfigError(f"unknown topology: {cfg.topology!r} (choose from {TOPOLOGIES})")
    if cfg.config not in CONFIG_ROWS:
        raise ConfigError(f"unknown data-path config: {cfg.config!r} (choose from {CONFIG_ROWS})")
    if cfg.cc not in CC_NAMES:
        raise ConfigError(f"unknown cc: {cfg.cc!r} (choose from {CC_NAMES})")
    if cfg.flows_per_vc < 1:
        raise ConfigError("flows_per_vc must be >= 1")
    if cfg.file_bytes < 0:
        raise ConfigError("file_bytes must be >= 0")
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if cfg.mss <= 0 or cfg.framing_bytes < 0:
        raise ConfigError("mss must be positive and framing_bytes >= 0")
    if cfg.ack_decimation < 1:
        raise ConfigError("ack_decimation must be >= 1")
    if cfg.policer.cbs_bytes < cfg.wire_bytes:
        raise ConfigError(
            f"policer.cbs_bytes ({cfg.policer.cbs_bytes}) must cover at least "
            f"one wire packet ({cfg.wire_bytes})")
    topo = resolve_topology(cfg)
    for v in topo.vcs:
        if v.rate_bps <= 0 or v.base_rtt_ms < 0:
            raise ConfigError(f"vc {v.vc_id}: rate must be positive, rtt >= 0")
    cap = cfg.ef.fraction * cfg.link_rate_bps
    for label, grouping in (("source", topo.r_group), ("destination", topo.dest_group)):
        sums = {}
        for v in topo.vcs:
            g = grouping[v.vc_id]
            sums[g] = sums.get(g, 0) + v.rate_bps
        for g, total in sums.items():
            if total > cap:
                raise ConfigError(
                    f"aggregate VC reservations on {label} link {g} "
                    f"({total / 1e9:g} Gb/s) exceed {cfg.ef.fraction:.0%} of the "
                    f"{cfg.link_rate_bps / 1e9:g} Gb/s link capacity "
                    f"({cap / 1e9:g} Gb/s): reservations are capped at the EF fraction")


# ---------------------------------------------------------------------------
# presets

def _fig3_preset(row: str, cc: str, flows: int) -> ScenarioConfig:
    return ScenarioConfig(
        name=f"fig3-{row}-{cc}-{flows}flows",
        topology="full8", config=row, cc=cc, flows_per_vc=flows)


def preset_matrix() -> list[ScenarioConfig]:
    """The full experiment matrix: 12 full-topology presets crossing the three
    data-path rows with {bbr1, bbr3} x {1, 10 flows}, two 80 Gb/s system-limit
    presets, and the sub-reservation shaping probe."""
    presets = [
        _fig3_preset(row, cc, flows)
        for row in CONFIG_ROWS
        for cc in ("bbr1", "bbr3")
        for flows in (1, 10)
    ]
    for cc in ("bbr1", "cubic"):
        presets.append(ScenarioConfig(
            name=f"syslimit-80g-{cc}-10flows",
            topology="single-link", config="dpdk-shaping", cc=cc,
            flows_per_vc=10,
            vcs=[VcDef(1, 80_000_000_000, 14.0)]))
    subres = _fig3_preset("dpdk-shaping", "bbr1", 10)
    subres.name = "subres-dpdk-shaping-bbr1-10flows"
    subres.shaper = ShaperParams(enabled=True, rate_bps=15_000_000_000)
    presets.append(subres)
    return presets


def preset_names() -> list[str]:
    return [p.name for p in preset_matrix()]


def get_preset(name: str) -> ScenarioConfig:
    for p in preset_matrix():
        if p.name == name:
            validate_config(p)
            return p
    raise KeyError(name)


# ---------------------------------------------------------------------------
# runner

@dataclass
class RunPlan:
    entries: list  # (scenario_name, trial_index, seed)

    @classmethod
    def for_config(cls, cfg: ScenarioConfig, trials: int | None = None,
                   master_seed: int | None = None) -> "RunPlan":
        n = cfg.trials if trials is None else trials
        seed0 = cfg.master_seed if master_seed is None else master_seed
        return cls(entries=[
            (cfg.name, i, derive_seed(seed0, f"trial-{i}")) for i in range(n)
        ])


@dataclass
class ExperimentResult:
    rows: list          # TrialResult, sorted by (trial, vc_id)
    failures: list      # human-readable diagnostics of failed trials


def _vc_stats_to_rows(cfg: ScenarioConfig, trial_idx: int, seed: int,
                      vc_stats: list) -> list[TrialResult]:
    rows = []
    for st in vc_stats:
        if cfg.file_bytes == 0:
            ideal = 0.0
            eff = 1.0
            fct_s = 0.0
            over = 0.0
        else:
            ideal = ideal_fct(cfg.file_bytes, st.rate_bps, cfg.mss, cfg.framing_bytes)
            fct_s = st.fct_ns / 1e9
            eff = fct_efficiency(ideal, fct_s)
            over = overhead_pct(st.retx_bytes, fct_s, st.rate_bps)
        rows.append(TrialResult(
            scenario=cfg.name, config=cfg.config, cc=cfg.cc,
            flows=cfg.flows_per_vc, vc_id=st.vc_id, trial=trial_idx, seed=seed,
            fct_s=fct_s, ideal_fct_s=ideal, fct_efficiency=eff,
            retx_bytes=st.retx_bytes, overhead_pct=over,
            drops_policer=st.drops_policer, drops_queue=st.drops_queue,
            drops_microburst=st.drops_microburst,
            drops_forwarder=st.drops_forwarder, drops_shaper=st.drops_shaper,
            ce_marks=st.ce_marks))
    return rows


def _run_one_trial(args):
    cfg, trial_idx, seed = args
    from .datapath import TrialSim
    sim = TrialSim(cfg, seed)
    vc_stats, problems = sim.run()
    if problems:
        return trial_idx, None, (
            f"trial {trial_idx} (seed {seed}) failed: " + "; ".join(problems))
    return trial_idx, _vc_stats_to_rows(cfg, trial_idx, seed, vc_stats), None


def run_experiment(cfg: ScenarioConfig, plan: RunPlan | None = None,
                   parallel: int = 1) -> ExperimentResult:
    """Execute the trial plan. Trials are independent and may run in worker
    processes; per-trial results depend only on the trial seed, so the degree
    of parallelism cannot change any row."""
    validate_config(cfg)
    if plan is None:
        plan = RunPlan.for_config(cfg)
    work = [(cfg, idx, seed) for (_, idx, seed) in plan.entries]
    rows = []
    failures = []
    if parallel > 1 and len(work) > 1:
        workers = min(parallel, len(work))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one_trial, work))
    else:
        outcomes = [_run_one_trial(w) for w in work]
    for _, trial_rows, failure in sorted(outcomes, key=lambda o: o[0]):
        if failure is not None:
            failures.append(failure)
        else:
            rows.extend(trial_rows)
    return ExperimentResult(rows=rows, failures=failures)


def default_parallelism() -> int:
    return os.cpu_count() or 1
