"""Command-line surface.

  hpwansim run      --scenario <name|path> [--trials N] [--seed S]
                    [--out DIR] [--parallel K] [--override key=value ...]
  hpwansim validate --scenario <name|path> [--override key=value ...]
  hpwansim report   --results results.csv [--out DIR] [--no-figure]

run writes results.csv and summary.csv into the output directory (--out, or
$HPWANSIM_OUT, or the working directory). report recomputes summary.csv from
an existing results.csv and renders summary.png alongside it.

Exit codes: 0 success, 1 configuration error, 2 at least one failed trial.
"""

import argparse
import os
import sys

import yaml

from . import __version__
from .metrics import aggregate
from .results import read_results_csv, write_results_csv, write_summary_csv
from .scenarios import (ConfigError, RunPlan, config_from_dict,
                        default_parallelism, get_preset, preset_names,
                        run_experiment, validate_config)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_TRIAL_FAILED = 2


def _load_scenario(spec: str, overrides: list[str]):
    if os.path.exists(spec):
        with open(spec) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"scenario file {spec} must hold a mapping")
    else:
        try:
            data = get_preset(spec).to_dict()
        except KeyError:
            names = "\n  ".join(preset_names())
            raise ConfigError(
                f"unknown scenario {spec!r}; available presets:\n  {names}")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"bad --override {item!r}, expected key=value")
        key, _, raw = item.partition("=")
        value = yaml.safe_load(raw)
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return config_from_dict(data)


def _out_dir(args) -> str:
    out = args.out or os.environ.get("HPWANSIM_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_run(args) -> int:
    try:
        cfg = _load_scenario(args.scenario, args.override)
        if args.trials is not None:
            cfg.trials = args.trials
        if args.seed is not None:
            cfg.master_seed = args.seed
        validate_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    parallel = args.parallel if args.parallel is not None else default_parallelism()
    plan = RunPlan.for_config(cfg)
    result = run_experiment(cfg, plan, parallel=parallel)
    out = _out_dir(args)
    results_path = os.path.join(out, "results.csv")
    summary_path = os.path.join(out, "summary.csv")
    write_results_csv(result.rows, results_path)
    if result.rows:
        summaries, min_eff, max_over = aggregate(result.rows)
        write_summary_csv(summaries, min_eff, max_over, summary_path)
        print(f"{cfg.name}: {len(result.rows)} rows -> {results_path}")
        print(f"scenario min efficiency {min_eff:.4f}, "
              f"max avg overhead {max_over:.4g}% -> {summary_path}")
    for failure in result.failures:
        print(failure, file=sys.stderr)
    return EXIT_TRIAL_FAILED if result.failures else EXIT_OK


def _cmd_validate(args) -> int:
    try:
        cfg = _load_scenario(args.scenario, args.override)
        validate_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    vcs = cfg.resolved_vcs()
    print(f"{cfg.name}: OK ({cfg.topology}, {cfg.config}, {cfg.cc}, "
          f"{cfg.flows_per_vc} flow(s)/VC, {len(vcs)} VC(s), "
          f"{cfg.trials} trials)")
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        rows = read_results_csv(args.results)
        if not rows:
            raise ValueError("results file holds no rows")
        summaries, min_eff, max_over = aggregate(rows)
    except (OSError, ValueError) as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    summary_path = os.path.join(out, "summary.csv")
    write_summary_csv(summaries, min_eff, max_over, summary_path)
    print(f"summary -> {summary_path}")
    if not args.no_figure:
        from .plots import render_summary_figure
        fig_path = os.path.join(out, "summary.png")
        title = f"{rows[0].scenario} ({rows[0].config}, {rows[0].cc}, {rows[0].flows} flows)"
        render_summary_figure(summaries, min_eff, max_over, fig_path, title)
        print(f"figure -> {fig_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpwansim",
        description="Packet-level simulator of massive transfers over "
                    "bandwidth-isolated HP-WAN virtual circuits")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write results")
    run.add_argument("--scenario", required=True, help="preset name or config file")
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--seed", type=int, default=None, help="master seed")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--parallel", type=int, default=None,
                     help="worker processes (default: CPU count; "
                          "results are invariant to this)")
    run.add_argument("--override", action="append", default=[],
                     metavar="KEY=VALUE", help="config override, repeatable")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="parse and check a scenario")
    val.add_argument("--scenario", required=True)
    val.add_argument("--override", action="append", default=[],
                     metavar="KEY=VALUE")
    val.set_defaults(func=_cmd_validate)

    rep = sub.add_parser("report", help="recompute summary (and figure) from results")
    rep.add_argument("--results", required=True, help="path to results.csv")
    rep.add_argument("--out", default=None, help="output directory")
    rep.add_argument("--no-figure", action="store_true",
                     help="skip rendering summary.png")
    rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
