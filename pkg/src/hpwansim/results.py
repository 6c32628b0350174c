"""Results and summary file formats.

ResultsFile: one header plus one row per (trial, VC), fixed column order,
locale-independent formatting (floats via repr, so parsing them back yields
bit-identical values and a recomputed summary matches the original exactly).

SummaryFile: one row per VC (vc_id, min_eff, max_eff, avg_overhead_pct) and a
footer row with vc_id "ALL" carrying the scenario-level values: min_eff /
max_eff are the scenario-wide minimum and maximum efficiency, and
avg_overhead_pct holds the maximum per-VC average overhead. The footer pair
(min efficiency, max average overhead) is the headline annotation of a
configuration; it is always recomputable from the per-VC rows.
"""

import csv

from .metrics import RESULT_FIELDS, TrialResult, VcSummary

SUMMARY_FIELDS = ("vc_id", "min_eff", "max_eff", "avg_overhead_pct")

_INT_FIELDS = {"flows", "vc_id", "trial", "seed", "retx_bytes",
               "drops_policer", "drops_queue", "drops_microburst",
               "drops_forwarder", "drops_shaper", "ce_marks"}


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results_csv(rows: list[TrialResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in RESULT_FIELDS])


def read_results_csv(path) -> list[TrialResult]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != RESULT_FIELDS:
            raise ValueError(f"unexpected results header: {header}")
        for raw in reader:
            values = {}
            for name, text in zip(RESULT_FIELDS, raw):
                if name in ("scenario", "config", "cc"):
                    values[name] = text
                elif name in _INT_FIELDS:
                    values[name] = int(text)
                else:
                    values[name] = float(text)
            rows.append(TrialResult(**values))
    return rows


def write_summary_csv(summaries: list[VcSummary], scenario_min_eff: float,
                      scenario_max_avg_overhead: float, path) -> None:
    scenario_max_eff = max(s.max_eff for s in summaries)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for s in summaries:
            w.writerow([s.vc_id, _fmt(s.min_eff), _fmt(s.max_eff),
                        _fmt(s.avg_overhead_pct)])
        w.writerow(["ALL", _fmt(scenario_min_eff), _fmt(scenario_max_eff),
                    _fmt(scenario_max_avg_overhead)])


def read_summary_csv(path):
    """Returns (vc_summaries, scenario_min_eff, scenario_max_avg_overhead)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SUMMARY_FIELDS:
            raise ValueError(f"unexpected summary header: {header}")
        summaries = []
        footer = None
        for vc_id, min_eff, max_eff, over in reader:
            if vc_id == "ALL":
                footer = (float(min_eff), float(over))
            else:
                summaries.append(VcSummary(int(vc_id), float(min_eff),
                                           float(max_eff), float(over)))
    if footer is None:
        raise ValueError("summary file has no ALL footer row")
    return summaries, footer[0], footer[1]
