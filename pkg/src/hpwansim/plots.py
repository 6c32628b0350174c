"""Figure rendering for the report path: per-VC efficiency ranges and
average retransmission overhead, in the min-max bar style used for
per-configuration comparisons."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_summary_figure(summaries, scenario_min_eff, scenario_max_avg_overhead,
                          path, title=""):
    """Two stacked panels: FCT-efficiency min-max bars per VC, and average
    overhead bars, annotated with the scenario-level headline values."""
    vc_ids = [s.vc_id for s in summaries]
    xs = list(range(len(vc_ids)))
    fig, (ax_eff, ax_over) = plt.subplots(
        2, 1, figsize=(max(6.0, 1.0 + 0.9 * len(vc_ids)), 6.0), sharex=True)

    for x, s in zip(xs, summaries):
        ax_eff.plot([x, x], [s.min_eff, s.max_eff], lw=10,
                    color="tab:blue", solid_capstyle="butt")
        ax_eff.plot(x, s.min_eff, marker="_", ms=16, color="black")
        ax_eff.plot(x, s.max_eff, marker="_", ms=16, color="black")
    ax_eff.set_ylabel("FCT efficiency")
    ax_eff.set_ylim(0.0, 1.05)
    ax_eff.axhline(scenario_min_eff, color="tab:red", ls="--", lw=1)
    ax_eff.annotate(f"min efficiency: {scenario_min_eff:.3f}",
                    xy=(0.02, 0.05), xycoords="axes fraction",
                    color="tab:red", fontsize=9)
    ax_eff.grid(axis="y", alpha=0.3)

    ax_over.bar(xs, [s.avg_overhead_pct for s in summaries], color="tab:orange",
                width=0.6)
    ax_over.set_ylabel("avg overhead (%)")
    ax_over.set_xlabel("VC")
    ax_over.set_xticks(xs)
    ax_over.set_xticklabels([str(v) for v in vc_ids])
    ax_over.annotate(f"max avg overhead: {scenario_max_avg_overhead:.3g}%",
                     xy=(0.02, 0.85), xycoords="axes fraction",
                     color="tab:red", fontsize=9)
    ax_over.grid(axis="y", alpha=0.3)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
