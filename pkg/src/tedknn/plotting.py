"""Figures rendered from a MetricsReport."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import COLUMN_TITLES, MetricsReport  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}
# strip the version stamp so reruns produce identical bytes
_META = {"Software": None}


def _series(report: MetricsReport, arm_filter):
    out = {}
    for r in report.rows:
        if r.get("cited") or r["param"] is None or not arm_filter(r["arm"]):
            continue
        out.setdefault(r["arm"], []).append(r)
    return out


def plot_knn_sweep(report: MetricsReport, path: str | Path) -> Path | None:
    """One panel per metric column: value vs k for every kNN arm."""
    series = _series(report, lambda a: a.endswith("_knn"))
    if not series:
        return None
    cols = report.columns()
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(cols), figsize=(3.0 * len(cols), 2.8), squeeze=False)
        for ax, col in zip(axes[0], cols):
            for arm, rows in series.items():
                pts = [(r["param"], r[col]) for r in rows if r[col] is not None]
                if pts:
                    ks, vs = zip(*pts)
                    ax.plot(ks, vs, marker="o", ms=3, lw=1.2, label=arm)
            ax.set_xlabel("k")
            ax.set_title(COLUMN_TITLES[col])
        axes[0][0].legend(frameon=False)
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, metadata=_META)
        plt.close(fig)
    return path


def plot_multitask(report: MetricsReport, path: str | Path) -> Path | None:
    """Metric columns against the multi-task weight on a log axis."""
    rows = _series(report, lambda a: a == "multitask").get("multitask")
    if not rows:
        return None
    cols = [c for c in report.columns() if any(r[c] is not None for r in rows)]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(cols), figsize=(3.0 * len(cols), 2.8), squeeze=False)
        for ax, col in zip(axes[0], cols):
            pts = [(r["param"], r[col]) for r in rows if r[col] is not None]
            lams, vs = zip(*pts)
            ax.plot(lams, vs, marker="s", ms=3, lw=1.2, color="k")
            if min(lams) > 0:
                ax.set_xscale("log")
            ax.set_xlabel("lambda")
            ax.set_title(COLUMN_TITLES[col])
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, metadata=_META)
        plt.close(fig)
    return path


def render_figures(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    fig_dir = Path(out_dir) / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    made = [
        plot_knn_sweep(report, fig_dir / "knn_sweep.png"),
        plot_multitask(report, fig_dir / "multitask_lambda.png"),
    ]
    return [p for p in made if p is not None]
