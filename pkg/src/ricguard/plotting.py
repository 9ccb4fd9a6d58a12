"""Matplotlib figures written next to the CSV/JSON outputs.

Uses the object-oriented ``Figure`` API with the Agg canvas, so nothing
touches pyplot global state or needs a display.
"""

from __future__ import annotations

import functools
from typing import Dict, Sequence

import matplotlib as mpl
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

RC = {
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

EVENT_STYLE = {
    "attack_onset": ("tab:red", "--"),
    "detection": ("tab:orange", ":"),
    "mitigation": ("tab:green", "-."),
}


def _styled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with mpl.rc_context(RC):
            return fn(*args, **kwargs)

    return wrapper


def _new_figure(width=6.4, height=3.6):
    fig = Figure(figsize=(width, height))
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(111)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})


@_styled
def plot_timeline(result, path) -> None:
    fig, ax = _new_figure()
    for ue in sorted(result.series):
        pts = result.series[ue]
        tag = " (attacker)" if ue == result.attacker else ""
        ax.plot([t / 1000.0 for t, _ in pts], [v for _, v in pts], lw=1.2, label=f"UE{ue}{tag}")
    for name, (color, ls) in EVENT_STYLE.items():
        t = result.events().get(name)
        if t is not None:
            ax.axvline(t / 1000.0, color=color, ls=ls, lw=1, label=name.replace("_", " "))
    ax.set_xlabel("time [s]")
    ax.set_ylabel("achieved rate [Mbps]")
    ax.legend(loc="upper right", fontsize=7)
    _save(fig, path)


@_styled
def plot_accuracy(results: Sequence, path) -> None:
    fig, ax = _new_figure(width=5.0)
    names = [r.label or r.detector for r in results]
    values = [100.0 * r.accuracy for r in results]
    bars = ax.bar(range(len(values)), values, color="tab:blue")
    for b, v in zip(bars, values):
        ax.annotate(f"{v:.1f}%", (b.get_x() + b.get_width() / 2, v), ha="center", va="bottom", fontsize=7)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("accuracy [%]")
    ax.set_ylim(0, 105)
    _save(fig, path)


@_styled
def plot_detection_comparison(results: Dict[str, object], path) -> None:
    """Attacker rate under several detectors on the same scenario."""
    fig, ax = _new_figure()
    for name, res in results.items():
        pts = res.series[res.attacker]
        ax.plot([t / 1000.0 for t, _ in pts], [v for _, v in pts], lw=1.2, label=name)
        if res.mitigation_time is not None:
            ax.axvline(res.mitigation_time / 1000.0, ls=":", lw=1, color=ax.lines[-1].get_color())
    ax.set_xlabel("time [s]")
    ax.set_ylabel("attacker rate [Mbps]")
    ax.legend(loc="upper right", fontsize=7)
    _save(fig, path)
