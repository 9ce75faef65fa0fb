"""Figure rendering for the command-line report verb (headless matplotlib)."""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first
import numpy as np  # noqa: E402

__all__ = ["render_sweep_figure", "render_trace_figure"]

_AXIS_LABELS = {
    "eta": "coverage target",
    "distance": "sensor-sink distance (m)",
    "n_sensors": "number of sensors",
    "compute_energy": "local compute energy (mJ)",
    "reuse_prob": "channel reuse probability",
    "max_retx": "transmission attempts per sample",
    "battery_budget": "battery budget (mJ)",
}


def render_sweep_figure(rows: Sequence[Dict[str, Any]], axis: Optional[str], path: str) -> None:
    """Plot coverage-probability curves per method from sweep rows."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    methods = []
    for row in rows:
        if row["method"] not in methods:
            methods.append(row["method"])
    for method in methods:
        xs: List[float] = []
        ys: List[float] = []
        errs: List[float] = []
        for row in rows:
            if row["method"] != method or row["eta_coverage"] is None:
                continue
            xs.append(float(row["sweep_value"]))
            ys.append(float(row["eta_coverage"]))
            hw = row.get("half_width")
            errs.append(float(hw) if hw not in (None, "") else 0.0)
        if not xs:
            continue
        if any(errs):
            ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=method)
        else:
            ax.plot(xs, ys, marker="s", linestyle="--", label=method)
    ax.set_xlabel(_AXIS_LABELS.get(axis or "", axis or "scenario"))
    ax.set_ylabel("coverage probability")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_trace_figure(trace, target_ratio: float, path: str) -> None:
    """Plot one episode: covered share per slot and per-sensor sink ages."""
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8.0, 6.0), sharex=True)
    slots = np.arange(trace.n_slots)

    top.plot(slots, trace.coverage, drawstyle="steps-post", color="tab:blue")
    top.axhline(target_ratio, color="tab:red", linestyle=":", label="target")
    top.set_ylabel("covered share")
    top.set_ylim(-0.02, 1.05)
    top.grid(True, alpha=0.3)
    top.legend(loc="lower right")

    for i in range(trace.n_sensors):
        ages = np.where(np.isfinite(trace.aoi_sink[:, i]), trace.aoi_sink[:, i], np.nan)
        bottom.plot(slots, ages, drawstyle="steps-post", label=f"sensor {i}")
    bottom.set_xlabel("slot")
    bottom.set_ylabel("sink age (slots)")
    bottom.grid(True, alpha=0.3)
    if trace.n_sensors <= 10:
        bottom.legend(loc="upper right", ncol=2, fontsize="small")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
