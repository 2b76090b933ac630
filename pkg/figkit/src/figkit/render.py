"""Render the four figure families from a walker trace CSV.

The trace is the simulator's public CSV contract; nothing else is read.
Double-support intervals are recovered from the phase column and drawn as
gray shading behind every panel.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .spec import FigureSpec

DS_TAG = "ds"
SHADE_COLOR = "0.85"


class MissingColumnError(KeyError):
    def __init__(self, columns: list[str], path):
        super().__init__(f"trace {path} lacks required columns: {', '.join(columns)}")
        self.columns = columns


_REQUIRED = {
    "errors": ["t", "phase", "h1", "h2", "h3", "h4"],
    "hip": ["t", "phase", "q1", "q2"],
    "control": ["t", "phase", "u1", "u2", "tau1", "tau2"],
    "energy": ["t", "phase", "K", "V", "H"],
}


def ds_intervals(t: np.ndarray, phase: np.ndarray) -> list[tuple[float, float]]:
    """Contiguous double-support windows [(t_start, t_end), ...]."""
    out: list[tuple[float, float]] = []
    start = None
    for i in range(len(t)):
        is_ds = phase[i] == DS_TAG
        if is_ds and start is None:
            start = t[i]
        elif not is_ds and start is not None:
            out.append((float(start), float(t[i - 1])))
            start = None
    if start is not None:
        out.append((float(start), float(t[-1])))
    return out


def load_trace(spec: FigureSpec) -> pd.DataFrame:
    df = pd.read_csv(spec.trace)
    missing = [c for c in _REQUIRED[spec.figure] if c not in df.columns]
    if missing:
        raise MissingColumnError(missing, spec.trace)
    if spec.t_min is not None:
        df = df[df["t"] >= spec.t_min]
    if spec.t_max is not None:
        df = df[df["t"] <= spec.t_max]
    return df.reset_index(drop=True)


def _shade(axes, df: pd.DataFrame) -> None:
    spans = ds_intervals(df["t"].to_numpy(), df["phase"].to_numpy())
    for ax in axes:
        for a, b in spans:
            ax.axvspan(a, b, color=SHADE_COLOR, zorder=0, linewidth=0)


def _panels(spec: FigureSpec, df: pd.DataFrame) -> list[tuple[str, str, str]]:
    """(column, axis label, line color) per panel of the figure family."""
    if spec.figure == "errors":
        labels = {
            "h1": "hip height error [m]",
            "h2": "forward speed error [m/s]",
            "h3": "swing angle error [rad]",
            "h4": "leg length error [m]",
        }
        cols = [c for c in ("h1", "h2") if c in df.columns]
        # swing/knee channels only if the trace ever uses them
        for c in ("h3", "h4"):
            if c in df.columns and np.nanmax(np.abs(df[c].to_numpy())) > 0.0:
                cols.append(c)
        return [(c, labels[c], "C0") for c in cols]
    if spec.figure == "hip":
        return [("q1", "hip position [m]", "C0"), ("q2", "hip height [m]", "C1")]
    if spec.figure == "control":
        labels = {
            "u1": "stiffness input u1 [N/m]",
            "u2": "stiffness input u2 [N/m]",
            "tau1": "hip torque [N m]",
            "tau2": "knee force [N]",
        }
        cols = [c for c in ("u1", "u2", "tau1", "tau2")
                if c in df.columns and df[c].notna().any()]
        return [(c, labels[c], "C2") for c in cols]
    labels = {"K": "kinetic [J]", "V": "potential [J]", "H": "total [J]"}
    return [(c, labels[c], "C3") for c in ("K", "V", "H")]


def render(spec: FigureSpec) -> Path:
    """Draw the figure and write it; returns the output path.

    Deterministic for identical inputs; an empty time window produces
    empty axes rather than an error.
    """
    df = load_trace(spec)
    panels = _panels(spec, df)
    n = max(len(panels), 1)
    fig, axes = plt.subplots(n, 1, sharex=True, figsize=(7.0, 1.9 * n),
                             squeeze=False)
    axes = [ax for (ax,) in axes]
    if len(df) > 0:
        if spec.shade:
            _shade(axes, df)
        t = df["t"].to_numpy()
        for ax, (col, label, color) in zip(axes, panels):
            ax.plot(t, df[col].to_numpy(), color=color, linewidth=1.0)
            ax.set_ylabel(label, fontsize=8)
            ax.grid(True, alpha=0.3)
    else:
        for ax in axes:
            ax.set_xticks([])
            ax.set_yticks([])
    axes[-1].set_xlabel("t [s]")
    fig.align_ylabels(axes)
    fig.tight_layout()
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out, dpi=150, metadata=_no_dates(spec.out.suffix))
    plt.close(fig)
    return spec.out


def _no_dates(suffix: str) -> dict:
    # keep byte-identical re-renders: strip any embedded creation date
    if suffix.lower() == ".svg":
        return {"Date": None}
    return {}
