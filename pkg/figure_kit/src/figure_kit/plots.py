"""Render the standard figure set from gondola-gnc trace CSVs.

Three kinds are supported (column sets follow the CLI trace schemas):

  free-decay  body rates, three stacked panels
  tracking    yaw rate with the reference overlay, torque panel, and a
              zoomed inset over the steady-state window
  mekf-error  attitude error with the steady-state band marked, plus the
              per-axis bias errors

Rendering is a pure function of (CSV bytes, spec): embedded timestamps are
disabled so repeated invocations produce identical files.
"""

import csv
from dataclasses import dataclass
from typing import Optional, Tuple

import matplotlib
matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "figure-kit"  # deterministic SVG ids
import matplotlib.pyplot as plt
import numpy as np

# Okabe-Ito colorblind-safe palette
C_BLUE = "#0072B2"
C_ORANGE = "#E69F00"
C_GREEN = "#009E73"
C_VERMILION = "#D55E00"
C_SKY = "#56B4E9"

KIND_COLUMNS = {
    "free-decay": ("t_s", "true_wx_deg_s", "true_wy_deg_s", "true_wz_deg_s"),
    "tracking": ("t_s", "filt_wz_deg_s", "ref_deg_s", "torque_Nm"),
    "mekf-error": ("t_s", "angle_err_deg", "bias_err_x_deg_s",
                   "bias_err_y_deg_s", "bias_err_z_deg_s"),
}

STEADY_AFTER_S = 15.0          # mekf-error steady-state annotation
DEFAULT_ZOOM = (190.0, 220.0)  # tracking inset window


class SchemaMismatchError(Exception):
    """CSV columns do not match the declared figure kind."""


@dataclass
class PlotSpec:
    csv_path: str
    kind: str
    out_path: str
    zoom: Optional[Tuple[float, float]] = None
    log_scale: bool = False

    def __post_init__(self):
        if self.kind not in KIND_COLUMNS:
            raise SchemaMismatchError(
                f"unknown figure kind {self.kind!r}; expected one of "
                f"{sorted(KIND_COLUMNS)}")


def load_columns(path, wanted):
    """Columns by name from a trace CSV; header-only files give empty arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatchError("CSV file is empty (no header)")
        missing = [name for name in wanted if name not in header]
        if missing:
            raise SchemaMismatchError(
                f"CSV is missing columns {missing} (found {header})")
        idx = [header.index(name) for name in wanted]
        data = [[] for _ in wanted]
        for row in reader:
            for slot, i in enumerate(idx):
                data[slot].append(float(row[i]))
    return [np.asarray(col) for col in data]


def _save(fig, out_path):
    ext = str(out_path).rsplit(".", 1)[-1].lower()
    metadata = None
    if ext == "svg":
        metadata = {"Date": None}
    elif ext == "pdf":
        metadata = {"CreationDate": None}
    fig.savefig(out_path, dpi=150, metadata=metadata)
    plt.close(fig)


def _plot_free_decay(spec):
    t, wx, wy, wz = load_columns(spec.csv_path, KIND_COLUMNS["free-decay"])
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 6.0), sharex=True)
    for ax, series, color, label in zip(
            axes, (wx, wy, wz), (C_GREEN, C_ORANGE, C_SKY),
            ("Roll rate [deg/s]", "Pitch rate [deg/s]", "Yaw rate [deg/s]")):
        ax.plot(t, series, color=color, lw=1.2)
        ax.set_ylabel(label)
        ax.grid(True, ls=":", alpha=0.5)
    axes[-1].set_xlabel("Time [s]")
    fig.align_ylabels(axes)
    fig.tight_layout()
    _save(fig, spec.out_path)


def _plot_tracking(spec):
    t, w, ref, torque = load_columns(spec.csv_path, KIND_COLUMNS["tracking"])
    fig, (ax_rate, ax_torque) = plt.subplots(
        2, 1, figsize=(7.0, 5.6), sharex=True,
        gridspec_kw={"height_ratios": [3, 2]})
    ax_rate.plot(t, w, color=C_BLUE, lw=1.2, label="Measured")
    ax_rate.plot(t, ref, color=C_ORANGE, lw=1.2, ls="--", label="Reference")
    ax_rate.set_ylabel("Yaw rate [deg/s]")
    ax_rate.grid(True, ls=":", alpha=0.5)
    ax_rate.legend(loc="lower center", ncol=2, frameon=False)

    ax_torque.plot(t, torque, color=C_VERMILION, lw=1.2)
    ax_torque.set_ylabel("Pivot torque [N m]")
    ax_torque.set_xlabel("Time [s]")
    ax_torque.grid(True, ls=":", alpha=0.5)

    zoom = spec.zoom or DEFAULT_ZOOM
    mask = (t >= zoom[0]) & (t <= zoom[1]) if len(t) else np.zeros(0, bool)
    if mask.any():
        inset = ax_rate.inset_axes([0.45, 0.12, 0.5, 0.38])
        inset.plot(t[mask], w[mask], color=C_BLUE, lw=0.9)
        inset.plot(t[mask], ref[mask], color=C_ORANGE, lw=0.9, ls="--")
        inset.set_xlim(zoom)
        inset.grid(True, ls=":", alpha=0.4)
        inset.tick_params(labelsize=7)
        ax_rate.indicate_inset_zoom(inset, edgecolor="0.3")
    fig.tight_layout()
    _save(fig, spec.out_path)


def _plot_mekf_error(spec):
    t, angle, bx, by, bz = load_columns(spec.csv_path,
                                        KIND_COLUMNS["mekf-error"])
    fig, (ax_angle, ax_bias) = plt.subplots(2, 1, figsize=(7.0, 5.6),
                                            sharex=True)
    ax_angle.plot(t, angle, color=C_BLUE, lw=1.0)
    if spec.log_scale:
        ax_angle.set_yscale("log")
    ax_angle.set_ylabel("Attitude error [deg]")
    ax_angle.grid(True, ls=":", alpha=0.5)
    if len(t) and t[-1] > STEADY_AFTER_S:
        ax_angle.axvspan(STEADY_AFTER_S, t[-1], color="0.85", zorder=0,
                         label=f"steady state (t > {STEADY_AFTER_S:g} s)")
        ax_angle.legend(loc="upper right", frameon=False)

    for series, color, label in ((bx, C_GREEN, "x"), (by, C_ORANGE, "y"),
                                 (bz, C_SKY, "z")):
        ax_bias.plot(t, series, color=color, lw=1.0, label=label)
    ax_bias.set_ylabel("Bias error [deg/s]")
    ax_bias.set_xlabel("Time [s]")
    ax_bias.grid(True, ls=":", alpha=0.5)
    ax_bias.legend(loc="upper right", ncol=3, frameon=False)
    fig.tight_layout()
    _save(fig, spec.out_path)


_RENDERERS = {
    "free-decay": _plot_free_decay,
    "tracking": _plot_tracking,
    "mekf-error": _plot_mekf_error,
}


def plot(spec):
    """Render the figure described by spec; returns the output path."""
    _RENDERERS[spec.kind](spec)
    return spec.out_path
