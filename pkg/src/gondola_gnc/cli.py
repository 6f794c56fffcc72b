"""Command-line entry point.

Subcommands cover the two simulation scenarios, Monte Carlo batches, the
calibration tools, and offline filter replay. Every run writes trace.csv,
metrics.json, and config_resolved.json into the output directory; a rerun
from config_resolved.json with the same seed reproduces trace.csv byte for
byte.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import scenarios
from .calibration import characterize_static, solve_alignment
from .config import ScenarioConfig, load_config
from .errors import GncError
from .mekf import run_filter
from .sensors import MeasurementStream
from .so3 import exp_rotvec

CONTROLLED_COLUMNS = (
    "t_s",
    "true_wx_deg_s", "true_wy_deg_s", "true_wz_deg_s",
    "meas_wx_deg_s", "meas_wy_deg_s", "meas_wz_deg_s",
    "filt_wz_deg_s", "ref_deg_s", "torque_Nm", "integrator_Nm",
)

FREE_DECAY_COLUMNS = (
    "t_s",
    "true_wx_deg_s", "true_wy_deg_s", "true_wz_deg_s",
    "true_rotvec_x_rad", "true_rotvec_y_rad", "true_rotvec_z_rad",
    "true_bias_x_deg_s", "true_bias_y_deg_s", "true_bias_z_deg_s",
    "meas_wx_deg_s", "meas_wy_deg_s", "meas_wz_deg_s",
    "est_dtheta_x_rad", "est_dtheta_y_rad", "est_dtheta_z_rad",
    "angle_err_deg",
    "bias_err_x_deg_s", "bias_err_y_deg_s", "bias_err_z_deg_s",
    "cov_trace",
)

REPLAY_COLUMNS = (
    "t_s", "angle_err_deg",
    "est_dtheta_x_rad", "est_dtheta_y_rad", "est_dtheta_z_rad",
    "bias_err_x_deg_s", "bias_err_y_deg_s", "bias_err_z_deg_s",
    "cov_trace",
)


def _controlled_rows(res):
    return np.column_stack([
        res.t,
        np.degrees(res.omega_true),
        np.degrees(res.gyro),
        np.degrees(res.filt_yaw),
        np.degrees(res.ref),
        res.torque,
        res.integrator,
    ])


def _free_decay_rows(res):
    return np.column_stack([
        res.t,
        np.degrees(res.omega_true),
        res.true_rotvec,
        np.degrees(res.true_bias),
        np.degrees(res.gyro),
        res.dtheta,
        np.degrees(res.angle_err),
        np.degrees(res.bias_err),
        res.trace_P,
    ])


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def emit_run(outdir, kind, result, config, decimate=True):
    """Write trace.csv, metrics.json, and config_resolved.json for one run."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if kind == "controlled":
        columns, rows = CONTROLLED_COLUMNS, _controlled_rows(result)
    else:
        columns, rows = FREE_DECAY_COLUMNS, _free_decay_rows(result)
    if decimate:
        every = max(int(round(config.doc["output"]["log_every_s"] / config.dt)), 1)
        rows = rows[every - 1::every]
    write_csv(outdir / "trace.csv", columns, rows)
    with open(outdir / "metrics.json", "w") as fh:
        json.dump(result.metrics.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(outdir / "config_resolved.json", "w") as fh:
        json.dump(config.resolved(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return outdir / "trace.csv"


def _load_cli_config(args):
    config = load_config(args.config) if args.config else ScenarioConfig()
    overrides = {}
    if getattr(args, "noise", None):
        overrides["noise_profile"] = args.noise
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = ScenarioConfig({**config.resolved(), **overrides})
    return config


def _cmd_simulate(args):
    config = _load_cli_config(args)
    result = scenarios.run_controlled(config)
    emit_run(args.out, "controlled", result, config)
    print(f"controlled run written to {args.out}")
    return 0


def _cmd_free_decay(args):
    config = _load_cli_config(args)
    result = scenarios.run_free_decay(config,
                                      collect_stream=args.emit_measurements)
    emit_run(args.out, "free-decay", result, config,
             decimate=not args.emit_measurements)
    if args.emit_measurements:
        result.stream.to_csv(Path(args.out) / "measurements.csv")
    print(f"free-decay run written to {args.out}")
    return 0


def _cmd_monte_carlo(args):
    config = _load_cli_config(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    runs = []
    seeds = [config.seed + i for i in range(args.runs)]
    for seed in seeds:
        run_config = ScenarioConfig({**config.resolved(), "seed": seed})
        if args.scenario == "controlled":
            result = scenarios.run_controlled(run_config)
            kind = "controlled"
        else:
            result = scenarios.run_free_decay(run_config)
            kind = "free-decay"
        emit_run(outdir / f"run_{seed:04d}", kind, result, run_config)
        runs.append(result.metrics)
    summary = scenarios.summarize_batch(args.scenario, seeds, runs)
    with open(outdir / "batch_summary.json", "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{args.runs} runs summarized in {outdir / 'batch_summary.json'}")
    return 0


def _cmd_calibrate_align(args):
    stream = MeasurementStream.from_csv(args.measurements)
    estimate = solve_alignment(stream.gyro)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "alignment.json", "w") as fh:
        json.dump(estimate.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"alignment estimate written to {out / 'alignment.json'}")
    return 0


def _cmd_calibrate_static(args):
    stream = MeasurementStream.from_csv(args.measurements)
    result = characterize_static(stream.gyro)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "static_characterization.json", "w") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"static characterization written to "
          f"{out / 'static_characterization.json'}")
    return 0


class _TruthFromTrace:
    """Adapter exposing attitude[k] at gyro-sample times from a full-rate
    free-decay trace."""

    def __init__(self, attitude):
        self.attitude = attitude


def _cmd_replay_filter(args):
    config = _load_cli_config(args)
    stream = MeasurementStream.from_csv(args.measurements)

    trace = np.genfromtxt(args.truth, delimiter=",", names=True)
    t_truth = trace["t_s"]
    rotvec = np.column_stack([trace["true_rotvec_x_rad"],
                              trace["true_rotvec_y_rad"],
                              trace["true_rotvec_z_rad"]])
    # align truth rows with the gyro samples
    idx = np.searchsorted(t_truth, stream.gyro_t - 1e-9)
    if idx.max() >= len(t_truth) or np.abs(t_truth[idx] - stream.gyro_t).max() > 1e-6:
        raise GncError("truth trace does not cover the measurement stream "
                       "at full rate; rerun free-decay with --emit-measurements")
    attitude = np.array([exp_rotvec(rv) for rv in rotvec[idx]])
    true_bias = np.radians(np.column_stack([trace["true_bias_x_deg_s"],
                                            trace["true_bias_y_deg_s"],
                                            trace["true_bias_z_deg_s"]])[idx])

    cameras = config.build_cameras()
    refs = {f"camera{i + 1}": cam.ref_inertial for i, cam in enumerate(cameras)}
    covs = {f"camera{i + 1}": cov
            for i, cov in enumerate(config.update_covs())}
    tuning = config.build_tuning()
    _, filt_trace = run_filter(stream, tuning, _TruthFromTrace(attitude),
                               refs, covs, true_bias=true_bias)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = np.column_stack([
        filt_trace.t, np.degrees(filt_trace.angle_err), filt_trace.dtheta,
        np.degrees(filt_trace.bias_err), filt_trace.trace_P,
    ])
    write_csv(out / "filter_trace.csv", REPLAY_COLUMNS, rows)
    print(f"filter replay written to {out / 'filter_trace.csv'}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gondola-gnc",
        description="Pivot-actuated gondola attitude simulation, estimation, "
                    "and yaw-rate control toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_noise=True):
        p.add_argument("--config", help="YAML or JSON config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        if with_noise:
            p.add_argument("--noise", choices=["low", "high", "custom"],
                           help="noise profile selector")

    p = sub.add_parser("simulate", help="closed-loop yaw-rate tracking run")
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("free-decay", help="open-loop decay with the MEKF")
    common(p)
    p.add_argument("--emit-measurements", action="store_true",
                   help="also write measurements.csv and a full-rate trace")
    p.set_defaults(func=_cmd_free_decay)

    p = sub.add_parser("monte-carlo", help="seeded batch of runs")
    common(p)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--scenario", choices=["controlled", "free_decay"],
                   default="controlled")
    p.set_defaults(func=_cmd_monte_carlo)

    p = sub.add_parser("calibrate-align",
                       help="twirl least-squares gyro alignment")
    p.add_argument("measurements", help="measurement CSV with gyro rows")
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_calibrate_align)

    p = sub.add_parser("calibrate-static",
                       help="bias/noise characterization from static data")
    p.add_argument("measurements", help="measurement CSV with gyro rows")
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_calibrate_static)

    p = sub.add_parser("replay-filter",
                       help="rerun the MEKF on recorded measurements")
    common(p)
    p.add_argument("--measurements", required=True)
    p.add_argument("--truth", required=True,
                   help="full-rate free-decay trace.csv for error evaluation")
    p.set_defaults(func=_cmd_replay_filter)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GncError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
