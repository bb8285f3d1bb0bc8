"""Tidy CSV export of trajectories, a column map, and run reports."""
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import diagnostics_series, monotonicity_report, time_to_consensus
from .lie import orthonormality_error, to_euler_zyx


def trajectory_table(log, series=None, every=1):
    """Columns and rows for the CSV export.

    Column order: ``t``; per agent ``k`` (1-based) roll/pitch/yaw (deg), body
    rates (deg/s), torques (N m); then ``V1`` (objective I) or
    ``sigma_norm_k`` (II/III); then the pairwise maxima; then the tracking
    errors for objective III.

    Returns:
        ``(columns, data, meta)`` where ``meta`` maps each column to its unit
        and description.
    """
    series = series if series is not None else diagnostics_series(log)
    sel = slice(None, None, max(1, int(every)))
    n = log.n
    cols, blocks, meta = [], [], {}

    def add(name, values, unit, desc):
        cols.append(name)
        blocks.append(np.asarray(values, dtype=float)[sel])
        meta[name] = {"unit": unit, "description": desc}

    add("t", log.t, "s", "time")
    roll, pitch, yaw = to_euler_zyx(log.R[:, :n])
    for k in range(n):
        a = k + 1
        for name, vals in zip(("roll", "pitch", "yaw"), (roll, pitch, yaw)):
            add(f"a{a}_{name}_deg", np.rad2deg(vals[:, k]), "deg", f"agent {a} Z-Y-X {name}")
        for c, axis in enumerate("xyz"):
            add(f"a{a}_w{axis}_degps", np.rad2deg(log.omega[:, k, c]), "deg/s",
                f"agent {a} body rate about {axis}")
        for c, axis in enumerate("xyz"):
            add(f"a{a}_u{axis}", log.torque[:, k, c], "N m", f"agent {a} torque about {axis}")
    if "V1" in series:
        add("V1", series["V1"], "J", "consensus Lyapunov function")
    if "sigma_norm" in series:
        for k in range(n):
            add(f"sigma_norm_{k + 1}", series["sigma_norm"][:, k], "rad/s",
                f"agent {k + 1} composite error norm")
    add("max_pairwise_psi", series["max_pairwise_psi"], "-", "largest pairwise error function")
    add("max_pairwise_angle_deg", np.rad2deg(series["max_pairwise_angle"]), "deg",
        "largest pairwise geodesic angle")
    add("max_velocity_disagreement_degps", np.rad2deg(series["max_velocity_disagreement"]),
        "deg/s", "largest transported rate difference")
    if "tracking_angle" in series:
        add("tracking_angle_deg", np.rad2deg(series["tracking_angle"]), "deg",
            "largest agent attitude error to the reference")
        add("tracking_rate_degps", np.rad2deg(series["tracking_rate"]), "deg/s",
            "largest agent rate error to the reference")
    return cols, np.column_stack(blocks), meta


def write_csv(path, columns, data):
    np.savetxt(path, data, delimiter=",", header=",".join(columns), comments="", fmt="%.10g")


def write_column_map(path, columns, meta):
    entries = [{"index": i, "name": c, **meta[c]} for i, c in enumerate(columns)]
    Path(path).write_text(json.dumps(entries, indent=2) + "\n")


@dataclass
class RunReport:
    """Summary of one run, written as text and JSON."""

    scenario: str
    objective: str
    status: str
    duration: float
    step: float
    final_max_pairwise_angle_deg: float | None = None
    final_max_pairwise_psi: float | None = None
    final_max_velocity_disagreement_degps: float | None = None
    final_max_rate_degps: float | None = None
    final_tracking_angle_deg: float | None = None
    final_tracking_rate_degps: float | None = None
    consensus_threshold_deg: float = 1.0
    time_to_consensus: float | None = None
    lyapunov_monitor: str | None = None
    lyapunov_violations: int | None = None
    initial_set: dict = field(default_factory=dict)
    max_orthonormality_drift: float | None = None
    failure_time: float | None = None
    overrides: list = field(default_factory=list)
    effective_config: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_text(self):
        lines = [f"scenario: {self.scenario} (objective {self.objective})", f"status: {self.status}"]
        lines.append(f"horizon: {self.duration:g} s, step {self.step:g} s")
        if self.failure_time is not None:
            lines.append(f"first failure at t = {self.failure_time:.6g} s")
        if self.final_max_pairwise_angle_deg is not None:
            lines.append(f"final max pairwise angle: {self.final_max_pairwise_angle_deg:.6g} deg")
            lines.append(f"final max pairwise psi: {self.final_max_pairwise_psi:.6g}")
            lines.append(
                f"final max velocity disagreement: {self.final_max_velocity_disagreement_degps:.6g} deg/s"
            )
            lines.append(f"final max body rate: {self.final_max_rate_degps:.6g} deg/s")
        if self.final_tracking_angle_deg is not None:
            lines.append(f"final tracking angle error: {self.final_tracking_angle_deg:.6g} deg")
            lines.append(f"final tracking rate error: {self.final_tracking_rate_degps:.6g} deg/s")
        ttc = "not reached" if self.time_to_consensus is None else f"{self.time_to_consensus:.4g} s"
        lines.append(f"time to consensus (< {self.consensus_threshold_deg:g} deg): {ttc}")
        if self.lyapunov_monitor:
            lines.append(f"{self.lyapunov_monitor} violations: {self.lyapunov_violations}")
        if self.initial_set:
            s = self.initial_set
            verdict = "inside" if s["member"] else "outside (warning only)"
            lines.append(
                f"initial set: value {s['value']:.6g}, bound {s['bound']:.6g}, "
                f"margin {s['margin']:.6g}, {verdict}"
            )
        if self.max_orthonormality_drift is not None:
            lines.append(f"max |R^T R - I|_F: {self.max_orthonormality_drift:.3e}")
        for text in self.overrides:
            lines.append(f"override: {text}")
        for kind, path in self.outputs.items():
            lines.append(f"{kind}: {path}")
        return "\n".join(lines) + "\n"


def summarize(log, series=None, status="ok"):
    """Fill the numeric fields of a :class:`RunReport` from a log."""
    series = series if series is not None else diagnostics_series(log)
    which = "V1" if log.objective == "I" else "V2"
    report = RunReport(
        scenario=log.name,
        objective=log.objective,
        status=status,
        duration=float(log.t[-1]),
        step=float(log.step),
        final_max_pairwise_angle_deg=float(np.rad2deg(series["max_pairwise_angle"][-1])),
        final_max_pairwise_psi=float(series["max_pairwise_psi"][-1]),
        final_max_velocity_disagreement_degps=float(
            np.rad2deg(series["max_velocity_disagreement"][-1])
        ),
        final_max_rate_degps=float(np.rad2deg(np.linalg.norm(log.omega[-1, : log.n], axis=-1).max())),
        consensus_threshold_deg=float(np.rad2deg(log.consensus_threshold)),
        time_to_consensus=time_to_consensus(log.t, series["max_pairwise_angle"], log.consensus_threshold),
        lyapunov_monitor=which,
        lyapunov_violations=len(monotonicity_report(log, which)),
        max_orthonormality_drift=float(orthonormality_error(log.R).max()),
    )
    if "tracking_angle" in series:
        report.final_tracking_angle_deg = float(np.rad2deg(series["tracking_angle"][-1]))
        report.final_tracking_rate_degps = float(np.rad2deg(series["tracking_rate"][-1]))
    return report


def write_outputs(log, out_dir, report, series=None, every=1):
    """Write CSV, column map and report files; fills ``report.outputs``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = log.name
    series = series if series is not None else diagnostics_series(log)
    cols, data, meta = trajectory_table(log, series, every)
    paths = {
        "csv": out / f"{stem}.csv",
        "columns": out / f"{stem}_columns.json",
        "report_text": out / f"{stem}_report.txt",
        "report_json": out / f"{stem}_report.json",
    }
    write_csv(paths["csv"], cols, data)
    write_column_map(paths["columns"], cols, meta)
    report.outputs = {k: str(v) for k, v in paths.items()}
    write_report(report, paths["report_text"], paths["report_json"])
    return paths


def write_report(report, text_path, json_path):
    Path(text_path).write_text(report.to_text())
    Path(json_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
