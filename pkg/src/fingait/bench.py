"""Benchmark harness: synthetic request sweeps, closed-loop runs and timing.

Every command writes CSV tables plus a ``metadata.json`` into an output
directory. Per-request rows carry everything the aggregates are computed
from; rows that hold wall-clock times live in separate files so the
deterministic tables are byte-identical across reruns.
"""

from __future__ import annotations

import csv
import json
import platform
import socket
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from . import __version__
from .config import RunConfig, gait_from, plant_from
from .exceptions import ConfigurationError
from .forward_model import (
    DnnForwardModel,
    LstmForwardModel,
    SyntheticSurrogate,
    load_model,
    random_dnn_weights,
    random_lstm_weights,
)
from .loss import LossWeights
from .search import InverseRequest, propose_gait
from .simulation import ClosedLoopConfig, generate_synthetic_requests, generate_targets, run_closed_loop, write_trajectory_csv

SYNTH_ROW_FIELDS = (
    "method", "w_t", "w_k", "dt_max", "dataset", "request", "target_thrust", "predicted_thrust",
    "thrust_loss", "kinematic_loss", "overall_loss", "evaluations", "budget_exhausted",
    "stroke_amp", "pitch_amp", "flap_freq", "offset",
)
SUMMARY_FIELDS = (
    "method", "w_t", "n", "mean_thrust_loss", "mean_kinematic_loss", "mean_overall_loss",
    "max_time_s", "p99_time_s", "mean_evaluations", "max_evaluations",
)
TABLE_METRICS = ("thrust_loss", "kinematic_loss", "overall_loss", "max_time_s")


@dataclass
class BenchReport:
    """Aggregates of one benchmark command, plus the files written."""

    summary: list
    table: list
    files: dict = field(default_factory=dict)
    budget_violated: bool = False
    extra: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def build_model(cfg: RunConfig):
    m = cfg.model
    motor = cfg.motor.build()
    if m.kind == "synthetic":
        return SyntheticSurrogate()
    if m.weights_path is not None:
        model = load_model(m.weights_path, motor)
        expected = LstmForwardModel if m.kind == "lstm" else DnnForwardModel
        if not isinstance(model, expected):
            raise ConfigurationError(f"{m.weights_path} holds {type(model).__name__}, config asks for {m.kind}")
        return model
    if m.kind == "lstm":
        return LstmForwardModel(random_lstm_weights(m.random_seed), motor)
    return DnnForwardModel(random_dnn_weights(m.random_seed))


def percentile99(values) -> float:
    return float(np.percentile(np.asarray(values, dtype=float), 99))


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in fields])


def _fmt(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    return value


def read_csv(path) -> list:
    """Rows of a CSV written by this module, numbers parsed back to float/int."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for k, v in row.items():
                try:
                    parsed[k] = int(v)
                except ValueError:
                    try:
                        parsed[k] = float(v)
                    except ValueError:
                        parsed[k] = v
            out.append(parsed)
    return out


def _metadata(cfg: RunConfig, command: str, **extra) -> dict:
    return {
        "command": command,
        "package_version": __version__,
        "host": socket.gethostname(),
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "python": platform.python_version(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": cfg.seed,
        "time_budget_s": cfg.time_budget_s,
        "config": cfg.model_dump(mode="json"),
        **extra,
    }


def _out_dir(cfg: RunConfig, out_dir) -> Path:
    path = Path(out_dir if out_dir is not None else cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def summarize(rows, times, group_keys=("method", "w_t")) -> list:
    """Per-group means of the losses plus time statistics.

    ``rows`` and ``times`` are aligned lists; ``times`` holds seconds.
    """
    groups = {}
    for row, t in zip(rows, times):
        groups.setdefault(tuple(row[k] for k in group_keys), []).append((row, t))
    summary = []
    for key, items in groups.items():
        rs = [r for r, _ in items]
        ts = [t for _, t in items]
        evals = [r["evaluations"] for r in rs]
        summary.append({
            **dict(zip(group_keys, key)),
            "n": len(rs),
            "mean_thrust_loss": float(np.mean([r["thrust_loss"] for r in rs])),
            "mean_kinematic_loss": float(np.mean([r["kinematic_loss"] for r in rs])),
            "mean_overall_loss": float(np.mean([r["overall_loss"] for r in rs])),
            "max_time_s": float(np.max(ts)),
            "p99_time_s": percentile99(ts),
            "mean_evaluations": float(np.mean(evals)),
            "max_evaluations": int(np.max(evals)),
        })
    return summary


def method_table(rows, times, methods) -> list:
    """One row per metric and one column per method.

    Losses are averaged over every request of the method (all weight
    settings pooled); the time row is the worst case over all its calls.
    """
    table = []
    for metric in TABLE_METRICS:
        line = {"metric": metric}
        for m in methods:
            picked = [(r, t) for r, t in zip(rows, times) if r["method"] == m]
            if metric == "max_time_s":
                line[m] = float(np.max([t for _, t in picked]))
            else:
                line[m] = float(np.mean([r[metric] for r, _ in picked]))
        table.append(line)
    return table


# --------------------------------------------------------------------------
# synthetic request sweep
# --------------------------------------------------------------------------

def synth_dataset_seed(seed: int, dataset: int) -> int:
    return seed * 1_000 + dataset


def synth_request_seed(seed: int, dataset: int, index: int) -> int:
    return seed * 1_000_000 + 1000 * dataset + index


def run_synth(cfg: RunConfig, model=None, progress=None):
    """Run every method x weight setting over the request datasets.

    Returns ``(rows, times)``: one deterministic row per request and the
    matching wall times in seconds. Each dataset starts from the configured
    initial gait and carries the proposed gait from request to request.
    """
    model = model if model is not None else build_model(cfg)
    space = cfg.space.build()
    datasets = [generate_synthetic_requests(dt, synth_dataset_seed(cfg.seed, d), cfg.synth.n_requests)
                for d, dt in enumerate(cfg.synth.dt_max_values)]
    rows, times = [], []
    for method in cfg.methods:
        for w_t in cfg.thrust_weights:
            weights = LossWeights.from_thrust_weight(w_t)
            for d, data in enumerate(datasets):
                gait = gait_from(cfg.synth.initial_gait)
                for i, target in enumerate(data.requests):
                    search_cfg = cfg.search.build(synth_request_seed(cfg.seed, d, i))
                    result = propose_gait(InverseRequest(target, gait, weights), method, search_cfg, model, space)
                    gait = result.proposed_gait
                    rows.append({
                        "method": method, "w_t": w_t, "w_k": weights.kinematic, "dt_max": data.dt_max,
                        "dataset": d, "request": i, "target_thrust": target,
                        "predicted_thrust": result.loss.predicted_thrust,
                        "thrust_loss": result.loss.thrust_loss,
                        "kinematic_loss": result.loss.kinematic_loss,
                        "overall_loss": result.loss.total,
                        "evaluations": result.evaluations,
                        "budget_exhausted": result.budget_exhausted,
                        "stroke_amp": gait.stroke_amplitude, "pitch_amp": gait.pitch_amplitude,
                        "flap_freq": gait.flap_frequency, "offset": gait.stroke_pitch_offset,
                    })
                    times.append(result.wall_time)
                if progress:
                    progress(f"synth {method} w_t={w_t} dt_max={data.dt_max}")
    return rows, times


def loss_curves(rows) -> list:
    """Mean losses per (method, w_t, dt_max), the loss-vs-step-size curves."""
    groups = {}
    for r in rows:
        groups.setdefault((r["method"], r["w_t"], r["dt_max"]), []).append(r)
    return [{
        "method": m, "w_t": w, "dt_max": dt, "n": len(rs),
        "mean_thrust_loss": float(np.mean([r["thrust_loss"] for r in rs])),
        "mean_kinematic_loss": float(np.mean([r["kinematic_loss"] for r in rs])),
        "mean_overall_loss": float(np.mean([r["overall_loss"] for r in rs])),
    } for (m, w, dt), rs in groups.items()]


def kinematic_trend(curves) -> list:
    """Spearman correlation of dt_max against mean kinematic loss per (method, w_t)."""
    groups = {}
    for c in curves:
        groups.setdefault((c["method"], c["w_t"]), []).append((c["dt_max"], c["mean_kinematic_loss"]))
    out = []
    for (m, w), pts in groups.items():
        pts.sort()
        rho = spearmanr([p[0] for p in pts], [p[1] for p in pts])[0] if len(pts) > 1 else float("nan")
        out.append({"method": m, "w_t": w, "spearman_rho": float(rho)})
    return out


def cmd_synth(cfg: RunConfig, out_dir=None, model=None, progress=None) -> BenchReport:
    out = _out_dir(cfg, out_dir)
    rows, times = run_synth(cfg, model, progress)
    summary = summarize(rows, times)
    table = method_table(rows, times, cfg.methods)
    curves = loss_curves(rows)
    trend = kinematic_trend(curves)
    timing_rows = [{"method": r["method"], "w_t": r["w_t"], "dataset": r["dataset"], "request": r["request"],
                    "solver_s": t} for r, t in zip(rows, times)]
    files = {
        "requests": out / "synth_requests.csv",
        "timings": out / "synth_timings.csv",
        "curves": out / "synth_curves.csv",
        "trend": out / "synth_trend.csv",
        "summary": out / "synth_summary.csv",
        "table": out / "synth_table.csv",
        "metadata": out / "metadata.json",
    }
    _write_csv(files["requests"], SYNTH_ROW_FIELDS, rows)
    _write_csv(files["timings"], ("method", "w_t", "dataset", "request", "solver_s"), timing_rows)
    _write_csv(files["curves"], ("method", "w_t", "dt_max", "n", "mean_thrust_loss", "mean_kinematic_loss",
                                 "mean_overall_loss"), curves)
    _write_csv(files["trend"], ("method", "w_t", "spearman_rho"), trend)
    _write_csv(files["summary"], SUMMARY_FIELDS, summary)
    _write_csv(files["table"], ("metric", *cfg.methods), table)
    violated = bool(times) and max(times) >= cfg.time_budget_s
    files["metadata"].write_text(json.dumps(_metadata(cfg, "synth", budget_violated=violated), indent=2))
    return BenchReport(summary, table, files, violated, {"curves": curves, "trend": trend})


# --------------------------------------------------------------------------
# closed loop
# --------------------------------------------------------------------------

def closed_loop_targets(cfg: RunConfig) -> np.ndarray:
    s = cfg.simulate
    lo, hi = s.position_range
    return generate_targets(cfg.seed, s.n_targets, lo, hi, s.max_target_step)


def closed_loop_config(cfg: RunConfig, w_t: float) -> ClosedLoopConfig:
    s = cfg.simulate
    return ClosedLoopConfig(
        weights=LossWeights.from_thrust_weight(w_t),
        search=cfg.search.build(cfg.seed),
        pid=s.pid.build(),
        plant=plant_from(s.plant),
        initial_gait=gait_from(s.initial_gait),
        cycles_per_target=s.cycles_per_target,
        seed=cfg.seed,
    )


def tracking_errors(records, cycles_per_target: int) -> list:
    """(step size, final absolute error) for each target of one run."""
    out = []
    for k in range(0, len(records), cycles_per_target):
        last = records[k + cycles_per_target - 1]
        step = abs(last.target_position - records[k].start_position)
        out.append((step, abs(last.target_position - last.position)))
    return out


def cmd_simulate(cfg: RunConfig, out_dir=None, model=None, progress=None) -> BenchReport:
    out = _out_dir(cfg, out_dir)
    model = model if model is not None else build_model(cfg)
    space = cfg.space.build()
    targets = closed_loop_targets(cfg)
    files = {}
    rows, times, tracking = [], [], []
    for method in cfg.methods:
        for w_t in cfg.thrust_weights:
            records = run_closed_loop(targets, method, closed_loop_config(cfg, w_t), model, space)
            name = f"trajectory_{method}_wt{w_t:g}"
            files[name] = out / f"{name}.csv"
            write_trajectory_csv(records, files[name])
            for r in records:
                rows.append({"method": method, "w_t": w_t, "thrust_loss": r.L_t, "kinematic_loss": r.L_k,
                             "overall_loss": r.L_total, "evaluations": r.evaluations})
                times.append(r.solver_ms / 1e3)
            errors = tracking_errors(records, cfg.simulate.cycles_per_target)
            small = [e for s, e in errors if s <= 1.0]
            tracking.append({
                "method": method, "w_t": w_t, "targets": len(errors), "small_step_targets": len(small),
                "small_step_within_0.5m": sum(e < 0.5 for e in small),
                "median_final_error_m": float(np.median([e for _, e in errors])),
                "max_abs_thrust_request": float(max(abs(r.thrust_request) for r in records)),
            })
            if progress:
                progress(f"simulate {method} w_t={w_t}")
    summary = summarize(rows, times)
    table = method_table(rows, times, cfg.methods)
    files["summary"] = out / "simulate_summary.csv"
    files["table"] = out / "simulate_table.csv"
    files["tracking"] = out / "simulate_tracking.csv"
    files["metadata"] = out / "metadata.json"
    _write_csv(files["summary"], SUMMARY_FIELDS, summary)
    _write_csv(files["table"], ("metric", *cfg.methods), table)
    _write_csv(files["tracking"], tuple(tracking[0]), tracking)
    violated = bool(times) and max(times) >= cfg.time_budget_s
    files["metadata"].write_text(json.dumps(_metadata(cfg, "simulate", budget_violated=violated), indent=2))
    return BenchReport(summary, table, files, violated, {"tracking": tracking})


# --------------------------------------------------------------------------
# timing
# --------------------------------------------------------------------------

TIMING_FIELDS = ("method", "mc_samples", "calls", "mean_s", "p99_s", "max_s", "budget_s", "over_budget")


def _timed_calls(method, search_settings, n_samples, requests, start_gait, weights, model, space, seed):
    gait = start_gait
    times = []
    for i, target in enumerate(requests):
        cfg = search_settings.build(seed * 1_000_000 + i)
        if n_samples is not None:
            cfg = replace(cfg, mc_samples=n_samples)
        result = propose_gait(InverseRequest(target, gait, weights), method, cfg, model, space)
        gait = result.proposed_gait
        times.append(result.wall_time)
    return times


def cmd_bench_timing(cfg: RunConfig, out_dir=None, model=None, progress=None) -> BenchReport:
    out = _out_dir(cfg, out_dir)
    model = model if model is not None else build_model(cfg)
    space = cfg.space.build()
    t = cfg.timing
    requests = generate_synthetic_requests(t.dt_max, cfg.seed, t.n_requests).requests
    weights = LossWeights.from_thrust_weight(cfg.thrust_weights[0])
    start_gait = gait_from(t.initial_gait)
    runs = [(m, None) for m in cfg.methods] + [("mc", n) for n in t.mc_sample_sizes]
    # compile and warm caches before anything is timed
    for m, n in runs:
        _timed_calls(m, cfg.search, n, requests[:t.warmup_calls], start_gait, weights, model, space, cfg.seed)
    rows, histogram = [], []
    for m, n in runs:
        times = _timed_calls(m, cfg.search, n, requests, start_gait, weights, model, space, cfg.seed)
        samples = n if n is not None else (cfg.search.mc_samples if m == "mc" else "")
        rows.append({
            "method": m, "mc_samples": samples, "calls": len(times),
            "mean_s": float(np.mean(times)), "p99_s": percentile99(times), "max_s": float(np.max(times)),
            "budget_s": cfg.time_budget_s, "over_budget": bool(np.max(times) >= cfg.time_budget_s),
        })
        histogram.extend({"method": m, "mc_samples": samples, "call": i, "solver_s": x} for i, x in enumerate(times))
        if progress:
            progress(f"timing {m} n={samples}")
    files = {"timing": out / "timing.csv", "calls": out / "timing_calls.csv", "metadata": out / "metadata.json"}
    _write_csv(files["timing"], TIMING_FIELDS, rows)
    _write_csv(files["calls"], ("method", "mc_samples", "call", "solver_s"), histogram)
    violated = any(r["over_budget"] for r in rows)
    files["metadata"].write_text(json.dumps(_metadata(cfg, "bench-timing", budget_violated=violated), indent=2))
    return BenchReport(rows, [], files, violated)

