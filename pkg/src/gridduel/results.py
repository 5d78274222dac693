"""Run-log persistence, derived metrics and dependency-free SVG charts.

All writers are byte-deterministic: fixed header order, 17-significant-digit
floats in the CSVs, shortest round-trip floats in JSON, LF line endings.
Re-running the config a log was produced from regenerates identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    AgentSummary,
    PerformanceConfig,
    PhaseSegment,
    RunLog,
    StepRecord,
    classify_resilience_phases,
    operational_phase,
)

GRID_LOG_HEADER = "step,bus_id,v_pu,theta_rad,p_inj_pu,q_inj_pu"
AGENT_LOG_HEADER = "step,agent_id,inputs,outputs,reward"


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _write_text(path: str | Path, text: str) -> None:
    p = Path(path)
    if p.parent != Path(""):
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8", newline="\n")


def write_grid_log(log: RunLog, path: str | Path) -> None:
    """Per-step, per-bus grid state as CSV: one row per (step, bus)."""
    rows = [GRID_LOG_HEADER]
    for rec in log.steps:
        for b in range(len(rec.v_pu)):
            rows.append(
                f"{rec.t},{b},{_fmt(rec.v_pu[b])},{_fmt(rec.theta_rad[b])},"
                f"{_fmt(rec.p_inj_pu[b])},{_fmt(rec.q_inj_pu[b])}"
            )
    _write_text(path, "\n".join(rows) + "\n")


def write_agent_log(log: RunLog, path: str | Path) -> None:
    """Per-turn agent record as CSV; vector cells are semicolon-joined."""
    rows = [AGENT_LOG_HEADER]
    for rec in log.steps:
        inputs = ";".join(_fmt(v) for v in rec.x)
        outputs = ";".join(rec.y)
        rows.append(f"{rec.t},{rec.agent_id},{inputs},{outputs},{_fmt(rec.reward)}")
    _write_text(path, "\n".join(rows) + "\n")


# -- full run-log round trip ----------------------------------------------------


def write_run_log(log: RunLog, path: str | Path) -> None:
    """Self-contained JSON form of a run log, sufficient to recompute metrics."""
    doc = {
        "config_fingerprint": log.config_fingerprint,
        "name": log.name,
        "seed": log.seed,
        "rounds": log.rounds,
        "steps_per_turn": log.steps_per_turn,
        "performance": {
            "p_star": log.performance.p_star,
            "p_fail": log.performance.p_fail,
            "v_lo": log.performance.v_lo,
            "v_hi": log.performance.v_hi,
        },
        "agents": [
            {"id": a.agent_id, "class": a.agent_class, "learner": a.learner_kind}
            for a in log.agents
        ],
        "initial": {
            "v_pu": list(log.initial_v_pu),
            "theta_rad": list(log.initial_theta_rad),
            "converged": log.initial_converged,
            "p_world": log.initial_p_world,
        },
        "steps": [
            {
                "t": rec.t,
                "agent_id": rec.agent_id,
                "x": list(rec.x),
                "y": list(rec.y),
                "reward": rec.reward,
                "p_world": rec.p_world,
                "v_pu": list(rec.v_pu),
                "theta_rad": list(rec.theta_rad),
                "p_inj_pu": list(rec.p_inj_pu),
                "q_inj_pu": list(rec.q_inj_pu),
                "converged": rec.converged,
            }
            for rec in log.steps
        ],
    }
    _write_text(path, json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def read_run_log(path: str | Path) -> RunLog:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    perf = PerformanceConfig(**doc["performance"])
    steps = tuple(
        StepRecord(
            t=s["t"],
            agent_id=s["agent_id"],
            x=np.array(s["x"], dtype=float),
            y=tuple(s["y"]),
            reward=float(s["reward"]),
            p_world=float(s["p_world"]),
            v_pu=np.array(s["v_pu"], dtype=float),
            theta_rad=np.array(s["theta_rad"], dtype=float),
            p_inj_pu=np.array(s["p_inj_pu"], dtype=float),
            q_inj_pu=np.array(s["q_inj_pu"], dtype=float),
            converged=bool(s["converged"]),
        )
        for s in doc["steps"]
    )
    return RunLog(
        config_fingerprint=doc["config_fingerprint"],
        name=doc["name"],
        seed=int(doc["seed"]),
        rounds=int(doc["rounds"]),
        steps_per_turn=int(doc["steps_per_turn"]),
        performance=perf,
        agents=tuple(
            AgentSummary(a["id"], a["class"], a["learner"]) for a in doc["agents"]
        ),
        initial_v_pu=np.array(doc["initial"]["v_pu"], dtype=float),
        initial_theta_rad=np.array(doc["initial"]["theta_rad"], dtype=float),
        initial_converged=bool(doc["initial"]["converged"]),
        initial_p_world=float(doc["initial"]["p_world"]),
        steps=steps,
    )


# -- metrics ---------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    steps: tuple[int, ...]
    mean_voltage: tuple[float, ...]
    p_world: tuple[float, ...]
    operational_phase: tuple[str, ...]
    cumulative_positive_rewards: dict[str, tuple[int, ...]]
    attack_success_step: int | None
    resilience_segments: tuple[PhaseSegment, ...]


def compute_metrics(log: RunLog, cfg: PerformanceConfig) -> MetricsReport:
    """Series the result figures are drawn from, one sample per global step."""
    steps = tuple(rec.t for rec in log.steps)
    mean_voltage = tuple(float(np.mean(rec.v_pu)) for rec in log.steps)
    p_world = tuple(rec.p_world for rec in log.steps)
    phases = tuple(operational_phase(rec.v_pu, rec.converged, cfg) for rec in log.steps)

    cumulative: dict[str, tuple[int, ...]] = {}
    for agent in log.agents:
        count = 0
        series = []
        for rec in log.steps:
            if rec.agent_id == agent.agent_id and rec.reward > 0.0:
                count += 1
            series.append(count)
        cumulative[agent.agent_id] = tuple(series)

    attack_step: int | None = None
    for rec in log.steps:
        violated = (not rec.converged) or bool(
            np.any(rec.v_pu < cfg.v_lo) | np.any(rec.v_pu > cfg.v_hi)
        )
        if violated:
            attack_step = rec.t
            break

    segments = tuple(classify_resilience_phases(p_world, cfg)) if p_world else ()
    return MetricsReport(
        steps=steps,
        mean_voltage=mean_voltage,
        p_world=p_world,
        operational_phase=phases,
        cumulative_positive_rewards=cumulative,
        attack_success_step=attack_step,
        resilience_segments=segments,
    )


def metrics_doc(report: MetricsReport, log: RunLog) -> dict:
    """JSON-ready metrics document, annotated with the run's effective settings."""
    return {
        "name": log.name,
        "seed": log.seed,
        "rounds": log.rounds,
        "steps_per_turn": log.steps_per_turn,
        "config_fingerprint": log.config_fingerprint,
        "performance": {
            "p_star": log.performance.p_star,
            "p_fail": log.performance.p_fail,
            "v_lo": log.performance.v_lo,
            "v_hi": log.performance.v_hi,
        },
        "agents": [
            {"id": a.agent_id, "class": a.agent_class, "learner": a.learner_kind}
            for a in log.agents
        ],
        "steps": list(report.steps),
        "mean_voltage": list(report.mean_voltage),
        "p_world": list(report.p_world),
        "operational_phase": list(report.operational_phase),
        "cumulative_positive_rewards": {
            agent_id: list(series)
            for agent_id, series in report.cumulative_positive_rewards.items()
        },
        "attack_success_step": report.attack_success_step,
        "resilience_segments": [
            {"phase": seg.phase, "start": seg.start, "end": seg.end}
            for seg in report.resilience_segments
        ],
    }


def write_metrics(report: MetricsReport, log: RunLog, path: str | Path) -> None:
    _write_text(path, json.dumps(metrics_doc(report, log), indent=2, ensure_ascii=False) + "\n")


# -- SVG line chart ---------------------------------------------------------------

VIEW_W = 800
VIEW_H = 400
MARGIN_LEFT = 60
MARGIN_RIGHT = 20
MARGIN_TOP = 30
MARGIN_BOTTOM = 40
N_TICKS = 5


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_plot(
    series: Sequence[float],
    path: str | Path,
    title: str = "",
    x_label: str = "step",
    y_label: str = "",
    x_start: int = 0,
) -> None:
    """Write a self-contained SVG line chart of one series.

    The x axis runs from ``x_start`` over the sample indices; a constant
    series is drawn as a horizontal line at mid-height.
    """
    values = [float(v) for v in series]
    if not values:
        raise ValueError("series must be non-empty")
    lo, hi = min(values), max(values)
    if lo == hi:
        lo -= 0.5
        hi += 0.5

    plot_left = MARGIN_LEFT
    plot_right = VIEW_W - MARGIN_RIGHT
    plot_top = MARGIN_TOP
    plot_bottom = VIEW_H - MARGIN_BOTTOM
    span_x = max(len(values) - 1, 1)

    def x_px(i: int) -> float:
        return plot_left + (plot_right - plot_left) * i / span_x

    def y_px(v: float) -> float:
        return plot_bottom - (plot_bottom - plot_top) * (v - lo) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {VIEW_W} {VIEW_H}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
    ]
    if title:
        out.append(
            f'<text x="{VIEW_W / 2:.1f}" y="18" text-anchor="middle" '
            f'font-size="14" font-family="sans-serif">{_escape(title)}</text>'
        )
    for i in range(N_TICKS + 1):
        v = lo + (hi - lo) * i / N_TICKS
        y = y_px(v)
        out.append(
            f'<line x1="{plot_left}" y1="{y:.3f}" x2="{plot_right}" y2="{y:.3f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{plot_left - 6}" y="{y + 4:.3f}" text-anchor="end" '
            f'font-size="11" font-family="sans-serif">{v:.6g}</text>'
        )
    for i in range(N_TICKS + 1):
        idx = round(i * span_x / N_TICKS)
        x = x_px(idx)
        out.append(
            f'<line x1="{x:.3f}" y1="{plot_bottom}" x2="{x:.3f}" y2="{plot_bottom + 5}" '
            'stroke="#000000" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{x:.3f}" y="{plot_bottom + 18}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{x_start + idx}</text>'
        )
    out.append(
        f'<line x1="{plot_left}" y1="{plot_bottom}" x2="{plot_right}" y2="{plot_bottom}" '
        'stroke="#000000" stroke-width="1.5"/>'
    )
    out.append(
        f'<line x1="{plot_left}" y1="{plot_top}" x2="{plot_left}" y2="{plot_bottom}" '
        'stroke="#000000" stroke-width="1.5"/>'
    )
    points = " ".join(f"{x_px(i):.3f},{y_px(v):.3f}" for i, v in enumerate(values))
    out.append(
        f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{points}"/>'
    )
    out.append(
        f'<text x="{(plot_left + plot_right) / 2:.1f}" y="{VIEW_H - 8}" text-anchor="middle" '
        f'font-size="12" font-family="sans-serif">{_escape(x_label)}</text>'
    )
    if y_label:
        mid_y = (plot_top + plot_bottom) / 2
        out.append(
            f'<text x="14" y="{mid_y:.1f}" text-anchor="middle" font-size="12" '
            f'font-family="sans-serif" transform="rotate(-90 14 {mid_y:.1f})">'
            f"{_escape(y_label)}</text>"
        )
    out.append("</svg>")
    _write_text(path, "\n".join(out) + "\n")
