"""World/agent execution cycle and the resilience analyses built on it.

A :class:`WorldState` couples a grid (current actuator settings) with its
re-solved power flow.  Agents see the world only through sensor bindings,
act only through disjoint actuator bindings, and the round-based scheduler
interleaves them one turn at a time, re-solving the grid between turns.

The module also hosts the scalar system-performance measure, the
attack-success predicate, the two phase classifiers (resilience process and
grid operating state) and the control-asymmetry check over a finished run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, NamedTuple, Sequence

import numpy as np

from . import agents as agents_mod
from .agents import ActionGroup, ActuatorRef, reward as reward_fn
from .grid import GridModel
from .powerflow import PowerFlowSolution, solve_newton_raphson

if TYPE_CHECKING:
    from .config import ExperimentConfig

V_QUANTITY = "v_pu"

# Normal-operation voltage band (distribution-grid practice); the hard band
# [v_lo, v_hi] comes from PerformanceConfig.
NORMAL_BAND = (0.95, 1.05)

# Tolerance band below nominal performance that still counts as planned
# operation when segmenting a performance series.
RESILIENCE_EPS = 0.02

# Performance when exactly one bus sits at the hard band edge and the rest
# are nominal on the 14-bus reference grid; ties the asymmetry threshold to
# the attack-success predicate.
DEFAULT_P_FAIL = 13.0 / 14.0

PHASE_NORMAL = "normal"
PHASE_ALERT = "alert"
PHASE_EMERGENCY = "emergency"
PHASE_BLACKOUT = "blackout"

PLAN = "plan"
ABSORB = "absorb"
RECOVER = "recover"
ADAPT = "adapt"


class ActuatorConflictError(ValueError):
    """Two actions in one application target the same device."""


@dataclass(frozen=True)
class PerformanceConfig:
    p_star: float = 1.0
    p_fail: float = DEFAULT_P_FAIL
    v_lo: float = 0.9
    v_hi: float = 1.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_fail < self.p_star <= 1.0:
            raise ValueError("require 0 <= p_fail < p_star <= 1")
        if not self.v_lo < 1.0 < self.v_hi:
            raise ValueError("require v_lo < 1 < v_hi")


@dataclass(frozen=True)
class SensorBinding:
    """Bus/quantity pairs an agent is allowed to observe, in reading order."""

    channels: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        if not self.channels:
            raise ValueError("sensor binding must not be empty")
        for bus, quantity in self.channels:
            if quantity != V_QUANTITY:
                raise ValueError(f"unsupported sensor quantity {quantity!r}")

    def validate_against(self, grid: GridModel) -> None:
        for bus, _ in self.channels:
            if not 0 <= bus < grid.n_bus:
                raise ValueError(f"sensor references missing bus {bus}")


@dataclass(frozen=True)
class ActuatorBinding:
    groups: tuple[ActionGroup, ...]

    def validate_against(self, grid: GridModel) -> None:
        counts = {
            agents_mod.TRANSFORMER: len(grid.transformers),
            agents_mod.GENERATOR: len(grid.generators),
            agents_mod.LOAD: len(grid.loads),
        }
        for g in self.groups:
            ref = g.actuator
            if not 0 <= ref.index < counts[ref.kind]:
                raise ValueError(f"actuator references missing {ref.kind} {ref.index}")
            if g.labels != agents_mod.LABELS_BY_KIND[ref.kind]:
                raise ValueError(
                    f"labels {g.labels} invalid for actuator kind {ref.kind!r}"
                )

    def refs(self) -> list[ActuatorRef]:
        return [g.actuator for g in self.groups]


@dataclass(frozen=True)
class Action:
    actuator: ActuatorRef
    label: str


@dataclass(frozen=True)
class WorldState:
    t: int
    grid: GridModel
    solution: PowerFlowSolution


@dataclass(frozen=True)
class Observation:
    values: np.ndarray
    degraded: bool


def initial_world(grid: GridModel) -> WorldState:
    return WorldState(t=0, grid=grid, solution=solve_newton_raphson(grid))


def observe(world: WorldState, binding: SensorBinding) -> Observation:
    """Voltage magnitudes at the bound buses; degraded when the solve failed."""
    values = np.array([world.solution.v_pu[bus] for bus, _ in binding.channels])
    values.flags.writeable = False
    return Observation(values=values, degraded=not world.solution.converged)


def _apply_one(grid: GridModel, action: Action) -> GridModel:
    ref, label = action.actuator, action.label
    if label == agents_mod.HOLD:
        return grid
    if ref.kind == agents_mod.TRANSFORMER:
        tr = grid.transformers[ref.index]
        delta = agents_mod.TAP_STEP if label == "increment" else -agents_mod.TAP_STEP
        return grid.with_tap(ref.index, tr.tap_pos + delta)
    if ref.kind == agents_mod.GENERATOR:
        g = grid.generators[ref.index]
        p, q = g.p_mw, g.q_mvar
        if label == "p_inc":
            p += agents_mod.GEN_P_STEP_MW
        elif label == "p_dec":
            p -= agents_mod.GEN_P_STEP_MW
        elif label == "q_inc":
            q += agents_mod.GEN_Q_STEP_MVAR
        elif label == "q_dec":
            q -= agents_mod.GEN_Q_STEP_MVAR
        else:
            raise ValueError(f"unknown generator action label {label!r}")
        return grid.with_generator_setpoint(ref.index, p, q)
    if ref.kind == agents_mod.LOAD:
        ld = grid.loads[ref.index]
        delta = agents_mod.LOAD_SCALING_STEP if label == "increment" else -agents_mod.LOAD_SCALING_STEP
        return grid.with_load_scaling(ref.index, ld.scaling + delta)
    raise ValueError(f"unknown actuator kind {ref.kind!r}")


def apply_actions(world: WorldState, actions: Iterable[Action]) -> WorldState:
    """Apply a batch of actions to disjoint devices and re-solve the grid.

    Out-of-range moves are clamped at the device limits (degrading to hold),
    so application order over disjoint devices cannot matter.
    """
    actions = list(actions)
    touched: set[tuple[str, int]] = set()
    for a in actions:
        key = (a.actuator.kind, a.actuator.index)
        if key in touched:
            raise ActuatorConflictError(
                f"two actions target the same device {key[0]}:{key[1]}"
            )
        touched.add(key)
    grid = world.grid
    for a in actions:
        grid = _apply_one(grid, a)
    return WorldState(t=world.t + 1, grid=grid, solution=solve_newton_raphson(grid))


def system_performance(world: WorldState, cfg: PerformanceConfig) -> float:
    """Mean per-bus distance from the hard band edge, in [0, 1]; 0 on a failed solve."""
    if not world.solution.converged:
        return 0.0
    v = world.solution.v_pu
    half_band = cfg.v_hi - 1.0
    return float(np.mean(np.maximum(0.0, 1.0 - np.abs(v - 1.0) / half_band)))


def attack_successful(world: WorldState, cfg: PerformanceConfig) -> bool:
    """True when any hard voltage limit is broken or the grid cannot be solved."""
    if not world.solution.converged:
        return True
    v = world.solution.v_pu
    return bool(np.any(v < cfg.v_lo) | np.any(v > cfg.v_hi))


def operational_phase(v_pu: np.ndarray, converged: bool, cfg: PerformanceConfig) -> str:
    """Operating-state label from bus voltages and solver convergence."""
    if not converged:
        return PHASE_BLACKOUT
    v = np.asarray(v_pu, float)
    if np.any(v < cfg.v_lo) or np.any(v > cfg.v_hi):
        return PHASE_EMERGENCY
    if np.any(v < NORMAL_BAND[0]) or np.any(v > NORMAL_BAND[1]):
        return PHASE_ALERT
    return PHASE_NORMAL


def classify_operational_phase(world: WorldState, cfg: PerformanceConfig) -> str:
    return operational_phase(world.solution.v_pu, world.solution.converged, cfg)


class PhaseSegment(NamedTuple):
    phase: str
    start: int
    end: int


def classify_resilience_phases(
    p_series: Sequence[float], cfg: PerformanceConfig
) -> list[PhaseSegment]:
    """Segment a performance series into plan/absorb/recover/adapt stretches.

    Planned operation is anything within RESILIENCE_EPS of nominal.  A drop
    below that opens an absorb segment that lasts while performance keeps
    falling; the climb back is recovery until the mean level of the segment
    preceding the event is reached again, which opens adaptation.  A later
    drop out of adaptation starts the next event with the adapt segment as
    its new baseline.
    """
    p = [float(v) for v in p_series]
    if not p:
        raise ValueError("performance series must be non-empty")
    thr = cfg.p_star * (1.0 - RESILIENCE_EPS)

    segments: list[PhaseSegment] = []
    pre_event = cfg.p_star
    phase = PLAN if p[0] >= thr else ABSORB
    start = 0

    def close(end: int) -> None:
        segments.append(PhaseSegment(phase, start, end))

    for t in range(1, len(p)):
        nxt: str | None = None
        if phase in (PLAN, ADAPT):
            if p[t] < thr:
                pre_event = float(np.mean(p[start:t]))
                nxt = ABSORB
        elif phase == ABSORB:
            if p[t] > p[t - 1]:
                nxt = RECOVER
        elif phase == RECOVER:
            if p[t] >= pre_event:
                nxt = ADAPT
            elif p[t] < p[t - 1]:
                nxt = ABSORB
        if nxt is not None:
            close(t - 1)
            phase, start = nxt, t
    close(len(p) - 1)
    return segments


@dataclass(frozen=True)
class StepRecord:
    t: int
    agent_id: str
    x: np.ndarray
    y: tuple[str, ...]
    reward: float
    p_world: float
    v_pu: np.ndarray
    theta_rad: np.ndarray
    p_inj_pu: np.ndarray
    q_inj_pu: np.ndarray
    converged: bool


@dataclass(frozen=True)
class AgentSummary:
    agent_id: str
    agent_class: str
    learner_kind: str


@dataclass(frozen=True)
class RunLog:
    config_fingerprint: str
    name: str
    seed: int
    rounds: int
    steps_per_turn: int
    performance: PerformanceConfig
    agents: tuple[AgentSummary, ...]
    initial_v_pu: np.ndarray
    initial_theta_rad: np.ndarray
    initial_converged: bool
    initial_p_world: float
    steps: tuple[StepRecord, ...]


def check_asymmetry_series(
    p_series: Sequence[float], p_fail: float, t0: int, first_t: int = 0
) -> tuple[bool, int | None]:
    """Whether performance stays above p_fail for every step after t0.

    Element ``i`` of the series is taken at time ``first_t + i``.  Returns
    the verdict and the earliest violating time, if any.
    """
    for i, value in enumerate(p_series):
        t = first_t + i
        if t > t0 and value <= p_fail:
            return False, t
    return True, None


def check_asymmetry(log: RunLog, cfg: PerformanceConfig, t0: int) -> tuple[bool, int | None]:
    """Control-asymmetry verdict over a finished run, granting a grace window up to t0."""
    for rec in log.steps:
        if rec.t > t0 and rec.p_world <= cfg.p_fail:
            return False, rec.t
    return True, None


def run_experiment(config: ExperimentConfig) -> RunLog:
    """Execute the configured duel and collect the full step-by-step log.

    Rounds advance the agents in their configured order; each agent takes
    ``steps_per_turn`` turns of observe / act / apply / re-solve / reward /
    learn before the next agent moves.  Everything is driven by generators
    derived from the experiment seed, so identical configs replay exactly.
    """
    grid = config.build_grid()
    perf = config.performance
    streams = np.random.SeedSequence(config.seed).spawn(len(config.agents))
    runners = [
        spec.make_agent(np.random.default_rng(stream))
        for spec, stream in zip(config.agents, streams)
    ]

    world = initial_world(grid)
    init = world
    records: list[StepRecord] = []
    t = 0
    for _ in range(config.rounds):
        for spec, runner in zip(config.agents, runners):
            for _ in range(config.steps_per_turn):
                obs = observe(world, spec.sensor_binding())
                chosen = runner.act(obs.values)
                labels = runner.labels_for(chosen)
                actions = [
                    Action(group.actuator, label)
                    for group, label in zip(runner.groups, labels)
                ]
                world = apply_actions(world, actions)
                obs_next = observe(world, spec.sensor_binding())
                r = reward_fn(spec.reward_params(), float(np.mean(obs_next.values)))
                runner.learn(r, obs_next.values)
                t += 1
                # The record describes the post-action world: x is the
                # observation the reward was evaluated on, y the action that
                # produced this state.
                records.append(
                    StepRecord(
                        t=t,
                        agent_id=spec.id,
                        x=obs_next.values,
                        y=labels,
                        reward=r,
                        p_world=system_performance(world, perf),
                        v_pu=world.solution.v_pu,
                        theta_rad=world.solution.theta_rad,
                        p_inj_pu=world.solution.p_inj_pu,
                        q_inj_pu=world.solution.q_inj_pu,
                        converged=world.solution.converged,
                    )
                )

    return RunLog(
        config_fingerprint=config.fingerprint(),
        name=config.name,
        seed=config.seed,
        rounds=config.rounds,
        steps_per_turn=config.steps_per_turn,
        performance=perf,
        agents=tuple(
            AgentSummary(spec.id, spec.agent_class, spec.learner_kind)
            for spec in config.agents
        ),
        initial_v_pu=init.solution.v_pu,
        initial_theta_rad=init.solution.theta_rad,
        initial_converged=init.solution.converged,
        initial_p_world=system_performance(init, perf),
        steps=tuple(records),
    )
