from __future__ import annotations

import numpy as np
import pytest

from gridduel.agents import ActuatorRef, QNetHyper, RewardParams, TabularHyper
from gridduel.config import AgentSpec, ExperimentConfig, OutputPaths
from gridduel.core import PerformanceConfig
from gridduel.grid import Bus, GridModel, Line, Load, arl_poc_grid
from gridduel.powerflow import solve_newton_raphson

# Closed-form solution of the two-bus case: slack 1.0/0 rad, series x=0.1 pu,
# PQ load P=0.5 pu, Q=0.  V2 is the high-voltage root of V^4 - V^2 + 0.0025.
TWO_BUS_V2 = 0.9987460731103327
TWO_BUS_THETA2 = -0.05008371058077993


def two_bus_grid(p_load_mw: float = 5.0, r_pu: float = 0.0) -> GridModel:
    return GridModel(
        s_base_mva=10.0,
        buses=(Bus(0, "slack", 110.0, v_setpoint_pu=1.0), Bus(1, "pq", 110.0)),
        lines=(Line(0, 1, r_pu=r_pu, x_pu=0.1),),
        loads=(Load(1, p_mw=p_load_mw, q_mvar=0.0),),
    ).validate()


def zero_load_grid(n_bus: int = 3) -> GridModel:
    buses = [Bus(0, "slack", 110.0, v_setpoint_pu=1.0)]
    buses += [Bus(i, "pq", 110.0) for i in range(1, n_bus)]
    lines = tuple(Line(i, i + 1, r_pu=0.01, x_pu=0.05) for i in range(n_bus - 1))
    return GridModel(s_base_mva=10.0, buses=tuple(buses), lines=lines).validate()


@pytest.fixture(scope="session")
def poc_grid():
    return arl_poc_grid()


@pytest.fixture(scope="session")
def poc_solution(poc_grid):
    sol = solve_newton_raphson(poc_grid)
    assert sol.converged
    return sol


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)


def experiment_config(rounds=1, steps_per_turn=1, seed=42, lone=False, learner="qnet"):
    """Small reference-grid experiment used across the suite (fast learners)."""
    sensors = tuple((b, "v_pu") for b in range(14))
    small_qnet = QNetHyper(hidden=8, batch_size=4, replay_capacity=64)
    kwargs = (
        {"learner_kind": "qnet", "qnet": small_qnet}
        if learner == "qnet"
        else {"learner_kind": "tabular", "tabular": TabularHyper()}
    )
    attacker = AgentSpec(
        id="attacker", agent_class="attacker", sensors=sensors,
        actuators=tuple(ActuatorRef("transformer", i) for i in range(6)),
        reward=RewardParams(agent_class="attacker"), **kwargs,
    )
    defender = AgentSpec(
        id="defender", agent_class="defender", sensors=sensors,
        actuators=tuple(ActuatorRef("generator", i) for i in range(4))
        + tuple(ActuatorRef("load", i) for i in range(6)),
        reward=RewardParams(agent_class="defender"), **kwargs,
    )
    return ExperimentConfig(
        name="test", seed=seed, grid_source="arl_poc_grid",
        agents=(attacker,) if lone else (attacker, defender),
        rounds=rounds, steps_per_turn=steps_per_turn,
        performance=PerformanceConfig(),
        outputs=OutputPaths("g.csv", "a.csv", "m.json"),
        allow_single_class=lone,
    )
