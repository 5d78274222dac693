"""Single-file experiment definitions: load, validate, canonical save.

One JSON document pins everything a run needs: the grid (inline or the
built-in token), the agents with their sensors, actuators, reward and
learner settings, the round schedule, the performance thresholds and the
output sinks.  Loading is strict: unknown keys anywhere are rejected so a
typo cannot silently change an experiment, and every violation names the
offending field.  Saving is canonical (fixed key order, shortest float
representation), so a config has exactly one on-disk form and a stable
fingerprint.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import agents as agents_mod
from .agents import (
    ActuatorRef,
    EpsilonSchedule,
    QNetAgent,
    QNetHyper,
    RewardParams,
    TabularHyper,
    TabularQAgent,
    boundary_offset,
    default_group,
)
from .core import ActuatorBinding, PerformanceConfig, SensorBinding, V_QUANTITY
from .grid import Bus, Generator, GridModel, Line, Load, ModelValidationError, Transformer, arl_poc_grid

QNET = "qnet"
TABULAR = "tabular"

GRID_BUILDERS = {"arl_poc_grid": arl_poc_grid}


class ConfigError(ValueError):
    """Raised when an experiment document fails parsing or validation."""


# -- strict-dict helpers -------------------------------------------------------


def _as_dict(value, ctx: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{ctx}: expected an object")
    return dict(value)


def _as_list(value, ctx: str) -> list:
    if not isinstance(value, list):
        raise ConfigError(f"{ctx}: expected an array")
    return value


def _pop(d: dict, key: str, ctx: str, required: bool = True, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"{ctx}: missing required key '{key}'")
        return default
    return d.pop(key)

def _done(d: dict, ctx: str) -> None:
    if d:
        raise ConfigError(f"{ctx}: unknown key(s) {sorted(d)}")


def _int(value, ctx: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{ctx}: expected an integer")
    return value


def _float(value, ctx: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{ctx}: expected a number")
    return float(value)


def _str(value, ctx: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{ctx}: expected a string")
    return value


def _bool(value, ctx: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{ctx}: expected a boolean")
    return value


# -- typed config ---------------------------------------------------------------


@dataclass(frozen=True)
class OutputPaths:
    grid_log_path: str
    agent_log_path: str
    metrics_path: str
    run_log_path: str | None = None


@dataclass(frozen=True)
class AgentSpec:
    id: str
    agent_class: str
    sensors: tuple[tuple[int, str], ...]
    actuators: tuple[ActuatorRef, ...]
    reward: RewardParams
    learner_kind: str
    qnet: QNetHyper | None = None
    tabular: TabularHyper | None = None

    def sensor_binding(self) -> SensorBinding:
        return SensorBinding(self.sensors)

    def actuator_binding(self) -> ActuatorBinding:
        return ActuatorBinding(tuple(default_group(ref) for ref in self.actuators))

    def reward_params(self) -> RewardParams:
        return self.reward

    def make_agent(self, rng: np.random.Generator) -> QNetAgent | TabularQAgent:
        groups = [default_group(ref) for ref in self.actuators]
        if self.learner_kind == QNET:
            return QNetAgent(groups, n_in=len(self.sensors), hyper=self.qnet, rng=rng)
        return TabularQAgent(groups, hyper=self.tabular, rng=rng)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int
    grid_source: str | GridModel
    agents: tuple[AgentSpec, ...]
    rounds: int
    steps_per_turn: int
    performance: PerformanceConfig
    outputs: OutputPaths
    allow_single_class: bool = False

    def build_grid(self) -> GridModel:
        if isinstance(self.grid_source, str):
            return GRID_BUILDERS[self.grid_source]()
        return self.grid_source

    def fingerprint(self) -> str:
        return hashlib.sha256(save_config(self).encode("utf-8")).hexdigest()


# -- parsing --------------------------------------------------------------------


def _parse_grid(value, ctx: str) -> str | GridModel:
    if isinstance(value, str):
        if value not in GRID_BUILDERS:
            raise ConfigError(f"{ctx}: unknown grid token {value!r}")
        return value
    d = _as_dict(value, ctx)
    s_base = _float(_pop(d, "s_base_mva", ctx), f"{ctx}.s_base_mva")

    buses = []
    for i, raw in enumerate(_as_list(_pop(d, "buses", ctx), f"{ctx}.buses")):
        c = f"{ctx}.buses[{i}]"
        b = _as_dict(raw, c)
        setpoint = _pop(b, "v_setpoint_pu", c, required=False)
        buses.append(
            Bus(
                id=_int(_pop(b, "id", c), f"{c}.id"),
                kind=_str(_pop(b, "kind", c), f"{c}.kind"),
                base_kv=_float(_pop(b, "base_kv", c), f"{c}.base_kv"),
                v_setpoint_pu=None if setpoint is None else _float(setpoint, f"{c}.v_setpoint_pu"),
                name=_str(_pop(b, "name", c, required=False, default=""), f"{c}.name"),
            )
        )
        _done(b, c)

    lines = []
    for i, raw in enumerate(_as_list(_pop(d, "lines", ctx, required=False, default=[]), f"{ctx}.lines")):
        c = f"{ctx}.lines[{i}]"
        b = _as_dict(raw, c)
        lines.append(
            Line(
                from_bus=_int(_pop(b, "from_bus", c), f"{c}.from_bus"),
                to_bus=_int(_pop(b, "to_bus", c), f"{c}.to_bus"),
                r_pu=_float(_pop(b, "r_pu", c), f"{c}.r_pu"),
                x_pu=_float(_pop(b, "x_pu", c), f"{c}.x_pu"),
                b_shunt_pu=_float(_pop(b, "b_shunt_pu", c, required=False, default=0.0), f"{c}.b_shunt_pu"),
            )
        )
        _done(b, c)

    transformers = []
    for i, raw in enumerate(
        _as_list(_pop(d, "transformers", ctx, required=False, default=[]), f"{ctx}.transformers")
    ):
        c = f"{ctx}.transformers[{i}]"
        b = _as_dict(raw, c)
        transformers.append(
            Transformer(
                from_bus=_int(_pop(b, "from_bus", c), f"{c}.from_bus"),
                to_bus=_int(_pop(b, "to_bus", c), f"{c}.to_bus"),
                r_pu=_float(_pop(b, "r_pu", c), f"{c}.r_pu"),
                x_pu=_float(_pop(b, "x_pu", c), f"{c}.x_pu"),
                tap_pos=_int(_pop(b, "tap_pos", c, required=False, default=0), f"{c}.tap_pos"),
                tap_min=_int(_pop(b, "tap_min", c, required=False, default=0), f"{c}.tap_min"),
                tap_max=_int(_pop(b, "tap_max", c, required=False, default=0), f"{c}.tap_max"),
                tap_step_pu=_float(_pop(b, "tap_step_pu", c, required=False, default=0.0), f"{c}.tap_step_pu"),
            )
        )
        _done(b, c)

    generators = []
    for i, raw in enumerate(
        _as_list(_pop(d, "generators", ctx, required=False, default=[]), f"{ctx}.generators")
    ):
        c = f"{ctx}.generators[{i}]"
        b = _as_dict(raw, c)
        generators.append(
            Generator(
                bus=_int(_pop(b, "bus", c), f"{c}.bus"),
                p_mw=_float(_pop(b, "p_mw", c), f"{c}.p_mw"),
                q_mvar=_float(_pop(b, "q_mvar", c), f"{c}.q_mvar"),
                p_min_mw=_float(_pop(b, "p_min_mw", c), f"{c}.p_min_mw"),
                p_max_mw=_float(_pop(b, "p_max_mw", c), f"{c}.p_max_mw"),
                q_min_mvar=_float(_pop(b, "q_min_mvar", c), f"{c}.q_min_mvar"),
                q_max_mvar=_float(_pop(b, "q_max_mvar", c), f"{c}.q_max_mvar"),
            )
        )
        _done(b, c)

    loads = []
    for i, raw in enumerate(_as_list(_pop(d, "loads", ctx, required=False, default=[]), f"{ctx}.loads")):
        c = f"{ctx}.loads[{i}]"
        b = _as_dict(raw, c)
        loads.append(
            Load(
                bus=_int(_pop(b, "bus", c), f"{c}.bus"),
                p_mw=_float(_pop(b, "p_mw", c), f"{c}.p_mw"),
                q_mvar=_float(_pop(b, "q_mvar", c), f"{c}.q_mvar"),
                scaling=_float(_pop(b, "scaling", c, required=False, default=1.0), f"{c}.scaling"),
                scaling_min=_float(_pop(b, "scaling_min", c, required=False, default=1.0), f"{c}.scaling_min"),
                scaling_max=_float(_pop(b, "scaling_max", c, required=False, default=1.0), f"{c}.scaling_max"),
            )
        )
        _done(b, c)

    _done(d, ctx)
    try:
        return GridModel(
            s_base_mva=s_base,
            buses=tuple(buses),
            lines=tuple(lines),
            transformers=tuple(transformers),
            generators=tuple(generators),
            loads=tuple(loads),
        ).validate()
    except ModelValidationError as e:
        raise ConfigError(f"{ctx}: {e}") from e


def _parse_epsilon(d: dict, ctx: str) -> EpsilonSchedule:
    return EpsilonSchedule(
        start=_float(_pop(d, "epsilon_start", ctx, required=False, default=1.0), f"{ctx}.epsilon_start"),
        end=_float(_pop(d, "epsilon_end", ctx, required=False, default=0.05), f"{ctx}.epsilon_end"),
        decay_steps=_int(_pop(d, "epsilon_decay_steps", ctx, required=False, default=1000), f"{ctx}.epsilon_decay_steps"),
    )


def _parse_agent(raw, idx: int) -> AgentSpec:
    ctx = f"agents[{idx}]"
    d = _as_dict(raw, ctx)
    agent_id = _str(_pop(d, "id", ctx), f"{ctx}.id")
    agent_class = _str(_pop(d, "class", ctx), f"{ctx}.class")
    if agent_class not in (agents_mod.ATTACKER, agents_mod.DEFENDER):
        raise ConfigError(f"{ctx}.class: must be 'attacker' or 'defender'")

    sensors = []
    raw_sensors = _as_list(_pop(d, "sensors", ctx), f"{ctx}.sensors")
    if not raw_sensors:
        raise ConfigError(f"{ctx}.sensors: must not be empty")
    for i, s in enumerate(raw_sensors):
        c = f"{ctx}.sensors[{i}]"
        sd = _as_dict(s, c)
        bus = _int(_pop(sd, "bus", c), f"{c}.bus")
        quantity = _str(_pop(sd, "quantity", c, required=False, default=V_QUANTITY), f"{c}.quantity")
        if quantity != V_QUANTITY:
            raise ConfigError(f"{c}.quantity: unsupported quantity {quantity!r}")
        _done(sd, c)
        sensors.append((bus, quantity))

    actuators = []
    for i, a in enumerate(_as_list(_pop(d, "actuators", ctx), f"{ctx}.actuators")):
        c = f"{ctx}.actuators[{i}]"
        ad = _as_dict(a, c)
        kind = _str(_pop(ad, "kind", c), f"{c}.kind")
        if kind not in agents_mod.LABELS_BY_KIND:
            raise ConfigError(f"{c}.kind: unknown actuator kind {kind!r}")
        index = _int(_pop(ad, "index", c), f"{c}.index")
        labels = _pop(ad, "labels", c, required=False)
        if labels is not None:
            expected = list(agents_mod.LABELS_BY_KIND[kind])
            if list(labels) != expected:
                raise ConfigError(f"{c}.labels: invalid for kind {kind!r}, expected {expected}")
        _done(ad, c)
        actuators.append(ActuatorRef(kind, index))

    c = f"{ctx}.reward"
    rd = _as_dict(_pop(d, "reward", ctx, required=False, default={}), c)
    mu = _float(_pop(rd, "mu", c, required=False, default=1.0), f"{c}.mu")
    sigma = _float(_pop(rd, "sigma", c, required=False, default=agents_mod.DEFAULT_SIGMA), f"{c}.sigma")
    c_default = boundary_offset(sigma) if sigma > 0 else agents_mod.DEFAULT_C
    c_off = _float(_pop(rd, "c", c, required=False, default=c_default), f"{c}.c")
    _done(rd, c)
    try:
        params = RewardParams(mu=mu, sigma=sigma, c=c_off, agent_class=agent_class)
    except ValueError as e:
        raise ConfigError(f"{c}: {e}") from e

    c = f"{ctx}.learner"
    ld = _as_dict(_pop(d, "learner", ctx, required=False, default={}), c)
    kind = _str(_pop(ld, "kind", c, required=False, default=QNET), f"{c}.kind")
    qnet = tabular = None
    try:
        if kind == QNET:
            qnet = QNetHyper(
                gamma=_float(_pop(ld, "gamma", c, required=False, default=0.95), f"{c}.gamma"),
                learning_rate=_float(_pop(ld, "learning_rate", c, required=False, default=1e-3), f"{c}.learning_rate"),
                replay_capacity=_int(_pop(ld, "replay_capacity", c, required=False, default=1000), f"{c}.replay_capacity"),
                batch_size=_int(_pop(ld, "batch_size", c, required=False, default=32), f"{c}.batch_size"),
                hidden=_int(_pop(ld, "hidden", c, required=False, default=32), f"{c}.hidden"),
                epsilon=_parse_epsilon(ld, c),
            )
        elif kind == TABULAR:
            tabular = TabularHyper(
                alpha=_float(_pop(ld, "alpha", c, required=False, default=0.1), f"{c}.alpha"),
                gamma=_float(_pop(ld, "gamma", c, required=False, default=0.95), f"{c}.gamma"),
                n_bins=_int(_pop(ld, "n_bins", c, required=False, default=21), f"{c}.n_bins"),
                bin_lo=_float(_pop(ld, "bin_lo", c, required=False, default=0.85), f"{c}.bin_lo"),
                bin_hi=_float(_pop(ld, "bin_hi", c, required=False, default=1.15), f"{c}.bin_hi"),
                epsilon=_parse_epsilon(ld, c),
            )
        else:
            raise ConfigError(f"{c}.kind: must be 'qnet' or 'tabular'")
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"{c}: {e}") from e
    _done(ld, c)
    _done(d, ctx)
    return AgentSpec(
        id=agent_id,
        agent_class=agent_class,
        sensors=tuple(sensors),
        actuators=tuple(actuators),
        reward=params,
        learner_kind=kind,
        qnet=qnet,
        tabular=tabular,
    )


def load_config(text: str) -> ExperimentConfig:
    """Parse and fully validate one experiment document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"parse error at line {e.lineno} column {e.colno}: {e.msg}") from e
    d = _as_dict(doc, "config")

    name = _str(_pop(d, "name", "config"), "name")
    if not name:
        raise ConfigError("name: must not be empty")
    seed = _int(_pop(d, "seed", "config"), "seed")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed: must be a 64-bit unsigned integer")

    grid_source = _parse_grid(_pop(d, "grid", "config"), "grid")

    raw_agents = _as_list(_pop(d, "agents", "config"), "agents")
    if not raw_agents:
        raise ConfigError("agents: at least one agent is required")
    agent_specs = tuple(_parse_agent(a, i) for i, a in enumerate(raw_agents))

    c = "schedule"
    sd = _as_dict(_pop(d, "schedule", "config"), c)
    rounds = _int(_pop(sd, "rounds", c), f"{c}.rounds")
    if rounds < 0:
        raise ConfigError(f"{c}.rounds: must be >= 0")
    steps_per_turn = _int(_pop(sd, "steps_per_turn", c, required=False, default=1), f"{c}.steps_per_turn")
    if steps_per_turn < 1:
        raise ConfigError(f"{c}.steps_per_turn: must be >= 1")
    _done(sd, c)

    c = "performance"
    pd = _as_dict(_pop(d, "performance", "config"), c)
    try:
        performance = PerformanceConfig(
            p_star=_float(_pop(pd, "p_star", c, required=False, default=1.0), f"{c}.p_star"),
            p_fail=_float(_pop(pd, "p_fail", c, required=False, default=13.0 / 14.0), f"{c}.p_fail"),
            v_lo=_float(_pop(pd, "v_lo", c, required=False, default=0.9), f"{c}.v_lo"),
            v_hi=_float(_pop(pd, "v_hi", c, required=False, default=1.1), f"{c}.v_hi"),
        )
    except ValueError as e:
        raise ConfigError(f"{c}: {e}") from e
    _done(pd, c)

    c = "outputs"
    od = _as_dict(_pop(d, "outputs", "config"), c)
    run_log = _pop(od, "run_log_path", c, required=False)
    outputs = OutputPaths(
        grid_log_path=_str(_pop(od, "grid_log_path", c), f"{c}.grid_log_path"),
        agent_log_path=_str(_pop(od, "agent_log_path", c), f"{c}.agent_log_path"),
        metrics_path=_str(_pop(od, "metrics_path", c), f"{c}.metrics_path"),
        run_log_path=None if run_log is None else _str(run_log, f"{c}.run_log_path"),
    )
    for field_name in ("grid_log_path", "agent_log_path", "metrics_path"):
        if not getattr(outputs, field_name):
            raise ConfigError(f"outputs.{field_name}: must not be empty")
    _done(od, c)

    allow_single = _bool(
        _pop(d, "allow_single_class", "config", required=False, default=False),
        "allow_single_class",
    )
    _done(d, "config")

    cfg = ExperimentConfig(
        name=name,
        seed=seed,
        grid_source=grid_source,
        agents=agent_specs,
        rounds=rounds,
        steps_per_turn=steps_per_turn,
        performance=performance,
        outputs=outputs,
        allow_single_class=allow_single,
    )
    _validate_cross(cfg)
    return cfg


def _validate_cross(cfg: ExperimentConfig) -> None:
    grid = cfg.build_grid()

    ids_seen: dict[str, int] = {}
    for i, spec in enumerate(cfg.agents):
        if spec.id in ids_seen:
            raise ConfigError(f"agents[{i}]: duplicate agent id {spec.id!r}")
        ids_seen[spec.id] = i

    classes = {spec.agent_class for spec in cfg.agents}
    if len(classes) == 1 and not cfg.allow_single_class:
        only = next(iter(classes))
        raise ConfigError(
            f"agents: only {only}s are present; set allow_single_class to run without both classes"
        )

    owner: dict[tuple[str, int], int] = {}
    for i, spec in enumerate(cfg.agents):
        try:
            spec.sensor_binding().validate_against(grid)
            spec.actuator_binding().validate_against(grid)
        except ValueError as e:
            raise ConfigError(f"agents[{i}]: {e}") from e
        for ref in spec.actuators:
            key = (ref.kind, ref.index)
            if key in owner:
                raise ConfigError(
                    f"agents[{owner[key]}] and agents[{i}] share actuator {ref.kind}:{ref.index}"
                )
            owner[key] = i


# -- canonical save -------------------------------------------------------------


def _grid_doc(grid: GridModel) -> dict:
    doc: dict = {"s_base_mva": grid.s_base_mva}
    buses = []
    for b in grid.buses:
        bd: dict = {"id": b.id, "kind": b.kind, "base_kv": b.base_kv}
        if b.v_setpoint_pu is not None:
            bd["v_setpoint_pu"] = b.v_setpoint_pu
        if b.name:
            bd["name"] = b.name
        buses.append(bd)
    doc["buses"] = buses
    doc["lines"] = [
        {"from_bus": ln.from_bus, "to_bus": ln.to_bus, "r_pu": ln.r_pu,
         "x_pu": ln.x_pu, "b_shunt_pu": ln.b_shunt_pu}
        for ln in grid.lines
    ]
    doc["transformers"] = [
        {"from_bus": tr.from_bus, "to_bus": tr.to_bus, "r_pu": tr.r_pu, "x_pu": tr.x_pu,
         "tap_pos": tr.tap_pos, "tap_min": tr.tap_min, "tap_max": tr.tap_max,
         "tap_step_pu": tr.tap_step_pu}
        for tr in grid.transformers
    ]
    doc["generators"] = [
        {"bus": g.bus, "p_mw": g.p_mw, "q_mvar": g.q_mvar, "p_min_mw": g.p_min_mw,
         "p_max_mw": g.p_max_mw, "q_min_mvar": g.q_min_mvar, "q_max_mvar": g.q_max_mvar}
        for g in grid.generators
    ]
    doc["loads"] = [
        {"bus": ld.bus, "p_mw": ld.p_mw, "q_mvar": ld.q_mvar, "scaling": ld.scaling,
         "scaling_min": ld.scaling_min, "scaling_max": ld.scaling_max}
        for ld in grid.loads
    ]
    return doc


def _learner_doc(spec: AgentSpec) -> dict:
    if spec.learner_kind == QNET:
        h = spec.qnet
        return {
            "kind": QNET,
            "gamma": h.gamma,
            "learning_rate": h.learning_rate,
            "replay_capacity": h.replay_capacity,
            "batch_size": h.batch_size,
            "hidden": h.hidden,
            "epsilon_start": h.epsilon.start,
            "epsilon_end": h.epsilon.end,
            "epsilon_decay_steps": h.epsilon.decay_steps,
        }
    h = spec.tabular
    return {
        "kind": TABULAR,
        "alpha": h.alpha,
        "gamma": h.gamma,
        "n_bins": h.n_bins,
        "bin_lo": h.bin_lo,
        "bin_hi": h.bin_hi,
        "epsilon_start": h.epsilon.start,
        "epsilon_end": h.epsilon.end,
        "epsilon_decay_steps": h.epsilon.decay_steps,
    }


def save_config(cfg: ExperimentConfig) -> str:
    """Canonical UTF-8 JSON text for a config; loading it reproduces cfg exactly."""
    doc: dict = {
        "name": cfg.name,
        "seed": cfg.seed,
        "grid": cfg.grid_source if isinstance(cfg.grid_source, str) else _grid_doc(cfg.grid_source),
        "agents": [
            {
                "id": spec.id,
                "class": spec.agent_class,
                "sensors": [{"bus": bus, "quantity": quantity} for bus, quantity in spec.sensors],
                "actuators": [{"kind": ref.kind, "index": ref.index} for ref in spec.actuators],
                "reward": {"mu": spec.reward.mu, "sigma": spec.reward.sigma, "c": spec.reward.c},
                "learner": _learner_doc(spec),
            }
            for spec in cfg.agents
        ],
        "schedule": {"rounds": cfg.rounds, "steps_per_turn": cfg.steps_per_turn},
        "performance": {
            "p_star": cfg.performance.p_star,
            "p_fail": cfg.performance.p_fail,
            "v_lo": cfg.performance.v_lo,
            "v_hi": cfg.performance.v_hi,
        },
        "outputs": {
            "grid_log_path": cfg.outputs.grid_log_path,
            "agent_log_path": cfg.outputs.agent_log_path,
            "metrics_path": cfg.outputs.metrics_path,
        },
    }
    if cfg.outputs.run_log_path is not None:
        doc["outputs"]["run_log_path"] = cfg.outputs.run_log_path
    if cfg.allow_single_class:
        doc["allow_single_class"] = True
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def load_config_path(path: str | Path) -> ExperimentConfig:
    return load_config(Path(path).read_text(encoding="utf-8"))


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled experiment fixture (poc.json and friends)."""
    return Path(str(resources.files("gridduel").joinpath("fixtures", name)))
