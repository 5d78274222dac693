"""Agent behaviour: reward curve, discrete action groups, and two learners.

Rewards follow a Gaussian bell over the mean of an agent's sensor inputs,
offset by ``c`` and sign-flipped as a whole for attackers, so an attacker's
reward is exactly the negative of a defender's for the same inputs.  Actions
are factored: each actuator contributes one independent group of discrete
labels and the learner picks one label per group each turn.

Two interchangeable learners are provided: a small tanh Q-network trained by
one-step TD with experience replay, and a tabular Q-learner over a
discretized state, which doubles as a library-free reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ATTACKER = "attacker"
DEFENDER = "defender"
HOLD = "hold"

# Zero-reward boundary at 5 % mean-voltage deviation for the default width.
DEFAULT_SIGMA = 0.03
DEFAULT_C = math.exp(-(0.05**2) / (2.0 * DEFAULT_SIGMA**2))


class TrainingDiverged(RuntimeError):
    """Raised when a learning update produces a non-finite loss."""


def boundary_offset(sigma: float, deviation: float = 0.05) -> float:
    """The ``c`` that puts the reward zero-crossing at ``deviation`` from mu."""
    return math.exp(-(deviation**2) / (2.0 * sigma**2))


@dataclass(frozen=True)
class RewardParams:
    mu: float = 1.0
    sigma: float = DEFAULT_SIGMA
    c: float = DEFAULT_C
    agent_class: str = DEFENDER

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if not 0.0 < self.c < 1.0:
            raise ValueError("c must be in (0, 1)")
        if self.agent_class not in (ATTACKER, DEFENDER):
            raise ValueError(f"unknown agent class {self.agent_class!r}")


def reward(params: RewardParams, x_mean: float) -> float:
    """Bell-curve reward of the mean input; negated as a whole for attackers."""
    bell = math.exp(-((x_mean - params.mu) ** 2) / (2.0 * params.sigma**2)) - params.c
    return bell if params.agent_class == DEFENDER else -bell


# -- discrete action groups ---------------------------------------------------

TRANSFORMER = "transformer"
GENERATOR = "generator"
LOAD = "load"

LABELS_BY_KIND: dict[str, tuple[str, ...]] = {
    TRANSFORMER: ("decrement", HOLD, "increment"),
    GENERATOR: ("p_dec", "p_inc", "q_dec", "q_inc", HOLD),
    LOAD: ("decrement", HOLD, "increment"),
}

# Per-step actuator increments; moves clamped at device limits degrade to hold.
TAP_STEP = 1
GEN_P_STEP_MW = 0.1
GEN_Q_STEP_MVAR = 0.05
LOAD_SCALING_STEP = 0.1


@dataclass(frozen=True)
class ActuatorRef:
    kind: str
    index: int

    def __post_init__(self) -> None:
        if self.kind not in LABELS_BY_KIND:
            raise ValueError(f"unknown actuator kind {self.kind!r}")


@dataclass(frozen=True)
class ActionGroup:
    actuator: ActuatorRef
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.labels) < 2:
            raise ValueError("action group needs at least 2 labels")
        if HOLD not in self.labels:
            raise ValueError("every action group must contain 'hold'")


def default_group(actuator: ActuatorRef) -> ActionGroup:
    return ActionGroup(actuator, LABELS_BY_KIND[actuator.kind])


# -- Q-network ----------------------------------------------------------------


@dataclass
class QNetwork:
    """Two-layer perceptron, tanh hidden layer, identity output."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    group_sizes: tuple[int, ...]

    @property
    def n_in(self) -> int:
        return self.w1.shape[1]

    @property
    def n_out(self) -> int:
        return self.w2.shape[0]

    def group_offsets(self) -> list[int]:
        offs = [0]
        for size in self.group_sizes:
            offs.append(offs[-1] + size)
        return offs

    def parameters(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


def init_qnetwork(
    n_in: int,
    group_sizes: tuple[int, ...],
    hidden: int,
    rng: np.random.Generator,
    init_scale: float = 0.1,
) -> QNetwork:
    """Weights uniform in [-init_scale, init_scale], biases zero."""
    n_out = sum(group_sizes)
    return QNetwork(
        w1=rng.uniform(-init_scale, init_scale, size=(hidden, n_in)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-init_scale, init_scale, size=(n_out, hidden)),
        b2=np.zeros(n_out),
        group_sizes=tuple(group_sizes),
    )


def _forward_flat(net: QNetwork, x: np.ndarray) -> np.ndarray:
    """Feed-forward on a batch (rows are inputs); returns (batch, n_out)."""
    if x.shape[-1] != net.n_in:
        raise ValueError(f"input has {x.shape[-1]} features, network expects {net.n_in}")
    hidden = np.tanh(x @ net.w1.T + net.b1)
    return hidden @ net.w2.T + net.b2


def forward(net: QNetwork, x: np.ndarray) -> list[np.ndarray]:
    """Q-values for one input, split into one array per action group."""
    q = _forward_flat(net, np.asarray(x, dtype=float).reshape(1, -1))[0]
    offs = net.group_offsets()
    return [q[offs[i] : offs[i + 1]] for i in range(len(net.group_sizes))]


def select_actions(
    net: QNetwork,
    x: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
) -> tuple[int, ...]:
    """Index of the chosen label per group; epsilon-greedy, argmax ties to lowest index."""
    grouped = forward(net, x)
    chosen = []
    for q in grouped:
        if epsilon > 0.0 and rng.random() < epsilon:
            chosen.append(int(rng.integers(len(q))))
        else:
            chosen.append(int(np.argmax(q)))
    return tuple(chosen)


# -- TD learning --------------------------------------------------------------


@dataclass(frozen=True)
class Transition:
    x: np.ndarray
    actions: tuple[int, ...]
    reward: float
    x_next: np.ndarray


def td_targets(net: QNetwork, batch: list[Transition], gamma: float) -> np.ndarray:
    """One-step targets r + gamma * max_a' Q(x', a') per transition and group."""
    x_next = np.stack([t.x_next for t in batch])
    q_next = _forward_flat(net, x_next)
    offs = net.group_offsets()
    targets = np.empty((len(batch), len(net.group_sizes)))
    for g in range(len(net.group_sizes)):
        best = q_next[:, offs[g] : offs[g + 1]].max(axis=1)
        targets[:, g] = [t.reward for t in batch] + gamma * best
    return targets


def td_loss_and_grads(
    net: QNetwork,
    batch: list[Transition],
    targets: np.ndarray,
) -> tuple[float, list[np.ndarray]]:
    """Mean squared error on the chosen labels' q-values, with analytic gradients.

    Targets are fixed constants (semi-gradient); the mean runs over
    batch entries and groups.
    """
    x = np.stack([t.x for t in batch])
    n_batch, n_groups = len(batch), len(net.group_sizes)
    offs = net.group_offsets()

    hidden = np.tanh(x @ net.w1.T + net.b1)
    q = hidden @ net.w2.T + net.b2

    dloss_dq = np.zeros_like(q)
    loss = 0.0
    for b, t in enumerate(batch):
        for g, a in enumerate(t.actions):
            col = offs[g] + a
            diff = q[b, col] - targets[b, g]
            loss += diff * diff
            dloss_dq[b, col] += 2.0 * diff
    scale = 1.0 / (n_batch * n_groups)
    loss *= scale
    dloss_dq *= scale

    grad_w2 = dloss_dq.T @ hidden
    grad_b2 = dloss_dq.sum(axis=0)
    d_hidden = (dloss_dq @ net.w2) * (1.0 - hidden**2)
    grad_w1 = d_hidden.T @ x
    grad_b1 = d_hidden.sum(axis=0)
    return float(loss), [grad_w1, grad_b1, grad_w2, grad_b2]


def td_update(
    net: QNetwork,
    batch: list[Transition],
    gamma: float,
    learning_rate: float,
) -> float:
    """One gradient-descent step on the mean batch TD loss; returns the loss."""
    targets = td_targets(net, batch, gamma)
    loss, grads = td_loss_and_grads(net, batch, targets)
    if not math.isfinite(loss):
        raise TrainingDiverged(f"TD loss is not finite ({loss})")
    for param, grad in zip(net.parameters(), grads):
        param -= learning_rate * grad
    return loss


# -- learner state and agents -------------------------------------------------


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear anneal from start to end over decay_steps, then constant."""

    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 1000

    def value(self, step: int) -> float:
        if step >= self.decay_steps:
            return self.end
        return self.start + (self.end - self.start) * (step / self.decay_steps)


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, size: int, rng: np.random.Generator) -> list[Transition]:
        idx = rng.choice(len(self._items), size=size, replace=False)
        return [self._items[i] for i in idx]


@dataclass
class QNetHyper:
    gamma: float = 0.95
    learning_rate: float = 1e-3
    replay_capacity: int = 1000
    batch_size: int = 32
    hidden: int = 32
    init_scale: float = 0.1
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if self.batch_size > self.replay_capacity:
            raise ValueError("batch_size cannot exceed replay_capacity")


@dataclass
class TabularHyper:
    alpha: float = 0.1
    gamma: float = 0.95
    n_bins: int = 21
    bin_lo: float = 0.85
    bin_hi: float = 1.15
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")


class QNetAgent:
    """Q-network learner over the factored action groups.

    ``act`` maps the observation to one label index per group and advances
    the exploration schedule; ``learn`` completes the pending transition with
    its reward and follow-up observation, then trains on a replay batch.
    """

    def __init__(self, groups: list[ActionGroup], n_in: int, hyper: QNetHyper,
                 rng: np.random.Generator):
        self.groups = list(groups)
        self.hyper = hyper
        self.rng = rng
        sizes = tuple(len(g.labels) for g in groups)
        self.net = init_qnetwork(n_in, sizes, hyper.hidden, rng, hyper.init_scale)
        self.buffer = ReplayBuffer(hyper.replay_capacity)
        self.step_count = 0
        self._pending: tuple[np.ndarray, tuple[int, ...]] | None = None

    @property
    def epsilon(self) -> float:
        return self.hyper.epsilon.value(self.step_count)

    def act(self, x: np.ndarray) -> tuple[int, ...]:
        x = np.asarray(x, dtype=float)
        chosen = select_actions(self.net, x, self.epsilon, self.rng)
        self._pending = (x, chosen)
        self.step_count += 1
        return chosen

    def learn(self, reward_value: float, x_next: np.ndarray) -> float | None:
        if self._pending is None:
            raise RuntimeError("learn() called before act()")
        x, chosen = self._pending
        self._pending = None
        self.buffer.push(Transition(x, chosen, float(reward_value),
                                    np.asarray(x_next, dtype=float)))
        if len(self.buffer) < self.hyper.batch_size:
            return None
        batch = self.buffer.sample(self.hyper.batch_size, self.rng)
        return td_update(self.net, batch, self.hyper.gamma, self.hyper.learning_rate)

    def labels_for(self, chosen: tuple[int, ...]) -> tuple[str, ...]:
        return tuple(g.labels[i] for g, i in zip(self.groups, chosen))


class QTable:
    """Per-group Q tables over a discrete state space; rows start at zero."""

    def __init__(self, n_states: int, group_sizes: tuple[int, ...]):
        self.tables = [np.zeros((n_states, size)) for size in group_sizes]

    def greedy(self, state: int) -> tuple[int, ...]:
        return tuple(int(np.argmax(t[state])) for t in self.tables)

    def select(self, state: int, epsilon: float, rng: np.random.Generator) -> tuple[int, ...]:
        chosen = []
        for t in self.tables:
            if epsilon > 0.0 and rng.random() < epsilon:
                chosen.append(int(rng.integers(t.shape[1])))
            else:
                chosen.append(int(np.argmax(t[state])))
        return tuple(chosen)

    def update(self, state: int, actions: tuple[int, ...], reward_value: float,
               next_state: int, alpha: float, gamma: float) -> None:
        for t, a in zip(self.tables, actions):
            target = reward_value + gamma * float(np.max(t[next_state]))
            t[state, a] += alpha * (target - t[state, a])


class TabularQAgent:
    """Classic Q-learning over a discretized observation; same act/learn contract.

    The default discretization bins the mean of the observation vector into
    ``n_bins`` equal-width bins over [bin_lo, bin_hi].
    """

    def __init__(self, groups: list[ActionGroup], hyper: TabularHyper,
                 rng: np.random.Generator):
        self.groups = list(groups)
        self.hyper = hyper
        self.rng = rng
        sizes = tuple(len(g.labels) for g in groups)
        self.table = QTable(hyper.n_bins, sizes)
        self.step_count = 0
        self._pending: tuple[int, tuple[int, ...]] | None = None

    @property
    def epsilon(self) -> float:
        return self.hyper.epsilon.value(self.step_count)

    def discretize(self, x: np.ndarray) -> int:
        h = self.hyper
        mean = float(np.mean(x))
        frac = (mean - h.bin_lo) / (h.bin_hi - h.bin_lo)
        return min(max(int(frac * h.n_bins), 0), h.n_bins - 1)

    def act(self, x: np.ndarray) -> tuple[int, ...]:
        state = self.discretize(np.asarray(x, dtype=float))
        chosen = self.table.select(state, self.epsilon, self.rng)
        self._pending = (state, chosen)
        self.step_count += 1
        return chosen

    def learn(self, reward_value: float, x_next: np.ndarray) -> None:
        if self._pending is None:
            raise RuntimeError("learn() called before act()")
        state, chosen = self._pending
        self._pending = None
        next_state = self.discretize(np.asarray(x_next, dtype=float))
        self.table.update(state, chosen, float(reward_value), next_state,
                          self.hyper.alpha, self.hyper.gamma)

    def labels_for(self, chosen: tuple[int, ...]) -> tuple[str, ...]:
        return tuple(g.labels[i] for g, i in zip(self.groups, chosen))
