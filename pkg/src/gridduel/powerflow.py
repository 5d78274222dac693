"""Static AC power flow via full Newton-Raphson.

Every solve is a pure function of the grid description: flat start, analytic
Jacobian, dense linear algebra (the grids here are desk-scale).  A failed
solve is a legal outcome and is reported through the ``converged`` flag and
``failure_cause`` rather than an exception; downstream code treats it as a
blackout-grade world state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import PQ, SLACK, GridModel, build_admittance_matrix, scheduled_injections_pu

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 20


@dataclass(frozen=True)
class PowerFlowSolution:
    """Converged (or best-effort) operating point of a grid."""

    v_pu: np.ndarray
    theta_rad: np.ndarray
    p_inj_pu: np.ndarray
    q_inj_pu: np.ndarray
    converged: bool
    iterations: int
    max_mismatch_pu: float
    failure_cause: str | None = None
    mismatch_history: tuple[float, ...] = ()


def _bus_partitions(grid: GridModel) -> tuple[np.ndarray, np.ndarray]:
    """Indices of non-slack buses and of pq buses, both in ascending bus order."""
    kinds = [b.kind for b in grid.buses]
    non_slack = np.array([i for i, k in enumerate(kinds) if k != SLACK], dtype=int)
    pq = np.array([i for i, k in enumerate(kinds) if k == PQ], dtype=int)
    return non_slack, pq


def _flat_start(grid: GridModel) -> tuple[np.ndarray, np.ndarray]:
    v = np.ones(grid.n_bus)
    for b in grid.buses:
        if b.kind in (SLACK, "pv"):
            v[b.id] = float(b.v_setpoint_pu)
    return v, np.zeros(grid.n_bus)


def _mismatch(
    ybus: np.ndarray,
    p_sched: np.ndarray,
    q_sched: np.ndarray,
    v_pu: np.ndarray,
    theta_rad: np.ndarray,
    non_slack: np.ndarray,
    pq: np.ndarray,
) -> np.ndarray:
    vc = v_pu * np.exp(1j * theta_rad)
    s_calc = vc * np.conj(ybus @ vc)
    dp = p_sched - s_calc.real
    dq = q_sched - s_calc.imag
    return np.concatenate([dp[non_slack], dq[pq]])


def _jacobian(
    ybus: np.ndarray,
    v_pu: np.ndarray,
    theta_rad: np.ndarray,
    non_slack: np.ndarray,
    pq: np.ndarray,
) -> np.ndarray:
    """d(mismatch)/d[theta at non-slack; V at pq] as one dense square matrix."""
    vc = v_pu * np.exp(1j * theta_rad)
    ibus = ybus @ vc
    diag_v = np.diag(vc)
    diag_i = np.diag(ibus)
    diag_vnorm = np.diag(np.exp(1j * theta_rad))
    # Complex power sensitivities, S = diag(V) conj(Y V).
    ds_dtheta = 1j * diag_v @ np.conj(diag_i - ybus @ diag_v)
    ds_dvm = diag_v @ np.conj(ybus @ diag_vnorm) + np.conj(diag_i) @ diag_vnorm
    j11 = ds_dtheta.real[np.ix_(non_slack, non_slack)]
    j12 = ds_dvm.real[np.ix_(non_slack, pq)]
    j21 = ds_dtheta.imag[np.ix_(pq, non_slack)]
    j22 = ds_dvm.imag[np.ix_(pq, pq)]
    # Mismatch is scheduled minus calculated, hence the sign flip.
    return -np.block([[j11, j12], [j21, j22]])


def compute_mismatch(grid: GridModel, v_pu: np.ndarray, theta_rad: np.ndarray) -> np.ndarray:
    """Residual vector [dP at non-slack buses; dQ at pq buses] in per-unit."""
    ybus = build_admittance_matrix(grid)
    p_sched, q_sched = scheduled_injections_pu(grid)
    non_slack, pq = _bus_partitions(grid)
    return _mismatch(ybus, p_sched, q_sched, np.asarray(v_pu, float),
                     np.asarray(theta_rad, float), non_slack, pq)


def compute_jacobian(grid: GridModel, v_pu: np.ndarray, theta_rad: np.ndarray) -> np.ndarray:
    """Analytic derivative of :func:`compute_mismatch` w.r.t. the solver state."""
    ybus = build_admittance_matrix(grid)
    non_slack, pq = _bus_partitions(grid)
    return _jacobian(ybus, np.asarray(v_pu, float), np.asarray(theta_rad, float),
                     non_slack, pq)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def solve_newton_raphson(
    grid: GridModel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PowerFlowSolution:
    """Solve the AC power flow from a flat start.

    ``iterations`` counts mismatch evaluations; at most ``max_iter`` Newton
    steps are taken between them.  Singular Jacobians and diverging iterates
    yield a non-converged solution carrying the last finite operating point.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    ybus = build_admittance_matrix(grid)
    p_sched, q_sched = scheduled_injections_pu(grid)
    non_slack, pq = _bus_partitions(grid)
    n_th = len(non_slack)

    v, theta = _flat_start(grid)
    converged = False
    failure: str | None = None
    max_mis = 0.0
    evaluations = 0
    history: list[float] = []
    while True:
        mis = _mismatch(ybus, p_sched, q_sched, v, theta, non_slack, pq)
        evaluations += 1
        max_mis = float(np.max(np.abs(mis))) if mis.size else 0.0
        history.append(max_mis)
        if not np.isfinite(max_mis):
            failure = "diverged"
            break
        if max_mis <= tol:
            converged = True
            break
        if evaluations > max_iter:
            failure = "max_iter"
            break
        jac = _jacobian(ybus, v, theta, non_slack, pq)
        try:
            dx = np.linalg.solve(jac, -mis)
        except np.linalg.LinAlgError:
            failure = "singular_jacobian"
            break
        v_new = v.copy()
        theta_new = theta.copy()
        theta_new[non_slack] += dx[:n_th]
        v_new[pq] += dx[n_th:]
        if not (np.all(np.isfinite(v_new)) and np.all(np.isfinite(theta_new))) or np.any(
            v_new <= 0.0
        ):
            failure = "diverged"
            break
        v, theta = v_new, theta_new

    vc = v * np.exp(1j * theta)
    s_inj = vc * np.conj(ybus @ vc)
    return PowerFlowSolution(
        v_pu=_freeze(v),
        theta_rad=_freeze(theta),
        p_inj_pu=_freeze(s_inj.real.copy()),
        q_inj_pu=_freeze(s_inj.imag.copy()),
        converged=converged,
        iterations=evaluations,
        max_mismatch_pu=max_mis,
        failure_cause=failure,
        mismatch_history=tuple(history),
    )


def total_branch_loss_pu(grid: GridModel, v_pu: np.ndarray, theta_rad: np.ndarray) -> float:
    """I^2 R losses summed over all branches, in per-unit."""
    vc = np.asarray(v_pu, float) * np.exp(1j * np.asarray(theta_rad, float))
    loss = 0.0
    for ln in grid.lines:
        ys = 1.0 / complex(ln.r_pu, ln.x_pu)
        i_series = (vc[ln.from_bus] - vc[ln.to_bus]) * ys
        loss += (abs(i_series) ** 2) * ln.r_pu
    for tr in grid.transformers:
        ys = 1.0 / complex(tr.r_pu, tr.x_pu)
        i_series = (vc[tr.from_bus] / tr.ratio - vc[tr.to_bus]) * ys
        loss += (abs(i_series) ** 2) * tr.r_pu
    return loss
