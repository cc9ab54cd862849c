"""Feasibility-prone DDP.

The solver accepts state/control guesses that violate the dynamics.  Defects
between consecutive knots enter the backward pass through the value-function
expansion, and a step of length ``alpha`` leaves ``(1 - alpha)`` of every
defect open, so a full step makes the trajectory dynamically consistent.

With affine dynamics the trial trajectory is exactly ``xs + alpha * dx``,
``us + alpha * du`` where ``(dx, du)`` is the closed-loop rollout of the
backward-pass policy, so the line search needs no re-integration.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from ..domain import D_Q, Trajectory
from .problem import OcProblem

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 50
    threshold: float = 1e-5
    reg_init: float = 0.0
    reg_factor: float = 10.0
    reg_min: float = 1e-9
    reg_max: float = 1e9
    steps: tuple = (1.0, 0.5, 0.25, 0.1, 0.05)
    accept_ratio: float = 0.1
    accept_increase_ratio: float = 2.0
    gap_tolerance: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        object.__setattr__(self, "steps", tuple(float(a) for a in self.steps))

    @classmethod
    def offline(cls, **kw):
        return cls(**{"max_iters": 50, "threshold": 1e-5, **kw})

    @classmethod
    def online(cls, **kw):
        return cls(**{"max_iters": 20, "threshold": 1e-2, **kw})


@dataclass
class SolverTrace:
    iterations: int = 0
    final_cost: float = float("nan")
    converged: bool = False
    success: bool = False
    costs: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    regs: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    stops: list = field(default_factory=list)
    message: str = ""

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "cost", "gap_norm", "regularization", "step", "stop"])
            for i, row in enumerate(zip(self.costs, self.gaps, self.regs, self.steps, self.stops)):
                w.writerow([i, *(repr(float(v)) for v in row)])


@dataclass(frozen=True)
class WarmStart:
    q_traj: Trajectory | None = None
    u_traj: Trajectory | None = None

    def __post_init__(self):
        if self.q_traj is not None and self.u_traj is not None:
            if self.u_traj.knots != self.q_traj.knots - 1:
                raise ValueError("control guess must have one knot fewer than the configuration guess")


class _Factorization(Exception):
    pass


def _backward(problem: OcProblem, lx, lu, lxx, luu, lux, f, reg):
    N, nx, nu = problem.N, problem.nx, problem.nu
    A, B = problem.A, problem.B
    k = np.empty((N - 1, nu))
    K = np.empty((N - 1, nu, nx))
    Qu_all = np.empty((N - 1, nu))
    Vx = lx[-1].copy()
    Vxx = lxx[-1].copy()
    eye = np.eye(nu)
    for t in range(N - 2, -1, -1):
        At, Bt = A[t], B[t]
        Vx_p = Vx + Vxx @ f[t + 1]
        VA = Vxx @ At
        VB = Vxx @ Bt
        Qx = lx[t] + At.T @ Vx_p
        Qu = lu[t] + Bt.T @ Vx_p
        Qxx = lxx[t] + At.T @ VA
        Quu = luu[t] + Bt.T @ VB
        Qux = lux[t] + Bt.T @ VA
        Quu_r = Quu + reg * eye if reg else Quu
        try:
            L = np.linalg.cholesky(Quu_r)
        except np.linalg.LinAlgError as exc:
            raise _Factorization() from exc
        rhs = np.column_stack([Qu, Qux])
        sol = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
        kt = -sol[:, 0]
        Kt = -sol[:, 1:]
        k[t], K[t], Qu_all[t] = kt, Kt, Qu
        KQuu = Kt.T @ Quu
        Vx = Qx + KQuu @ kt + Kt.T @ Qu + Qux.T @ kt
        Vxx = Qxx + KQuu @ Kt + Kt.T @ Qux + Qux.T @ Kt
        Vxx = 0.5 * (Vxx + Vxx.T)
        if not (np.all(np.isfinite(Vx)) and np.all(np.isfinite(Vxx))):
            raise _Factorization()
    return k, K


def _search_direction(problem: OcProblem, k, K, f):
    """Closed-loop rollout of the policy: trial point is ``xs + a*dx, us + a*du``."""
    N = problem.N
    A, B = problem.A, problem.B
    dx = np.empty((N, problem.nx))
    du = np.empty((N - 1, problem.nu))
    dx[0] = f[0]
    for t in range(N - 1):
        du[t] = k[t] + K[t] @ dx[t]
        dx[t + 1] = A[t] @ dx[t] + B[t] @ du[t] + f[t + 1]
    return dx, du


def _model_change(lx, lu, lxx, luu, lux, dx, du):
    """Linear and quadratic coefficients of the predicted cost change along the direction."""
    g = float(np.sum(lx * dx) + np.sum(lu * du))
    h = float(
        np.einsum("ti,tij,tj->", dx, lxx, dx)
        + np.einsum("ti,tij,tj->", du, luu, du)
        + 2.0 * np.einsum("ti,tij,tj->", du, lux, dx[:-1])
    )
    return g, h


def _acceptable(config: SolverConfig, feasible: bool, cost: float, actual: float, expected: float) -> bool:
    """Armijo-style test on the actual versus predicted cost change.

    While defects remain open a step may raise the cost (closing gaps costs
    something), bounded by ``accept_increase_ratio`` times the prediction.
    Once the guess is feasible a step must never increase the cost.
    """
    if expected < 0:
        if actual <= config.accept_ratio * expected:
            return True
        # predicted change below round-off: accept anything that does not go up
        return actual <= 0 and -expected <= 1e-12 * max(1.0, abs(cost))
    if feasible:
        return actual <= 0
    return actual <= config.accept_increase_ratio * expected


def fddp(problem: OcProblem, config: SolverConfig, xs=None, us=None):
    """Solve ``problem`` from the guess ``(xs, us)`` (cold start when omitted).

    Returns ``(xs, us, trace)``.  Numerical failures end the solve with
    ``success = False`` rather than raising.
    """
    xs_c, us_c = problem.cold_start()
    xs = xs_c if xs is None else np.array(xs, dtype=float)
    us = us_c if us is None else np.array(us, dtype=float)
    trace = SolverTrace()
    reg = config.reg_init
    try:
        cost = problem.cost(xs, us)
    except FloatingPointError:
        cost = float("nan")
    it = 0
    while True:
        f = problem.gaps(xs, us)
        gap = float(np.max(np.abs(f)))
        feasible = gap <= config.gap_tolerance
        if not np.isfinite(cost) or not np.isfinite(gap):
            trace.message = "non-finite cost or defect"
            break
        derivs = problem.derivatives(xs, us)
        if not all(np.all(np.isfinite(d)) for d in derivs):
            trace.message = "non-finite derivatives"
            break
        while True:
            try:
                k, K = _backward(problem, *derivs, f, reg)
                break
            except _Factorization:
                reg = max(reg * config.reg_factor, config.reg_min)
                if reg > config.reg_max:
                    break
        if reg > config.reg_max:
            trace.message = "regularization exceeded its maximum"
            break
        dx, du = _search_direction(problem, k, K, f)
        g, h = _model_change(*derivs, dx, du)
        stop = abs(g + 0.5 * h)
        trace.costs.append(cost)
        trace.gaps.append(gap)
        trace.regs.append(reg)
        trace.stops.append(stop)
        if feasible and stop < config.threshold:
            trace.converged = True
            trace.steps.append(0.0)
            break
        if it >= config.max_iters:
            trace.steps.append(0.0)
            trace.message = "iteration limit"
            break
        it += 1
        accepted = 0.0
        for alpha in config.steps:
            xs_try = xs + alpha * dx
            us_try = us + alpha * du
            cost_try = problem.cost(xs_try, us_try)
            if not np.isfinite(cost_try):
                continue
            expected = alpha * g + 0.5 * alpha * alpha * h
            actual = cost_try - cost
            if _acceptable(config, feasible, cost, actual, expected):
                xs, us, cost, accepted = xs_try, us_try, cost_try, alpha
                break
        trace.steps.append(accepted)
        if accepted == 0.0:
            reg = max(reg * config.reg_factor, config.reg_min)
            if reg > config.reg_max:
                trace.message = "regularization exceeded its maximum"
                break
        elif accepted >= 0.5:
            reg = reg / config.reg_factor
            if reg < config.reg_min:
                reg = 0.0
    final_gap = float(np.max(np.abs(problem.gaps(xs, us))))
    trace.iterations = it
    trace.final_cost = float(cost)
    trace.success = bool(trace.converged and final_gap < 1e-6 and np.isfinite(cost))
    return xs, us, trace


def warm_start_arrays(problem: OcProblem, warm: WarmStart | None):
    """Turn a configuration/control guess into solver arrays.

    Missing parts fall back to the cold start: ``x0`` held at rest and zero
    controls.
    """
    xs, us = problem.cold_start()
    if warm is None:
        return xs, us
    if warm.q_traj is not None:
        q = warm.q_traj.values.T
        if q.shape != (problem.N, D_Q):
            raise ValueError(f"configuration guess has shape {q.shape}, expected {(problem.N, D_Q)}")
        xs = problem.states_from_configurations(q)
    if warm.u_traj is not None:
        u = warm.u_traj.values.T
        if u.shape != us.shape:
            raise ValueError(f"control guess has shape {u.shape}, expected {us.shape}")
        us = np.array(u)
    return xs, us


def solve(problem: OcProblem, config: SolverConfig, warm: WarmStart | None = None):
    """Solve a stepper problem; returns ``(q_traj, u_traj, trace)``."""
    xs, us = warm_start_arrays(problem, warm)
    with np.errstate(all="ignore"):
        xs, us, trace = fddp(problem, config, xs, us)
    dt = problem.model.dt
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(us))):
        trace.success = False
        xs, us = problem.cold_start()
    return Trajectory(xs[:, :D_Q].T, dt), Trajectory(us.T, dt), trace
