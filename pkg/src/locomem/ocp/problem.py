"""Optimal-control problems over the stepper model.

A problem is a horizon of ``N`` knots with affine, possibly time-varying,
dynamics ``x[t+1] = A[t] x[t] + B[t] u[t] + c[t]`` and a list of cost terms,
each attached to a set of knots.  Terms that use the control can only sit on
knots ``0 .. N-2``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..domain import D_Q, ContactSequence, FootPose, Side, Task, midpoint_pose
from .costs import (
    ContactPlacement,
    ControlRegularization,
    RootPlacement,
    StateRegularization,
    SwingApex,
    SwingClearance,
    TerminalVelocity,
)
from .model import StepperModel

NX = 2 * D_Q


@dataclass(frozen=True)
class CostWeights:
    """Weights of the stepper cost.

    Running: control regularisation (``w_u``), state regularisation around the
    standing pose (``w_q`` on configurations, ``w_dq`` on velocities), swing
    apex via-point (``w_apex`` at mid-step, target ``h_apex``), swing clearance
    over the step's horizontal progress (``w_clear``).  Terminal: goal
    placement of the moving foot (``w_contact``), root between the feet
    (``w_root``), rest (``w_v``).
    """

    w_u: float = 5e-2
    u_scale: float = 5.0
    w_q: float = 5.0
    w_dq: float = 5e-2
    q_scale: float = 5e-2
    w_apex: float = 5e4
    h_apex: float = 0.05
    w_clear: float = 1e5
    w_contact: float = 5e4
    w_root: float = 5e3
    w_v: float = 5e2

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v < 0:
                raise ValueError(f"weight {k} must be non-negative")
        if self.u_scale <= 0 or self.q_scale <= 0:
            raise ValueError("activation scales must be positive")
        if self.w_contact == 0 and self.w_root == 0 and self.w_v == 0:
            raise ValueError("at least one terminal weight must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


class OcProblem:
    def __init__(self, x0, A, B, c, terms, task=None, model=None, resets=None):
        self.x0 = np.asarray(x0, dtype=float)
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.c = np.asarray(c, dtype=float)
        if self.A.ndim == 2:
            self.A = np.broadcast_to(self.A, (len(self.c),) + self.A.shape)
            self.B = np.broadcast_to(self.B, (len(self.c),) + self.B.shape)
        self.terms = [(term, np.atleast_1d(np.asarray(knots, dtype=int))) for term, knots in terms]
        self.task = task
        self.model = model
        self.resets = dict(resets or {})
        for term, knots in self.terms:
            if term.uses_control and np.any(knots >= self.N - 1):
                raise ValueError("control-dependent cost on the terminal knot")

    @property
    def N(self) -> int:
        """Number of knots."""
        return len(self.c) + 1

    @property
    def nx(self) -> int:
        return self.A.shape[1]

    @property
    def nu(self) -> int:
        return self.B.shape[2]

    def _check(self, xs, us):
        if xs.shape != (self.N, self.nx) or us.shape != (self.N - 1, self.nu):
            raise ValueError(
                f"expected xs {(self.N, self.nx)} and us {(self.N - 1, self.nu)}, got {xs.shape} and {us.shape}"
            )

    def cost(self, xs, us) -> float:
        xs, us = np.asarray(xs, dtype=float), np.asarray(us, dtype=float)
        self._check(xs, us)
        total = 0.0
        for term, knots in self.terms:
            total += float(np.sum(term.value(xs[knots], us[knots] if term.uses_control else None)))
        return total

    def derivatives(self, xs, us):
        N, nx, nu = self.N, self.nx, self.nu
        lx = np.zeros((N, nx))
        lxx = np.zeros((N, nx, nx))
        lu = np.zeros((N - 1, nu))
        luu = np.zeros((N - 1, nu, nu))
        lux = np.zeros((N - 1, nu, nx))
        for term, knots in self.terms:
            d = term.derivatives(xs[knots], us[knots] if term.uses_control else None)
            if d.lx is not None:
                np.add.at(lx, knots, d.lx)
            if d.lxx is not None:
                np.add.at(lxx, knots, d.lxx)
            if d.lu is not None:
                np.add.at(lu, knots, d.lu)
            if d.luu is not None:
                np.add.at(luu, knots, d.luu)
            if d.lux is not None:
                np.add.at(lux, knots, d.lux)
        return lx, lu, lxx, luu, lux

    def gaps(self, xs, us) -> np.ndarray:
        """Defects ``f[0] = x0 - xs[0]`` and ``f[t+1] = A x[t] + B u[t] + c - x[t+1]``."""
        f = np.empty((self.N, self.nx))
        f[0] = self.x0 - xs[0]
        f[1:] = np.einsum("tij,tj->ti", self.A, xs[:-1]) + np.einsum("tij,tj->ti", self.B, us) + self.c - xs[1:]
        return f

    def cold_start(self):
        return np.tile(self.x0, (self.N, 1)), np.zeros((self.N - 1, self.nu))

    def rollout(self, us) -> np.ndarray:
        xs = np.empty((self.N, self.nx))
        xs[0] = self.x0
        for t in range(self.N - 1):
            xs[t + 1] = self.A[t] @ xs[t] + self.B[t] @ us[t] + self.c[t]
        return xs

    def pre_transition_configuration(self, t: int, q: np.ndarray) -> np.ndarray:
        """Configuration at knot ``t`` after any contact-switch reset of interval ``t``."""
        if t in self.resets:
            S, r = self.resets[t]
            return S[:D_Q, :D_Q] @ q + r[:D_Q]
        return q

    def states_from_configurations(self, q) -> np.ndarray:
        """States whose velocities reproduce ``q`` (``(N, D_Q)``) under the dynamics."""
        q = np.asarray(q, dtype=float)
        dt = self.model.dt
        v = np.zeros_like(q)
        for t in range(1, len(q)):
            v[t] = (q[t] - self.pre_transition_configuration(t - 1, q[t - 1])) / dt
        return np.hstack([q, v])


def standing_configuration(root: FootPose, moving: FootPose) -> np.ndarray:
    return np.array([root.x, root.y, root.yaw, moving.x, moving.y, moving.yaw, 0.0])


def _running_terms(weights: CostWeights, knots, nominal):
    return [
        (ControlRegularization(weights.w_u, weights.u_scale), knots),
        (StateRegularization(weights.w_q, weights.w_dq, nominal, weights.q_scale), knots),
    ]


def _swing_terms(weights: CostWeights, start: FootPose, goal: FootPose, first: int, last: int):
    """Apex via-point at mid-step and clearance on knots ``first+1 .. last``."""
    terms = [(SwingApex(weights.w_apex, weights.h_apex), first + (last - first) // 2)]
    if weights.w_clear > 0:
        terms.append((SwingClearance(weights.w_clear, start, goal, weights.h_apex), np.arange(first + 1, last + 1)))
    return terms


def _placement_terms(weights: CostWeights, stance: FootPose, goal: FootPose, knot: int):
    return [
        (ContactPlacement(weights.w_contact, goal), knot),
        (RootPlacement(weights.w_root, midpoint_pose(stance, goal)), knot),
    ]


def make_step_problem(task: Task, model: StepperModel, weights: CostWeights | None = None, T: int = 100) -> OcProblem:
    """Single step starting at rest with the root at the origin."""
    weights = weights or CostWeights()
    if T < 3:
        raise ValueError("horizon needs at least three knots")
    A, B, c = model.matrices()
    q0 = standing_configuration(FootPose(0.0, 0.0, 0.0), task.moving0)
    x0 = np.concatenate([q0, np.zeros(D_Q)])
    running = np.arange(T - 1)
    terms = _running_terms(weights, running, q0)
    terms += _swing_terms(weights, task.moving0, task.goal, 0, T - 1)
    terms += _placement_terms(weights, task.stance, task.goal, T - 1)
    terms.append((TerminalVelocity(weights.w_v), T - 1))
    return OcProblem(x0, A, B, np.tile(c, (T - 1, 1)), terms, task=task, model=model)


def _reset_map(moving: FootPose):
    """Affine reset handing the swing coordinates over to the next moving foot."""
    S = np.eye(NX)
    r = np.zeros(NX)
    for i, value in zip(range(3, 6), moving.as_array()):
        S[i, i] = 0.0
        r[i] = value
    for i in range(D_Q + 3, NX):
        S[i, i] = 0.0
    return S, r


def make_multistep_problem(
    seq: ContactSequence, model: StepperModel, weights: CostWeights | None = None, T: int = 100
) -> OcProblem:
    """Concatenated horizon for a contact sequence, in the sequence's world frame.

    Step ``i`` spans knots ``i*(T-1) .. (i+1)*(T-1)``; its placement costs sit
    on the boundary knot, and the interval leaving a boundary knot resets the
    swing coordinates to the next moving foot.
    """
    weights = weights or CostWeights()
    P = seq.n_steps
    if P < 1:
        raise ValueError("contact sequence has no steps")
    seg = T - 1
    N = P * seg + 1
    A, B, c = model.matrices()
    As = np.tile(A, (N - 1, 1, 1))
    cs = np.tile(c, (N - 1, 1))
    nominal = np.zeros((N - 1, D_Q))
    terms = []
    resets = {}
    x0 = None
    for i in range(P):
        side = seq.moving_side(i)
        left, right = seq.steps[i]
        moving = left if side is Side.LEFT else right
        stance = right if side is Side.LEFT else left
        goal = seq.steps[i + 1][0 if side is Side.LEFT else 1]
        root = midpoint_pose(left, right)
        start, end = i * seg, (i + 1) * seg
        q_stand = standing_configuration(root, moving)
        if i == 0:
            x0 = np.concatenate([q_stand, np.zeros(D_Q)])
            nominal[0] = q_stand
        else:
            S, r = _reset_map(moving)
            resets[start] = (S, r)
            As[start] = A @ S
            cs[start] = A @ r + c
        nominal[start + 1 : end] = q_stand
        if end < N - 1:
            nominal[end] = q_stand
        terms += _swing_terms(weights, moving, goal, start, end)
        terms += _placement_terms(weights, stance, goal, end)
    terms = _running_terms(weights, np.arange(N - 1), nominal) + terms
    terms.append((TerminalVelocity(weights.w_v), N - 1))
    Bs = np.broadcast_to(B, (N - 1,) + B.shape)
    return OcProblem(x0, As, Bs, cs, terms, task=seq, model=model, resets=resets)
