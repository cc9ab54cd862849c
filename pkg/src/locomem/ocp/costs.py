"""Cost terms for the stepper problem.

Every term is evaluated on a batch of knots at once.  ``value`` returns one
cost per knot and ``derivatives`` returns exact first and second derivatives
as a :class:`TermDerivatives`; blocks a term does not depend on are ``None``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import D_Q, SWING_H, FootPose

NX = 2 * D_Q


def pseudo_huber(r, scale):
    """``scale^2 * (sqrt(1 + (r/scale)^2) - 1)`` with its first two derivatives."""
    s = np.sqrt(1.0 + (r / scale) ** 2)
    return scale * scale * (s - 1.0), r / s, 1.0 / s**3


def stiffening(r, scale):
    """``r^2/2 + r^4 / (4 scale^2)``: quadratic near zero, quartic beyond ``scale``."""
    r2 = r * r
    inv = 1.0 / (scale * scale)
    return 0.5 * r2 + 0.25 * r2 * r2 * inv, r + r2 * r * inv, 1.0 + 3.0 * r2 * inv


ACTIVATION = stiffening


@dataclass
class TermDerivatives:
    lx: np.ndarray | None = None
    lu: np.ndarray | None = None
    lxx: np.ndarray | None = None
    luu: np.ndarray | None = None
    lux: np.ndarray | None = None


class CostTerm:
    uses_control = False

    def value(self, xs, us=None) -> np.ndarray:
        raise NotImplementedError

    def derivatives(self, xs, us=None) -> TermDerivatives:
        raise NotImplementedError


class ControlRegularization(CostTerm):
    """Stiffening penalty pulling every control towards zero."""

    uses_control = True

    def __init__(self, weight: float, scale: float = 1.0):
        self.weight = float(weight)
        self.scale = float(scale)

    def value(self, xs, us=None):
        return self.weight * ACTIVATION(us, self.scale)[0].sum(axis=1)

    def derivatives(self, xs, us=None):
        _, d1, d2 = ACTIVATION(us, self.scale)
        n, m = us.shape
        luu = np.zeros((n, m, m))
        idx = np.arange(m)
        luu[:, idx, idx] = self.weight * d2
        return TermDerivatives(lu=self.weight * d1, luu=luu)


class StateRegularization(CostTerm):
    """Stiffening penalty on configuration offsets from a nominal pose and on velocities.

    ``nominal`` is either one configuration or one per knot.
    """

    def __init__(self, q_weights, v_weights, nominal, scale: float = 1.0):
        self.weights = np.concatenate([np.broadcast_to(q_weights, D_Q), np.broadcast_to(v_weights, D_Q)]).astype(float)
        self.nominal = np.asarray(nominal, dtype=float)
        self.scale = float(scale)

    def _residual(self, xs):
        r = np.array(xs, dtype=float, copy=True)
        r[:, :D_Q] -= self.nominal
        return r

    def value(self, xs, us=None):
        return ACTIVATION(self._residual(xs), self.scale)[0] @ self.weights

    def derivatives(self, xs, us=None):
        _, d1, d2 = ACTIVATION(self._residual(xs), self.scale)
        lxx = np.zeros((len(xs), NX, NX))
        idx = np.arange(NX)
        lxx[:, idx, idx] = d2 * self.weights
        return TermDerivatives(lx=d1 * self.weights, lxx=lxx)


class SwingApex(CostTerm):
    """Quadratic via-point on the swing-foot height."""

    def __init__(self, weight: float, height: float):
        self.weight = float(weight)
        self.height = float(height)

    def value(self, xs, us=None):
        return self.weight * (xs[:, SWING_H] - self.height) ** 2

    def derivatives(self, xs, us=None):
        n = len(xs)
        lx = np.zeros((n, NX))
        lx[:, SWING_H] = 2.0 * self.weight * (xs[:, SWING_H] - self.height)
        lxx = np.zeros((n, NX, NX))
        lxx[:, SWING_H, SWING_H] = 2.0 * self.weight
        return TermDerivatives(lx=lx, lxx=lxx)


class SwingClearance(CostTerm):
    """Swing height tracks a parabola over the horizontal progress of the step.

    Progress ``s`` is the projection of the swing foot onto the segment from
    lift-off to touchdown, so the reference ``4 a s (1 - s)`` couples height to
    planar position.  A foot sliding along the ground is penalised even though
    it sits on the ground at both ends.
    """

    def __init__(self, weight: float, start: FootPose, goal: FootPose, apex: float):
        self.weight = float(weight)
        self.apex = float(apex)
        self.origin = np.array([start.x, start.y])
        d = np.array([goal.x - start.x, goal.y - start.y])
        length2 = float(d @ d)
        # a foot stepping in place has no progress to measure
        self.direction = d / length2 if length2 > 1e-12 else np.zeros(2)

    def _residual(self, xs):
        s = (xs[:, 3:5] - self.origin) @ self.direction
        return xs[:, SWING_H] - 4.0 * self.apex * s * (1.0 - s), s

    def value(self, xs, us=None):
        r, _ = self._residual(xs)
        return self.weight * r * r

    def derivatives(self, xs, us=None):
        r, s = self._residual(xs)
        n, w, a, d = len(xs), self.weight, self.apex, self.direction
        J = np.zeros((n, NX))
        J[:, SWING_H] = 1.0
        J[:, 3:5] = (-4.0 * a * (1.0 - 2.0 * s))[:, None] * d
        lxx = 2.0 * w * J[:, :, None] * J[:, None, :]
        lxx[:, 3:5, 3:5] += 2.0 * w * r[:, None, None] * (8.0 * a * np.outer(d, d))
        return TermDerivatives(lx=2.0 * w * r[:, None] * J, lxx=lxx)


class _PosePlacement(CostTerm):
    """``w * (dx^2 + dy^2 + 2 (1 - cos dyaw) [+ h^2])`` on a planar pose block."""

    offset = 0
    include_height = False

    def __init__(self, weight: float, target: FootPose):
        self.weight = float(weight)
        self.target = target.as_array()

    def value(self, xs, us=None):
        o, tgt = self.offset, self.target
        d = xs[:, o : o + 3] - tgt
        val = d[:, 0] ** 2 + d[:, 1] ** 2 + 2.0 * (1.0 - np.cos(d[:, 2]))
        if self.include_height:
            val = val + xs[:, SWING_H] ** 2
        return self.weight * val

    def derivatives(self, xs, us=None):
        o, w = self.offset, self.weight
        n = len(xs)
        d = xs[:, o : o + 3] - self.target
        lx = np.zeros((n, NX))
        lxx = np.zeros((n, NX, NX))
        lx[:, o] = 2.0 * w * d[:, 0]
        lx[:, o + 1] = 2.0 * w * d[:, 1]
        lx[:, o + 2] = 2.0 * w * np.sin(d[:, 2])
        lxx[:, o, o] = 2.0 * w
        lxx[:, o + 1, o + 1] = 2.0 * w
        lxx[:, o + 2, o + 2] = 2.0 * w * np.cos(d[:, 2])
        if self.include_height:
            lx[:, SWING_H] = 2.0 * w * xs[:, SWING_H]
            lxx[:, SWING_H, SWING_H] = 2.0 * w
        return TermDerivatives(lx=lx, lxx=lxx)


class ContactPlacement(_PosePlacement):
    """Moving foot on the goal contact, flat on the ground."""

    offset = 3
    include_height = True


class RootPlacement(_PosePlacement):
    """Root above the midpoint of the feet, facing their mean heading."""

    offset = 0


class TerminalVelocity(CostTerm):
    def __init__(self, weight: float):
        self.weight = float(weight)

    def value(self, xs, us=None):
        return self.weight * np.sum(xs[:, D_Q:] ** 2, axis=1)

    def derivatives(self, xs, us=None):
        n = len(xs)
        lx = np.zeros((n, NX))
        lx[:, D_Q:] = 2.0 * self.weight * xs[:, D_Q:]
        lxx = np.zeros((n, NX, NX))
        idx = np.arange(D_Q, NX)
        lxx[:, idx, idx] = 2.0 * self.weight
        return TermDerivatives(lx=lx, lxx=lxx)


class QuadraticCost(CostTerm):
    """General quadratic ``1/2 [dx; du]' H [dx; du] + g' [dx; du]`` around a reference.

    Used for linear-quadratic test instances.
    """

    def __init__(self, Q, x_ref, R=None, u_ref=None, S=None):
        self.Q = np.asarray(Q, dtype=float)
        self.x_ref = np.asarray(x_ref, dtype=float)
        self.R = None if R is None else np.asarray(R, dtype=float)
        self.u_ref = None if u_ref is None else np.asarray(u_ref, dtype=float)
        self.S = None if S is None else np.asarray(S, dtype=float)
        self.uses_control = self.R is not None

    def value(self, xs, us=None):
        dx = xs - self.x_ref
        val = 0.5 * np.einsum("ti,ij,tj->t", dx, self.Q, dx)
        if self.uses_control:
            du = us - self.u_ref
            val = val + 0.5 * np.einsum("ti,ij,tj->t", du, self.R, du)
            if self.S is not None:
                val = val + np.einsum("ti,ij,tj->t", du, self.S, dx)
        return val

    def derivatives(self, xs, us=None):
        n = len(xs)
        dx = xs - self.x_ref
        lx = dx @ self.Q.T
        lxx = np.broadcast_to(self.Q, (n,) + self.Q.shape).copy()
        if not self.uses_control:
            return TermDerivatives(lx=lx, lxx=lxx)
        du = us - self.u_ref
        lu = du @ self.R.T
        luu = np.broadcast_to(self.R, (n,) + self.R.shape).copy()
        lux = None
        if self.S is not None:
            lx = lx + du @ self.S
            lu = lu + dx @ self.S.T
            lux = np.broadcast_to(self.S, (n,) + self.S.shape).copy()
        return TermDerivatives(lx=lx, lu=lu, lxx=lxx, luu=luu, lux=lux)
