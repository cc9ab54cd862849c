"""Planar biped stepper: a unit-mass double integrator per configuration coordinate.

Gravity acts on the swing-foot height only.  Integration is semi-implicit
Euler, which keeps the discrete dynamics linear::

    v' = v + dt * (u - g * e_h)
    q' = q + dt * v'
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..domain import D_Q, D_U, Q_LABELS, SWING_H, Trajectory

NX = 2 * D_Q
NU = D_U


@dataclass(frozen=True)
class StepperModel:
    dt: float = 0.01
    gravity: float = 9.81
    labels: tuple = field(default=Q_LABELS)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.gravity < 0:
            raise ValueError("gravity must be non-negative")

    @property
    def gravity_vector(self) -> np.ndarray:
        g = np.zeros(D_Q)
        g[SWING_H] = self.gravity
        return g

    def matrices(self):
        """Return ``(A, B, c)`` with ``x' = A x + B u + c``."""
        dt, eye = self.dt, np.eye(D_Q)
        A = np.block([[eye, dt * eye], [np.zeros((D_Q, D_Q)), eye]])
        B = np.vstack([dt * dt * eye, dt * eye])
        c = -np.concatenate([dt * dt * self.gravity_vector, dt * self.gravity_vector])
        return A, B, c


def dynamics(model: StepperModel, state, u) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    q, v = state[:D_Q], state[D_Q:]
    v_next = v + model.dt * (np.asarray(u, dtype=float) - model.gravity_vector)
    return np.concatenate([q + model.dt * v_next, v_next])


def rollout(model: StepperModel, x0, us) -> np.ndarray:
    """Integrate ``us`` (``(T-1, NU)``) from ``x0``; returns ``(T, NX)`` states."""
    us = np.asarray(us, dtype=float)
    xs = np.empty((len(us) + 1, NX))
    xs[0] = x0
    for t, u in enumerate(us):
        xs[t + 1] = dynamics(model, xs[t], u)
    return xs


def velocities(q: np.ndarray, dt: float) -> np.ndarray:
    """Backward-difference velocities of a ``(T, D)`` path, starting at rest.

    These are the velocities the semi-implicit integrator produces when it
    tracks ``q`` exactly.
    """
    v = np.zeros_like(q)
    v[1:] = np.diff(q, axis=0) / dt
    return v


def states_from_configurations(q: np.ndarray, dt: float) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.hstack([q, velocities(q, dt)])


def quasi_static_controls(q_traj: Trajectory, model: StepperModel) -> Trajectory:
    """Controls that reproduce ``q_traj`` from rest: gravity compensation plus
    finite-difference accelerations."""
    q = q_traj.values.T
    if len(q) < 2:
        raise ValueError("need at least two knots")
    v = velocities(q, model.dt)
    acc = np.diff(v, axis=0) / model.dt
    u = acc + model.gravity_vector
    return Trajectory(u.T, model.dt)
