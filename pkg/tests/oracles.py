"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np

from locomem.domain import SWING_H, FootPose
from locomem.ocp import (
    ContactPlacement,
    ControlRegularization,
    OcProblem,
    QuadraticCost,
    RootPlacement,
    StateRegularization,
    SwingApex,
    SwingClearance,
    TerminalVelocity,
)


def random_lqr(rng, nx=14, nu=7, T=50):
    """Random affine LQR instance plus the raw matrices for the oracle."""
    A = np.eye(nx) + 0.05 * rng.normal(size=(nx, nx))
    B = 0.3 * rng.normal(size=(nx, nu))
    c = 0.01 * rng.normal(size=nx)
    G = rng.normal(size=(nx, nx))
    Q = G @ G.T / nx + 0.1 * np.eye(nx)
    H = rng.normal(size=(nu, nu))
    R = H @ H.T / nu + 0.5 * np.eye(nu)
    Qf = 10.0 * Q
    x_ref = rng.normal(size=nx)
    u_ref = rng.normal(size=nu)
    x0 = rng.normal(size=nx)
    terms = [
        (QuadraticCost(Q, x_ref, R, u_ref), np.arange(T - 1)),
        (QuadraticCost(Qf, x_ref), T - 1),
    ]
    problem = OcProblem(x0, A, B, np.tile(c, (T - 1, 1)), terms)
    return problem, dict(A=A, B=B, c=c, Q=Q, R=R, Qf=Qf, x_ref=x_ref, u_ref=u_ref, x0=x0, T=T)


def riccati(A, B, c, Q, R, Qf, x_ref, u_ref, x0, T):
    """Discrete Riccati recursion for the affine tracking LQR; returns optimal ``(xs, us)``."""
    P = Qf
    p = -Qf @ x_ref
    gains = []
    for _ in range(T - 1):
        Pc = P @ c + p
        Qxx = Q + A.T @ P @ A
        Quu = R + B.T @ P @ B
        Qux = B.T @ P @ A
        qx = -Q @ x_ref + A.T @ Pc
        qu = -R @ u_ref + B.T @ Pc
        K = -np.linalg.solve(Quu, Qux)
        k = -np.linalg.solve(Quu, qu)
        P = Qxx + Qux.T @ K
        P = 0.5 * (P + P.T)
        p = qx + Qux.T @ k
        gains.append((K, k))
    gains.reverse()
    xs = [np.asarray(x0, dtype=float)]
    us = []
    for K, k in gains:
        u = K @ xs[-1] + k
        us.append(u)
        xs.append(A @ xs[-1] + B @ u + c)
    return np.array(xs), np.array(us)


def _rel_err(analytic, numeric):
    return float(np.max(np.abs(analytic - numeric)) / max(1.0, float(np.max(np.abs(numeric)))))


def finite_difference_errors(term, xs, us=None, h=1e-6):
    """Worst relative gaps between analytic and central-difference derivatives.

    Gradients come from differencing ``value``; Hessians from differencing
    the analytic gradient.  Returns ``{"grad": e, "hess": e}`` maxima over all
    points and blocks.
    """
    xs = np.asarray(xs, dtype=float)
    us = None if us is None else np.asarray(us, dtype=float)
    d = term.derivatives(xs, us)
    n, nx = xs.shape
    nu = 0 if us is None else us.shape[1]

    def grads(x, u):
        dd = term.derivatives(x, u)
        gx = np.zeros((n, nx)) if dd.lx is None else dd.lx
        gu = None if u is None else (np.zeros((n, nu)) if dd.lu is None else dd.lu)
        return gx, gu

    worst = {"grad": 0.0, "hess": 0.0}
    lx = np.zeros((n, nx)) if d.lx is None else d.lx
    lxx = np.zeros((n, nx, nx)) if d.lxx is None else d.lxx
    num_lx = np.zeros_like(lx)
    num_lxx = np.zeros_like(lxx)
    num_lux = np.zeros((n, nu, nx))
    for i in range(nx):
        e = np.zeros(nx)
        e[i] = h
        num_lx[:, i] = (term.value(xs + e, us) - term.value(xs - e, us)) / (2 * h)
        gp, up = grads(xs + e, us)
        gm, um = grads(xs - e, us)
        num_lxx[:, :, i] = (gp - gm) / (2 * h)
        if us is not None:
            num_lux[:, :, i] = (up - um) / (2 * h)
    worst["grad"] = max(worst["grad"], _rel_err(lx, num_lx))
    worst["hess"] = max(worst["hess"], _rel_err(lxx, num_lxx))
    if us is not None:
        lu = np.zeros((n, nu)) if d.lu is None else d.lu
        luu = np.zeros((n, nu, nu)) if d.luu is None else d.luu
        lux = np.zeros((n, nu, nx)) if d.lux is None else d.lux
        num_lu = np.zeros_like(lu)
        num_luu = np.zeros_like(luu)
        for j in range(nu):
            e = np.zeros(nu)
            e[j] = h
            num_lu[:, j] = (term.value(xs, us + e) - term.value(xs, us - e)) / (2 * h)
            _, up = grads(xs, us + e)
            _, um = grads(xs, us - e)
            num_luu[:, :, j] = (up - um) / (2 * h)
        worst["grad"] = max(worst["grad"], _rel_err(lu, num_lu))
        worst["hess"] = max(worst["hess"], _rel_err(luu, num_luu), _rel_err(lux, num_lux))
    return worst


def bimodal_toy(n=300, seed=0, noise=1.0):
    """Piecewise-linear data with two branches on ``0 < x < 4``.

    Near ``x = 0.8`` the branches sit at about 25.2 and 46.7.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 10.0, n)
    y = np.empty(n)
    low = x < 4.0
    lower = rng.random(n) < 0.5
    y[low & lower] = 24.0 + 1.5 * x[low & lower]
    y[low & ~lower] = 46.3 + 0.5 * x[low & ~lower]
    mid = (x >= 4.0) & (x < 6.0)
    y[mid] = 60.0 - 2.0 * x[mid]
    high = x >= 6.0
    y[high] = 5.0 + x[high]
    y += rng.normal(0.0, noise, n)
    return x[:, None], y[:, None]


# Random evaluation points for the derivative checks (50 per term).
def derivative_points(rng, n=50):
    xs = rng.normal(scale=0.3, size=(n, 14))
    xs[:, SWING_H] = rng.uniform(-0.05, 0.15, n)
    xs[:, 5] = rng.uniform(-3, 3, n)
    xs[:, 2] = rng.uniform(-3, 3, n)
    us = rng.normal(scale=3.0, size=(n, 7))
    return xs, us


def cost_terms():
    rng = np.random.default_rng(11)
    start, goal = FootPose(0.0, 0.1, 0.2), FootPose(0.35, 0.15, -0.3)
    S = rng.normal(size=(7, 14))
    Q = np.eye(14) + 0.1 * np.ones((14, 14))
    return {
        "control": ControlRegularization(0.05, 5.0),
        "state": StateRegularization(5.0, 0.05, rng.normal(scale=0.1, size=7), 0.05),
        "apex": SwingApex(5e4, 0.05),
        "clearance": SwingClearance(1e5, start, goal, 0.05),
        "clearance_in_place": SwingClearance(1e5, start, start, 0.05),
        "contact": ContactPlacement(5e4, goal),
        "root": RootPlacement(5e3, FootPose(0.1, -0.05, 0.4)),
        "velocity": TerminalVelocity(5e2),
        "quadratic": QuadraticCost(Q, rng.normal(size=14), np.eye(7), rng.normal(size=7), S),
    }
