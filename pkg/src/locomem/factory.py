"""Offline generation of motion databases and contact sequences.

Two databases are produced per moving foot.  The heuristic one comes from a
planner that interpolates poses with minimum-jerk profiles and derives
controls quasi-statically; it is dynamically consistent but ignores the
solver's cost.  The optimised one re-solves every heuristic sample with the
offline solver settings, warm-started from the heuristic.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .domain import (
    ContactSequence,
    Database,
    DatabaseMeta,
    FootPose,
    MotionSample,
    Side,
    Source,
    Task,
    TaskRanges,
    Trajectory,
    config_hash,
    midpoint_pose,
    sample_task,
    se2_to_world,
    wrap_angle,
)
from .ocp import CostWeights, SolverConfig, StepperModel, WarmStart, make_step_problem, quasi_static_controls, solve, total_cost

log = logging.getLogger(__name__)


def min_jerk(tau):
    """``10 t^3 - 15 t^4 + 6 t^5``: zero velocity and acceleration at both ends."""
    tau = np.asarray(tau, dtype=float)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)


def swing_bump(tau, apex: float):
    """``64 a t^3 (1-t)^3``: peaks at ``apex`` for ``t = 1/2``, flat at both ends."""
    tau = np.asarray(tau, dtype=float)
    return 64.0 * apex * tau**3 * (1.0 - tau) ** 3


def heuristic_configuration(task: Task, T: int = 100, h_apex: float = 0.05) -> np.ndarray:
    """``(T, 7)`` configuration path of the heuristic planner."""
    tau = np.linspace(0.0, 1.0, T)
    s = min_jerk(tau)[:, None]
    root_end = midpoint_pose(task.stance, task.goal).as_array()
    start = task.moving0.as_array()
    goal = task.goal.as_array()
    # turn the short way round
    goal[2] = start[2] + wrap_angle(goal[2] - start[2])
    q = np.empty((T, 7))
    q[:, :3] = s * root_end
    q[:, 3:6] = start + s * (goal - start)
    q[:, 6] = swing_bump(tau, h_apex)
    return q


def heuristic_plan(
    task: Task, model: StepperModel | None = None, T: int = 100, weights: CostWeights | None = None
) -> MotionSample:
    """Minimum-jerk root and swing-foot motion with quasi-static controls.

    The recorded cost is the stepper cost of the plan under ``weights``.
    """
    model = model or StepperModel()
    weights = weights or CostWeights()
    q = Trajectory(heuristic_configuration(task, T, weights.h_apex).T, model.dt)
    u = quasi_static_controls(q, model)
    cost = total_cost(make_step_problem(task, model, weights, T), q, u)
    return MotionSample(task, q, u, cost, Source.HEURISTIC)


def optimize_sample(
    sample: MotionSample,
    model: StepperModel | None = None,
    weights: CostWeights | None = None,
    config: SolverConfig | None = None,
) -> MotionSample | None:
    """Re-solve a heuristic sample, warm-started from its own ``(q, u)``.

    Returns ``None`` (and logs) when the solver does not succeed.
    """
    if sample.source is not Source.HEURISTIC:
        raise ValueError("only heuristic samples are re-optimised")
    model = model or StepperModel()
    config = config or SolverConfig.offline()
    problem = make_step_problem(sample.task, model, weights or CostWeights(), sample.q.knots)
    q, u, trace = solve(problem, config, WarmStart(sample.q, sample.u))
    if not trace.success:
        log.warning("dropping sample: solver stopped after %d iterations (%s)", trace.iterations, trace.message or "not converged")
        return None
    return MotionSample(sample.task, q, u, trace.final_cost, Source.OPTIMIZED)


@dataclass(frozen=True)
class GenerationConfig:
    """Everything that determines a generated database pair."""

    n: int = 1200
    seed: int = 0
    T: int = 100
    dt: float = 0.01
    gravity: float = 9.81
    ranges: TaskRanges = TaskRanges()
    weights: CostWeights = CostWeights()
    solver: SolverConfig = SolverConfig.offline()

    def __post_init__(self):
        if self.n < 0 or self.n % 2:
            raise ValueError("n must be a non-negative even count (half left, half right)")

    @property
    def model(self) -> StepperModel:
        return StepperModel(self.dt, self.gravity)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "T": self.T,
            "dt": self.dt,
            "gravity": self.gravity,
            "ranges": self.ranges.to_dict(),
            "weights": self.weights.to_dict(),
            "solver": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.solver).items()},
        }

    def hash(self) -> str:
        return config_hash(self.to_dict())


def index_side(i: int) -> Side:
    return Side.LEFT if i % 2 == 0 else Side.RIGHT


def _generate_one(args):
    i, cfg = args
    side = index_side(i)
    task = sample_task(np.random.default_rng([cfg.seed, i]), side, cfg.ranges)
    heur = heuristic_plan(task, cfg.model, cfg.T, cfg.weights)
    opt = optimize_sample(heur, cfg.model, cfg.weights, cfg.solver)
    return i, heur, opt


@dataclass
class GenerationResult:
    heuristic: dict
    optimized: dict
    manifest: dict


def build_databases(cfg: GenerationConfig, workers: int = 1) -> GenerationResult:
    """Generate paired heuristic/optimised databases for both feet.

    Task ``i`` is drawn from a generator seeded with ``(seed, i)``, and even
    indices move the left foot.  Results therefore do not depend on
    ``workers``.  A task whose optimisation fails is dropped from both
    databases so they stay paired index for index.
    """
    jobs = [(i, cfg) for i in range(cfg.n)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_generate_one, jobs, chunksize=8))
    else:
        results = [_generate_one(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    h = cfg.hash()
    heuristic, optimized, dropped = {}, {}, []
    for side in (Side.LEFT, Side.RIGHT):
        meta = DatabaseMeta(dt=cfg.dt, T=cfg.T, side=side, generator_hash=h)
        kept = [(hs, os) for i, hs, os in results if index_side(i) is side and os is not None]
        heuristic[side] = Database(tuple(hs for hs, _ in kept), meta)
        optimized[side] = Database(tuple(os for _, os in kept), meta)
    dropped = [i for i, _, os in results if os is None]
    if dropped:
        log.warning("dropped %d of %d samples whose optimisation failed", len(dropped), cfg.n)
    manifest = {
        "generator_hash": h,
        "config": cfg.to_dict(),
        "retained": {s.value: len(optimized[s]) for s in optimized},
        "dropped_indices": dropped,
    }
    return GenerationResult(heuristic, optimized, manifest)


def plan_contact_sequence(
    start: tuple[FootPose, FootPose],
    n_steps: int,
    step_params: TaskRanges | None = None,
    seed=0,
    first: Side | str = Side.LEFT,
) -> ContactSequence:
    """Alternating footsteps, each placed relative to the current stance foot.

    Every step draws a forward length, lateral offset, heading change and
    stance width from ``step_params``; the new foot lands at
    ``stance + (length, +-(width + offset), heading)`` in the stance frame, so
    successive steps curve gently when headings change.
    """
    if n_steps < 1:
        raise ValueError("a contact sequence needs at least one step")
    params = step_params or TaskRanges()
    rng = np.random.default_rng(seed)
    left, right = start
    steps = [(left, right)]
    side = Side(first)
    for _ in range(n_steps):
        length = rng.uniform(*params.step_length)
        lateral = rng.uniform(*params.lateral_offset)
        dyaw = rng.uniform(*params.yaw_change)
        width = rng.uniform(*params.stance_width)
        stance = right if side is Side.LEFT else left
        landing = se2_to_world(stance, FootPose(length, side.sign * (width + lateral), dyaw))
        if side is Side.LEFT:
            left = landing
        else:
            right = landing
        steps.append((left, right))
        side = side.other
    return ContactSequence(tuple(steps))


def standing_start(width: float = 0.2) -> tuple[FootPose, FootPose]:
    """Parallel feet ``width`` apart around the origin, facing +x."""
    return FootPose(0.0, 0.5 * width, 0.0), FootPose(0.0, -0.5 * width, 0.0)


def sequences_to_json(sequences) -> dict:
    return {"sequences": [[[l.as_array().tolist(), r.as_array().tolist()] for l, r in seq.steps] for seq in sequences]}


def sequences_from_json(d: dict) -> list:
    try:
        return [
            ContactSequence(tuple((FootPose(*l), FootPose(*r)) for l, r in steps)) for steps in d["sequences"]
        ]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed contact-sequence file ({exc})") from exc


def generate_sequences(n: int, n_steps: int, seed=0, step_params: TaskRanges | None = None, width: float = 0.2) -> list:
    """``n`` sequences, the ``i``-th seeded with ``(seed, i)``; first moving foot alternates."""
    return [
        plan_contact_sequence(standing_start(width), n_steps, step_params, [seed, i], index_side(i)) for i in range(n)
    ]
