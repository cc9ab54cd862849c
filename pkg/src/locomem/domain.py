"""Planar foot poses and the task and trajectory records built on them.

Coordinates are planar: every pose is ``(x, y, yaw)``.  A single-step motion
is expressed in the frame of the robot root at the start of the step, so the
root horizontal pose of every stored configuration trajectory starts at the
origin.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FORMAT_VERSION = 1

# Configuration layout of the planar stepper.
Q_LABELS = ("root_x", "root_y", "root_yaw", "swing_x", "swing_y", "swing_yaw", "swing_h")
D_Q = len(Q_LABELS)
D_U = D_Q
ROOT = slice(0, 3)
SWING = slice(3, 6)
SWING_H = 6
YAW_INDICES = (2, 5)


def wrap_angle(angle: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.remainder(float(angle), 2.0 * math.pi)
    if a <= -math.pi:
        a = math.pi
    return a


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    a = np.remainder(np.asarray(angles, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    return np.where(a <= -math.pi, math.pi, a)


class Side(str, enum.Enum):
    """Which foot moves during a step."""

    LEFT = "left"
    RIGHT = "right"

    @property
    def sign(self) -> int:
        return 1 if self is Side.LEFT else -1

    @property
    def other(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


class Source(str, enum.Enum):
    HEURISTIC = "heuristic"
    OPTIMIZED = "optimized"


@dataclass(frozen=True)
class FootPose:
    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "FootPose":
        x, y, yaw = (float(v) for v in values)
        return cls(x, y, yaw)


def se2_to_local(frame: FootPose, pose: FootPose) -> FootPose:
    """Express ``pose`` (given in world coordinates) in the coordinates of ``frame``."""
    c, s = math.cos(frame.yaw), math.sin(frame.yaw)
    dx, dy = pose.x - frame.x, pose.y - frame.y
    return FootPose(c * dx + s * dy, -s * dx + c * dy, pose.yaw - frame.yaw)


def se2_to_world(frame: FootPose, pose: FootPose) -> FootPose:
    """Inverse of :func:`se2_to_local` for the same frame."""
    c, s = math.cos(frame.yaw), math.sin(frame.yaw)
    return FootPose(
        frame.x + c * pose.x - s * pose.y,
        frame.y + s * pose.x + c * pose.y,
        frame.yaw + pose.yaw,
    )


def poses_to_world(frame: FootPose, poses: np.ndarray) -> np.ndarray:
    """Vectorised :func:`se2_to_world` over an ``(N, 3)`` array of poses.

    Yaw is unwrapped (``frame.yaw + yaw``) so that continuous yaw trajectories
    stay continuous.
    """
    poses = np.asarray(poses, dtype=float)
    c, s = math.cos(frame.yaw), math.sin(frame.yaw)
    out = np.empty_like(poses)
    out[:, 0] = frame.x + c * poses[:, 0] - s * poses[:, 1]
    out[:, 1] = frame.y + s * poses[:, 0] + c * poses[:, 1]
    out[:, 2] = frame.yaw + poses[:, 2]
    return out


def poses_to_local(frame: FootPose, poses: np.ndarray) -> np.ndarray:
    poses = np.asarray(poses, dtype=float)
    c, s = math.cos(frame.yaw), math.sin(frame.yaw)
    dx, dy = poses[:, 0] - frame.x, poses[:, 1] - frame.y
    out = np.empty_like(poses)
    out[:, 0] = c * dx + s * dy
    out[:, 1] = -s * dx + c * dy
    out[:, 2] = poses[:, 2] - frame.yaw
    return out


def midpoint_pose(a: FootPose, b: FootPose) -> FootPose:
    """Pose halfway between two feet, heading along their mean yaw."""
    return FootPose(0.5 * (a.x + b.x), 0.5 * (a.y + b.y), a.yaw + 0.5 * wrap_angle(b.yaw - a.yaw))


@dataclass(frozen=True)
class Task:
    """A single step: initial feet and the goal of the moving foot."""

    left0: FootPose
    right0: FootPose
    goal: FootPose
    side: Side

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        if not abs(self.left0.y - self.right0.y) > 0.0:
            raise ValueError("initial stance width must be positive")

    @property
    def moving0(self) -> FootPose:
        return self.left0 if self.side is Side.LEFT else self.right0

    @property
    def stance(self) -> FootPose:
        return self.right0 if self.side is Side.LEFT else self.left0

    def as_vector(self) -> np.ndarray:
        """The 9-vector ``[left0, right0, goal]`` used as regression input."""
        return np.concatenate([self.left0.as_array(), self.right0.as_array(), self.goal.as_array()])

    @classmethod
    def from_vector(cls, values: Sequence[float], side: Side | str) -> "Task":
        v = [float(a) for a in values]
        if len(v) != 9:
            raise ValueError(f"task vector must have 9 entries, got {len(v)}")
        return cls(FootPose(*v[0:3]), FootPose(*v[3:6]), FootPose(*v[6:9]), Side(side))


class Trajectory:
    """A ``D x T`` time series sampled every ``dt`` seconds (read-only)."""

    __slots__ = ("values", "dt")

    def __init__(self, values, dt: float):
        arr = np.array(values, dtype=float, copy=True)
        if arr.ndim != 2:
            raise ValueError("trajectory values must be a D x T matrix")
        if arr.shape[1] < 2:
            raise ValueError("trajectory needs at least two knots")
        if not np.all(np.isfinite(arr)):
            raise ValueError("trajectory values must be finite")
        if not dt > 0:
            raise ValueError("dt must be positive")
        arr.flags.writeable = False
        self.values = arr
        self.dt = float(dt)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def knots(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.dt == other.dt and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Trajectory(D={self.dim}, T={self.knots}, dt={self.dt})"


@dataclass(frozen=True, eq=False)
class MotionSample:
    task: Task
    q: Trajectory
    u: Trajectory
    cost: float
    source: Source

    def __post_init__(self):
        object.__setattr__(self, "source", Source(self.source))
        object.__setattr__(self, "cost", float(self.cost))
        if self.u.knots != self.q.knots - 1:
            raise ValueError("controls must have one knot fewer than configurations")

    def __eq__(self, other):
        if not isinstance(other, MotionSample):
            return NotImplemented
        return (
            self.task == other.task
            and self.q == other.q
            and self.u == other.u
            and self.cost == other.cost
            and self.source == other.source
        )


@dataclass(frozen=True)
class DatabaseMeta:
    dt: float
    T: int
    side: Side
    D_q: int = D_Q
    D_u: int = D_U
    generator_hash: str = ""
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))


@dataclass(frozen=True)
class Database:
    samples: tuple
    meta: DatabaseMeta

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        m = self.meta
        for s in samples:
            if s.task.side is not m.side:
                raise ValueError("sample side differs from database side")
            if s.q.dt != m.dt or s.q.knots != m.T or s.q.dim != m.D_q or s.u.dim != m.D_u:
                raise ValueError("sample dimensions differ from database metadata")

    @property
    def side(self) -> Side:
        return self.meta.side

    def __len__(self):
        return len(self.samples)

    def tasks(self) -> list[Task]:
        return [s.task for s in self.samples]

    def task_matrix(self) -> np.ndarray:
        return np.array([s.task.as_vector() for s in self.samples]).reshape(len(self), 9)

    def with_samples(self, samples: Iterable[MotionSample]) -> "Database":
        return Database(tuple(samples), self.meta)


@dataclass(frozen=True)
class ContactSequence:
    """Ordered double-support contacts; one foot changes between entries."""

    steps: tuple

    def __post_init__(self):
        steps = tuple((FootPose(*l.as_array()), FootPose(*r.as_array())) for l, r in self.steps)
        object.__setattr__(self, "steps", steps)
        for (l0, r0), (l1, r1) in zip(steps, steps[1:]):
            if (l0 != l1) == (r0 != r1):
                raise ValueError("consecutive contacts must change exactly one foot")

    def moving_side(self, i: int) -> Side:
        """Side of the foot that moves between entry ``i`` and ``i + 1``."""
        (l0, _), (l1, _) = self.steps[i], self.steps[i + 1]
        return Side.LEFT if l0 != l1 else Side.RIGHT

    @property
    def n_steps(self) -> int:
        return len(self.steps) - 1


# --------------------------------------------------------------------------- tasks


@dataclass(frozen=True)
class TaskRanges:
    """Sampling intervals for single-step tasks (metres / radians).

    ``stagger`` is how far the moving foot starts behind the stance foot and
    ``initial_yaw_diff`` the stance-minus-moving yaw at the start; both make the
    sampled stances cover the configurations met when chaining steps.
    """

    step_length: tuple = (0.10, 0.40)
    lateral_offset: tuple = (-0.05, 0.05)
    yaw_change: tuple = (-0.3, 0.3)
    stance_width: tuple = (0.15, 0.25)
    stagger: tuple = (0.0, 0.4)
    initial_yaw_diff: tuple = (-0.3, 0.3)

    def __post_init__(self):
        for name in self.names():
            lo, hi = (float(v) for v in getattr(self, name))
            if lo > hi:
                raise ValueError(f"degenerate range for {name}: min {lo} > max {hi}")
            object.__setattr__(self, name, (lo, hi))
        if self.stance_width[0] <= 0.0:
            raise ValueError("stance width must be positive")

    @staticmethod
    def names() -> tuple:
        return ("step_length", "lateral_offset", "yaw_change", "stance_width", "stagger", "initial_yaw_diff")

    def to_dict(self) -> dict:
        return {n: list(getattr(self, n)) for n in self.names()}


def task_from_parameters(side: Side, step_length, lateral_offset, yaw_change, stance_width, stagger, initial_yaw_diff) -> Task:
    side = Side(side)
    s = side.sign
    moving0 = FootPose(-0.5 * stagger, 0.5 * s * stance_width, -0.5 * initial_yaw_diff)
    stance = FootPose(0.5 * stagger, -0.5 * s * stance_width, 0.5 * initial_yaw_diff)
    goal = se2_to_world(stance, FootPose(step_length, s * (stance_width + lateral_offset), yaw_change))
    if side is Side.LEFT:
        return Task(moving0, stance, goal, side)
    return Task(stance, moving0, goal, side)


def task_parameters(task: Task) -> dict:
    """Invert :func:`task_from_parameters`."""
    s = task.side.sign
    moving0, stance = task.moving0, task.stance
    rel = se2_to_local(stance, task.goal)
    width = abs(stance.y - moving0.y)
    return {
        "step_length": rel.x,
        "lateral_offset": s * rel.y - width,
        "yaw_change": rel.yaw,
        "stance_width": width,
        "stagger": stance.x - moving0.x,
        "initial_yaw_diff": wrap_angle(stance.yaw - moving0.yaw),
    }


def sample_task(rng_seed, side: Side, ranges: TaskRanges | None = None) -> Task:
    """Draw a task uniformly within ``ranges``; deterministic for a fixed seed."""
    ranges = ranges or TaskRanges()
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    params = {n: float(rng.uniform(*getattr(ranges, n))) for n in ranges.names()}
    return task_from_parameters(Side(side), **params)


# --------------------------------------------------------------------------- persistence


class DatabaseError(Exception):
    pass


class FormatVersionError(DatabaseError):
    pass


class MalformedRecordError(DatabaseError):
    pass


class DimensionMismatchError(DatabaseError):
    pass


def _header(meta: DatabaseMeta) -> dict:
    return {
        "format_version": meta.format_version,
        "dt": meta.dt,
        "T": meta.T,
        "D_q": meta.D_q,
        "D_u": meta.D_u,
        "side": meta.side.value,
        "generator_hash": meta.generator_hash,
    }


def sample_to_record(sample: MotionSample) -> dict:
    return {
        "task": {"x": sample.task.as_vector().tolist(), "side": sample.task.side.value},
        "q": sample.q.values.ravel().tolist(),
        "u": sample.u.values.ravel().tolist(),
        "cost": sample.cost,
        "source": sample.source.value,
    }


def save_database(db: Database, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(json.dumps(_header(db.meta)) + "\n")
        for sample in db.samples:
            fh.write(json.dumps(sample_to_record(sample)) + "\n")


def load_database(path) -> Database:
    path = Path(path)
    with path.open() as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise MalformedRecordError(f"{path}: empty file, header missing")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"{path}: header is not valid JSON") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatVersionError(
            f"{path}: format version {header.get('format_version')!r}, expected {FORMAT_VERSION}"
        )
    try:
        meta = DatabaseMeta(
            dt=float(header["dt"]),
            T=int(header["T"]),
            side=Side(header["side"]),
            D_q=int(header["D_q"]),
            D_u=int(header["D_u"]),
            generator_hash=str(header.get("generator_hash", "")),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedRecordError(f"{path}: bad header: {exc}") from exc

    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
            x = rec["task"]["x"]
            side = Side(rec["task"]["side"])
            q = np.asarray(rec["q"], dtype=float)
            u = np.asarray(rec["u"], dtype=float)
            cost = float(rec["cost"])
            source = Source(rec["source"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedRecordError(f"{path}:{lineno}: malformed record ({exc})") from exc
        if len(x) != 9 or q.size != meta.D_q * meta.T or u.size != meta.D_u * (meta.T - 1):
            raise DimensionMismatchError(f"{path}:{lineno}: record dimensions do not match header")
        if side is not meta.side:
            raise DimensionMismatchError(f"{path}:{lineno}: sample side {side.value} in {meta.side.value} database")
        try:
            samples.append(
                MotionSample(
                    task=Task.from_vector(x, side),
                    q=Trajectory(q.reshape(meta.D_q, meta.T), meta.dt),
                    u=Trajectory(u.reshape(meta.D_u, meta.T - 1), meta.dt),
                    cost=cost,
                    source=source,
                )
            )
        except ValueError as exc:
            raise MalformedRecordError(f"{path}:{lineno}: {exc}") from exc
    return Database(tuple(samples), meta)


def split_database(db: Database, n_train: int, n_test: int, seed) -> tuple[Database, Database]:
    """Shuffle deterministically and take disjoint train/test subsets."""
    if n_train < 0 or n_test < 0:
        raise ValueError("split sizes must be non-negative")
    if n_train + n_test > len(db):
        raise ValueError(f"cannot split {len(db)} samples into {n_train} + {n_test}")
    order = np.random.default_rng(seed).permutation(len(db))
    train = [db.samples[i] for i in order[:n_train]]
    test = [db.samples[i] for i in order[n_train : n_train + n_test]]
    return db.with_samples(train), db.with_samples(test)


def config_hash(obj) -> str:
    """Short stable hash of a JSON-serialisable configuration."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
