"""Memories of motion and the warm-start benchmarks that use them.

A :class:`Memory` pairs a codec (RBF basis plus PCA) with a regressor from
task vectors to compressed configuration trajectories, optionally with a
second pair for controls.  The benchmark helpers solve step problems from
cold and warm starts and summarise the solver traces per method.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codec import Codec, fit_codec
from .domain import (
    FORMAT_VERSION,
    ContactSequence,
    Database,
    FootPose,
    Side,
    Source,
    Task,
    Trajectory,
    midpoint_pose,
    poses_to_world,
    se2_to_local,
    wrap_angle,
)
from .ocp import (
    CostWeights,
    SolverConfig,
    StepperModel,
    WarmStart,
    make_multistep_problem,
    make_step_problem,
    quasi_static_controls,
    solve,
)
from .regressors import fit_regressor, model_from_dict

log = logging.getLogger(__name__)


class UMode(str, enum.Enum):
    NONE = "none"
    QUASI_STATIC = "quasi-static"
    PREDICTED = "predicted"


class MemoryMismatchError(ValueError):
    """A memory does not match the side or the contents a request needs."""


def database_hash(db: Database) -> str:
    """Digest of a database's tasks and trajectories."""
    h = hashlib.sha256()
    h.update(db.side.value.encode())
    for s in db.samples:
        h.update(s.task.as_vector().tobytes())
        h.update(s.q.values.tobytes())
        h.update(s.u.values.tobytes())
    return h.hexdigest()[:16]


@dataclass
class Memory:
    side: Side
    kind: str
    source: Source
    q_codec: Codec
    q_model: object
    u_codec: Codec | None = None
    u_model: object | None = None
    data_hash: str = ""

    @property
    def has_u_model(self) -> bool:
        return self.u_model is not None

    def to_dict(self) -> dict:
        d = {
            "format_version": FORMAT_VERSION,
            "side": self.side.value,
            "kind": self.kind,
            "source": self.source.value,
            "data_hash": self.data_hash,
            "q": {"codec": self.q_codec.to_dict(), "codec_hash": self.q_codec.hash(), "model": self.q_model.to_dict()},
        }
        if self.has_u_model:
            d["u"] = {"codec": self.u_codec.to_dict(), "codec_hash": self.u_codec.hash(), "model": self.u_model.to_dict()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Memory":
        if d.get("format_version") != FORMAT_VERSION:
            raise MemoryMismatchError(f"unsupported memory format version {d.get('format_version')!r}")

        def part(rec):
            codec = Codec.from_dict(rec["codec"])
            if codec.hash() != rec["codec_hash"]:
                raise MemoryMismatchError("model was trained against a different codec")
            return codec, model_from_dict(rec["model"])

        q_codec, q_model = part(d["q"])
        u_codec, u_model = part(d["u"]) if "u" in d else (None, None)
        return cls(Side(d["side"]), d["kind"], Source(d["source"]), q_codec, q_model, u_codec, u_model, d.get("data_hash", ""))


def save_memory(memory: Memory, path) -> None:
    Path(path).write_text(json.dumps(memory.to_dict()))


def load_memory(path) -> Memory:
    return Memory.from_dict(json.loads(Path(path).read_text()))


def train_memory(
    db_train: Database,
    K: int = 60,
    M: int = 60,
    kind: str = "gpr",
    with_u_model: bool = False,
    seed=0,
    **options,
) -> Memory:
    """Fit codecs on the training trajectories and a regressor on the tasks."""
    if len(db_train) == 0:
        raise MemoryMismatchError("training database is empty")
    sources = {s.source for s in db_train.samples}
    X = db_train.task_matrix()

    def fit(trajs):
        codec = fit_codec(trajs, K, M)
        Y = np.stack([codec.compress(t) for t in trajs])
        return codec, fit_regressor(kind, X, Y, seed=seed, **options)

    q_codec, q_model = fit([s.q for s in db_train.samples])
    u_codec = u_model = None
    if with_u_model:
        u_codec, u_model = fit([s.u for s in db_train.samples])
    source = sources.pop() if len(sources) == 1 else Source.OPTIMIZED
    return Memory(db_train.side, kind.lower(), source, q_codec, q_model, u_codec, u_model, database_hash(db_train))


def predict_configuration(memory: Memory, task: Task) -> Trajectory:
    if task.side is not memory.side:
        raise MemoryMismatchError(f"{task.side.value} task given to a {memory.side.value} memory")
    return memory.q_codec.decompress(memory.q_model.predict(task.as_vector()))


def predict_step(
    memory: Memory, task: Task, u_mode: UMode | str = UMode.QUASI_STATIC, model: StepperModel | None = None
) -> WarmStart:
    """Warm start for one step, in the task's own frame."""
    u_mode = UMode(u_mode)
    if u_mode is UMode.PREDICTED and not memory.has_u_model:
        raise MemoryMismatchError("predicted controls requested from a memory without a control model")
    q = predict_configuration(memory, task)
    if u_mode is UMode.NONE:
        return WarmStart(q, None)
    if u_mode is UMode.QUASI_STATIC:
        model = model or StepperModel(q.dt)
        return WarmStart(q, quasi_static_controls(q, model))
    u = memory.u_codec.decompress(memory.u_model.predict(task.as_vector()))
    return WarmStart(q, u)


def timed_predict(memory, task, u_mode=UMode.QUASI_STATIC, model=None):
    """:func:`predict_step` plus its wall-clock latency in seconds."""
    t0 = time.perf_counter()
    warm = predict_step(memory, task, u_mode, model)
    return warm, time.perf_counter() - t0


def _rotate(frame_yaw: float, xy: np.ndarray) -> np.ndarray:
    c, s = math.cos(frame_yaw), math.sin(frame_yaw)
    return np.column_stack([c * xy[:, 0] - s * xy[:, 1], s * xy[:, 0] + c * xy[:, 1]])


def segment_to_world(frame: FootPose, q_local: np.ndarray) -> np.ndarray:
    """Map a ``(T, 7)`` local configuration path into the world frame."""
    q = np.array(q_local, dtype=float)
    q[:, 0:3] = poses_to_world(frame, q[:, 0:3])
    q[:, 3:6] = poses_to_world(frame, q[:, 3:6])
    return q


def controls_to_world(frame: FootPose, u_local: np.ndarray) -> np.ndarray:
    """Rotate the planar acceleration components of ``(T-1, 7)`` controls."""
    u = np.array(u_local, dtype=float)
    u[:, 0:2] = _rotate(frame.yaw, u[:, 0:2])
    u[:, 3:5] = _rotate(frame.yaw, u[:, 3:5])
    return u


def build_multistep(
    memories: dict,
    seq: ContactSequence,
    u_mode: UMode | str = UMode.QUASI_STATIC,
    model: StepperModel | None = None,
) -> WarmStart:
    """Chain single-step predictions into a warm start for the whole sequence.

    Step ``i`` is queried in the frame of the root at the end of the previous
    predicted segment (the midpoint of the initial feet for the first step).
    Segments share their boundary knot: the knot closing step ``i`` is kept
    and the first knot of step ``i + 1`` is dropped.  ``memories`` maps each
    :class:`Side` to a memory.
    """
    u_mode = UMode(u_mode)
    P = seq.n_steps
    if P < 1:
        raise ValueError("contact sequence has no steps")
    frame = midpoint_pose(*seq.steps[0])
    qs, us = [], []
    dt = None
    for i in range(P):
        side = seq.moving_side(i)
        if side not in memories:
            raise MemoryMismatchError(f"no memory for {side.value} steps")
        memory = memories[side]
        left, right = seq.steps[i]
        goal = seq.steps[i + 1][0 if side is Side.LEFT else 1]
        task = Task(se2_to_local(frame, left), se2_to_local(frame, right), se2_to_local(frame, goal), side)
        warm = predict_step(memory, task, u_mode, model)
        dt = warm.q_traj.dt
        q = segment_to_world(frame, warm.q_traj.values.T)
        if qs:
            # keep yaw continuous with the previous segment's root
            prev = qs[-1][-1, 2]
            q[:, 2] += 2 * np.pi * np.round((prev - q[0, 2]) / (2 * np.pi))
            q = q[1:]
        qs.append(q)
        if warm.u_traj is not None:
            us.append(controls_to_world(frame, warm.u_traj.values.T))
        last = qs[-1][-1]
        frame = FootPose(last[0], last[1], wrap_angle(last[2]))
    q_all = np.vstack(qs)
    u_all = np.vstack(us) if us else None
    return WarmStart(Trajectory(q_all.T, dt), None if u_all is None else Trajectory(u_all.T, dt))


# --------------------------------------------------------------------------- accuracy


@dataclass(frozen=True)
class MeanStd:
    mean: float
    std: float

    def __str__(self):
        return f"{self.mean:.4g} ± {self.std:.4g}"


def _mean_std(values) -> MeanStd:
    v = np.asarray(values, dtype=float)
    return MeanStd(float(v.mean()), float(v.std()))


def contact_error(true_q: np.ndarray, pred_q: np.ndarray) -> float:
    """Distance between the final swing poses ``(x, y, yaw)`` of two trajectories."""
    a = np.asarray(true_q)[3:6, -1]
    b = np.asarray(pred_q)[3:6, -1]
    d = np.array([b[0] - a[0], b[1] - a[1], wrap_angle(b[2] - a[2])])
    return float(np.linalg.norm(d))


def accuracy_errors(true_q, pred_q) -> dict:
    traj = [float(np.linalg.norm(t - p)) for t, p in zip(true_q, pred_q)]
    contact = [contact_error(t, p) for t, p in zip(true_q, pred_q)]
    if not traj:
        raise ValueError("empty test set")
    return {"traj_err": _mean_std(traj), "contact_err": _mean_std(contact)}


def eval_accuracy(memory: Memory, db_test: Database) -> dict:
    """Mean and spread of the trajectory error and the final contact error."""
    if len(db_test) == 0:
        raise ValueError("empty test set")
    if db_test.side is not memory.side:
        raise MemoryMismatchError("test database side differs from the memory")
    X = db_test.task_matrix()
    Y = memory.q_model.predict_batch(X)
    pred = [memory.q_codec.decompress(y).values for y in Y]
    return accuracy_errors([s.q.values for s in db_test.samples], pred)


# --------------------------------------------------------------------------- benchmarks


@dataclass(frozen=True)
class Method:
    """One benchmark row: a warm-start source (``None`` for cold start).

    With ``with_q=False`` only the control guess is handed to the solver,
    which then rolls it out from the initial state.
    """

    label: str
    memories: dict | None = None
    u_mode: UMode = UMode.QUASI_STATIC
    with_q: bool = True

    def __post_init__(self):
        object.__setattr__(self, "u_mode", UMode(self.u_mode))
        if not self.with_q and self.u_mode is UMode.NONE:
            raise ValueError(f"method {self.label!r} would pass an empty warm start")

    def strip(self, warm: WarmStart) -> WarmStart:
        return warm if self.with_q else WarmStart(None, warm.u_traj)


@dataclass
class ReportRow:
    method: str
    success_rate: float
    cost_mean: float
    cost_std: float
    iter_mean: float
    iter_std: float
    n: int

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("report rows need at least one run")
        if not 0.0 <= self.success_rate <= 100.0:
            raise ValueError("success rate must be a percentage")


COLUMNS = ("method", "success_rate", "cost_mean", "cost_std", "iter_mean", "iter_std", "n")


@dataclass
class BenchmarkReport:
    rows: list = field(default_factory=list)
    latency_ms: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)

    def row(self, method: str) -> ReportRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


def _row(label, traces) -> ReportRow:
    it = np.array([t.iterations for t in traces], dtype=float)
    cost = np.array([t.final_cost for t in traces], dtype=float)
    ok = np.array([t.success for t in traces])
    return ReportRow(label, 100.0 * ok.mean(), float(cost.mean()), float(cost.std()), float(it.mean()), float(it.std()), len(traces))


def run_single_benchmark(
    methods,
    tasks,
    model: StepperModel | None = None,
    weights: CostWeights | None = None,
    config: SolverConfig | None = None,
    T: int = 100,
) -> BenchmarkReport:
    """Solve every task once per method and aggregate the traces.

    ``methods`` is a list of :class:`Method`; a method without memories is a
    cold start.
    """
    tasks = list(tasks)
    if not tasks:
        raise ValueError("no tasks to benchmark")
    model = model or StepperModel()
    weights = weights or CostWeights()
    config = config or SolverConfig.online()
    problems = [make_step_problem(t, model, weights, T) for t in tasks]
    report = BenchmarkReport()
    for m in methods:
        traces, lat = [], []
        for task, problem in zip(tasks, problems):
            warm = None
            if m.memories is not None:
                warm, dt = timed_predict(m.memories[task.side], task, m.u_mode, model)
                warm = m.strip(warm)
                lat.append(dt)
            traces.append(solve(problem, config, warm)[2])
        report.rows.append(_row(m.label, traces))
        report.iterations[m.label] = [t.iterations for t in traces]
        if lat:
            report.latency_ms[m.label] = 1e3 * float(np.mean(lat))
        log.info("%s: %s", m.label, report.rows[-1])
    return report


def run_multistep_benchmark(
    methods,
    sequences,
    model: StepperModel | None = None,
    weights: CostWeights | None = None,
    config: SolverConfig | None = None,
    T: int = 100,
) -> BenchmarkReport:
    """Solve each contact sequence as one concatenated problem per method."""
    sequences = list(sequences)
    if not sequences:
        raise ValueError("no contact sequences to benchmark")
    model = model or StepperModel()
    weights = weights or CostWeights()
    config = config or SolverConfig.online()
    problems = [make_multistep_problem(s, model, weights, T) for s in sequences]
    report = BenchmarkReport()
    for m in methods:
        traces, lat = [], []
        for seq, problem in zip(sequences, problems):
            warm = None
            if m.memories is not None:
                t0 = time.perf_counter()
                warm = m.strip(build_multistep(m.memories, seq, m.u_mode, model))
                lat.append(time.perf_counter() - t0)
            traces.append(solve(problem, config, warm)[2])
        report.rows.append(_row(m.label, traces))
        report.iterations[m.label] = [t.iterations for t in traces]
        if lat:
            report.latency_ms[m.label] = 1e3 * float(np.mean(lat))
        log.info("%s: %s", m.label, report.rows[-1])
    return report


def format_report(report: BenchmarkReport, fmt: str = "csv") -> str:
    """Render the rows as CSV (fixed column order) or as a Markdown table."""
    fmt = fmt.lower()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in report.rows:
            w.writerow([r.method] + [repr(float(getattr(r, c))) for c in COLUMNS[1:-1]] + [r.n])
        return buf.getvalue()
    if fmt in ("md", "markdown"):
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
        for r in report.rows:
            cells = [
                r.method,
                f"{r.success_rate:.1f}",
                f"{r.cost_mean:.6g}",
                f"{r.cost_std:.6g}",
                f"{r.iter_mean:.3f}",
                f"{r.iter_std:.3f}",
                str(r.n),
            ]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(report: BenchmarkReport, path, fmt: str = "csv") -> None:
    Path(path).write_text(format_report(report, fmt))


def read_report_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        ReportRow(
            r["method"],
            float(r["success_rate"]),
            float(r["cost_mean"]),
            float(r["cost_std"]),
            float(r["iter_mean"]),
            float(r["iter_std"]),
            int(r["n"]),
        )
        for r in rows
    ]
