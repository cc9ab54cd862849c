"""JSON run configuration shared by the command-line tools.

Every section is optional; missing keys keep their defaults::

    {
      "T": 100, "dt": 0.01, "gravity": 9.81,
      "weights": {"w_u": 0.05, ...},
      "ranges": {"step_length": [0.1, 0.4], ...},
      "solver": {"offline": {"threshold": 1e-5, "max_iters": 50},
                 "online": {"threshold": 1e-2, "max_iters": 20}},
      "seeds": {"generation": 0, "split": 1, "train": 0, "sequences": 0}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .domain import TaskRanges
from .ocp import CostWeights, SolverConfig, StepperModel

DEFAULT_SEEDS = {"generation": 0, "split": 1, "train": 0, "sequences": 0}


class ConfigError(ValueError):
    pass


def _only_known(cls, values: dict, section: str) -> dict:
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    return values


@dataclass(frozen=True)
class RunConfig:
    T: int = 100
    dt: float = 0.01
    gravity: float = 9.81
    weights: CostWeights = CostWeights()
    ranges: TaskRanges = TaskRanges()
    offline: SolverConfig = SolverConfig.offline()
    online: SolverConfig = SolverConfig.online()
    seeds: dict = field(default_factory=lambda: dict(DEFAULT_SEEDS))

    @property
    def model(self) -> StepperModel:
        return StepperModel(self.dt, self.gravity)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d or {})
        unknown = set(d) - {"T", "dt", "gravity", "weights", "ranges", "solver", "seeds"}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        solver = d.get("solver", {})
        try:
            return cls(
                T=int(d.get("T", 100)),
                dt=float(d.get("dt", 0.01)),
                gravity=float(d.get("gravity", 9.81)),
                weights=CostWeights(**_only_known(CostWeights, d.get("weights", {}), "weights")),
                ranges=TaskRanges(**_only_known(TaskRanges, d.get("ranges", {}), "ranges")),
                offline=SolverConfig.offline(**_only_known(SolverConfig, solver.get("offline", {}), "solver.offline")),
                online=SolverConfig.online(**_only_known(SolverConfig, solver.get("online", {}), "solver.online")),
                seeds={**DEFAULT_SEEDS, **d.get("seeds", {})},
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        if path is None:
            return cls()
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
