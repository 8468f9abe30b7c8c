"""Append-only evaluation history: one JSON record per line.

Records carry everything needed to replay an evaluation (task, configuration,
explicit seeds) plus the measured objective; they round-trip losslessly
through the store and feed both the surrogate models and transfer learning.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

try:
    import fcntl
except ImportError:  # non-POSIX
    fcntl = None

from .params import Configuration, TaskDescriptor

# Fixed field order of one serialized record.
_FIELDS = (
    "task",
    "config",
    "seeds",
    "mean_wall_clock",
    "mean_arfe",
    "per_repeat_wall_clock",
    "per_repeat_arfe",
    "failed",
    "objective_value",
    "timestamp",
)


def record_key(task: TaskDescriptor, config: Configuration) -> str:
    """Stable hash of (task, config), used for sweep resumability."""
    raw = "|".join(
        [task.key(), config.sap_algorithm, config.sketching_operator,
         repr(float(config.sampling_factor)), str(config.vec_nnz), str(config.safety_factor)]
    )
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


@dataclass
class EvaluationRecord:
    """Averaged outcome of evaluating one configuration on one task."""

    task: TaskDescriptor
    config: Configuration
    seeds: list[int]
    mean_wall_clock: float
    mean_arfe: float
    failed: bool
    objective_value: float
    timestamp: float = field(default_factory=time.time)
    per_repeat_wall_clock: list[float] = field(default_factory=list)
    per_repeat_arfe: list[float] = field(default_factory=list)

    def key(self) -> str:
        """Stable hash of (task, config), used for sweep resumability."""
        return record_key(self.task, self.config)

    def to_dict(self) -> dict:
        return {
            "task": self.task.to_dict(),
            "config": self.config.to_dict(),
            "seeds": [int(s) for s in self.seeds],
            "mean_wall_clock": float(self.mean_wall_clock),
            "mean_arfe": float(self.mean_arfe),
            "per_repeat_wall_clock": [float(t) for t in self.per_repeat_wall_clock],
            "per_repeat_arfe": [float(a) for a in self.per_repeat_arfe],
            "failed": bool(self.failed),
            "objective_value": float(self.objective_value),
            "timestamp": float(self.timestamp),
        }

    def to_json_line(self) -> str:
        d = self.to_dict()
        return json.dumps({k: d[k] for k in _FIELDS})

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationRecord":
        return cls(
            task=TaskDescriptor.from_dict(d["task"]),
            config=Configuration.from_dict(d["config"]),
            seeds=[int(s) for s in d["seeds"]],
            mean_wall_clock=float(d["mean_wall_clock"]),
            mean_arfe=float(d["mean_arfe"]),
            failed=bool(d["failed"]),
            objective_value=float(d["objective_value"]),
            timestamp=float(d["timestamp"]),
            per_repeat_wall_clock=[float(t) for t in d.get("per_repeat_wall_clock", [])],
            per_repeat_arfe=[float(a) for a in d.get("per_repeat_arfe", [])],
        )

    @classmethod
    def from_json_line(cls, line: str) -> "EvaluationRecord":
        return cls.from_dict(json.loads(line))


class HistoryStore:
    """Line-delimited record log under a session directory.

    Files are opened append-only; an advisory lock guards concurrent
    appends on POSIX systems.
    """

    def __init__(self, path):
        self.path = os.fspath(path)
        parent = os.path.dirname(self.path)
        if parent:
            os.makedirs(parent, exist_ok=True)

    def append(self, record: EvaluationRecord) -> None:
        line = record.to_json_line() + "\n"
        with open(self.path, "a") as fh:
            if fcntl is not None:
                fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
            try:
                fh.write(line)
                fh.flush()
            finally:
                if fcntl is not None:
                    fcntl.flock(fh.fileno(), fcntl.LOCK_UN)

    def load(self) -> list[EvaluationRecord]:
        if not os.path.exists(self.path):
            return []
        records = []
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(EvaluationRecord.from_json_line(line))
        return records

    def __iter__(self):
        return iter(self.load())


def load_history(paths) -> list[EvaluationRecord]:
    """Concatenate records from one or more history files."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    records = []
    for p in paths:
        records.extend(HistoryStore(p).load())
    return records
