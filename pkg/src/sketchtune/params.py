"""Tuning parameter space: definitions, [0,1] encoding, and LHS designs.

The search space has five parameters: two categorical (solver pipeline and
sketching operator), one real (sampling factor), and two integer ordinals
(nonzeros per column/row, safety factor).  Surrogate models operate on the
unit hypercube, so every parameter maps affinely onto [0,1]; integers and
categoricals are centered on their cell so decoding rounds unambiguously.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

SAP_ALGORITHMS = ("QR-LSQR", "SVD-LSQR", "SVD-PGD")
SKETCH_OPERATORS = ("SJLT", "LessUniform")

#: Dimension order of the encoded unit vector.
PARAMETER_NAMES = (
    "sap_algorithm",
    "sketching_operator",
    "sampling_factor",
    "vec_nnz",
    "safety_factor",
)

#: Indices of the ordinal (non-categorical) coordinates in the encoding.
ORDINAL_DIMS = (2, 3, 4)


@dataclass(frozen=True)
class Configuration:
    """One point in the tuning space."""

    sap_algorithm: str
    sketching_operator: str
    sampling_factor: float
    vec_nnz: int
    safety_factor: int

    def astuple(self):
        return (
            self.sap_algorithm,
            self.sketching_operator,
            self.sampling_factor,
            self.vec_nnz,
            self.safety_factor,
        )

    def to_dict(self) -> dict:
        return {
            "sap_algorithm": self.sap_algorithm,
            "sketching_operator": self.sketching_operator,
            "sampling_factor": float(self.sampling_factor),
            "vec_nnz": int(self.vec_nnz),
            "safety_factor": int(self.safety_factor),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Configuration":
        return cls(
            sap_algorithm=str(d["sap_algorithm"]),
            sketching_operator=str(d["sketching_operator"]),
            sampling_factor=float(d["sampling_factor"]),
            vec_nnz=int(d["vec_nnz"]),
            safety_factor=int(d["safety_factor"]),
        )


@dataclass(frozen=True)
class TuningSpace:
    """Bounds and categorical options for the five tuning parameters."""

    sap_algorithms: tuple = SAP_ALGORITHMS
    sketching_operators: tuple = SKETCH_OPERATORS
    sampling_factor_bounds: tuple = (1.0, 10.0)
    vec_nnz_bounds: tuple = (1, 100)
    safety_factor_bounds: tuple = (0, 4)

    def __post_init__(self):
        if not self.sap_algorithms or not self.sketching_operators:
            raise ValueError("categorical option lists must be nonempty")
        if self.sampling_factor_bounds[0] > self.sampling_factor_bounds[1]:
            raise ValueError("invalid sampling_factor bounds")

    @property
    def dim(self) -> int:
        return 5

    def categorical_cells(self):
        """All (sap_algorithm, sketching_operator) pairs in fixed declared order."""
        return tuple(
            (alg, op)
            for alg in self.sap_algorithms
            for op in self.sketching_operators
        )

    def to_dict(self) -> dict:
        return {
            "sap_algorithms": list(self.sap_algorithms),
            "sketching_operators": list(self.sketching_operators),
            "sampling_factor_bounds": list(self.sampling_factor_bounds),
            "vec_nnz_bounds": list(self.vec_nnz_bounds),
            "safety_factor_bounds": list(self.safety_factor_bounds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TuningSpace":
        return cls(
            sap_algorithms=tuple(d.get("sap_algorithms", SAP_ALGORITHMS)),
            sketching_operators=tuple(d.get("sketching_operators", SKETCH_OPERATORS)),
            sampling_factor_bounds=tuple(d.get("sampling_factor_bounds", (1.0, 10.0))),
            vec_nnz_bounds=tuple(d.get("vec_nnz_bounds", (1, 100))),
            safety_factor_bounds=tuple(d.get("safety_factor_bounds", (0, 4))),
        )


@dataclass(frozen=True)
class TaskDescriptor:
    """Shape and provenance of one least-squares tuning task."""

    m: int
    n: int
    label: str = "custom"
    coherence_normalized: float | None = None
    condition_number: float | None = None

    def __post_init__(self):
        if not (self.m >= self.n >= 1):
            raise ValueError(f"need m >= n >= 1, got m={self.m}, n={self.n}")

    def key(self) -> str:
        return f"{self.label}:{self.m}x{self.n}"

    def to_dict(self) -> dict:
        d = {"m": int(self.m), "n": int(self.n), "label": self.label}
        if self.coherence_normalized is not None:
            d["coherence_normalized"] = float(self.coherence_normalized)
        if self.condition_number is not None:
            d["condition_number"] = float(self.condition_number)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TaskDescriptor":
        return cls(
            m=int(d["m"]),
            n=int(d["n"]),
            label=str(d.get("label", "custom")),
            coherence_normalized=d.get("coherence_normalized"),
            condition_number=d.get("condition_number"),
        )


def default_reference_configuration() -> Configuration:
    return Configuration("QR-LSQR", "SJLT", 5.0, 50, 0)


@dataclass(frozen=True)
class ConstantParams:
    """Session constants: pilot/repeat counts and the accuracy penalty scheme."""

    num_pilots: int = 10
    num_repeats: int = 5
    ref_config: Configuration = field(default_factory=default_reference_configuration)
    penalty_factor: float = 2.0
    allowance_factor: float = 10.0

    def __post_init__(self):
        if self.num_pilots < 1 or self.num_repeats < 1:
            raise ValueError("num_pilots and num_repeats must be >= 1")
        if self.penalty_factor < 1 or self.allowance_factor < 1:
            raise ValueError("penalty_factor and allowance_factor must be >= 1")

    def to_dict(self) -> dict:
        return {
            "num_pilots": int(self.num_pilots),
            "num_repeats": int(self.num_repeats),
            "ref_config": self.ref_config.to_dict(),
            "penalty_factor": float(self.penalty_factor),
            "allowance_factor": float(self.allowance_factor),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConstantParams":
        kwargs = {}
        for k in ("num_pilots", "num_repeats", "penalty_factor", "allowance_factor"):
            if k in d:
                kwargs[k] = d[k]
        if "ref_config" in d:
            kwargs["ref_config"] = Configuration.from_dict(d["ref_config"])
        return cls(**kwargs)


def validate_config(space: TuningSpace, config: Configuration) -> None:
    """Raise ValueError if the configuration falls outside the space."""
    if config.sap_algorithm not in space.sap_algorithms:
        raise ValueError(f"unknown sap_algorithm {config.sap_algorithm!r}")
    if config.sketching_operator not in space.sketching_operators:
        raise ValueError(f"unknown sketching_operator {config.sketching_operator!r}")
    lo, hi = space.sampling_factor_bounds
    if not (lo <= config.sampling_factor <= hi):
        raise ValueError(f"sampling_factor {config.sampling_factor} outside [{lo}, {hi}]")
    lo, hi = space.vec_nnz_bounds
    if not (lo <= config.vec_nnz <= hi):
        raise ValueError(f"vec_nnz {config.vec_nnz} outside [{lo}, {hi}]")
    lo, hi = space.safety_factor_bounds
    if not (lo <= config.safety_factor <= hi):
        raise ValueError(f"safety_factor {config.safety_factor} outside [{lo}, {hi}]")


def _encode_categorical(options, value) -> float:
    i = options.index(value)
    return (i + 0.5) / len(options)


def _decode_categorical(options, u: float):
    i = min(int(u * len(options)), len(options) - 1)
    return options[max(i, 0)]


def _encode_integer(bounds, value) -> float:
    lo, hi = bounds
    return (value - lo + 0.5) / (hi - lo + 1)


def _decode_integer(bounds, u: float) -> int:
    lo, hi = bounds
    i = min(int(u * (hi - lo + 1)), hi - lo)
    return lo + max(i, 0)


def encode(space: TuningSpace, config: Configuration) -> np.ndarray:
    """Map a valid configuration to a point in [0,1]^5.

    Reals map affinely onto [0,1]; integers and categoricals map to the
    center of their cell so that ``decode(encode(c)) == c``.
    """
    validate_config(space, config)
    lo, hi = space.sampling_factor_bounds
    sf = 0.0 if hi == lo else (config.sampling_factor - lo) / (hi - lo)
    return np.array(
        [
            _encode_categorical(space.sap_algorithms, config.sap_algorithm),
            _encode_categorical(space.sketching_operators, config.sketching_operator),
            sf,
            _encode_integer(space.vec_nnz_bounds, config.vec_nnz),
            _encode_integer(space.safety_factor_bounds, config.safety_factor),
        ]
    )


def decode(space: TuningSpace, u) -> Configuration:
    """Map a point of the unit cube to the nearest valid configuration."""
    u = np.asarray(u, dtype=float)
    if u.shape != (5,):
        raise ValueError(f"expected a 5-vector, got shape {u.shape}")
    u = np.clip(u, 0.0, 1.0)
    lo, hi = space.sampling_factor_bounds
    return Configuration(
        sap_algorithm=_decode_categorical(space.sap_algorithms, u[0]),
        sketching_operator=_decode_categorical(space.sketching_operators, u[1]),
        sampling_factor=float(np.clip(lo + u[2] * (hi - lo), lo, hi)),
        vec_nnz=_decode_integer(space.vec_nnz_bounds, u[3]),
        safety_factor=_decode_integer(space.safety_factor_bounds, u[4]),
    )


def encode_ordinals(space: TuningSpace, config: Configuration) -> np.ndarray:
    """Encoded (sampling_factor, vec_nnz, safety_factor) triple in [0,1]^3."""
    return encode(space, config)[list(ORDINAL_DIMS)]


def decode_ordinals(space: TuningSpace, cell, u3) -> Configuration:
    """Decode an ordinal triple into the given categorical cell."""
    u3 = np.asarray(u3, dtype=float)
    full = np.empty(5)
    full[0] = _encode_categorical(space.sap_algorithms, cell[0])
    full[1] = _encode_categorical(space.sketching_operators, cell[1])
    full[list(ORDINAL_DIMS)] = u3
    return decode(space, full)


def lhs_unit_design(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube design in [0,1]^dim: one point per axis stratum."""
    if count < 1:
        raise ValueError("count must be >= 1")
    u = np.empty((count, dim))
    for j in range(dim):
        u[:, j] = (rng.permutation(count) + rng.random(count)) / count
    return u


def lhs_sample(space: TuningSpace, count: int, seed) -> list[Configuration]:
    """Sample ``count`` configurations from a Latin hypercube design.

    The encoded coordinates are stratified per dimension before the
    integer/categorical coordinates are rounded by :func:`decode`.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    design = lhs_unit_design(count, space.dim, rng)
    return [decode(space, row) for row in design]


def save_tuning_description(path, space: TuningSpace, constants: ConstantParams) -> None:
    """Write space bounds and constants as a key-value JSON file."""
    payload = {"space": space.to_dict(), "constants": constants.to_dict()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_tuning_description(path) -> tuple[TuningSpace, ConstantParams]:
    with open(path) as fh:
        payload = json.load(fh)
    space = TuningSpace.from_dict(payload.get("space", {}))
    constants = ConstantParams.from_dict(payload.get("constants", {}))
    return space, constants


def with_overrides(constants: ConstantParams, **kwargs) -> ConstantParams:
    """Constants with some fields replaced (flags > file > defaults)."""
    kwargs = {k: v for k, v in kwargs.items() if v is not None}
    return replace(constants, **kwargs) if kwargs else constants
