"""Gaussian-process surrogate modeling and the Bayesian tuning loop.

The surrogate is an anisotropic squared-exponential GP over the encoded
unit cube, fit by maximizing the marginal likelihood with L-BFGS-B from
multiple starts (analytic gradients).  Objectives are modeled in log space:
wall-clock times span an order of magnitude and penalties multiply, so the
log transform keeps the noise model sensible and predictions exponentiate
back to positive times.  Penalized (failed) evaluations enter the model as
data so the search is repelled from inaccurate regions.

Also here: the LCM multitask extension (a joint GP whose per-task functions
mix shared latent GPs) used by transfer learning, Expected Improvement
acquisition, and the LHS-only random-search baseline sharing the same
session harness.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize
from scipy.stats import norm

from .history import EvaluationRecord, HistoryStore
from .objective import evaluate, run_reference
from .params import (
    Configuration,
    ConstantParams,
    TuningSpace,
    encode,
    lhs_sample,
    lhs_unit_design,
    decode,
)

_JITTER_REL = 1e-8
_LENGTHSCALE_BOUNDS = (1e-2, 10.0)
_VARIANCE_BOUNDS = (1e-3, 1e3)
_N_RESTARTS = 8


# ---------------------------------------------------------------------------
# Single-task GP

@dataclass
class GpModel:
    """Trained GP posterior over [0,1]^dim with per-dimension lengthscales."""

    x: np.ndarray
    y: np.ndarray
    y_mean: float
    y_std: float
    variance: float
    lengthscales: np.ndarray  # divisors I_j of the squared distances
    noise: float
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def _sq_dists(X1, X2):
    # (N, M, dim) per-dimension squared distances
    return (X1[:, None, :] - X2[None, :, :]) ** 2


def _kernel(X1, X2, variance, lengthscales):
    d = _sq_dists(X1, X2)
    return variance * np.exp(-np.sum(d / lengthscales, axis=2))


def _jitter(variance, noise):
    # 1e-8 * trace/N of the kernel matrix (unit diagonal correlation)
    return _JITTER_REL * (variance + noise)


def _gp_nll_and_grad(theta, X, ys, D):
    n = X.shape[0]
    dim = X.shape[1]
    variance = math.exp(theta[0])
    lengthscales = np.exp(theta[1 : 1 + dim])
    noise = math.exp(theta[1 + dim])
    R = np.exp(-np.sum(D / lengthscales, axis=2))
    K = variance * R
    jit = _jitter(variance, noise)
    K[np.diag_indices(n)] += noise + jit
    try:
        L = sla.cholesky(K, lower=True)
    except sla.LinAlgError:
        return 1e25, np.zeros_like(theta)
    alpha = sla.cho_solve((L, True), ys)
    nll = 0.5 * float(ys @ alpha) + float(np.sum(np.log(np.diag(L)))) + 0.5 * n * math.log(2 * math.pi)
    Kinv = sla.cho_solve((L, True), np.eye(n))
    W = Kinv - np.outer(alpha, alpha)

    grad = np.empty_like(theta)
    # d/dlog variance: variance * R + its share of the jitter
    G = variance * R
    G[np.diag_indices(n)] += _JITTER_REL * variance
    grad[0] = 0.5 * float(np.sum(W * G))
    for j in range(dim):
        G = variance * R * (D[:, :, j] / lengthscales[j])
        grad[1 + j] = 0.5 * float(np.sum(W * G))
    grad[1 + dim] = 0.5 * float(np.trace(W)) * (noise * (1 + _JITTER_REL))
    return nll, grad


def gp_fit(points, values, noise_floor: float = 1e-6) -> GpModel:
    """Fit GP hyperparameters by maximum marginal likelihood.

    Multi-start (8) L-BFGS-B over log hyperparameters with lengthscales
    bounded to [1e-2, 10].  Degenerate data (fewer than two points, or all
    outputs identical) skips optimization and returns a flagged
    noise-dominated model.
    """
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    y = np.asarray(values, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError("points and values must have matching first dimension")
    n, dim = X.shape

    y_mean = float(np.mean(y)) if n else 0.0
    y_std = float(np.std(y)) if n > 1 else 1.0
    degenerate = n < 2 or y_std == 0.0 or bool(np.all(np.ptp(X, axis=0) == 0.0))
    if y_std == 0.0:
        y_std = 1.0
    ys = (y - y_mean) / y_std

    noise_lo = max(noise_floor, 1e-10)
    if degenerate:
        variance, lengthscales, noise = 1.0, np.ones(dim), noise_lo
    else:
        D = _sq_dists(X, X)
        lo = np.log(
            np.r_[_VARIANCE_BOUNDS[0], np.full(dim, _LENGTHSCALE_BOUNDS[0]), noise_lo]
        )
        hi = np.log(
            np.r_[_VARIANCE_BOUNDS[1], np.full(dim, _LENGTHSCALE_BOUNDS[1]), 1e2]
        )
        bounds = list(zip(lo, hi))
        rng = np.random.default_rng(0)
        starts = [np.log(np.r_[1.0, np.ones(dim), max(noise_lo, 1e-2)])]
        for _ in range(_N_RESTARTS - 1):
            starts.append(lo + rng.random(lo.shape) * (hi - lo))
        best = None
        for s in starts:
            res = minimize(
                _gp_nll_and_grad,
                np.clip(s, lo, hi),
                args=(X, ys, D),
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": 120},
            )
            if best is None or res.fun < best.fun:
                best = res
        theta = best.x
        variance = math.exp(theta[0])
        lengthscales = np.exp(theta[1 : 1 + dim])
        noise = math.exp(theta[1 + dim])

    K = _kernel(X, X, variance, lengthscales)
    K[np.diag_indices(n)] += noise + _jitter(variance, noise)
    L = sla.cholesky(K, lower=True)
    alpha = sla.cho_solve((L, True), ys)
    return GpModel(
        x=X,
        y=y,
        y_mean=y_mean,
        y_std=y_std,
        variance=variance,
        lengthscales=np.asarray(lengthscales),
        noise=noise,
        chol=L,
        alpha=alpha,
        degenerate=degenerate,
    )


def gp_predict(model: GpModel, point):
    """Posterior mean and (nonnegative) latent variance at one or many points.

    A single point returns floats; an (M, dim) array returns arrays.
    """
    P = np.atleast_2d(np.asarray(point, dtype=np.float64))
    single = np.asarray(point).ndim == 1
    Kstar = _kernel(model.x, P, model.variance, model.lengthscales)
    mean_s = Kstar.T @ model.alpha
    v = sla.solve_triangular(model.chol, Kstar, lower=True)
    var_s = np.maximum(model.variance - np.sum(v * v, axis=0), 0.0)
    mean = model.y_mean + model.y_std * mean_s
    var = var_s * model.y_std**2
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def predicted_objective_seconds(model: GpModel, point):
    """Exponentiate the log-space posterior mean back to positive seconds."""
    mean, _ = gp_predict(model, point)
    return np.exp(mean)


# ---------------------------------------------------------------------------
# Expected Improvement acquisition

def expected_improvement(mean, std, f_best):
    """EI for minimization; accepts scalars or arrays."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    imp = f_best - mean
    out = np.maximum(imp, 0.0)
    pos = std > 0
    if np.any(pos):
        z = np.where(pos, imp / np.where(pos, std, 1.0), 0.0)
        out = np.where(pos, imp * norm.cdf(z) + std * norm.pdf(z), out)
    return out if out.ndim else float(out)


def _ei_at(model, U, f_best):
    mean, var = gp_predict(model, U)
    return expected_improvement(mean, np.sqrt(var), f_best)


def acquire(model: GpModel, space: TuningSpace, rng: np.random.Generator) -> Configuration:
    """Maximize EI over the encoded cube and decode the winner.

    Multi-start local refinement from an LHS candidate set; when EI is flat
    (zero everywhere) the candidate with the lowest posterior mean wins, so
    ties collapse onto the incumbent region.
    """
    u_best = maximize_ei(model, model.dim, rng)
    return decode(space, u_best)


def maximize_ei(model: GpModel, dim: int, rng: np.random.Generator,
                n_candidates: int = 128, n_refine: int = 8) -> np.ndarray:
    # Plug-in incumbent: the minimum posterior mean over the training inputs
    # is robust to measurement noise, unlike the raw best observation.
    train_mean, _ = gp_predict(model, model.x)
    f_best = float(np.min(train_mean))
    cands = np.vstack([lhs_unit_design(n_candidates, dim, rng),
                       model.x[np.argmin(train_mean)][None, :]])
    ei = _ei_at(model, cands, f_best)
    if np.max(ei) <= 1e-15:
        mean, _ = gp_predict(model, cands)
        return cands[int(np.argmin(mean))]
    order = np.argsort(-ei)[:n_refine]
    best_u, best_ei = cands[order[0]], ei[order[0]]
    for i in order:
        res = minimize(
            lambda u: -_ei_at(model, u[None, :], f_best)[0],
            cands[i],
            method="L-BFGS-B",
            bounds=[(0.0, 1.0)] * dim,
            options={"maxiter": 60},
        )
        if -res.fun > best_ei:
            best_ei, best_u = -res.fun, np.clip(res.x, 0.0, 1.0)
    return best_u


# ---------------------------------------------------------------------------
# Tuning sessions

@dataclass
class TunerState:
    """Mutable state of one tuning session."""

    space: TuningSpace
    constants: ConstantParams
    arfe_ref: float
    history: list
    budget_remaining: int
    seed: int


class ReplayMismatchError(RuntimeError):
    """A replayed session diverged from its log."""


class _Evaluator:
    """Runs evaluations, or replays them from a prior session's records.

    In replay mode the decision logic re-executes deterministically against
    the logged measurements; each recomputed (config, seeds) pair is checked
    against the log, so a successful replay certifies that the session is a
    deterministic function of (seed, logged measurements).
    """

    def __init__(self, problem, constants, replay=None):
        self.problem = problem
        self.constants = constants
        self.replay = list(replay) if replay is not None else None
        self.cursor = 0
        self.wall_clock_floor = None

    def __call__(self, config, arfe_ref, seed_base):
        seeds = [int(seed_base) + r for r in range(self.constants.num_repeats)]
        if self.replay is None:
            return evaluate(self.problem, config, self.constants, arfe_ref, seed_base,
                            wall_clock_floor=self.wall_clock_floor)
        if self.cursor >= len(self.replay):
            raise ReplayMismatchError("replay log exhausted before the session finished")
        rec = self.replay[self.cursor]
        self.cursor += 1
        if rec.config != config or rec.seeds != seeds:
            raise ReplayMismatchError(
                f"replay diverged at record {self.cursor}: "
                f"recomputed {config} seeds {seeds}, logged {rec.config} seeds {rec.seeds}"
            )
        return rec


def _seed_stream(seed):
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(3)
    return (
        np.random.default_rng(children[0]),  # designs (LHS)
        np.random.default_rng(children[1]),  # acquisition
        np.random.default_rng(children[2]),  # evaluation seed bases
    )


def _next_seed_base(rng, constants):
    return int(rng.integers(0, 2**31 - constants.num_repeats))


def _run_reference_step(problem, constants, evaluator, seed_base):
    if evaluator.replay is None:
        ref, rec = run_reference(problem, constants, seed_base)
        evaluator.wall_clock_floor = ref.wall_clock_ref
        return ref.arfe_ref, rec
    rec = evaluator(constants.ref_config, None, seed_base)
    return rec.mean_arfe, rec


def tune(problem, space: TuningSpace, constants: ConstantParams, budget: int, seed: int,
         store: HistoryStore | None = None, replay=None):
    """GP-surrogate Bayesian tuning session.

    Evaluates ref_config, then ``num_pilots`` LHS configurations, then
    acquisition-driven configurations until exactly ``budget`` records
    exist.  Returns (best record, full history).

    With ``replay`` (the record list of a prior identically-seeded session)
    no solves run: all decisions are recomputed against the logged
    measurements and verified to match the log.
    """
    if budget < constants.num_pilots + 1:
        raise ValueError("budget must be at least num_pilots + 1")
    rng_lhs, rng_acq, rng_seed = _seed_stream(seed)
    evaluator = _Evaluator(problem, constants, replay)
    records: list[EvaluationRecord] = []

    def _append(rec):
        records.append(rec)
        if store is not None:
            store.append(rec)

    arfe_ref, ref_record = _run_reference_step(
        problem, constants, evaluator, _next_seed_base(rng_seed, constants)
    )
    _append(ref_record)
    state = TunerState(space, constants, arfe_ref, records, budget - 1, seed)

    for config in lhs_sample(space, constants.num_pilots, rng_lhs):
        _append(evaluator(config, arfe_ref, _next_seed_base(rng_seed, constants)))
        state.budget_remaining -= 1

    while len(records) < budget:
        X = np.vstack([encode(space, r.config) for r in records])
        y = np.log([r.objective_value for r in records])
        model = gp_fit(X, y, noise_floor=1e-6)
        config = acquire(model, space, rng_acq)
        _append(evaluator(config, arfe_ref, _next_seed_base(rng_seed, constants)))
        state.budget_remaining -= 1

    best = min(records, key=lambda r: r.objective_value)
    return best, records


def random_search(problem, space: TuningSpace, constants: ConstantParams, budget: int,
                  seed: int, store: HistoryStore | None = None, replay=None):
    """LHS-only baseline: reference evaluation plus budget-1 stratified samples."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng_lhs, _, rng_seed = _seed_stream(seed)
    evaluator = _Evaluator(problem, constants, replay)
    records: list[EvaluationRecord] = []

    def _append(rec):
        records.append(rec)
        if store is not None:
            store.append(rec)

    arfe_ref, ref_record = _run_reference_step(
        problem, constants, evaluator, _next_seed_base(rng_seed, constants)
    )
    _append(ref_record)
    if budget > 1:
        for config in lhs_sample(space, budget - 1, rng_lhs):
            _append(evaluator(config, arfe_ref, _next_seed_base(rng_seed, constants)))
    best = min(records, key=lambda r: r.objective_value)
    return best, records


SESSION_CSV_COLUMNS = (
    "iteration",
    "sap_algorithm",
    "sketching_operator",
    "sampling_factor",
    "vec_nnz",
    "safety_factor",
    "objective_seconds",
    "mean_wall_clock_seconds",
    "mean_arfe",
    "failed",
    "cumulative_evaluation_seconds",
)


def write_session_csv(records, path) -> None:
    """Per-iteration session CSV; the cumulative column sums mean wall clock."""
    cumulative = 0.0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SESSION_CSV_COLUMNS)
        for i, r in enumerate(records, start=1):
            cumulative += r.mean_wall_clock
            c = r.config
            writer.writerow(
                [
                    i,
                    c.sap_algorithm,
                    c.sketching_operator,
                    repr(float(c.sampling_factor)),
                    c.vec_nnz,
                    c.safety_factor,
                    repr(float(r.objective_value)),
                    repr(float(r.mean_wall_clock)),
                    repr(float(r.mean_arfe)),
                    int(r.failed),
                    repr(float(cumulative)),
                ]
            )


# ---------------------------------------------------------------------------
# LCM: joint GP over several tasks sharing latent functions

@dataclass
class LcmModel:
    """Linear coregionalization model: f_i(x) = sum_q a_iq u_q(x)."""

    xs: list            # per-task (N_i, dim) inputs
    ys_raw: list        # per-task raw outputs
    y_means: np.ndarray
    y_stds: np.ndarray
    mixing: np.ndarray        # (n_tasks, n_tasks) a_iq
    lengthscales: np.ndarray  # (n_tasks, dim) per latent GP
    noises: np.ndarray        # per-task noise variance
    task_idx: np.ndarray = field(repr=False)
    x_all: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)

    @property
    def n_tasks(self) -> int:
        return self.mixing.shape[0]

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[1]


def _lcm_unpack(theta, n_tasks, dim):
    a = theta[: n_tasks * n_tasks].reshape(n_tasks, n_tasks)
    logI = theta[n_tasks * n_tasks : n_tasks * n_tasks + n_tasks * dim].reshape(n_tasks, dim)
    lognoise = theta[n_tasks * n_tasks + n_tasks * dim :]
    return a, np.exp(logI), np.exp(lognoise)


def _lcm_build(a, lengthscales, noises, D, task_idx):
    n = task_idx.shape[0]
    n_tasks = a.shape[0]
    Rs = []
    K = np.zeros((n, n))
    at = a[task_idx]  # (n, n_tasks)
    for q in range(n_tasks):
        R = np.exp(-np.sum(D / lengthscales[q], axis=2))
        Rs.append(R)
        K += np.outer(at[:, q], at[:, q]) * R
    prior_diag = np.sum(at * at, axis=1)
    jit = _JITTER_REL * float(np.mean(prior_diag + noises[task_idx]) + 1e-12)
    K[np.diag_indices(n)] += noises[task_idx] + jit
    return K, Rs


def _lcm_nll_and_grad(theta, D, task_idx, ys, n_tasks, dim):
    a, lengthscales, noises = _lcm_unpack(theta, n_tasks, dim)
    n = ys.shape[0]
    K, Rs = _lcm_build(a, lengthscales, noises, D, task_idx)
    try:
        L = sla.cholesky(K, lower=True)
    except sla.LinAlgError:
        return 1e25, np.zeros_like(theta)
    alpha = sla.cho_solve((L, True), ys)
    nll = 0.5 * float(ys @ alpha) + float(np.sum(np.log(np.diag(L)))) + 0.5 * n * math.log(2 * math.pi)
    Kinv = sla.cho_solve((L, True), np.eye(n))
    W = Kinv - np.outer(alpha, alpha)

    at = a[task_idx]
    grad = np.zeros_like(theta)
    pos = 0
    # mixing coefficients a_pq (raw, may be negative)
    for p in range(n_tasks):
        mask = (task_idx == p).astype(float)
        for q in range(n_tasks):
            col = at[:, q]
            G = (np.outer(mask, col) + np.outer(col, mask)) * Rs[q]
            grad[pos] = 0.5 * float(np.sum(W * G))
            pos += 1
    # lengthscales (log)
    for q in range(n_tasks):
        Bq = np.outer(at[:, q], at[:, q])
        for j in range(dim):
            G = Bq * Rs[q] * (D[:, :, j] / lengthscales[q, j])
            grad[pos] = 0.5 * float(np.sum(W * G))
            pos += 1
    # noises (log)
    diagW = np.diag(W)
    for i in range(n_tasks):
        grad[pos] = 0.5 * float(np.sum(diagW[task_idx == i])) * noises[i]
        pos += 1
    return nll, grad


def lcm_fit(task_points, task_values, noise_floor: float = 1e-6) -> LcmModel:
    """Fit the joint multitask GP by marginal likelihood.

    Outputs are standardized per task before joint fitting; tasks with no
    points participate only through the prior.  One latent GP per task,
    each with its own per-dimension lengthscales; mixing coefficients are
    unconstrained reals.
    """
    xs = [np.atleast_2d(np.asarray(p, dtype=np.float64)) if len(p) else np.empty((0, 1)) for p in task_points]
    n_tasks = len(xs)
    if n_tasks < 1:
        raise ValueError("need at least one task")
    dim = max((x.shape[1] for x in xs if x.shape[0]), default=1)
    xs = [x if x.shape[0] else np.empty((0, dim)) for x in xs]
    ys_raw = [np.asarray(v, dtype=np.float64).reshape(-1) for v in task_values]
    if any(x.shape[0] != y.shape[0] for x, y in zip(xs, ys_raw)):
        raise ValueError("mismatched points/values for some task")

    y_means = np.array([float(np.mean(y)) if y.size else 0.0 for y in ys_raw])
    y_stds = np.array(
        [float(np.std(y)) if y.size > 1 and np.std(y) > 0 else 1.0 for y in ys_raw]
    )
    ys = np.concatenate([(y - mu) / sd for y, mu, sd in zip(ys_raw, y_means, y_stds)]) if any(
        y.size for y in ys_raw
    ) else np.empty(0)
    x_all = np.vstack(xs) if any(x.shape[0] for x in xs) else np.empty((0, dim))
    task_idx = np.concatenate(
        [np.full(x.shape[0], i, dtype=np.int64) for i, x in enumerate(xs)]
    ) if x_all.shape[0] else np.empty(0, dtype=np.int64)

    noise_lo = max(noise_floor, 1e-10)
    n = x_all.shape[0]
    if n == 0:
        raise ValueError("need at least one observation across tasks")

    D = _sq_dists(x_all, x_all)
    n_a = n_tasks * n_tasks
    n_l = n_tasks * dim
    lo = np.r_[np.full(n_a, -5.0), np.full(n_l, math.log(_LENGTHSCALE_BOUNDS[0])), np.full(n_tasks, math.log(noise_lo))]
    hi = np.r_[np.full(n_a, 5.0), np.full(n_l, math.log(_LENGTHSCALE_BOUNDS[1])), np.full(n_tasks, math.log(10.0))]
    bounds = list(zip(lo, hi))

    a0 = np.eye(n_tasks) + 0.3 * (1 - np.eye(n_tasks))
    start0 = np.r_[a0.ravel(), np.full(n_l, math.log(0.5)), np.full(n_tasks, math.log(max(noise_lo, 1e-2)))]
    rng = np.random.default_rng(0)
    starts = [start0]
    for _ in range(_N_RESTARTS - 1):
        s = start0.copy()
        s[:n_a] += 0.5 * rng.standard_normal(n_a)
        s[n_a:] = lo[n_a:] + rng.random(n_l + n_tasks) * (hi[n_a:] - lo[n_a:])
        starts.append(np.clip(s, lo, hi))

    fit_possible = n >= 2
    if fit_possible:
        best = None
        for s in starts:
            res = minimize(
                _lcm_nll_and_grad,
                np.clip(s, lo, hi),
                args=(D, task_idx, ys, n_tasks, dim),
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": 80},
            )
            if best is None or res.fun < best.fun:
                best = res
        theta = best.x
    else:
        theta = start0
    a, lengthscales, noises = _lcm_unpack(theta, n_tasks, dim)
    K, _ = _lcm_build(a, lengthscales, noises, D, task_idx)
    L = sla.cholesky(K, lower=True)
    alpha = sla.cho_solve((L, True), ys)
    return LcmModel(
        xs=xs,
        ys_raw=ys_raw,
        y_means=y_means,
        y_stds=y_stds,
        mixing=a,
        lengthscales=lengthscales,
        noises=noises,
        task_idx=task_idx,
        x_all=x_all,
        chol=L,
        alpha=alpha,
    )


def lcm_predict(model: LcmModel, task: int, point):
    """Posterior mean/variance for one task, de-standardized to its scale."""
    P = np.atleast_2d(np.asarray(point, dtype=np.float64))
    single = np.asarray(point).ndim == 1
    n_tasks = model.n_tasks
    at = model.mixing[model.task_idx]  # (n, n_tasks)
    ai = model.mixing[task]
    D = _sq_dists(model.x_all, P)
    Kstar = np.zeros((model.x_all.shape[0], P.shape[0]))
    for q in range(n_tasks):
        R = np.exp(-np.sum(D / model.lengthscales[q], axis=2))
        Kstar += np.outer(at[:, q], np.full(P.shape[0], ai[q])) * R
    mean_s = Kstar.T @ model.alpha
    v = sla.solve_triangular(model.chol, Kstar, lower=True)
    prior = float(np.sum(ai * ai))
    var_s = np.maximum(prior - np.sum(v * v, axis=0), 0.0)
    mean = model.y_means[task] + model.y_stds[task] * mean_s
    var = var_s * model.y_stds[task] ** 2
    if single:
        return float(mean[0]), float(var[0])
    return mean, var
