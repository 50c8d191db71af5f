"""Local costs, gradient-noise models and constraint sets.

Each agent ``i`` holds a smooth convex cost ``f_i`` observed through a noisy
gradient oracle and a closed convex set ``Omega_i`` with a closed-form
projection. Sets and quadratic costs also expose a flat array encoding so the
compiled step kernels can evaluate them without Python objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, InvalidSet, NoKnownOptimum, NoNoiseModel

SET_FULL, SET_BOX, SET_BALL, SET_HALFSPACE, SET_AFFINE = range(5)

NOISE_NONE, NOISE_ADDITIVE, NOISE_REGRESSION = range(3)

VARIATE_FAMILIES = ("gaussian", "uniform", "rademacher")


def standard_variates(rng: np.random.Generator, family: str, size) -> np.ndarray:
    """Zero-mean, unit-variance i.i.d. draws from ``family``."""
    if family == "gaussian":
        return rng.standard_normal(size)
    if family == "uniform":
        return (rng.random(size) - 0.5) * np.sqrt(12.0)
    if family == "rademacher":
        return rng.integers(0, 2, size=size) * 2.0 - 1.0
    raise ValueError(f"unknown variate family {family!r}")


def psd_sqrt(C) -> np.ndarray:
    """Symmetric square root of a PSD matrix; raises on negative eigenvalues."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[0] != C.shape[1]:
        raise ValueError("covariance must be square")
    if np.max(np.abs(C - C.T), initial=0.0) > 1e-12 * max(1.0, np.abs(C).max(initial=0.0)):
        raise ValueError("covariance must be symmetric")
    w, U = np.linalg.eigh(0.5 * (C + C.T))
    if w.size and w.min() < -1e-12 * max(1.0, abs(w).max()):
        raise ValueError("covariance must be positive semi-definite")
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


# ------------------------------------------------------------ constraint sets

class ConstraintSet:
    """Nonempty closed convex subset of R^m with an exact projection."""

    kind = -1

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(self.project(x) - x) <= tol)

    def encode(self, m: int):
        """``(kind, vec_a, vec_b, scalar, mat)`` consumed by the step kernels."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class FullSpace(ConstraintSet):
    kind = SET_FULL

    def project(self, x):
        return np.array(x, dtype=float)

    def encode(self, m):
        return SET_FULL, np.zeros(m), np.zeros(m), 0.0, np.eye(m)

    def to_config(self):
        return {"type": "full"}


@dataclass(frozen=True, eq=False)
class Box(ConstraintSet):
    lower: np.ndarray
    upper: np.ndarray
    kind = SET_BOX

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidSet("box bounds must be vectors of equal length")
        if np.any(lo > hi):
            raise InvalidSet("box needs lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def project(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def encode(self, m):
        return SET_BOX, self.lower.copy(), self.upper.copy(), 0.0, np.eye(m)

    def to_config(self):
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class Ball(ConstraintSet):
    center: np.ndarray
    radius: float
    kind = SET_BALL

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.ndim != 1:
            raise InvalidSet("ball center must be a vector")
        if not self.radius > 0:
            raise InvalidSet("ball radius must be > 0")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.center
        r = np.linalg.norm(d)
        if r <= self.radius:
            return x.copy()
        return self.center + (self.radius / r) * d

    def encode(self, m):
        return SET_BALL, self.center.copy(), np.zeros(m), self.radius, np.eye(m)

    def to_config(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Halfspace(ConstraintSet):
    """``{x : normal . x <= offset}``."""

    normal: np.ndarray
    offset: float
    kind = SET_HALFSPACE

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=float)
        if a.ndim != 1 or not np.any(a != 0):
            raise InvalidSet("halfspace normal must be a nonzero vector")
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        viol = self.normal @ x - self.offset
        if viol <= 0:
            return x.copy()
        return x - (viol / (self.normal @ self.normal)) * self.normal

    def encode(self, m):
        return SET_HALFSPACE, self.normal.copy(), np.zeros(m), self.offset, np.eye(m)

    def to_config(self):
        return {"type": "halfspace", "normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class AffineSlab(ConstraintSet):
    """Affine subspace ``{x : matrix @ x = vector}``; ``matrix`` needs full row rank."""

    matrix: np.ndarray
    vector: np.ndarray
    kind = SET_AFFINE
    _proj: np.ndarray = field(init=False, repr=False)
    _shift: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        b = np.atleast_1d(np.asarray(self.vector, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise InvalidSet("affine set: matrix rows must match vector length")
        if np.linalg.matrix_rank(A) != A.shape[0]:
            raise InvalidSet("affine set: matrix must have full row rank")
        Apinv = np.linalg.pinv(A)
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "vector", b)
        object.__setattr__(self, "_proj", np.eye(A.shape[1]) - Apinv @ A)
        object.__setattr__(self, "_shift", Apinv @ b)

    def project(self, x):
        return self._proj @ np.asarray(x, dtype=float) + self._shift

    def encode(self, m):
        return SET_AFFINE, self._shift.copy(), np.zeros(m), 0.0, self._proj.copy()

    def to_config(self):
        return {"type": "affine", "matrix": self.matrix.tolist(), "vector": self.vector.tolist()}


def project(cset: ConstraintSet, x) -> np.ndarray:
    return cset.project(x)


# ---------------------------------------------------------- gradient noise

class GradientNoise:
    """Zero-mean gradient perturbation ``v`` built from standard variates."""

    kind = NOISE_NONE
    family = "gaussian"

    def slots(self, m: int) -> int:
        return 0

    def realize(self, cost, x, z) -> np.ndarray:
        """Noisy gradient at ``x`` from the variate vector ``z``."""
        return self.realize_batch(cost, x, np.asarray(z, dtype=float)[None, :])[0]

    def realize_batch(self, cost, x, Z) -> np.ndarray:
        """Rows of noisy gradients, one per row of variates ``Z``."""
        raise NotImplementedError

    def limit_covariance(self, cost) -> np.ndarray:
        raise NotImplementedError

    def second_moment_constant(self, cost) -> float:
        """``c_v`` with ``E||v||^2 <= c_v (1 + ||x||^2)``."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class AdditiveNoise(GradientNoise):
    """``g = grad f(x) + C z`` with ``C C^T = cov``."""

    cov: np.ndarray
    family: str = "gaussian"
    kind = NOISE_ADDITIVE
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.family not in VARIATE_FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "factor", psd_sqrt(cov))

    def slots(self, m):
        return m

    def realize_batch(self, cost, x, Z):
        return cost.gradient(x) + Z[:, : self.cov.shape[0]] @ self.factor.T

    def limit_covariance(self, cost):
        return self.cov.copy()

    def second_moment_constant(self, cost):
        return float(np.trace(self.cov))


@dataclass(frozen=True, eq=False)
class RegressionNoise(GradientNoise):
    """Streaming linear-regression gradient.

    Each call draws a regressor ``u ~ N(0, R)`` and a measurement
    ``d = u . c + e`` with ``e ~ N(0, sigma2)`` and returns
    ``u^T u x - d u^T``, whose mean is ``R (x - c)``. Requires a
    :class:`QuadraticCost` (``R`` and ``c`` are taken from it).
    """

    sigma2: float
    kind = NOISE_REGRESSION

    def slots(self, m):
        return m + 1

    def realize_batch(self, cost, x, Z):
        m = cost.m
        U = Z[:, :m] @ cost.factor.T
        e = np.sqrt(self.sigma2) * Z[:, m]
        resid = U @ (np.asarray(x, dtype=float) - cost.center) - e
        return U * resid[:, None]

    def limit_covariance(self, cost):
        return self.sigma2 * cost.matrix

    def state_second_moment(self, cost) -> np.ndarray:
        """``E[(u u^T - R)^2] = R^2 + tr(R) R`` for Gaussian ``u``."""
        R = cost.matrix
        return R @ R + np.trace(R) * R

    def second_moment_constant(self, cost):
        # E||v||^2 = d^T K d + sigma2 tr R with d = x - c, and ||d||^2 <= 2||x||^2 + 2||c||^2
        K = self.state_second_moment(cost)
        a = float(np.linalg.eigvalsh(K).max(initial=0.0))
        b = self.sigma2 * float(np.trace(cost.matrix))
        return max(2.0 * a, 2.0 * a * float(cost.center @ cost.center) + b)


# ----------------------------------------------------------------- costs

class LocalCost:
    m: int
    noise: Optional[GradientNoise] = None

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian_at(self, x) -> np.ndarray:
        raise NotImplementedError

    @property
    def lipschitz(self) -> float:
        raise NotImplementedError


def exact_gradient(cost: LocalCost, x) -> np.ndarray:
    return cost.gradient(np.asarray(x, dtype=float))


def noisy_gradient(cost: LocalCost, x, rng: np.random.Generator) -> np.ndarray:
    """One draw of ``grad f(x) + v`` from the cost's noise model."""
    if cost.noise is None:
        raise NoNoiseModel("cost has no gradient-noise model")
    z = standard_variates(rng, cost.noise.family, cost.noise.slots(cost.m))
    return cost.noise.realize(cost, np.asarray(x, dtype=float), z)


@dataclass(frozen=True, eq=False)
class QuadraticCost(LocalCost):
    """``f(x) = 1/2 (x - c)^T R (x - c) + offset`` with ``R`` symmetric PSD.

    The gradient is exactly ``R (x - c)``; ``center`` is the point where the
    local gradient vanishes (the common optimum for the regression model).
    """

    matrix: np.ndarray
    center: np.ndarray
    noise: Optional[GradientNoise] = None
    offset: float = 0.0
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if R.shape != (c.shape[0], c.shape[0]):
            raise ValueError("quadratic cost: matrix must be m x m with m = len(center)")
        object.__setattr__(self, "matrix", R)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "factor", psd_sqrt(R))

    @property
    def m(self):
        return self.center.shape[0]

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return 0.5 * float(d @ self.matrix @ d) + self.offset

    def gradient(self, x):
        return self.matrix @ (np.asarray(x, dtype=float) - self.center)

    def hessian_at(self, x=None):
        return self.matrix.copy()

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.matrix, 2))

    def with_noise(self, noise) -> "QuadraticCost":
        return QuadraticCost(self.matrix, self.center, noise, self.offset)


@dataclass(frozen=True, eq=False)
class SmoothCost(LocalCost):
    """Generic smooth cost given by callables (Python engine path only)."""

    value_fn: Callable[[np.ndarray], float]
    gradient_fn: Callable[[np.ndarray], np.ndarray]
    m: int
    lipschitz_constant: float
    hessian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    noise: Optional[GradientNoise] = None

    def value(self, x):
        return float(self.value_fn(np.asarray(x, dtype=float)))

    def gradient(self, x):
        return np.asarray(self.gradient_fn(np.asarray(x, dtype=float)), dtype=float)

    def hessian_at(self, x):
        if self.hessian_fn is None:
            raise NotImplementedError("no Hessian supplied for this cost")
        return np.asarray(self.hessian_fn(np.asarray(x, dtype=float)), dtype=float)

    @property
    def lipschitz(self):
        return self.lipschitz_constant


# --------------------------------------------------------------- problem

@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """n agents, their costs and sets, and optional known optima.

    ``known_optimum`` is the common minimizer ``x*`` of ``sum_i f_i`` over the
    intersection of the sets; ``known_dual_optimum`` a stacked ``Lambda*``.
    """

    costs: tuple
    sets: tuple
    known_optimum: Optional[np.ndarray] = None
    known_dual_optimum: Optional[np.ndarray] = None

    def __post_init__(self):
        costs = tuple(self.costs)
        sets = tuple(self.sets)
        if not costs or len(costs) != len(sets):
            raise ValueError("need one cost and one set per agent")
        m = costs[0].m
        if any(c.m != m for c in costs):
            raise ValueError("all costs must share the dimension m")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "sets", sets)
        if self.known_optimum is not None:
            xs = np.atleast_1d(np.asarray(self.known_optimum, dtype=float))
            if xs.shape != (m,):
                raise ValueError("known_optimum must have length m")
            object.__setattr__(self, "known_optimum", xs)
            if self.is_unconstrained:
                g = sum(c.gradient(xs) for c in costs)
                scale = max(1.0, max(np.abs(c.gradient(xs)).max() for c in costs))
                if np.linalg.norm(g) > 1e-10 * scale:
                    raise ValueError("known_optimum violates first-order optimality")
        if self.known_dual_optimum is not None:
            ld = np.asarray(self.known_dual_optimum, dtype=float).reshape(-1)
            if ld.shape != (self.n * m,):
                raise ValueError("known_dual_optimum must have length n*m")
            object.__setattr__(self, "known_dual_optimum", ld)

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def m(self) -> int:
        return self.costs[0].m

    @property
    def is_unconstrained(self) -> bool:
        return all(isinstance(s, FullSpace) for s in self.sets)

    @property
    def is_quadratic(self) -> bool:
        return all(isinstance(c, QuadraticCost) for c in self.costs)

    @property
    def lipschitz(self) -> float:
        return max(c.lipschitz for c in self.costs)

    def require_optimum(self) -> np.ndarray:
        if self.known_optimum is None:
            raise NoKnownOptimum("problem has no known optimum")
        return self.known_optimum

    def stacked_optimum(self) -> np.ndarray:
        return np.tile(self.require_optimum(), self.n)

    def gradient_stack(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(self.n, self.m)
        return np.concatenate([c.gradient(x) for c, x in zip(self.costs, X)])

    def project_stack(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(self.n, self.m)
        return np.concatenate([s.project(x) for s, x in zip(self.sets, X)])

    def hessians_at_optimum(self) -> list:
        xs = self.require_optimum()
        return [c.hessian_at(xs) for c in self.costs]

    def gradient_noise_covariances(self) -> list:
        out = []
        for c in self.costs:
            if c.noise is None:
                out.append(np.zeros((self.m, self.m)))
            else:
                out.append(c.noise.limit_covariance(c))
        return out

    def gradient_noise_constant(self) -> float:
        """Largest per-agent ``c_v`` (0 without noise models)."""
        return max(
            (c.noise.second_moment_constant(c) for c in self.costs if c.noise is not None),
            default=0.0,
        )

    def with_noise_scale(self, factor: float) -> "ProblemSpec":
        """Copy with every gradient-noise covariance multiplied by ``factor``."""
        costs = []
        for c in self.costs:
            nz = c.noise
            if isinstance(nz, AdditiveNoise):
                nz = AdditiveNoise(factor * nz.cov, nz.family)
            elif isinstance(nz, RegressionNoise):
                nz = RegressionNoise(factor * nz.sigma2)
            costs.append(c.with_noise(nz) if isinstance(c, QuadraticCost) else c)
        return ProblemSpec(tuple(costs), self.sets, self.known_optimum, self.known_dual_optimum)

    @classmethod
    def from_config(cls, cfg, path="problem") -> "ProblemSpec":
        return problem_from_config(cfg, path)


SENSOR_OPTIMUM = (1.0, 2.0, 3.0)
SENSOR_REGRESSORS = (
    np.diag([1.0, 1.0, 0.0]),
    np.diag([0.0, 1.0, 1.0]),
    np.diag([1.0, 0.0, 1.0]),
)
SENSOR_SIGMA2 = 0.1


def sensor_problem() -> ProblemSpec:
    """Three sensors estimating ``x* = (1, 2, 3)`` from rank-2 regressors."""
    xs = np.array(SENSOR_OPTIMUM)
    costs = tuple(
        QuadraticCost(R, xs, RegressionNoise(SENSOR_SIGMA2)) for R in SENSOR_REGRESSORS
    )
    return ProblemSpec(costs, tuple(FullSpace() for _ in costs), known_optimum=xs)


# ----------------------------------------------------------------- config

def _vector(value, path, m=None):
    try:
        v = np.atleast_1d(np.array(value, dtype=float))
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a numeric vector") from None
    if v.ndim != 1 or (m is not None and v.shape[0] != m):
        raise ConfigError(path, f"expected a vector of length {m}")
    return v


def _matrix(value, path, m):
    if np.isscalar(value):
        return float(value) * np.eye(m)
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a numeric matrix") from None
    if M.ndim == 1 and M.shape[0] == m:
        return np.diag(M)
    if M.shape != (m, m):
        raise ConfigError(path, f"expected an {m}x{m} matrix (row-major nested lists)")
    return M


def _noise_from_config(cfg, path, m):
    if cfg is None:
        return None
    kind = cfg.get("type")
    if kind == "regression":
        s2 = float(cfg.get("sigma2", 0.0))
        if s2 < 0:
            raise ConfigError(f"{path}.sigma2", "must be >= 0")
        return RegressionNoise(s2)
    if kind == "additive":
        try:
            return AdditiveNoise(_matrix(cfg.get("cov", 0.0), f"{path}.cov", m), cfg.get("family", "gaussian"))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.type", f"unknown gradient-noise type {kind!r}")


def _set_from_config(cfg, path, m):
    if cfg is None:
        return FullSpace()
    kind = cfg.get("type", "full")
    try:
        if kind == "full":
            return FullSpace()
        if kind == "box":
            return Box(_vector(cfg["lower"], f"{path}.lower", m), _vector(cfg["upper"], f"{path}.upper", m))
        if kind == "ball":
            return Ball(_vector(cfg["center"], f"{path}.center", m), float(cfg["radius"]))
        if kind == "halfspace":
            return Halfspace(_vector(cfg["normal"], f"{path}.normal", m), float(cfg["offset"]))
        if kind == "affine":
            A = np.atleast_2d(np.array(cfg["matrix"], dtype=float))
            if A.shape[1] != m:
                raise ConfigError(f"{path}.matrix", f"expected {m} columns")
            return AffineSlab(A, _vector(cfg["vector"], f"{path}.vector", A.shape[0]))
    except KeyError as exc:
        raise ConfigError(f"{path}.{exc.args[0]}", "missing") from None
    except InvalidSet as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.type", f"unknown set type {kind!r}")


def problem_from_config(cfg, path="problem") -> ProblemSpec:
    """Parse a problem mapping.

    Either ``{builtin: sensors}`` or::

        {m: 2, optimum: [..],
         agents: [{cost: {type: quadratic, matrix: [[..]], center: [..],
                          noise: {type: additive, cov: 0.1}},
                   set: {type: box, lower: [..], upper: [..]}}, ...]}
    """
    if not isinstance(cfg, dict):
        raise ConfigError(path, "expected a mapping")
    if cfg.get("builtin") is not None:
        if cfg["builtin"] != "sensors":
            raise ConfigError(f"{path}.builtin", f"unknown builtin problem {cfg['builtin']!r}")
        return sensor_problem()
    agents = cfg.get("agents")
    if not isinstance(agents, list) or not agents:
        raise ConfigError(f"{path}.agents", "expected a non-empty list")
    m = cfg.get("m")
    costs, sets = [], []
    for i, agent in enumerate(agents):
        apath = f"{path}.agents[{i}]"
        if not isinstance(agent, dict):
            raise ConfigError(apath, "expected a mapping")
        ccfg = agent.get("cost")
        if not isinstance(ccfg, dict):
            raise ConfigError(f"{apath}.cost", "missing or not a mapping")
        if ccfg.get("builtin") == "sensors":
            if i >= len(SENSOR_REGRESSORS):
                raise ConfigError(f"{apath}.cost.builtin", "sensors defines only three agents")
            cost = sensor_problem().costs[i]
        elif ccfg.get("type", "quadratic") == "quadratic":
            if "center" not in ccfg:
                raise ConfigError(f"{apath}.cost.center", "missing")
            c = _vector(ccfg["center"], f"{apath}.cost.center", m)
            m = c.shape[0]
            R = _matrix(ccfg.get("matrix", 1.0), f"{apath}.cost.matrix", m)
            noise = _noise_from_config(ccfg.get("noise"), f"{apath}.cost.noise", m)
            try:
                cost = QuadraticCost(R, c, noise, float(ccfg.get("offset", 0.0)))
            except ValueError as exc:
                raise ConfigError(f"{apath}.cost", str(exc)) from None
        else:
            raise ConfigError(f"{apath}.cost.type", f"unknown cost type {ccfg.get('type')!r}")
        m = cost.m
        costs.append(cost)
        sets.append(_set_from_config(agent.get("set"), f"{apath}.set", m))
    opt = cfg.get("optimum")
    dual = cfg.get("dual_optimum")
    try:
        return ProblemSpec(
            tuple(costs),
            tuple(sets),
            None if opt is None else _vector(opt, f"{path}.optimum", m),
            None if dual is None else _vector(dual, f"{path}.dual_optimum", len(costs) * m),
        )
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def cost_to_config(cost) -> dict:
    if not isinstance(cost, QuadraticCost):
        raise TypeError("only quadratic costs are serializable")
    out = {"type": "quadratic", "matrix": cost.matrix.tolist(), "center": cost.center.tolist()}
    if cost.offset:
        out["offset"] = cost.offset
    if isinstance(cost.noise, RegressionNoise):
        out["noise"] = {"type": "regression", "sigma2": cost.noise.sigma2}
    elif isinstance(cost.noise, AdditiveNoise):
        out["noise"] = {"type": "additive", "cov": cost.noise.cov.tolist(), "family": cost.noise.family}
    return out


def problem_to_config(problem: ProblemSpec) -> dict:
    out = {
        "m": problem.m,
        "agents": [
            {"cost": cost_to_config(c), "set": s.to_config()} for c, s in zip(problem.costs, problem.sets)
        ],
    }
    if problem.known_optimum is not None:
        out["optimum"] = problem.known_optimum.tolist()
    if problem.known_dual_optimum is not None:
        out["dual_optimum"] = problem.known_dual_optimum.tolist()
    return out
