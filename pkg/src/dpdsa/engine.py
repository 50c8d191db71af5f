"""Distributed projected primal-dual stochastic approximation.

At step ``k`` a graph ``A_k`` is drawn, every present directed edge ``(i <- j)``
delivers noisy copies ``x_j + w_ij`` and ``lambda_j + z_ij`` to agent ``i``,
and each agent updates synchronously::

    x_i <- P_i(x_i - g_k g_i - g_k sum_j a_ij (lambda_i - lambda_ij)
                           - g_k sum_j a_ij (x_i - x_ij))
    lambda_i <- lambda_i + g_k sum_j a_ij (x_i - x_ij)

with ``g_i`` a noisy gradient of ``f_i`` and ``g_k = gamma0 * k**-nu``.

Randomness is drawn in fixed blocks of :data:`BLOCK` steps (graph indices,
then communication variates, then gradient variates), so a run is a
deterministic function of its seed and is prefix-consistent across lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import ConfigError
from .network import GraphDistribution, GraphGenerator, laplacian
from .problem import (
    NOISE_ADDITIVE,
    NOISE_NONE,
    NOISE_REGRESSION,
    VARIATE_FAMILIES,
    AdditiveNoise,
    ProblemSpec,
    QuadraticCost,
    RegressionNoise,
    psd_sqrt,
    standard_variates,
)

BLOCK = 1024


# ---------------------------------------------------------------- schedule

@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``gamma0 * k**(-nu)`` for ``k >= 1``."""

    gamma0: float = 1.0
    nu: float = 0.75

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be > 0")
        if not 0.5 < self.nu <= 1.0:
            raise ValueError("nu must lie in (0.5, 1] so that sum gamma = inf and sum gamma^2 < inf")

    def __call__(self, k):
        return schedule(self, k)

    @property
    def normality_ready(self) -> bool:
        return self.gamma0 == 1.0 and 2.0 / 3.0 < self.nu < 1.0


def schedule(sched: StepSchedule, k):
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ValueError("step index starts at 1")
    out = sched.gamma0 * k ** (-sched.nu)
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------------ noise

@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Communication-noise covariances per directed pair ``(receiver, sender)``.

    ``primal_cov``/``dual_cov`` may be a scalar (times identity), one ``m x m``
    matrix shared by all pairs, or an ``(n, n, m, m)`` array.
    """

    n: int
    m: int
    primal_cov: np.ndarray = 0.0
    dual_cov: np.ndarray = 0.0
    family: str = "gaussian"
    primal_factor: np.ndarray = field(init=False, repr=False)
    dual_factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.family not in VARIATE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        for name in ("primal_cov", "dual_cov"):
            cov = self._expand(getattr(self, name))
            fac = np.empty_like(cov)
            for i in range(self.n):
                for j in range(self.n):
                    fac[i, j] = psd_sqrt(cov[i, j])
            cov.setflags(write=False)
            object.__setattr__(self, name, cov)
            object.__setattr__(self, name.replace("cov", "factor"), fac)

    def _expand(self, c):
        n, m = self.n, self.m
        c = np.asarray(c, dtype=float)
        if c.ndim == 0:
            c = c * np.eye(m)
        if c.shape == (m, m):
            return np.broadcast_to(c, (n, n, m, m)).copy()
        if c.shape == (n, n, m, m):
            return c.copy()
        raise ValueError(f"covariance must be scalar, {m}x{m} or ({n},{n},{m},{m}); got {c.shape}")

    @property
    def mu2(self) -> float:
        """Largest per-pair second moment ``trace(R)`` over both channels."""
        tr = lambda C: np.einsum("ijqq->ij", C)  # noqa: E731
        return float(max(tr(self.primal_cov).max(), tr(self.dual_cov).max()))

    def scaled(self, factor: float) -> "NoiseSpec":
        return NoiseSpec(self.n, self.m, factor * self.primal_cov, factor * self.dual_cov, self.family)

    @classmethod
    def zero(cls, n, m):
        return cls(n, m, 0.0, 0.0)

    @classmethod
    def from_config(cls, cfg, n, m, path="noise") -> "NoiseSpec":
        if cfg is None:
            return cls.zero(n, m)
        if not isinstance(cfg, dict):
            raise ConfigError(path, "expected a mapping")
        try:
            return cls(
                n, m,
                np.array(cfg.get("primal_cov", 0.0), dtype=float),
                np.array(cfg.get("dual_cov", 0.0), dtype=float),
                cfg.get("family", "gaussian"),
            )
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None

    def to_config(self) -> dict:
        def compact(c):
            first = c[0, 0]
            if np.all(c == first):
                if np.all(first == first[0, 0] * np.eye(self.m)):
                    return float(first[0, 0])
                return first.tolist()
            return c.tolist()

        return {"primal_cov": compact(self.primal_cov), "dual_cov": compact(self.dual_cov), "family": self.family}


# ------------------------------------------------------------------ state

@dataclass(frozen=True, eq=False)
class SystemState:
    """Stacked iterates; ``k`` is the index of the next step size to apply."""

    k: int
    X: np.ndarray
    Lambda: np.ndarray

    @classmethod
    def zeros(cls, n, m):
        return cls(1, np.zeros(n * m), np.zeros(n * m))

    @property
    def updates(self) -> int:
        return self.k - 1

    def primal(self, n) -> np.ndarray:
        return self.X.reshape(n, -1)

    def dual(self, n) -> np.ndarray:
        return self.Lambda.reshape(n, -1)


def consensus_error(X, n) -> float:
    P = np.asarray(X).reshape(n, -1)
    diff = P[:, None, :] - P[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=2)).max())


def distance_to_optimum(X, n, xstar) -> float:
    P = np.asarray(X).reshape(n, -1)
    return float(np.linalg.norm(P - xstar, axis=1).max())


@dataclass(frozen=True, eq=False)
class StepDiagnostics:
    """Everything realized during one step, plus the e1/e2/e3 split."""

    L: np.ndarray
    omega_pairs: np.ndarray
    zeta_pairs: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    zeta: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    primal_argument: np.ndarray
    consensus_error: float
    dist_to_optimum: Optional[float]


# ------------------------------------------------------------------ draws

@dataclass(frozen=True, eq=False)
class DrawBlock:
    """Pre-drawn randomness for a run of consecutive steps.

    ``atoms`` holds graph indices (or ``None`` in generator mode, where
    ``graphs`` holds the adjacency matrices), ``comm[s, e, 0|1]`` the primal and
    dual standard variates of the ``e``-th present edge, ``grad[s, i]`` the
    gradient-noise variates of agent ``i``.
    """

    atoms: Optional[np.ndarray]
    graphs: Optional[np.ndarray]
    comm: np.ndarray
    grad: np.ndarray

    def __len__(self):
        return self.comm.shape[0]


def _max_edges(graph) -> int:
    if isinstance(graph, GraphDistribution):
        return int(max(np.count_nonzero(A) for A in graph.atoms))
    return graph.n * (graph.n - 1)


def _grad_slots(problem: ProblemSpec) -> int:
    return max((c.noise.slots(problem.m) for c in problem.costs if c.noise is not None), default=0)


def draw_block(problem, graph, noise: NoiseSpec, rng: np.random.Generator, size: int) -> DrawBlock:
    n, m = problem.n, problem.m
    if isinstance(graph, GraphDistribution):
        atoms = np.asarray(graph.sample_index(rng, size), dtype=np.int64)
        graphs = None
    else:
        atoms = None
        graphs = np.stack([graph.sample(rng) for _ in range(size)])
    emax = _max_edges(graph)
    comm = standard_variates(rng, noise.family, (size, emax, 2, m))
    gslots = _grad_slots(problem)
    grad = np.zeros((size, n, max(gslots, 1)))
    for i, c in enumerate(problem.costs):
        if c.noise is not None and c.noise.slots(m):
            k = c.noise.slots(m)
            grad[:, i, :k] = standard_variates(rng, c.noise.family, (size, k))
    return DrawBlock(atoms, graphs, comm, grad)


def _adjacency(graph, block: DrawBlock, s: int) -> np.ndarray:
    if block.atoms is not None:
        return graph.atoms[block.atoms[s]]
    return block.graphs[s]


def realize_noise(problem, graph, noise: NoiseSpec, block: DrawBlock, s: int, X):
    """Materialize step ``s`` of ``block`` at primal state ``X``.

    Returns ``(A, omega_pairs, zeta_pairs, g)`` where the pair arrays are
    ``(n, n, m)`` with zeros on absent edges and ``g`` the ``(n, m)`` noisy
    gradients. Present edges consume variate slots in row-major order.
    """
    n, m = problem.n, problem.m
    A = _adjacency(graph, block, s)
    omega = np.zeros((n, n, m))
    zeta = np.zeros((n, n, m))
    for e, (i, j) in enumerate(zip(*np.nonzero(A))):
        omega[i, j] = noise.primal_factor[i, j] @ block.comm[s, e, 0]
        zeta[i, j] = noise.dual_factor[i, j] @ block.comm[s, e, 1]
    P = np.asarray(X, dtype=float).reshape(n, m)
    g = np.empty((n, m))
    for i, c in enumerate(problem.costs):
        if c.noise is None:
            g[i] = c.gradient(P[i])
        else:
            g[i] = c.noise.realize(c, P[i], block.grad[s, i])
    return A, omega, zeta, g


# ------------------------------------------------------------ step paths

def decompose_noise(L_k, Lbar, X, Lam, omega, zeta, v):
    """The ``(e1, e2, e3)`` split of one step's randomness.

    ``omega``/``zeta`` are the aggregated per-agent noises
    ``sum_j a_ij w_ij`` stacked to length ``n*m``.
    """
    m = np.asarray(X).size // np.asarray(L_k).shape[0]
    I = np.eye(m)
    D = np.kron(np.asarray(Lbar) - np.asarray(L_k), I)
    e1 = D @ (np.asarray(Lam) + np.asarray(X))
    e2 = np.asarray(zeta) + np.asarray(omega) - np.asarray(v)
    e3 = -D @ np.asarray(X) - np.asarray(omega)
    return e1, e2, e3


def per_agent_update(problem: ProblemSpec, X, Lam, A, omega, zeta, g, gamma):
    """Literal per-agent update from neighbour observations (synchronous)."""
    n, m = problem.n, problem.m
    P = np.asarray(X, dtype=float).reshape(n, m)
    D = np.asarray(Lam, dtype=float).reshape(n, m)
    Xn = np.empty((n, m))
    Dn = np.empty((n, m))
    arg = np.empty((n, m))
    for i in range(n):
        cons_x = np.zeros(m)
        cons_l = np.zeros(m)
        for j in np.nonzero(A[i])[0]:
            x_ij = P[j] + omega[i, j]
            l_ij = D[j] + zeta[i, j]
            cons_x += A[i, j] * (P[i] - x_ij)
            cons_l += A[i, j] * (D[i] - l_ij)
        arg[i] = P[i] - gamma * g[i] - gamma * cons_l - gamma * cons_x
        Xn[i] = problem.sets[i].project(arg[i])
        Dn[i] = D[i] + gamma * cons_x
    return Xn.reshape(-1), Dn.reshape(-1), arg.reshape(-1)


def aggregate_pairs(A, pairs) -> np.ndarray:
    """``col_i(sum_j a_ij p_ij)`` for an ``(n, n, m)`` pair array."""
    return np.einsum("ij,ijq->iq", A, pairs).reshape(-1)


def compact_update(problem: ProblemSpec, X, Lam, A, omega_pairs, zeta_pairs, v, gamma):
    """Stacked Kronecker form of the same step (test oracle)."""
    m = problem.m
    L = np.kron(laplacian(A), np.eye(m))
    w = aggregate_pairs(A, omega_pairs)
    z = aggregate_pairs(A, zeta_pairs)
    grad = problem.gradient_stack(X)
    arg = X - gamma * grad - gamma * (L @ (Lam + X)) + gamma * (z + w - v)
    return problem.project_stack(arg), Lam + gamma * (L @ X) - gamma * w, arg


def mean_form_update(problem: ProblemSpec, X, Lam, Lbar, e1, e2, e3, gamma):
    """Mean-Laplacian form driven by ``(e1, e2, e3)`` (test oracle)."""
    Lb = np.kron(np.asarray(Lbar), np.eye(problem.m))
    grad = problem.gradient_stack(X)
    arg = X - gamma * grad - gamma * (Lb @ (Lam + X)) + gamma * (e1 + e2)
    return problem.project_stack(arg), Lam + gamma * (Lb @ X) + gamma * e3, arg


def mean_laplacian_of(graph) -> Optional[np.ndarray]:
    if isinstance(graph, GraphDistribution):
        return np.tensordot(graph.probs, graph.laplacians(), axes=1)
    return None


def _apply_step(problem, graph, noise, sched, state, block, s, Lbar=None, check_feasible=False):
    n, m = problem.n, problem.m
    gamma = schedule(sched, state.k)
    A, omega, zeta, g = realize_noise(problem, graph, noise, block, s, state.X)
    Xn, Ln, arg = per_agent_update(problem, state.X, state.Lambda, A, omega, zeta, g, gamma)
    if check_feasible:
        for i, cs in enumerate(problem.sets):
            assert cs.contains(Xn.reshape(n, m)[i], 1e-9), f"agent {i} left its set"
    v = (g - problem.gradient_stack(state.X).reshape(n, m)).reshape(-1)
    w = aggregate_pairs(A, omega)
    z = aggregate_pairs(A, zeta)
    L_k = laplacian(A)
    if Lbar is None:
        Lbar = mean_laplacian_of(graph)
    if Lbar is not None:
        e1, e2, e3 = decompose_noise(L_k, Lbar, state.X, state.Lambda, w, z, v)
    else:
        e1 = e2 = e3 = None
    xs = problem.known_optimum
    diag = StepDiagnostics(
        L=L_k, omega_pairs=omega, zeta_pairs=zeta, v=v, omega=w, zeta=z,
        e1=e1, e2=e2, e3=e3, primal_argument=arg,
        consensus_error=consensus_error(Xn, n),
        dist_to_optimum=None if xs is None else distance_to_optimum(Xn, n, xs),
    )
    return SystemState(state.k + 1, Xn, Ln), diag


def step(state: SystemState, problem: ProblemSpec, graph, noise: NoiseSpec, sched: StepSchedule,
         rng: np.random.Generator, check_feasible: bool = False):
    """One synchronous step; returns the new state and its diagnostics.

    Draws a full block and uses its first entry, so ``step`` consumes the
    generator exactly like ``run(..., steps=1)``.
    """
    block = draw_block(problem, graph, noise, rng, BLOCK)
    return _apply_step(problem, graph, noise, sched, state, block, 0, check_feasible=check_feasible)


# ---------------------------------------------------------- compiled form

@dataclass(frozen=True, eq=False)
class Compiled:
    """Flat arrays describing a quadratic problem on a finite-support graph."""

    e_ptr: np.ndarray
    e_recv: np.ndarray
    e_send: np.ndarray
    e_w: np.ndarray
    Fw: np.ndarray
    Fz: np.ndarray
    R: np.ndarray
    C: np.ndarray
    noise_kind: np.ndarray
    noise_factor: np.ndarray
    noise_sigma: np.ndarray
    set_kind: np.ndarray
    set_a: np.ndarray
    set_b: np.ndarray
    set_s: np.ndarray
    set_M: np.ndarray

    def args(self):
        return (
            self.e_ptr, self.e_recv, self.e_send, self.e_w, self.Fw, self.Fz,
            self.R, self.C, self.noise_kind, self.noise_factor, self.noise_sigma,
            self.set_kind, self.set_a, self.set_b, self.set_s, self.set_M,
        )


def can_compile(problem, graph) -> bool:
    return isinstance(graph, GraphDistribution) and problem.is_quadratic


def compile_system(problem: ProblemSpec, graph: GraphDistribution, noise: NoiseSpec) -> Compiled:
    n, m = problem.n, problem.m
    ptr, recv, send, wts = [0], [], [], []
    for i, j, w in graph.edge_lists():
        recv.extend(i)
        send.extend(j)
        wts.extend(w)
        ptr.append(len(recv))
    nk = np.zeros(n, dtype=np.int64)
    nf = np.zeros((n, m, m))
    ns = np.zeros(n)
    for i, c in enumerate(problem.costs):
        if isinstance(c.noise, AdditiveNoise):
            nk[i] = NOISE_ADDITIVE
            nf[i] = c.noise.factor
        elif isinstance(c.noise, RegressionNoise):
            nk[i] = NOISE_REGRESSION
            nf[i] = c.factor
            ns[i] = np.sqrt(c.noise.sigma2)
        elif c.noise is not None:
            raise TypeError(f"gradient noise {type(c.noise).__name__} has no compiled form")
    enc = [s.encode(m) for s in problem.sets]
    return Compiled(
        e_ptr=np.array(ptr, dtype=np.int64),
        e_recv=np.array(recv, dtype=np.int64),
        e_send=np.array(send, dtype=np.int64),
        e_w=np.array(wts, dtype=float),
        Fw=np.ascontiguousarray(noise.primal_factor),
        Fz=np.ascontiguousarray(noise.dual_factor),
        R=np.stack([c.matrix for c in problem.costs]),
        C=np.stack([c.center for c in problem.costs]),
        noise_kind=nk, noise_factor=nf, noise_sigma=ns,
        set_kind=np.array([e[0] for e in enc], dtype=np.int64),
        set_a=np.stack([e[1] for e in enc]),
        set_b=np.stack([e[2] for e in enc]),
        set_s=np.array([e[3] for e in enc], dtype=float),
        set_M=np.stack([e[4] for e in enc]),
    )


# -------------------------------------------------------------------- run

@dataclass(eq=False)
class Record:
    updates: int
    gamma: float
    state: SystemState
    diagnostics: StepDiagnostics


@dataclass(eq=False)
class Trajectory:
    """Recorded states, final state and the running sums for averaging."""

    n: int
    m: int
    records: list
    final: SystemState
    sum_X: np.ndarray
    sum_Lambda: np.ndarray
    steps: int

    @property
    def mean_X(self) -> np.ndarray:
        return self.sum_X / self.steps

    @property
    def mean_Lambda(self) -> np.ndarray:
        return self.sum_Lambda / self.steps


def run(problem: ProblemSpec, graph, noise: NoiseSpec, sched: StepSchedule,
        init: Optional[SystemState] = None, steps: int = 1, record_every: Optional[int] = None,
        rng: Union[np.random.Generator, int, None] = None, record_at: Sequence[int] = (),
        use_kernel: Optional[bool] = None, check_feasible: bool = False) -> Trajectory:
    """Iterate ``steps`` times, recording every ``record_every`` updates.

    The final state is always recorded. Quadratic problems on finite-support
    graphs go through the compiled kernel; everything else through the
    per-agent Python path. Both read the same draw blocks.
    ``check_feasible`` asserts ``x_i in Omega_i`` after every step (Python
    path only, slow).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    n, m = problem.n, problem.m
    state = init if init is not None else SystemState.zeros(n, m)
    if state.k < 1:
        raise ValueError("state.k must be >= 1")
    if check_feasible:
        use_kernel = False
    elif use_kernel is None:
        use_kernel = can_compile(problem, graph)
    marks = set(int(k) for k in record_at if 1 <= k <= steps)
    if record_every:
        marks.update(range(record_every, steps + 1, record_every))
    marks.add(steps)

    Lbar = mean_laplacian_of(graph)
    X = state.X.reshape(n, m).astype(float).copy()
    Lam = state.Lambda.reshape(n, m).astype(float).copy()
    sumX = np.zeros((n, m))
    sumL = np.zeros((n, m))
    comp = compile_system(problem, graph, noise) if use_kernel else None
    k0 = state.k
    records = []
    done = 0
    while done < steps:
        block = draw_block(problem, graph, noise, rng, BLOCK)
        bsize = min(BLOCK, steps - done)
        s = 0
        while s < bsize:
            upd = done + s + 1
            if upd in marks:
                pre = SystemState(k0 + done + s, X.reshape(-1).copy(), Lam.reshape(-1).copy())
                post, diag = _apply_step(problem, graph, noise, sched, pre, block, s, Lbar, check_feasible)
                if use_kernel:
                    _kernel_range(comp, block, sched, k0 + done + s, s, s + 1, X, Lam, sumX, sumL)
                else:
                    X[...] = post.X.reshape(n, m)
                    Lam[...] = post.Lambda.reshape(n, m)
                    sumX += X
                    sumL += Lam
                cur = SystemState(k0 + done + s + 1, X.reshape(-1).copy(), Lam.reshape(-1).copy())
                records.append(Record(upd, schedule(sched, pre.k), cur, diag))
                s += 1
                continue
            nxt = min((k for k in marks if k > upd), default=steps + 1) - done - 1
            stop = min(bsize, nxt)
            if use_kernel:
                _kernel_range(comp, block, sched, k0 + done + s, s, stop, X, Lam, sumX, sumL)
            else:
                st = SystemState(k0 + done + s, X.reshape(-1).copy(), Lam.reshape(-1).copy())
                for t in range(s, stop):
                    st, _ = _apply_step(problem, graph, noise, sched, st, block, t, Lbar, check_feasible)
                    sumX += st.X.reshape(n, m)
                    sumL += st.Lambda.reshape(n, m)
                X[...] = st.X.reshape(n, m)
                Lam[...] = st.Lambda.reshape(n, m)
            s = stop
        done += bsize
    final = SystemState(k0 + steps, X.reshape(-1).copy(), Lam.reshape(-1).copy())
    return Trajectory(n, m, records, final, sumX.reshape(-1), sumL.reshape(-1), steps)


def _kernel_range(comp, block, sched, k_first, lo, hi, X, Lam, sumX, sumL):
    if hi <= lo:
        return
    gammas = schedule(sched, np.arange(k_first, k_first + hi - lo))
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    kernels.advance(
        X, Lam, sumX, sumL,
        block.atoms[lo:hi], gammas,
        np.ascontiguousarray(block.comm[lo:hi]), np.ascontiguousarray(block.grad[lo:hi]),
        *comp.args(),
    )


# ------------------------------------------------------ moment diagnostics

@dataclass(frozen=True)
class NoiseBounds:
    """Constants of the conditional second-moment bounds on ``e1, e2, e3``."""

    C01: float
    C02: float
    C03: float
    c_v: float
    mu2: float
    eta2: float

    def e1(self, X, Lam) -> float:
        return self.C01 * float(np.sum((np.asarray(Lam) + np.asarray(X)) ** 2))

    def e2(self, X) -> float:
        return self.C02 + 3.0 * self.c_v * float(np.sum(np.asarray(X) ** 2))

    def e3(self, X) -> float:
        return self.C01 * float(np.sum(np.asarray(X) ** 2)) + self.C03


def noise_bounds(problem: ProblemSpec, dist: GraphDistribution, noise: NoiseSpec,
                 norm: str = "spectral") -> NoiseBounds:
    from .network import laplacian_variance

    n = problem.n
    C01 = laplacian_variance(dist, norm)
    c_v = problem.gradient_noise_constant()
    mu2 = noise.mu2
    eta2 = float(dist.edge_second_moments().max())
    return NoiseBounds(
        C01=C01,
        C02=3.0 * c_v * n + 6.0 * n**3 * mu2 * eta2,
        C03=n**3 * mu2 * eta2,
        c_v=c_v, mu2=mu2, eta2=eta2,
    )


def sample_noise_terms(problem: ProblemSpec, dist: GraphDistribution, noise: NoiseSpec,
                       X, Lam, rng: np.random.Generator, size: int):
    """``size`` independent draws of ``(e1, e2, e3)`` at a frozen state.

    Uses the same variate layout as the step paths, vectorized over draws.
    Returns three ``(size, n*m)`` arrays.
    """
    n, m = problem.n, problem.m
    block = draw_block(problem, dist, noise, rng, size)
    P = np.asarray(X, dtype=float).reshape(n, m)
    D = np.asarray(Lam, dtype=float).reshape(n, m)
    Lbar = mean_laplacian_of(dist)
    Ls = dist.laplacians()
    w = np.zeros((size, n, m))
    z = np.zeros((size, n, m))
    graph_term = np.zeros((size, n, m))
    e1 = np.zeros((size, n, m))
    both = P + D
    for r, (i_e, j_e, a_e) in enumerate(dist.edge_lists()):
        sel = np.nonzero(block.atoms == r)[0]
        if sel.size == 0:
            continue
        # (L x I_m) acting on a stacked vector is L @ (n, m) reshape
        graph_term[sel] = (Ls[r] - Lbar) @ P
        e1[sel] = (Lbar - Ls[r]) @ both
        for e, (i, j, a) in enumerate(zip(i_e, j_e, a_e)):
            w[sel, i] += a * block.comm[sel, e, 0] @ noise.primal_factor[i, j].T
            z[sel, i] += a * block.comm[sel, e, 1] @ noise.dual_factor[i, j].T
    v = np.zeros((size, n, m))
    for i, c in enumerate(problem.costs):
        if c.noise is not None:
            v[:, i] = c.noise.realize_batch(c, P[i], block.grad[:, i]) - c.gradient(P[i])
    e2 = z + w - v
    e3 = graph_term - w
    flat = lambda a: a.reshape(size, n * m)  # noqa: E731
    return flat(e1), flat(e2), flat(e3)
