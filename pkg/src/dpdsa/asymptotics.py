"""Limit covariances of the unconstrained recursion.

In reduced coordinates ``theta = (X - X*, (V1^T x I)(Lambda - Lambda*))`` the
recursion linearizes to ``theta' = theta + g_k (F theta + noise)`` with

    F = -[[ (Lbar x I) + H ,  V1 S x I ],
          [ -S V1^T x I    ,  0        ]]

The last iterate scaled by ``1/sqrt(g_k)`` has limit covariance ``Sigma``
solving ``F Sigma + Sigma F^T + Sigma1 = 0``; the Polyak average scaled by
``sqrt(k)`` has ``F^{-1} Sigma1 F^{-T}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import block_diag

from .errors import HessianSumNotPD, NoKnownOptimum, NotHurwitz
from .network import GraphDistribution, LaplacianDecomposition, decompose, laplacian
from .problem import ProblemSpec

HURWITZ_TOL = 1e-10
DUAL_TOL = 1e-8


def _kron_I(M, m):
    return np.kron(M, np.eye(m))


def dual_optimum(problem: ProblemSpec, decomp: LaplacianDecomposition) -> np.ndarray:
    """Minimal-norm ``Lambda*`` with ``(Lbar x I) Lambda* = -grad f~(X*)``."""
    if problem.known_optimum is None:
        raise NoKnownOptimum("dual optimum needs the primal optimum x*")
    if not problem.is_unconstrained:
        raise ValueError("closed-form dual optimum only for unconstrained problems")
    G = problem.gradient_stack(problem.stacked_optimum())
    return -_kron_I(decomp.pseudo_inverse(), problem.m) @ G


def dual_residual(problem: ProblemSpec, Lbar, lam) -> float:
    """``||grad f~(X*) + (Lbar x I) Lambda||``, zero at a dual optimum."""
    G = problem.gradient_stack(problem.stacked_optimum())
    return float(np.linalg.norm(G + _kron_I(np.asarray(Lbar), problem.m) @ np.asarray(lam, dtype=float)))


def stack_hessians(blocks) -> np.ndarray:
    return block_diag(*[np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks])


def build_F(decomp: LaplacianDecomposition, H, m: Optional[int] = None) -> np.ndarray:
    """Drift matrix of the reduced recursion.

    ``H`` is either the list of per-agent Hessians at ``x*`` or their
    block-diagonal stack (then ``m`` is required).
    """
    n = decomp.n
    if isinstance(H, (list, tuple)):
        blocks = [np.atleast_2d(np.asarray(h, dtype=float)) for h in H]
        m = blocks[0].shape[0]
    else:
        H = np.asarray(H, dtype=float)
        if m is None:
            m = H.shape[0] // n
        blocks = [H[i * m:(i + 1) * m, i * m:(i + 1) * m] for i in range(n)]
    Hsum = sum(blocks)
    Hsum = 0.5 * (Hsum + Hsum.T)
    if np.linalg.eigvalsh(Hsum).min() <= HURWITZ_TOL:
        raise HessianSumNotPD("sum of the local Hessians at x* is not positive definite")
    Hs = block_diag(*blocks)
    V1S = decomp.V1 * decomp.kappas
    top = np.hstack([_kron_I(decomp.mean_laplacian, m) + Hs, _kron_I(V1S, m)])
    bottom = np.hstack([-_kron_I(V1S.T, m), np.zeros(((n - 1) * m, (n - 1) * m))])
    return -np.vstack([top, bottom])


def is_hurwitz(F, tol: float = HURWITZ_TOL):
    """``(hurwitz, spectral_abscissa)``."""
    F = np.asarray(F, dtype=float)
    abscissa = float(np.max(np.linalg.eigvals(F).real))
    return abscissa < -tol, abscissa


def build_S1(dist: GraphDistribution, decomp: LaplacianDecomposition, grad_at_opt) -> np.ndarray:
    """Covariance of the graph-driven term at the optimum, by atom enumeration."""
    G = np.asarray(grad_at_opt, dtype=float).reshape(-1)
    n = decomp.n
    m = G.size // n
    Lbar = decomp.mean_laplacian
    pinv = decomp.pseudo_inverse()
    out = np.zeros((n * m, n * m))
    for p, A in zip(dist.probs, dist.atoms):
        y = _kron_I((laplacian(A) - Lbar) @ pinv, m) @ G
        out += p * np.outer(y, y)
    return out


def comm_covariance(dist: GraphDistribution, pair_cov) -> np.ndarray:
    """``blockdiag_i(sum_j E[a_ij^2] R_ij)`` for an ``(n, n, m, m)`` array."""
    sigma = dist.edge_second_moments()
    return block_diag(*np.einsum("ij,ijqr->iqr", sigma, np.asarray(pair_cov)))


def build_S2(noise, dist: GraphDistribution, problem: ProblemSpec) -> np.ndarray:
    """``R_v + R_omega + R_zeta``."""
    Rv = block_diag(*problem.gradient_noise_covariances())
    return Rv + comm_covariance(dist, noise.primal_cov) + comm_covariance(dist, noise.dual_cov)


def build_Sigma1(S1, S2, Romega, V1) -> np.ndarray:
    n = V1.shape[0]
    m = S2.shape[0] // n
    V1I = _kron_I(V1, m)
    cross = -Romega @ V1I
    out = np.block([[S1 + S2, cross], [cross.T, V1I.T @ Romega @ V1I]])
    asym = np.max(np.abs(out - out.T), initial=0.0)
    if asym > 1e-12 * max(1.0, np.abs(out).max(initial=0.0)):
        raise ValueError(f"Sigma1 is not symmetric (max asymmetry {asym:.2e})")
    return 0.5 * (out + out.T)


def solve_lyapunov(F, Sigma1) -> np.ndarray:
    """Unique symmetric ``Sigma`` with ``F Sigma + Sigma F^T + Sigma1 = 0``.

    Solves the Kronecker system ``(I x F + F x I) vec(Sigma) = -vec(Sigma1)``.
    """
    F = np.asarray(F, dtype=float)
    Q = np.asarray(Sigma1, dtype=float)
    ok, absc = is_hurwitz(F)
    if not ok:
        raise NotHurwitz(f"spectral abscissa {absc:.3e} is not negative")
    d = F.shape[0]
    I = np.eye(d)
    K = np.kron(I, F) + np.kron(F, I)
    # column-major vec: vec(F S) = (I x F) vec(S), vec(S F^T) = (F x I) vec(S)
    sol = np.linalg.solve(K, -Q.reshape(-1, order="F")).reshape(d, d, order="F")
    return 0.5 * (sol + sol.T)


def averaged_covariance(F, Sigma1) -> np.ndarray:
    """``F^{-1} Sigma1 F^{-T}``."""
    F = np.asarray(F, dtype=float)
    ok, absc = is_hurwitz(F)
    if not ok:
        raise NotHurwitz(f"spectral abscissa {absc:.3e} is not negative")
    Y = np.linalg.solve(F, np.asarray(Sigma1, dtype=float))
    out = np.linalg.solve(F, Y.T)
    return 0.5 * (out + out.T)


def lyapunov_residual(F, Sigma, Sigma1) -> float:
    return float(np.linalg.norm(F @ Sigma + Sigma @ F.T + Sigma1))


@dataclass(frozen=True, eq=False)
class AsymptoticModel:
    n: int
    m: int
    decomp: LaplacianDecomposition
    H: np.ndarray
    F: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    Romega: np.ndarray
    Sigma1: np.ndarray
    Sigma: np.ndarray
    SigmaAvg: np.ndarray
    dual_optimum: np.ndarray

    @property
    def abscissa(self) -> float:
        return is_hurwitz(self.F)[1]

    @property
    def primal_dim(self) -> int:
        return self.n * self.m

    def primal_block(self, M=None) -> np.ndarray:
        M = self.Sigma if M is None else M
        d = self.primal_dim
        return M[:d, :d]

    def agent_blocks(self, M=None) -> np.ndarray:
        P = self.primal_block(M)
        m = self.m
        return np.stack([P[i * m:(i + 1) * m, i * m:(i + 1) * m] for i in range(self.n)])

    def residual(self) -> float:
        return lyapunov_residual(self.F, self.Sigma, self.Sigma1)


def build_model(problem: ProblemSpec, dist: GraphDistribution, noise,
                decomp: Optional[LaplacianDecomposition] = None) -> AsymptoticModel:
    """Assemble every limit object for an unconstrained problem with known ``x*``."""
    if problem.known_optimum is None:
        raise NoKnownOptimum("asymptotic model needs the optimum x*")
    if not problem.is_unconstrained:
        raise ValueError("asymptotic normality is only available without constraints")
    if decomp is None:
        decomp = decompose(np.tensordot(dist.probs, dist.laplacians(), axes=1))
    m = problem.m
    lam = dual_optimum(problem, decomp)
    if problem.known_dual_optimum is not None:
        if dual_residual(problem, decomp.mean_laplacian, problem.known_dual_optimum) > DUAL_TOL:
            raise ValueError("known_dual_optimum does not satisfy the saddle-point condition")
    Hs = problem.hessians_at_optimum()
    F = build_F(decomp, Hs)
    G = problem.gradient_stack(problem.stacked_optimum())
    S1 = build_S1(dist, decomp, G)
    S2 = build_S2(noise, dist, problem)
    Romega = comm_covariance(dist, noise.primal_cov)
    Sigma1 = build_Sigma1(S1, S2, Romega, decomp.V1)
    return AsymptoticModel(
        n=problem.n, m=m, decomp=decomp, H=stack_hessians(Hs), F=F, S1=S1, S2=S2,
        Romega=Romega, Sigma1=Sigma1, Sigma=solve_lyapunov(F, Sigma1),
        SigmaAvg=averaged_covariance(F, Sigma1), dual_optimum=lam,
    )


# ---------------------------------------------------------------- reduction

@dataclass(frozen=True, eq=False)
class ReducedState:
    updates: int
    x_tilde: np.ndarray
    lambda_tilde1: np.ndarray
    lambda_tilde2: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.x_tilde, self.lambda_tilde1])


def reduce_state(X, Lam, problem: ProblemSpec, decomp: LaplacianDecomposition, lambda_star,
                 updates: int = 0) -> ReducedState:
    if problem.known_optimum is None:
        raise NoKnownOptimum("reduction needs the optimum x*")
    m = problem.m
    dl = np.asarray(Lam, dtype=float) - np.asarray(lambda_star, dtype=float)
    return ReducedState(
        updates,
        np.asarray(X, dtype=float) - problem.stacked_optimum(),
        _kron_I(decomp.V1.T, m) @ dl,
        _kron_I(decomp.V2[None, :], m) @ dl,
    )


def reduce_trajectory(traj, problem: ProblemSpec, decomp: LaplacianDecomposition, lambda_star, sched):
    """Reduced coordinates of every record.

    Returns a dict with ``states`` (ReducedState list), ``scaled``
    (``theta / sqrt(gamma)`` per record, gamma the last step size used) and
    ``average`` (``theta`` of the running average over all updates).
    """
    from .engine import schedule

    states = [reduce_state(r.state.X, r.state.Lambda, problem, decomp, lambda_star, r.updates)
              for r in traj.records]
    scaled = [s.theta / np.sqrt(schedule(sched, s.updates)) for s in states]
    avg = reduce_state(traj.mean_X, traj.mean_Lambda, problem, decomp, lambda_star, traj.steps)
    return {"states": states, "scaled": scaled, "average": avg.theta}


def reduced_drift(theta, problem: ProblemSpec, decomp: LaplacianDecomposition) -> np.ndarray:
    """Noise-free drift ``g(theta)`` of the reduced recursion (exact, not linearized)."""
    n, m = problem.n, problem.m
    xt = theta[: n * m]
    l1 = theta[n * m:]
    Xs = problem.stacked_optimum()
    dgrad = problem.gradient_stack(xt + Xs) - problem.gradient_stack(Xs)
    V1S = decomp.V1 * decomp.kappas
    dx = -dgrad - _kron_I(decomp.mean_laplacian, m) @ xt - _kron_I(V1S, m) @ l1
    dl = _kron_I(V1S.T, m) @ xt
    return np.concatenate([dx, dl])
