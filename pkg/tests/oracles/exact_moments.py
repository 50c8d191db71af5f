"""Exact first and second moments of the iterates for regression-noise problems.

The unconstrained recursion is affine in ``y = (X, Lambda, S, 1)`` with a
random coefficient matrix (graph atom, regressors ``u_i``) plus independent
zero-mean additive terms (communication noise, ``u_i e_i``). For Gaussian
regressors ``E[u u^T K u u^T] = R K R + R K^T R + tr(R K) R`` so the second
moment ``E[y y^T]`` can be pushed forward in closed form, step by step.
``S`` is the running sum of primal iterates.
"""

import numpy as np


def _laplacian(A):
    return np.diag(A.sum(axis=1)) - A


def _comm_cov(A, Qw, Qz, m):
    """Covariance of (zeta_agg + omega_agg, -omega_agg) for one atom."""
    n = A.shape[0]
    W = np.zeros((n * m, n * m))
    Z = np.zeros((n * m, n * m))
    for i in range(n):
        for j in range(n):
            if A[i, j] != 0:
                sl = slice(i * m, (i + 1) * m)
                W[sl, sl] += A[i, j] ** 2 * Qw
                Z[sl, sl] += A[i, j] ** 2 * Qz
    return np.block([[W + Z, -W], [-W, W]])


def propagate(Rs, centers, sigma2, atoms, probs, Qw, Qz, gammas, x0=None, lam0=None):
    """Return ``(mean, second_moment)`` of ``y`` after ``len(gammas)`` steps.

    Parameters
    ----------
    Rs, centers : per-agent regressor covariances and true parameters.
    sigma2 : measurement-noise variance.
    atoms, probs : finite graph distribution.
    Qw, Qz : per-pair communication-noise covariances (primal, dual).
    gammas : step sizes in order of use.
    """
    n = len(Rs)
    m = Rs[0].shape[0]
    d = n * m
    D = 3 * d + 1
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, float)
    lam0 = np.zeros(d) if lam0 is None else np.asarray(lam0, float)
    y = np.concatenate([x0, lam0, np.zeros(d), [1.0]])
    Y = np.outer(y, y)
    Rb = np.zeros((d, d))
    for i, R in enumerate(Rs):
        Rb[i * m:(i + 1) * m, i * m:(i + 1) * m] = R
    c = np.concatenate(centers)
    # Q y = X - c
    Q = np.zeros((d, D))
    Q[:, :d] = np.eye(d)
    Q[:, -1] = -c
    # P embeds a primal-sized vector into y
    P = np.zeros((D, d))
    P[:d, :] = np.eye(d)
    Em = np.zeros((2 * d, D))  # selects (X, Lambda)
    Em[:, :2 * d] = np.eye(2 * d)
    Tsum = np.eye(D)
    Tsum[2 * d:3 * d, :d] = np.eye(d)
    Ls = [np.kron(_laplacian(A), np.eye(m)) for A in atoms]
    Cs = [_comm_cov(A, Qw, Qz, m) for A in atoms]

    def Mmat(L, g):
        M = np.eye(D)
        M[:d, :d] -= g * L
        M[:d, d:2 * d] -= g * L
        M[d:2 * d, :d] += g * L
        return M

    for g in gammas:
        Ms = [Mmat(L, g) for L in Ls]
        EM = sum(p * M for p, M in zip(probs, Ms))
        new = sum(p * M @ Y @ M.T for p, M in zip(probs, Ms))
        cross = EM @ Y @ Q.T @ Rb @ P.T
        new -= g * (cross + cross.T)
        K = Q @ Y @ Q.T
        EUKU = Rb @ K @ Rb
        for i, R in enumerate(Rs):
            sl = slice(i * m, (i + 1) * m)
            Kii = K[sl, sl]
            EUKU[sl, sl] = 2 * R @ Kii @ R + np.trace(R @ Kii) * R
        new += g * g * P @ EUKU @ P.T
        new += g * g * sigma2 * P @ Rb @ P.T
        Cn = sum(p * C for p, C in zip(probs, Cs))
        new += g * g * Em.T @ Cn @ Em
        Y = Tsum @ new @ Tsum.T
    return Y[:, -1].copy(), Y
