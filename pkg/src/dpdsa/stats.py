"""Statistical checks used by the Monte-Carlo studies."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateVariance

MIN_KS_SAMPLES = 50


def ks_coefficient(alpha: float) -> float:
    """``c(alpha) = sqrt(-ln(alpha / 2) / 2)`` from the Kolmogorov limit law."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(-0.5 * math.log(alpha / 2.0))


def ks_critical(n: int, alpha: float = 0.05) -> float:
    return ks_coefficient(alpha) / math.sqrt(n)


def ks_statistic(samples, cdf) -> float:
    """``sup_x |F_n(x) - F(x)|``, attained at the jump points of ``F_n``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical: float
    passed: bool
    mean: float
    variance: float
    n: int


def ks_normal_test(samples, mean: float, variance: float, alpha: float = 0.05) -> KSResult:
    """One-sample KS test of ``samples`` against ``N(mean, variance)``."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < MIN_KS_SAMPLES:
        raise ValueError(f"need at least {MIN_KS_SAMPLES} samples, got {x.size}")
    if not variance > 0 or not np.isfinite(variance):
        raise DegenerateVariance(f"reference variance {variance!r} is not positive")
    sd = math.sqrt(variance)
    D = ks_statistic(x, lambda t: ndtr((t - mean) / sd))
    crit = ks_critical(x.size, alpha)
    return KSResult(D, crit, D < crit, float(mean), float(variance), int(x.size))


def ks_fitted_normal_test(samples, alpha: float = 0.05) -> KSResult:
    """KS test against the normal law with the sample mean and variance."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    var = float(x.var(ddof=1)) if x.size > 1 else 0.0
    if not var > 1e-300:
        raise DegenerateVariance("samples have zero variance")
    return ks_normal_test(x, float(x.mean()), var, alpha)


def sample_covariance(samples) -> np.ndarray:
    """Unbiased covariance of the rows of ``samples`` (shape ``(N, d)``)."""
    S = np.asarray(samples, dtype=float)
    C = np.cov(S, rowvar=False, ddof=1)
    C = np.atleast_2d(C)
    return 0.5 * (C + C.T)


def relative_frobenius(empirical, theoretical) -> float:
    T = np.asarray(theoretical, dtype=float)
    return float(np.linalg.norm(np.asarray(empirical) - T) / np.linalg.norm(T))


def covariance_standard_error(samples) -> np.ndarray:
    """Entrywise standard error of the sample covariance.

    Estimated from the spread of the centred products, so it stays honest
    for heavy-tailed samples where the normal-theory formula is far too small.
    """
    S = np.asarray(samples, dtype=float)
    N = S.shape[0]
    A = S - S.mean(axis=0)
    P = A[:, :, None] * A[:, None, :]
    return P.std(axis=0, ddof=1) / np.sqrt(max(N, 1))


def mean_standard_error(samples) -> np.ndarray:
    S = np.asarray(samples, dtype=float)
    return S.std(axis=0, ddof=1) / np.sqrt(S.shape[0])
