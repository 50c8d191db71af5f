"""Random communication graphs.

A random network is an i.i.d. sequence of weighted adjacency matrices drawn
from a :class:`GraphDistribution` with finite support. Everything the noise
bounds and the limit covariances need (mean Laplacian, second moments of the
weights, the Laplacian variance) is then an exact finite sum over atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, Disconnected, InvalidGraph, MeanGraphDisconnected

EIG_TOL = 1e-10
PROB_TOL = 1e-12


def validate_adjacency(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidGraph(f"adjacency must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidGraph("adjacency has non-finite entries")
    if np.any(A < 0):
        raise InvalidGraph("adjacency weights must be nonnegative")
    if np.any(np.diag(A) != 0):
        raise InvalidGraph("self-edges are not allowed (nonzero diagonal)")
    return A


def laplacian(A) -> np.ndarray:
    """Graph Laplacian ``D - A`` with ``D`` the diagonal of row sums.

    The diagonal is set to the row sum of the off-diagonal part, so
    ``laplacian(A) @ ones`` vanishes up to the rounding of that sum.
    """
    A = validate_adjacency(A)
    L = -A
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, A.sum(axis=1))
    return L


@dataclass(frozen=True, eq=False)
class LaplacianDecomposition:
    """Orthogonal splitting ``V = (V1 V2)`` of a connected mean Laplacian.

    ``V.T @ L @ V == blockdiag(S, 0)`` with ``V2 = ones / sqrt(n)`` and ``S``
    holding the positive eigenvalues in ascending order.
    """

    mean_laplacian: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    S: np.ndarray

    @property
    def n(self) -> int:
        return self.mean_laplacian.shape[0]

    @property
    def kappas(self) -> np.ndarray:
        return np.diag(self.S).copy()

    @property
    def kappa_star(self) -> float:
        return float(np.max(self.kappas)) if self.n > 1 else 0.0

    @property
    def V(self) -> np.ndarray:
        return np.column_stack([self.V1, self.V2])

    def pseudo_inverse(self) -> np.ndarray:
        """``V1 S^{-1} V1^T``, the Moore-Penrose inverse of the mean Laplacian."""
        return (self.V1 / self.kappas) @ self.V1.T


def _ones_complement(n: int) -> np.ndarray:
    """Orthonormal basis (n x n-1) of the complement of the ones vector.

    Columns 2..n of the Householder reflector sending e_1 to ones/sqrt(n).
    """
    if n == 1:
        return np.zeros((1, 0))
    w = np.full(n, 1.0 / np.sqrt(n))
    w[0] -= 1.0
    H = np.eye(n) - 2.0 * np.outer(w, w) / (w @ w)
    return H[:, 1:]


def decompose(Lbar) -> LaplacianDecomposition:
    """Split a connected mean Laplacian into ``(V1, V2, S)``.

    The known null vector ``ones/sqrt(n)`` is deflated explicitly and the
    symmetric eigensolver only sees the compression onto its complement.
    """
    Lbar = np.asarray(Lbar, dtype=float)
    n = Lbar.shape[0]
    if Lbar.shape != (n, n):
        raise InvalidGraph("mean Laplacian must be square")
    if np.max(np.abs(Lbar - Lbar.T), initial=0.0) > 1e-10:
        raise InvalidGraph("mean Laplacian is not symmetric")
    if np.max(np.abs(Lbar.sum(axis=1)), initial=0.0) > 1e-9:
        raise InvalidGraph("mean Laplacian rows do not sum to zero")
    Q = _ones_complement(n)
    K = Q.T @ Lbar @ Q
    K = 0.5 * (K + K.T)
    kappas, W = np.linalg.eigh(K)
    if n > 1 and kappas[0] <= EIG_TOL:
        raise Disconnected(
            f"second-smallest eigenvalue {kappas[0]:.3e} <= {EIG_TOL:g}: graph is disconnected"
        )
    V1 = Q @ W
    V2 = np.full(n, 1.0 / np.sqrt(n))
    return LaplacianDecomposition(Lbar, V1, V2, np.diag(kappas))


def algebraic_connectivity(L) -> float:
    """Second-smallest eigenvalue of a symmetric Laplacian (0 for n=1)."""
    L = np.asarray(L, dtype=float)
    if L.shape[0] < 2:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (L + L.T))[1])


@dataclass(frozen=True, eq=False)
class GraphDistribution:
    """Finite-support distribution over adjacency matrices.

    Parameters
    ----------
    atoms : array_like, shape (r, n, n)
        Support points.
    probs : array_like, shape (r,)
        Strictly positive probabilities summing to one.
    """

    atoms: np.ndarray
    probs: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim == 2:
            atoms = atoms[None]
        if atoms.ndim != 3 or atoms.shape[0] == 0:
            raise InvalidGraph("atoms must have shape (r, n, n) with r >= 1")
        for A in atoms:
            validate_adjacency(A)
        probs = np.array(self.probs, dtype=float).reshape(-1)
        if probs.shape[0] != atoms.shape[0]:
            raise InvalidGraph("need one probability per atom")
        if np.any(probs <= 0):
            raise InvalidGraph("probabilities must be > 0")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise InvalidGraph(f"probabilities sum to {probs.sum()!r}, not 1")
        Abar = np.tensordot(probs, atoms, axes=1)
        if np.max(np.abs(Abar - Abar.T)) > 1e-12:
            raise InvalidGraph("mean adjacency is not symmetric")
        atoms.setflags(write=False)
        probs.setflags(write=False)
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cum", cum)
        Lbar = mean_laplacian_unchecked(self)
        if self.n > 1 and algebraic_connectivity(Lbar) <= EIG_TOL:
            raise MeanGraphDisconnected("graph of the mean adjacency is not connected")

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @property
    def is_estimated(self) -> bool:
        return False

    @property
    def mean_adjacency(self) -> np.ndarray:
        return np.tensordot(self.probs, self.atoms, axes=1)

    def laplacians(self) -> np.ndarray:
        return np.stack([laplacian(A) for A in self.atoms])

    def sample_index(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        return np.searchsorted(self._cum, u, side="right")

    def edge_second_moments(self) -> np.ndarray:
        """``sigma_ij = E[a_ij^2]`` as an (n, n) matrix."""
        return np.tensordot(self.probs, self.atoms**2, axes=1)

    def scaled(self, c: float) -> "GraphDistribution":
        return GraphDistribution(c * self.atoms, self.probs)

    def edge_lists(self):
        """Directed edges per atom as ``(receiver, sender, weight)`` arrays."""
        out = []
        for A in self.atoms:
            i, j = np.nonzero(A)
            out.append((i, j, A[i, j]))
        return out

    @classmethod
    def single(cls, A) -> "GraphDistribution":
        return cls(np.asarray(A, dtype=float)[None], np.ones(1))

    @classmethod
    def from_config(cls, cfg, path="graph") -> "GraphDistribution":
        return graph_from_config(cfg, path)


def mean_laplacian_unchecked(dist: GraphDistribution) -> np.ndarray:
    return np.tensordot(dist.probs, dist.laplacians(), axes=1)


def mean_laplacian(dist: GraphDistribution) -> np.ndarray:
    """``E[L_k] = sum_r p_r laplacian(A_r)``; raises if its graph is disconnected."""
    Lbar = mean_laplacian_unchecked(dist)
    if Lbar.shape[0] > 1 and algebraic_connectivity(Lbar) <= EIG_TOL:
        raise MeanGraphDisconnected("mean Laplacian has a repeated zero eigenvalue")
    return Lbar


def sample_graph(dist: GraphDistribution, rng: np.random.Generator) -> np.ndarray:
    return dist.atoms[int(dist.sample_index(rng))]


def _matrix_norm(M, norm: str) -> float:
    if norm == "spectral":
        return float(np.linalg.norm(M, 2))
    if norm == "frobenius":
        return float(np.linalg.norm(M, "fro"))
    raise ValueError(f"unknown norm {norm!r}")


def laplacian_variance(dist: GraphDistribution, norm: str = "spectral") -> float:
    """``E ||L_k - Lbar||^2`` by enumeration of the atoms."""
    Lbar = mean_laplacian_unchecked(dist)
    return float(
        sum(p * _matrix_norm(L - Lbar, norm) ** 2 for p, L in zip(dist.probs, dist.laplacians()))
    )


def gossip_distribution(n: int, edges: Sequence[tuple[int, int]] | None = None, weight: float = 1.0):
    """One undirected edge chosen uniformly per step.

    ``edges`` are 0-based pairs; defaults to every pair of the complete graph.
    """
    if edges is None:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    atoms = []
    for i, j in edges:
        A = np.zeros((n, n))
        A[i, j] = A[j, i] = weight
        atoms.append(A)
    return GraphDistribution(np.array(atoms), np.full(len(atoms), 1.0 / len(atoms)))


@dataclass(frozen=True, eq=False)
class GraphGenerator:
    """Seeded callback producing adjacency matrices, for simulation-only runs.

    Moment quantities are Monte-Carlo estimates; see :meth:`estimate`.
    """

    draw: Callable[[np.random.Generator], np.ndarray]
    n: int

    @property
    def is_estimated(self) -> bool:
        return True

    def sample(self, rng):
        return validate_adjacency(self.draw(rng))

    def estimate(self, rng: np.random.Generator, samples: int = 10_000, norm: str = "spectral"):
        """Monte-Carlo moments: mean Laplacian, ``E[a_ij^2]`` and ``E||L-Lbar||^2``.

        Returns a dict whose values are ``(estimate, standard_error)`` pairs
        and ``estimated=True``.
        """
        As = np.stack([self.sample(rng) for _ in range(samples)])
        Ls = np.stack([laplacian(A) for A in As])
        Lbar = Ls.mean(axis=0)
        sq = As**2
        dev = np.array([_matrix_norm(L - Lbar, norm) ** 2 for L in Ls])
        se = lambda x: x.std(axis=0, ddof=1) / np.sqrt(samples)  # noqa: E731
        return {
            "mean_laplacian": (Lbar, se(Ls)),
            "edge_second_moments": (sq.mean(axis=0), se(sq)),
            "laplacian_variance": (float(dev.mean()), float(se(dev))),
            "estimated": True,
        }

    def as_distribution(self, rng, samples: int = 10_000) -> GraphDistribution:
        """Empirical distribution over distinct sampled adjacency matrices."""
        As = np.stack([self.sample(rng) for _ in range(samples)])
        uniq, counts = np.unique(As.reshape(samples, -1), axis=0, return_counts=True)
        atoms = uniq.reshape(-1, self.n, self.n)
        probs = counts / counts.sum()
        Abar = np.tensordot(probs, atoms, axes=1)
        if np.max(np.abs(Abar - Abar.T)) > 1e-12:
            raise InvalidGraph("empirical mean adjacency is not symmetric; supply atoms instead")
        return GraphDistribution(atoms, probs)


# ----------------------------------------------------------------- config

def _dense(value, path, n=None):
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"not a numeric matrix ({exc})") from None
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(path, f"expected a square matrix, got shape {M.shape}")
    if n is not None and M.shape[0] != n:
        raise ConfigError(path, f"expected {n}x{n}, got {M.shape}")
    return M


def graph_from_config(cfg, path="graph") -> GraphDistribution:
    """Build a distribution from a parsed config mapping.

    Accepted forms::

        {builtin: gossip, n: 3, weight: 1.0}
        {n: 3, undirected: true, atoms: [{prob: 0.5, edges: [[1, 2, 1.0]]},
                                         {prob: 0.5, matrix: [[...]]}]}

    Edge indices are 1-based.
    """
    if not isinstance(cfg, dict):
        raise ConfigError(path, "expected a mapping")
    if "builtin" in cfg:
        name = cfg["builtin"]
        if name != "gossip":
            raise ConfigError(f"{path}.builtin", f"unknown builtin graph {name!r}")
        n = cfg.get("n")
        if not isinstance(n, int) or n < 2:
            raise ConfigError(f"{path}.n", "gossip graph needs an integer n >= 2")
        edges = cfg.get("edges")
        if edges is not None:
            edges = [(int(e[0]) - 1, int(e[1]) - 1) for e in edges]
        return gossip_distribution(n, edges, float(cfg.get("weight", 1.0)))

    atoms_cfg = cfg.get("atoms")
    if not isinstance(atoms_cfg, list) or not atoms_cfg:
        raise ConfigError(f"{path}.atoms", "expected a non-empty list of atoms")
    undirected = bool(cfg.get("undirected", False))
    n = cfg.get("n")
    atoms, probs = [], []
    for r, atom in enumerate(atoms_cfg):
        apath = f"{path}.atoms[{r}]"
        if not isinstance(atom, dict):
            raise ConfigError(apath, "expected a mapping")
        if "prob" not in atom:
            raise ConfigError(f"{apath}.prob", "missing")
        probs.append(float(atom["prob"]))
        if "matrix" in atom:
            A = _dense(atom["matrix"], f"{apath}.matrix", n)
            n = A.shape[0]
        elif "edges" in atom:
            if n is None:
                raise ConfigError(f"{path}.n", "required when atoms are given as edge lists")
            A = np.zeros((n, n))
            for e, edge in enumerate(atom["edges"]):
                epath = f"{apath}.edges[{e}]"
                if len(edge) not in (2, 3):
                    raise ConfigError(epath, "edge must be [i, j] or [i, j, w]")
                i, j = int(edge[0]) - 1, int(edge[1]) - 1
                w = float(edge[2]) if len(edge) == 3 else 1.0
                if not (0 <= i < n and 0 <= j < n):
                    raise ConfigError(epath, f"index out of range 1..{n}")
                A[i, j] = w
        else:
            raise ConfigError(apath, "atom needs 'matrix' or 'edges'")
        if undirected:
            A = np.maximum(A, A.T)
        atoms.append(A)
    try:
        return GraphDistribution(np.array(atoms), np.array(probs))
    except InvalidGraph as exc:
        raise ConfigError(path, str(exc)) from None


def graph_to_config(dist: GraphDistribution) -> dict:
    return {
        "n": dist.n,
        "atoms": [
            {"prob": float(p), "matrix": A.tolist()} for p, A in zip(dist.probs, dist.atoms)
        ],
    }
