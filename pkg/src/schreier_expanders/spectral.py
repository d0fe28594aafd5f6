"""Second eigenvalue / second singular value of Schreier graph operators.

The iterative path is a thick-restart Lanczos with full
reorthogonalization, run on the adjacency operator (regular graphs) or the
Gram operator B^T B (bipartite graphs) with the all-ones direction
projected out.  Products go through the generators' action tables, so the
matrix is never formed.  ``dense_spectrum`` is the LAPACK ground truth used
to check it on small graphs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .graphs import BipartiteGraph, SchreierGraph

DEFAULT_TOL = 1e-8
DENSE_CAP = 4096


class SpectrumError(RuntimeError):
    """Solver did not converge; carries the best estimate."""

    def __init__(self, message: str, estimate: float, residual: float, iterations: int):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SpectrumResult:
    lambda1: float
    lambda2_abs: float
    normalized: Optional[float]
    unit: Optional[float]
    method: str
    iterations: int
    residual: float

    def to_json(self) -> dict:
        return asdict(self)


def threshold_unit(d_left: int, d_right: Optional[int] = None) -> float:
    """Ramanujan scale: 2 sqrt(d-1) for one degree, sqrt(dL-1)+sqrt(dR-1) for two."""
    if d_right is None:
        if d_left < 2:
            raise ValueError("degree must be >= 2")
        return 2.0 * math.sqrt(d_left - 1)
    if d_left < 2 or d_right < 2:
        raise ValueError("degrees must be >= 2")
    return math.sqrt(d_left - 1) + math.sqrt(d_right - 1)


def _unit_or_none(*degrees) -> Optional[float]:
    try:
        return threshold_unit(*degrees)
    except ValueError:
        return None


def _start_vector(n: int, seed: Optional[int]) -> np.ndarray:
    rng = np.random.default_rng([0 if seed is None else int(seed), 0x5EED])
    return rng.standard_normal(n)


def _deflated(op: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
    def apply(x):
        y = op(x)
        return y - y.mean()
    return apply


def lanczos_extreme(
    op: Callable[[np.ndarray], np.ndarray],
    v0: np.ndarray,
    tol: float,
    which: str = "both",
    dim: Optional[int] = None,
    ncv: int = 60,
    nkeep: int = 20,
    max_restarts: int = 500,
):
    """Extreme eigenvalue of a symmetric operator by thick-restart Lanczos.

    ``which="both"`` converges both ends of the spectrum and returns the one of
    larger magnitude; ``which="top"`` only the largest.  ``dim`` is the
    dimension of the space the operator lives on (caps the basis size).

    Returns (theta, residual, restarts).  Raises SpectrumError on
    non-convergence.
    """
    n = v0.size
    dim = n if dim is None else dim
    ncv = max(2, min(ncv, dim))
    nkeep = max(1, min(nkeep, ncv - 2)) if ncv > 2 else 1
    V = np.zeros((n, ncv + 1))
    H = np.zeros((ncv + 1, ncv + 1))
    V[:, 0] = v0 / np.linalg.norm(v0)
    j0 = 0
    best = (math.nan, math.inf)
    for restart in range(1, max_restarts + 1):
        beta = 0.0
        m = ncv
        for j in range(j0, ncv):
            w = op(V[:, j])
            basis = V[:, :j + 1]
            h = basis.T @ w
            w -= basis @ h
            h2 = basis.T @ w
            w -= basis @ h2
            h += h2
            H[:j + 1, j] = h
            H[j, :j + 1] = h
            beta = float(np.linalg.norm(w))
            scale = max(1.0, float(np.abs(h).max()))
            if beta <= 1e-12 * scale:
                # invariant subspace: the Ritz values below are exact
                m, beta = j + 1, 0.0
                break
            V[:, j + 1] = w / beta
        theta, Y = np.linalg.eigh(H[:m, :m])
        res = np.abs(beta * Y[m - 1, :])
        hi = m - 1
        if which == "both":
            lo = 0
            pick = hi if abs(theta[hi]) >= abs(theta[lo]) else lo
            done = max(res[hi], res[lo]) <= tol
        else:
            pick = hi
            done = res[hi] <= tol
        best = (float(theta[pick]), float(res[pick]))
        if done or beta == 0.0 or m >= dim:
            y = V[:, :m] @ Y[:, pick]
            y /= np.linalg.norm(y)
            true_res = float(np.linalg.norm(op(y) - theta[pick] * y))
            if true_res > tol and beta != 0.0 and m < dim:
                raise SpectrumError("Ritz residual estimate disagrees with true residual",
                                    best[0], true_res, restart)
            return float(theta[pick]), true_res, restart
        if which == "both":
            half = max(1, nkeep // 2)
            keep = np.r_[np.arange(half), np.arange(m - half, m)]
        else:
            keep = np.arange(m - nkeep, m)
        p = keep.size
        V[:, :p] = V[:, :m] @ Y[:, keep]
        V[:, p] = V[:, m]
        H[:] = 0.0
        H[np.arange(p), np.arange(p)] = theta[keep]
        b = beta * Y[m - 1, keep]
        H[p, :p] = b
        H[:p, p] = b
        j0 = p
    raise SpectrumError(f"no convergence after {max_restarts} restarts", best[0], best[1], max_restarts)


def _max_restarts(n: int) -> int:
    return 50 * max(1, math.ceil(math.log2(max(n, 2))))


def second_eigenvalue_regular(graph: SchreierGraph, tol: float = DEFAULT_TOL) -> SpectrumResult:
    """Largest |eigenvalue| of the adjacency on the complement of the all-ones vector."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, deg = graph.n, graph.degree
    op = _deflated(graph.matvec)
    v0 = _start_vector(n, graph.seed)
    v0 -= v0.mean()
    theta, res, its = lanczos_extreme(op, v0, tol, which="both", dim=n - 1, max_restarts=_max_restarts(n))
    lam2 = abs(theta)
    unit = _unit_or_none(deg)
    return SpectrumResult(float(deg), lam2, None if unit is None else lam2 / unit, unit, "iterative", its, res)


def second_singular_bipartite(graph: BipartiteGraph, tol: float = DEFAULT_TOL) -> SpectrumResult:
    """Second singular value of the biadjacency block via B^T B on the right side."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    d_l, d_r = graph.degrees
    n_r = graph.n_right
    gram = _deflated(lambda x: graph.right_matvec(graph.left_matvec(x)))
    v0 = _start_vector(n_r, graph.seed)
    v0 -= v0.mean()
    lam1 = math.sqrt(d_l * d_r)
    if n_r < 2:
        return SpectrumResult(lam1, 0.0, 0.0, _unit_or_none(d_l, d_r), "iterative", 0, 0.0)
    # Gram residual r relates to the singular-triplet residual as r / sigma
    theta, res, its = lanczos_extreme(gram, v0, tol * max(1.0, lam1), which="top", dim=n_r - 1,
                                      max_restarts=_max_restarts(n_r))
    sigma = math.sqrt(max(theta, 0.0))
    sv_res = res / sigma if sigma > 1e-6 else res
    unit = _unit_or_none(d_l, d_r)
    return SpectrumResult(lam1, sigma, None if unit is None else sigma / unit, unit, "iterative", its, sv_res)


def dense_spectrum(graph, full: bool = False, cap: int = DENSE_CAP) -> np.ndarray:
    """Descending eigenvalues (regular, or bipartite with ``full``) or singular values."""
    if isinstance(graph, SchreierGraph):
        size = graph.n
    else:
        size = graph.n_left + graph.n_right if full else max(graph.n_left, graph.n_right)
    if size > cap:
        raise MemoryError(f"dense spectrum of a {size}-vertex operator exceeds the cap of {cap}")
    if isinstance(graph, SchreierGraph):
        return np.linalg.eigvalsh(graph.materialize().toarray().astype(float))[::-1]
    if full:
        return np.linalg.eigvalsh(graph.materialize(full=True).toarray().astype(float))[::-1]
    return np.linalg.svd(graph.biadjacency().toarray().astype(float), compute_uv=False)


def dense_second(graph, cap: int = DENSE_CAP) -> SpectrumResult:
    """Same quantity as the iterative solvers, from a full dense decomposition."""
    vals = dense_spectrum(graph, cap=cap)
    if isinstance(graph, SchreierGraph):
        lam2 = float(np.abs(vals[1:]).max()) if vals.size > 1 else 0.0
        unit = _unit_or_none(graph.degree)
        lam1 = float(graph.degree)
    else:
        lam2 = float(vals[1]) if vals.size > 1 else 0.0
        unit = _unit_or_none(*graph.degrees)
        lam1 = math.sqrt(graph.degrees[0] * graph.degrees[1])
    return SpectrumResult(lam1, lam2, None if unit is None else lam2 / unit, unit, "dense", 0, 0.0)


def spectrum(graph, tol: float = DEFAULT_TOL, dense: bool = False) -> SpectrumResult:
    if dense:
        return dense_second(graph)
    if isinstance(graph, SchreierGraph):
        return second_eigenvalue_regular(graph, tol)
    return second_singular_bipartite(graph, tol)
