"""Linear algebra over prime fields F_q.

Vectors of F_q^k are graph vertices (the zero vector excluded), and
invertible k x k matrices, general or Toeplitz, act on them.  Everything
here is small-integer Python/numpy; for q = 2 a bit-packed path is used
for whole-vertex-set action tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

MAX_ATTEMPTS = 1000


class SingularMatrixError(ValueError):
    pass


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q < 4:
        return True
    if q % 2 == 0:
        return False
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class FieldParams:
    q: int
    k: int

    def __post_init__(self):
        if not isinstance(self.q, (int, np.integer)) or not is_prime(int(self.q)):
            raise ValueError(f"q must be prime, got {self.q!r}")
        if not isinstance(self.k, (int, np.integer)) or self.k < 2:
            raise ValueError(f"k must be an integer >= 2, got {self.k!r}")

    @property
    def n(self) -> int:
        """Number of nonzero vectors, i.e. graph vertices."""
        return self.q**self.k - 1


@dataclass(frozen=True)
class FieldMatrix:
    """k x k matrix over F_q, entries stored reduced, row-major."""

    q: int
    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(x) % self.q for x in row) for row in self.entries)
        k = len(rows)
        if k == 0 or any(len(r) != k for r in rows):
            raise ValueError("matrix must be square and non-empty")
        object.__setattr__(self, "entries", rows)

    @property
    def k(self) -> int:
        return len(self.entries)

    @classmethod
    def identity(cls, q: int, k: int) -> "FieldMatrix":
        return cls(q, tuple(tuple(int(i == j) for j in range(k)) for i in range(k)))

    @classmethod
    def from_flat(cls, q: int, k: int, flat: Sequence[int]) -> "FieldMatrix":
        if len(flat) != k * k:
            raise ValueError(f"expected {k * k} entries, got {len(flat)}")
        return cls(q, tuple(tuple(flat[i * k:(i + 1) * k]) for i in range(k)))

    def to_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    def flat(self) -> list:
        return [x for row in self.entries for x in row]

    def __matmul__(self, other: "FieldMatrix") -> "FieldMatrix":
        if other.q != self.q or other.k != self.k:
            raise ValueError("field or dimension mismatch")
        prod = (self.to_array() @ other.to_array()) % self.q
        return FieldMatrix(self.q, tuple(map(tuple, prod.tolist())))


@dataclass(frozen=True)
class ToeplitzGenerator:
    """Toeplitz matrix given by its 2k-1 diagonals.

    Entry (i, j) is ``diagonals[j - i + k - 1]``, so ``diagonals[0]`` is the
    bottom-left corner and ``diagonals[-1]`` the top-right one.
    """

    q: int
    diagonals: tuple

    def __post_init__(self):
        diags = tuple(int(x) % self.q for x in self.diagonals)
        if len(diags) < 3 or len(diags) % 2 == 0:
            raise ValueError("a k x k Toeplitz matrix needs 2k-1 diagonals, k >= 2")
        object.__setattr__(self, "diagonals", diags)

    @property
    def k(self) -> int:
        return (len(self.diagonals) + 1) // 2

    def expand(self) -> FieldMatrix:
        k = self.k
        return FieldMatrix(
            self.q,
            tuple(tuple(self.diagonals[j - i + k - 1] for j in range(k)) for i in range(k)),
        )


Matrix = Union[FieldMatrix, ToeplitzGenerator]


def _dense(m: Matrix) -> FieldMatrix:
    return m.expand() if isinstance(m, ToeplitzGenerator) else m


def _rows_mod(m: Matrix) -> list:
    return [list(r) for r in _dense(m).entries]


def determinant(m: Matrix) -> int:
    """Determinant in F_q by Gaussian elimination."""
    q = m.q
    a = _rows_mod(m)
    k = len(a)
    det = 1
    for col in range(k):
        pivot = next((r for r in range(col, k) if a[r][col]), None)
        if pivot is None:
            return 0
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        p = a[col][col]
        det = det * p % q
        inv_p = pow(p, -1, q)
        for r in range(col + 1, k):
            f = a[r][col] * inv_p % q
            if f:
                a[r] = [(x - f * y) % q for x, y in zip(a[r], a[col])]
    return det % q


def invert(m: Matrix) -> FieldMatrix:
    """Gauss-Jordan inverse over F_q.  Raises SingularMatrixError."""
    q = m.q
    a = _rows_mod(m)
    k = len(a)
    aug = [row + [int(i == j) for j in range(k)] for i, row in enumerate(a)]
    for col in range(k):
        pivot = next((r for r in range(col, k) if aug[r][col]), None)
        if pivot is None:
            raise SingularMatrixError("matrix is singular over F_%d" % q)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv_p = pow(aug[col][col], -1, q)
        aug[col] = [x * inv_p % q for x in aug[col]]
        for r in range(k):
            f = aug[r][col]
            if r != col and f:
                aug[r] = [(x - f * y) % q for x, y in zip(aug[r], aug[col])]
    return FieldMatrix(q, tuple(tuple(row[k:]) for row in aug))


def mat_vec(m: Matrix, v: Sequence[int]) -> tuple:
    q, k = m.q, m.k
    if len(v) != k:
        raise ValueError(f"dimension mismatch: matrix {k}, vector {len(v)}")
    if isinstance(m, ToeplitzGenerator):
        # (Tv)_i = sum_j t[j - i + k - 1] v_j: a correlation of v against the diagonals
        full = np.convolve(np.asarray(m.diagonals, dtype=np.int64), np.asarray(v, dtype=np.int64)[::-1])
        return tuple(int(x) % q for x in full[2 * k - 2:k - 2:-1])
    return tuple(sum(a * b for a, b in zip(row, v)) % q for row in m.entries)


def vertex_index(v: Sequence[int], q: int) -> int:
    """Little-endian base-q value minus one."""
    idx = 0
    for c in reversed(v):
        c = int(c)
        if not 0 <= c < q:
            raise ValueError(f"coordinate {c} not reduced mod {q}")
        idx = idx * q + c
    if idx == 0:
        raise ValueError("the zero vector is not a vertex")
    return idx - 1


def index_vertex(i: int, params: FieldParams) -> tuple:
    if not 0 <= i < params.n:
        raise ValueError(f"index {i} out of range [0, {params.n - 1}]")
    x = i + 1
    coords = []
    for _ in range(params.k):
        x, r = divmod(x, params.q)
        coords.append(r)
    return tuple(coords)


def random_invertible_matrix(params: FieldParams, rng: np.random.Generator) -> FieldMatrix:
    """Uniform element of GL_k(F_q) by rejection; k*k draws per attempt."""
    q, k = params.q, params.k
    for _ in range(MAX_ATTEMPTS):
        flat = rng.integers(0, q, size=k * k).tolist()
        m = FieldMatrix.from_flat(q, k, flat)
        if determinant(m):
            return m
    raise RuntimeError(f"no invertible matrix after {MAX_ATTEMPTS} attempts (q={q}, k={k})")


def random_invertible_toeplitz(params: FieldParams, rng: np.random.Generator) -> ToeplitzGenerator:
    q, k = params.q, params.k
    for _ in range(MAX_ATTEMPTS):
        t = ToeplitzGenerator(q, tuple(rng.integers(0, q, size=2 * k - 1).tolist()))
        if determinant(t):
            return t
    raise RuntimeError(f"no invertible Toeplitz matrix after {MAX_ATTEMPTS} attempts (q={q}, k={k})")


# -- batches ----------------------------------------------------------------

def batch_inverse(a: np.ndarray, q: int):
    """Gauss-Jordan over F_q on a stack of (k, k) matrices.

    Returns (inverses, invertible) where ``invertible`` is a boolean mask;
    rows of ``inverses`` for singular inputs are meaningless.
    """
    a = np.asarray(a, dtype=np.int64) % q
    count, k, _ = a.shape
    aug = np.concatenate([a, np.broadcast_to(np.eye(k, dtype=np.int64), a.shape)], axis=2)
    ok = np.ones(count, dtype=bool)
    inv_table = np.array([0] + [pow(x, -1, q) for x in range(1, q)], dtype=np.int64)
    rows = np.arange(count)
    for col in range(k):
        nonzero = aug[:, col:, col] != 0
        ok &= nonzero.any(axis=1)
        pivot = col + nonzero.argmax(axis=1)
        top = aug[rows, pivot].copy()
        aug[rows, pivot] = aug[:, col]
        aug[:, col] = top * inv_table[top[:, col]][:, None] % q
        factor = aug[:, :, col].copy()
        factor[:, col] = 0
        aug = (aug - factor[:, :, None] * aug[:, col][:, None, :]) % q
    return aug[:, :, k:], ok


def toeplitz_expand_batch(diagonals: np.ndarray, k: int) -> np.ndarray:
    i, j = np.indices((k, k))
    return diagonals[:, j - i + k - 1]


def random_invertible_batch(params: FieldParams, rng: np.random.Generator, count: int,
                            toeplitz: bool = False):
    """``count`` uniform invertible matrices (general or Toeplitz) and their inverses."""
    q, k = params.q, params.k
    mats = np.empty((count, k, k), dtype=np.int64)
    invs = np.empty_like(mats)
    todo = np.arange(count)
    for _ in range(MAX_ATTEMPTS):
        if toeplitz:
            cand = toeplitz_expand_batch(rng.integers(0, q, size=(todo.size, 2 * k - 1)), k)
        else:
            cand = rng.integers(0, q, size=(todo.size, k, k))
        inv, ok = batch_inverse(cand, q)
        mats[todo[ok]], invs[todo[ok]] = cand[ok], inv[ok]
        todo = todo[~ok]
        if not todo.size:
            return mats, invs
    raise RuntimeError(f"rejection sampling did not finish after {MAX_ATTEMPTS} rounds")


# -- whole vertex set -----------------------------------------------------

def all_vertex_coords(params: FieldParams) -> np.ndarray:
    """(n, k) array; row i holds index_vertex(i)."""
    x = np.arange(1, params.n + 1, dtype=np.int64)
    coords = np.empty((params.n, params.k), dtype=np.int64)
    for j in range(params.k):
        x, coords[:, j] = np.divmod(x, params.q)
    return coords


def coords_to_indices(coords: np.ndarray, q: int) -> np.ndarray:
    weights = q ** np.arange(coords.shape[1], dtype=np.int64)
    return coords @ weights - 1


def action_table(m: Matrix, params: FieldParams, packed: bool = True) -> np.ndarray:
    """Index of M.v for every vertex v, as an int64 array of length n.

    For q = 2 the default path packs vectors into machine words (bit j is
    coordinate j, so the packed word is exactly index + 1) and XORs columns.
    """
    a = _dense(m).to_array()
    if a.shape != (params.k, params.k) or m.q != params.q:
        raise ValueError("matrix does not match field parameters")
    if params.q == 2 and packed and params.k < 63:
        words = np.arange(1, params.n + 1, dtype=np.int64)
        cols = a.T @ (1 << np.arange(params.k, dtype=np.int64))  # column j packed
        out = np.zeros_like(words)
        for j in range(params.k):
            out ^= np.where((words >> j) & 1, cols[j], 0)
        return out - 1
    coords = all_vertex_coords(params)
    return coords_to_indices((coords @ a.T) % params.q, params.q)


def generator_to_json(m: Matrix) -> dict:
    if isinstance(m, ToeplitzGenerator):
        return {"q": m.q, "k": m.k, "model": "toeplitz", "entries": list(m.diagonals)}
    return {"q": m.q, "k": m.k, "model": "gl", "entries": m.flat()}


def generator_from_json(obj: dict) -> Matrix:
    q, k, model = int(obj["q"]), int(obj["k"]), obj["model"]
    entries = [int(x) for x in obj["entries"]]
    if any(not 0 <= x < q for x in entries):
        raise ValueError("generator entries must be reduced mod q")
    if model == "gl":
        return FieldMatrix.from_flat(q, k, entries)
    if model == "toeplitz":
        if len(entries) != 2 * k - 1:
            raise ValueError(f"Toeplitz generator needs {2 * k - 1} diagonals")
        return ToeplitzGenerator(q, tuple(entries))
    raise ValueError(f"unknown generator model {model!r}")
