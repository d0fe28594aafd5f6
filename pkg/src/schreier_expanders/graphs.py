"""Schreier graphs of GL_k(F_q) (and baselines) as strongly explicit objects.

A graph is described by its generator set.  Neighbors of a single vertex
are computed on demand from the generators; for spectral work the
generators are turned into action tables (one int array per generator)
which give matrix-free adjacency products.  Sparse materialization is
only for small graphs, tests and edge-list export.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import ff_linalg as ff

MODELS = ("gl", "toeplitz", "permutation")
DEFAULT_ENTRY_CAP = 10**9


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """g generators of one model.

    Matrix models carry FieldParams; the permutation model stores the
    vertex count and explicit permutation arrays instead.
    """

    model: str
    generators: tuple
    seed: Optional[int] = None
    params: Optional[ff.FieldParams] = None
    n_explicit: Optional[int] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise GraphError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if len(self.generators) < 1:
            raise GraphError("need at least one generator")
        if self.model == "permutation":
            if self.n_explicit is None:
                raise GraphError("permutation model needs an explicit n")
            gens = []
            for p in self.generators:
                p = np.asarray(p, dtype=np.int64)
                if p.shape != (self.n_explicit,) or not np.array_equal(np.sort(p), np.arange(self.n_explicit)):
                    raise GraphError("permutation generator is not a permutation of range(n)")
                p.setflags(write=False)
                gens.append(p)
            object.__setattr__(self, "generators", tuple(gens))
            return
        if self.params is None:
            raise GraphError(f"{self.model} model needs field parameters")
        want = ff.ToeplitzGenerator if self.model == "toeplitz" else ff.FieldMatrix
        for m in self.generators:
            if not isinstance(m, want) or m.q != self.params.q or m.k != self.params.k:
                raise GraphError(f"generator does not match model {self.model} / {self.params}")
            if ff.determinant(m) == 0:
                raise GraphError("generator matrix is singular")

    @property
    def g(self) -> int:
        return len(self.generators)

    @property
    def n(self) -> int:
        return self.n_explicit if self.model == "permutation" else self.params.n

    @classmethod
    def sample(
        cls,
        model: str,
        g: int,
        seed: int,
        q: Optional[int] = None,
        k: Optional[int] = None,
        n: Optional[int] = None,
    ) -> "GeneratorSet":
        """Draw g random generators from a PCG64 stream seeded with ``seed``."""
        if g < 1:
            raise GraphError("generator count must be >= 1")
        rng = np.random.default_rng(seed)
        if model == "permutation":
            if n is None or n < 2:
                raise GraphError("permutation model needs n >= 2")
            gens = tuple(rng.permutation(n) for _ in range(g))
            return cls(model, gens, seed=seed, n_explicit=n)
        if model not in MODELS:
            raise GraphError(f"unknown model {model!r}")
        if q is None or k is None:
            raise GraphError(f"{model} model needs q and k")
        params = ff.FieldParams(q, k)
        draw = ff.random_invertible_toeplitz if model == "toeplitz" else ff.random_invertible_matrix
        gens = tuple(draw(params, rng) for _ in range(g))
        return cls(model, gens, seed=seed, params=params)

    @cached_property
    def tables(self) -> List[np.ndarray]:
        """Forward action tables, one per generator."""
        if self.model == "permutation":
            return list(self.generators)
        return [ff.action_table(m, self.params) for m in self.generators]

    @cached_property
    def inverse_tables(self) -> List[np.ndarray]:
        out = []
        for t in self.tables:
            inv = np.empty_like(t)
            inv[t] = np.arange(t.size, dtype=t.dtype)
            out.append(inv)
        return out

    @cached_property
    def inverse_matrices(self) -> list:
        return [ff.invert(m) for m in self.generators]

    def apply(self, i: int, x: int, inverse: bool = False) -> int:
        """Image of vertex x under generator i (or its inverse), computed on the fly."""
        if self.model == "permutation":
            p = self.inverse_tables[i] if inverse else self.generators[i]
            return int(p[x])
        m = self.inverse_matrices[i] if inverse else self.generators[i]
        return ff.vertex_index(ff.mat_vec(m, ff.index_vertex(x, self.params)), self.params.q)

    def with_inverses(self) -> "GeneratorSet":
        """The 2g bijections T_1..T_g, T_1^-1..T_g^-1 (for bipartite doubling)."""
        if self.model == "permutation":
            gens = tuple(self.generators) + tuple(self.inverse_tables)
            return GeneratorSet("permutation", gens, seed=self.seed, n_explicit=self.n)
        return GeneratorSet("gl", tuple(map(ff._dense, self.generators)) + tuple(self.inverse_matrices),
                            seed=self.seed, params=self.params)

    def to_json(self) -> dict:
        out = {"model": self.model, "n": self.n, "g": self.g, "seed": self.seed}
        if self.model == "permutation":
            out["generators"] = [{"model": "permutation", "n": self.n, "entries": p.tolist()}
                                 for p in self.generators]
        else:
            out["q"], out["k"] = self.params.q, self.params.k
            out["generators"] = [ff.generator_to_json(m) for m in self.generators]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "GeneratorSet":
        model = obj["model"]
        seed = obj.get("seed")
        if model == "permutation":
            n = int(obj["n"])
            gens = tuple(np.asarray(gj["entries"], dtype=np.int64) for gj in obj["generators"])
            return cls(model, gens, seed=seed, n_explicit=n)
        params = ff.FieldParams(int(obj["q"]), int(obj["k"]))
        gens = []
        for gj in obj["generators"]:
            if gj["model"] != model:
                raise GraphError(f"generator model {gj['model']!r} inside a {model!r} set")
            gens.append(ff.generator_from_json(gj))
        return cls(model, tuple(gens), seed=seed, params=params)


@dataclass(frozen=True, eq=False)
class SchreierGraph:
    """Undirected 2g-regular multigraph: x ~ T_i x and x ~ T_i^-1 x."""

    gens: GeneratorSet

    @property
    def n(self) -> int:
        return self.gens.n

    @property
    def degree(self) -> int:
        return 2 * self.gens.g

    @property
    def seed(self) -> Optional[int]:
        return self.gens.seed

    def neighbors(self, x: int) -> List[int]:
        _check_vertex(x, self.n)
        fwd = [self.gens.apply(i, x) for i in range(self.gens.g)]
        back = [self.gens.apply(i, x, inverse=True) for i in range(self.gens.g)]
        return fwd + back

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v, dtype=np.float64)
        for t, ti in zip(self.gens.tables, self.gens.inverse_tables):
            out += v[t]
            out += v[ti]
        return out

    def materialize(self, cap: int = DEFAULT_ENTRY_CAP) -> sp.csr_matrix:
        """Symmetric n x n adjacency; a fixed point of T_i adds 2 to the diagonal."""
        _check_cap(self.n * self.degree, cap)
        rows = np.tile(np.arange(self.n, dtype=np.int64), self.degree)
        cols = np.concatenate(self.gens.tables + self.gens.inverse_tables)
        return _coo_sum(rows, cols, (self.n, self.n))


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Left and right copies of the vertex set, x_L ~ (s_j x)_R for each j."""

    gens: GeneratorSet

    @property
    def n_left(self) -> int:
        return self.gens.n

    @property
    def n_right(self) -> int:
        return self.gens.n

    @property
    def degrees(self) -> tuple:
        return (self.gens.g, self.gens.g)

    @property
    def seed(self) -> Optional[int]:
        return self.gens.seed

    def _right_tables(self) -> List[np.ndarray]:
        return self.gens.tables

    def neighbors(self, x: int, side: str = "left") -> List[int]:
        if side == "left":
            _check_vertex(x, self.n_left)
            return [self.gens.apply(j, x) for j in range(self.gens.g)]
        _check_vertex(x, self.n_right)
        return [self.gens.apply(j, x, inverse=True) for j in range(self.gens.g)]

    def biadjacency(self, cap: int = DEFAULT_ENTRY_CAP) -> sp.csr_matrix:
        """n_left x n_right matrix; entry (x, y) counts generators with s_j x = y."""
        g = self.gens.g
        _check_cap(self.n_left * g, cap)
        rows = np.tile(np.arange(self.n_left, dtype=np.int64), g)
        cols = np.concatenate(self._right_tables())
        return _coo_sum(rows, cols, (self.n_left, self.n_right))

    def materialize(self, cap: int = DEFAULT_ENTRY_CAP, full: bool = False) -> sp.csr_matrix:
        b = self.biadjacency(cap)
        if not full:
            return b
        return sp.bmat([[None, b], [b.T, None]], format="csr")

    def left_matvec(self, v: np.ndarray) -> np.ndarray:
        """B v for v on the right part."""
        out = np.zeros(self.n_left)
        for t in self._right_tables():
            out += v[t]
        return out

    def right_matvec(self, u: np.ndarray) -> np.ndarray:
        """B^T u for u on the left part."""
        out = np.zeros(self.n_right)
        for t in self._right_tables():
            out += np.bincount(t, weights=u, minlength=self.n_right)
        return out


@dataclass(frozen=True, eq=False)
class MergedGraph(BipartiteGraph):
    """Bipartite graph whose right vertices are merged in blocks of gamma.

    Right vertex J collects base right vertices [J*gamma, (J+1)*gamma),
    after an optional seeded shuffle of the base right side.
    """

    gamma: int = 1
    shuffle_seed: Optional[int] = None
    _relabel: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        n = self.gens.n
        if self.gamma < 1 or n % self.gamma:
            raise GraphError(f"merge factor {self.gamma} does not divide n = {n}")
        if self.shuffle_seed is not None:
            perm = np.random.default_rng(self.shuffle_seed).permutation(n)
        else:
            perm = np.arange(n, dtype=np.int64)
        object.__setattr__(self, "_relabel", perm // self.gamma)

    @property
    def n_right(self) -> int:
        return self.gens.n // self.gamma

    @property
    def degrees(self) -> tuple:
        return (self.gens.g, self.gamma * self.gens.g)

    @cached_property
    def _merged_tables(self) -> List[np.ndarray]:
        return [self._relabel[t] for t in self.gens.tables]

    def _right_tables(self) -> List[np.ndarray]:
        return self._merged_tables

    def neighbors(self, x: int, side: str = "left") -> List[int]:
        if side == "left":
            _check_vertex(x, self.n_left)
            return [int(self._relabel[self.gens.apply(j, x)]) for j in range(self.gens.g)]
        _check_vertex(x, self.n_right)
        members = np.flatnonzero(self._relabel == x)
        return [self.gens.apply(j, int(y), inverse=True) for j in range(self.gens.g) for y in members]


def build_regular(gens: GeneratorSet) -> SchreierGraph:
    return SchreierGraph(gens)


def build_bipartite(gens: GeneratorSet) -> BipartiteGraph:
    return BipartiteGraph(gens)


def merge_right(b: BipartiteGraph, gamma: int, shuffle_seed: Optional[int] = None) -> MergedGraph:
    if isinstance(b, MergedGraph):
        raise GraphError("graph is already merged")
    return MergedGraph(b.gens, gamma=gamma, shuffle_seed=shuffle_seed)


def double_regular(graph: SchreierGraph) -> BipartiteGraph:
    """Bipartite double cover: both parts are the vertex set, edges from T_i and T_i^-1."""
    return BipartiteGraph(graph.gens.with_inverses())


def neighbors(graph, vertex: int, side: str = "left") -> List[int]:
    if isinstance(graph, SchreierGraph):
        return graph.neighbors(vertex)
    return graph.neighbors(vertex, side)


def materialize(graph, cap: int = DEFAULT_ENTRY_CAP, full: bool = False) -> sp.csr_matrix:
    if isinstance(graph, SchreierGraph):
        return graph.materialize(cap)
    return graph.materialize(cap, full=full)


def _check_vertex(x: int, n: int) -> None:
    if not 0 <= x < n:
        raise GraphError(f"vertex {x} out of range [0, {n - 1}]")


def _check_cap(entries: int, cap: int) -> None:
    if entries > cap:
        raise MemoryError(f"materializing {entries} entries exceeds the cap of {cap}")


def _coo_sum(rows, cols, shape) -> sp.csr_matrix:
    data = np.ones(rows.size, dtype=np.int64)
    m = sp.coo_matrix((data, (rows, cols)), shape=shape).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


# -- descriptors ------------------------------------------------------------

def graph_to_json(graph) -> dict:
    if isinstance(graph, SchreierGraph):
        kind = "regular"
    elif isinstance(graph, MergedGraph):
        kind = "merged"
    else:
        kind = "bipartite"
    out = {"type": kind, "gens": graph.gens.to_json(), "seed": graph.gens.seed}
    if kind == "merged":
        out["gamma"] = graph.gamma
        out["shuffle_seed"] = graph.shuffle_seed
    return out


def graph_from_json(obj: dict):
    gens = GeneratorSet.from_json(obj["gens"])
    kind = obj["type"]
    if kind == "regular":
        return SchreierGraph(gens)
    if kind == "bipartite":
        return BipartiteGraph(gens)
    if kind == "merged":
        return MergedGraph(gens, gamma=int(obj["gamma"]), shuffle_seed=obj.get("shuffle_seed"))
    raise GraphError(f"unknown graph type {kind!r}")


def edge_lines(graph) -> Sequence[str]:
    """'u v multiplicity' lines; for bipartite graphs u is left and v right."""
    m = materialize(graph).tocoo()
    order = np.lexsort((m.col, m.row))
    rows, cols, data = m.row[order], m.col[order], m.data[order]
    if isinstance(graph, SchreierGraph):
        keep = rows <= cols
        rows, cols, data = rows[keep], cols[keep], data[keep]
        # a loop appears once on the diagonal with weight 2 per generator fixing it
        data = np.where(rows == cols, data // 2, data)
    return [f"{u} {v} {w}" for u, v, w in zip(rows.tolist(), cols.tolist(), data.tolist())]
