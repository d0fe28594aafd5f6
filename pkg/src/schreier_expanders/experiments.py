"""Monte Carlo distributions of normalized second eigenvalues.

Trial t of an experiment draws its generators from the child seed
``child_seed(master_seed, t)``, so results do not depend on how trials are
scheduled over workers.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import ff_linalg as ff
from .graphs import BipartiteGraph, GeneratorSet, MergedGraph, SchreierGraph, MODELS
from .spectral import DEFAULT_TOL, SpectrumError, spectrum, threshold_unit

log = logging.getLogger(__name__)

KINDS = ("regular", "bipartite", "merged")
PRNG = "numpy.random.PCG64"
CHILD_SEED_RULE = "numpy.random.SeedSequence([master_seed, trial]).generate_state(1, uint64)[0]"
MAX_FAILURE_FRACTION = 0.01


class ExperimentError(RuntimeError):
    pass


def child_seed(master_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(trial)]).generate_state(1, np.uint64)[0])


@dataclass
class ExperimentSpec:
    kind: str = "regular"
    model: str = "gl"
    q: Optional[int] = 2
    k: Optional[int] = 10
    n: Optional[int] = None
    g: int = 15
    gamma: int = 1
    trials: int = 5000
    bins: int = 40
    master_seed: int = 1
    tol: float = DEFAULT_TOL
    shuffle_seed: Optional[int] = None
    label: str = ""

    def __post_init__(self):
        self.validate()
        if not self.label:
            self.label = self.default_label()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.trials < 1 or self.bins < 1:
            raise ValueError("trials and bins must be >= 1")
        if self.g < 1:
            raise ValueError("generator count must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.model == "permutation":
            if self.n is None or self.n < 2:
                raise ValueError("permutation model needs n >= 2")
        else:
            ff.FieldParams(self.q, self.k)
            if self.n is not None and self.n != self.q**self.k - 1:
                raise ValueError(f"n = {self.n} disagrees with q^k - 1 = {self.q**self.k - 1}")
        if self.kind == "merged":
            if self.gamma < 1 or self.vertex_count % self.gamma:
                raise ValueError(f"gamma = {self.gamma} must divide n = {self.vertex_count}")
        elif self.gamma != 1:
            raise ValueError("gamma only applies to merged graphs")
        self.unit  # degrees must admit a threshold

    @property
    def vertex_count(self) -> int:
        return self.n if self.model == "permutation" else self.q**self.k - 1

    @property
    def degrees(self) -> tuple:
        if self.kind == "regular":
            return (2 * self.g,)
        return (self.g, self.gamma * self.g)

    @property
    def unit(self) -> float:
        return threshold_unit(*self.degrees)

    def default_label(self) -> str:
        field_part = f"n{self.n}" if self.model == "permutation" else f"q{self.q}k{self.k}"
        tail = f"-gamma{self.gamma}" if self.kind == "merged" else ""
        return f"{self.kind}-{self.model}-{field_part}-g{self.g}{tail}"

    def build(self, seed: int):
        gens = GeneratorSet.sample(self.model, self.g, seed, q=self.q, k=self.k, n=self.vertex_count)
        if self.kind == "regular":
            return SchreierGraph(gens)
        if self.kind == "bipartite":
            return BipartiteGraph(gens)
        return MergedGraph(gens, gamma=self.gamma, shuffle_seed=self.shuffle_seed)

    def to_json(self) -> dict:
        out = asdict(self)
        if self.model == "permutation":
            out["q"] = out["k"] = None
        else:
            out["n"] = self.vertex_count
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown experiment fields: {sorted(extra)}")
        return cls(**obj)


def summary_stats(samples: Sequence[float]) -> Dict[str, float]:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("summary of an empty sample")
    q01, q50, q99 = np.quantile(x, [0.01, 0.5, 0.99])
    return {
        "count": int(x.size),
        "mean": float(x.mean()),
        "variance": float(x.var(ddof=1)) if x.size > 1 else 0.0,
        "min": float(x.min()),
        "max": float(x.max()),
        "ramanujan_fraction": float(np.mean(x < 1.0)),
        "q01": float(q01),
        "q50": float(q50),
        "q99": float(q99),
    }


@dataclass
class Histogram:
    unit: float
    edges: List[float]
    counts: List[int]
    summary: Dict[str, float]
    failures: int = 0
    samples: Optional[List[float]] = None
    label: str = ""
    spec: Optional[ExperimentSpec] = field(default=None, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count"])
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            w.writerow([repr(lo), repr(hi), c])
        return buf.getvalue()

    def sidecar(self) -> dict:
        spec = self.spec.to_json() if self.spec else None
        return {
            "tool": {"name": "schreier-expanders", "version": __version__},
            "label": self.label,
            "spec": spec,
            "unit": self.unit,
            "bins": len(self.counts),
            "trials": None if self.spec is None else self.spec.trials,
            "failures": self.failures,
            "seed_lineage": {
                "master_seed": None if self.spec is None else self.spec.master_seed,
                "prng": PRNG,
                "child_seed_rule": CHILD_SEED_RULE,
            },
            "summary": self.summary,
        }


def grid(samples: Sequence[float], bins: int) -> np.ndarray:
    lo, hi = float(np.min(samples)), float(np.max(samples))
    if hi - lo < 1e-12:
        lo, hi = lo - 1e-3, hi + 1e-3
    return np.linspace(lo, hi, bins + 1)


def histogram_from_samples(samples, edges, unit, failures=0, label="", spec=None, keep_samples=True) -> Histogram:
    counts, _ = np.histogram(samples, bins=edges)
    return Histogram(
        unit=float(unit),
        edges=[float(e) for e in edges],
        counts=[int(c) for c in counts],
        summary=summary_stats(samples),
        failures=failures,
        samples=[float(s) for s in samples] if keep_samples else None,
        label=label,
        spec=spec,
    )


def _trial(spec: ExperimentSpec, t: int) -> Optional[float]:
    graph = spec.build(child_seed(spec.master_seed, t))
    try:
        res = spectrum(graph, spec.tol)
    except SpectrumError as exc:
        log.warning("trial %d of %s failed: %s", t, spec.label, exc)
        return None
    return res.normalized


def sample_distribution(spec: ExperimentSpec, threads: int = 1):
    """Normalized values in trial order, plus the failure count."""
    trials = range(spec.trials)
    if threads <= 1:
        values = [_trial(spec, t) for t in trials]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda t: _trial(spec, t), trials))
    failures = sum(v is None for v in values)
    if failures > MAX_FAILURE_FRACTION * spec.trials:
        raise ExperimentError(f"{failures} of {spec.trials} solves failed for {spec.label}")
    return [v for v in values if v is not None], failures


def run_distribution(spec: ExperimentSpec, threads: int = 1, keep_samples: bool = True) -> Histogram:
    samples, failures = sample_distribution(spec, threads)
    if not samples:
        raise ExperimentError("no successful trials")
    return histogram_from_samples(samples, grid(samples, spec.bins), spec.unit, failures,
                                  spec.label, spec, keep_samples)


def compare_models(specs: Sequence[ExperimentSpec], threads: int = 1,
                   allow_mixed_units: bool = False) -> List[Histogram]:
    """Histograms of several experiments over one shared bin grid.

    Values are already normalized, so ``allow_mixed_units`` lets degree
    sweeps share a grid too.
    """
    if not specs:
        raise ValueError("no experiments given")
    units = {round(s.unit, 12) for s in specs}
    if len(units) > 1 and not allow_mixed_units:
        raise ExperimentError(f"experiments have different threshold units: {sorted(units)}")
    runs = [sample_distribution(s, threads) for s in specs]
    pooled = [v for samples, _ in runs for v in samples]
    if not pooled:
        raise ExperimentError("no successful trials")
    bins = max(s.bins for s in specs)
    edges = grid(pooled, bins)
    return [histogram_from_samples(samples, edges, s.unit, failures, s.label, s)
            for s, (samples, failures) in zip(specs, runs)]


# -- walk probe ---------------------------------------------------------------

@dataclass
class ProbeResult:
    n: int
    m: int
    trials: int
    singleton_trials: int
    conditional: float
    conditional_se: float
    unconditional: float
    unconditional_se: float

    @property
    def expected(self) -> float:
        return 1.0 / self.n

    def z_conditional(self) -> float:
        if self.conditional_se == 0:
            return math.inf if self.conditional != self.expected else 0.0
        return (self.conditional - self.expected) / self.conditional_se


def _proportion(hits: int, total: int):
    if total == 0:
        return math.nan, math.nan
    p = hits / total
    return p, math.sqrt(p * (1 - p) / total)


def walk_probe(graph, m: int, trials: int, seed: int, chunk: int = 5000) -> ProbeResult:
    """Closed-walk frequency of random 2m-letter words with fresh generators per trial.

    Only the graph's model, field and generator count are used; each trial
    draws g new generators, a uniform word over the 2g signed literals and a
    uniform start vertex.  Trials are processed in vectorized chunks.
    """
    gens: GeneratorSet = graph.gens
    g = gens.g
    if g < 2:
        raise ValueError("walk probe needs at least two generators")
    if m < 1 or trials < 1:
        raise ValueError("m and trials must be >= 1")
    rng = np.random.default_rng(seed)
    n, model, params = gens.n, gens.model, gens.params
    coords = None if model == "permutation" else ff.all_vertex_coords(params)
    closed = singles = closed_single = 0
    for lo in range(0, trials, chunk):
        size = min(chunk, trials - lo)
        word = rng.integers(0, 2 * g, size=(size, 2 * m))
        letters, inverse = word // 2, (word % 2).astype(bool)
        start = rng.integers(0, n, size=size)
        rows = np.arange(size)
        if model == "permutation":
            fwd = np.argsort(rng.random((size, g, n)), axis=2)
            bwd = np.argsort(fwd, axis=2)
            x = start.copy()
            for pos in range(2 * m):
                a = letters[:, pos]
                x = np.where(inverse[:, pos], bwd[rows, a, x], fwd[rows, a, x])
            hit = x == start
        else:
            q, k = params.q, params.k
            mats, invs = ff.random_invertible_batch(params, rng, size * g, toeplitz=model == "toeplitz")
            mats, invs = mats.reshape(size, g, k, k), invs.reshape(size, g, k, k)
            v0 = coords[start]
            v = v0.copy()
            for pos in range(2 * m):
                a = letters[:, pos]
                mat = np.where(inverse[:, pos, None, None], invs[rows, a], mats[rows, a])
                v = np.einsum("tij,tj->ti", mat, v) % q
            hit = (v == v0).all(axis=1)
        occurrences = np.zeros((size, g), dtype=np.int64)
        np.add.at(occurrences, (np.repeat(rows, 2 * m), letters.ravel()), 1)
        single = (occurrences == 1).any(axis=1)
        closed += int(hit.sum())
        singles += int(single.sum())
        closed_single += int((hit & single).sum())
    cond, cond_se = _proportion(closed_single, singles)
    unc, unc_se = _proportion(closed, trials)
    return ProbeResult(n, m, trials, singles, cond, cond_se, unc, unc_se)


# -- presets ----------------------------------------------------------------

def _fig_triple(kind, g, gamma, scale, trials):
    if scale == "desk":
        rows = [("gl", 2, 10, None), ("permutation", None, None, 1023), ("gl", 7, 3, None)]
    else:
        rows = [("gl", 2, 14, None), ("permutation", None, None, 16383), ("gl", 7, 5, None)]
    return [ExperimentSpec(kind=kind, model=mo, q=q, k=k, n=n, g=g, gamma=gamma, trials=trials,
                           master_seed=1 + i)
            for i, (mo, q, k, n) in enumerate(rows)]


def preset(name: str) -> tuple:
    """Return (specs, allow_mixed_units) for a named figure protocol."""
    try:
        fig, scale = name.rsplit("-", 1)
    except ValueError:
        raise KeyError(name) from None
    if scale not in ("desk", "full"):
        raise KeyError(name)
    trials = 200 if scale == "desk" else 5000
    big = scale == "full"
    k0 = 14 if big else 10
    if fig == "fig1":
        return _fig_triple("regular", 15, 1, scale, trials), False
    if fig == "fig2-degree":
        return [ExperimentSpec(g=g, k=k0, trials=trials, master_seed=10 + i)
                for i, g in enumerate((5, 15, 30, 60))], True
    if fig == "fig2-dim":
        dims = (11, 12, 13, 14) if big else (7, 8, 9, 10)
        return [ExperimentSpec(k=k, trials=trials, master_seed=20 + i) for i, k in enumerate(dims)], False
    if fig == "fig3":
        return _fig_triple("bipartite", 30, 1, scale, trials), False
    if fig == "fig4":
        return _fig_triple("merged", 10, 3, scale, trials), False
    if fig == "fig5":
        k7 = 5 if big else 3
        rows = [("gl", 2, k0), ("toeplitz", 2, k0), ("gl", 7, k7), ("toeplitz", 7, k7)]
        return [ExperimentSpec(model=mo, q=q, k=k, trials=trials, master_seed=30 + i)
                for i, (mo, q, k) in enumerate(rows)], False
    if fig == "fig5-parity":
        dims = (12, 13, 14, 15) if big else (7, 8, 9, 10)
        return [ExperimentSpec(model="toeplitz", k=k, trials=trials, master_seed=40 + i)
                for i, k in enumerate(dims)], False
    raise KeyError(name)


PRESETS = [f"{fig}-{scale}" for fig in ("fig1", "fig2-degree", "fig2-dim", "fig3", "fig4", "fig5", "fig5-parity")
           for scale in ("desk", "full")]
