"""Command line: gen, inspect, spectrum, experiment, bound.

Exit codes: 0 ok, 2 bad arguments, 3 invalid parameters or input,
4 solver did not converge, 5 resource cap hit.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from . import bounds as bd
from .experiments import (
    ExperimentError,
    ExperimentSpec,
    PRESETS,
    compare_models,
    preset,
    run_distribution,
)
from .graphs import (
    BipartiteGraph,
    GeneratorSet,
    MergedGraph,
    SchreierGraph,
    edge_lines,
    graph_from_json,
    graph_to_json,
)
from .spectral import DEFAULT_TOL, SpectrumError, spectrum

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVALID = 3
EXIT_SOLVER = 4
EXIT_RESOURCE = 5

THREADS_ENV = "SCHREIER_THREADS"
MODEL_NAMES = {"gl": "gl", "toeplitz": "toeplitz", "perm": "permutation", "permutation": "permutation"}

log = logging.getLogger("schreier_expanders")


class _Failure(Exception):
    def __init__(self, code: int, message: str, payload: Optional[dict] = None):
        super().__init__(message)
        self.code = code
        self.payload = payload


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _tool() -> dict:
    return {"name": "schreier-expanders", "version": __version__}


def _load_graph(path: str):
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise _Failure(EXIT_INVALID, f"cannot read descriptor {path}: {exc}") from None
    try:
        return obj, graph_from_json(obj)
    except (KeyError, TypeError) as exc:
        raise _Failure(EXIT_INVALID, f"malformed descriptor {path}: missing or bad field {exc}") from None


def _shape(graph) -> dict:
    if isinstance(graph, SchreierGraph):
        return {"n": graph.n, "degree": graph.degree}
    return {"n_left": graph.n_left, "n_right": graph.n_right, "degrees": list(graph.degrees)}


# -- gen ----------------------------------------------------------------------

def cmd_gen(args) -> int:
    model = MODEL_NAMES[args.model]
    if model == "permutation":
        if args.n is None:
            raise _Failure(EXIT_INVALID, "--model perm needs --n")
        q = k = None
    else:
        if args.k is None:
            raise _Failure(EXIT_INVALID, f"--model {args.model} needs --k")
        if args.n is not None and args.n != args.q**args.k - 1:
            raise _Failure(EXIT_INVALID, f"--n {args.n} disagrees with q^k - 1 = {args.q**args.k - 1}")
        q, k = args.q, args.k
    gens = GeneratorSet.sample(model, args.gens, args.seed, q=q, k=k, n=args.n)
    if args.gamma is not None:
        graph = MergedGraph(gens, gamma=args.gamma, shuffle_seed=args.shuffle_seed)
    elif args.bipartite:
        graph = BipartiteGraph(gens)
    else:
        graph = SchreierGraph(gens)
    desc = graph_to_json(graph)
    desc.update(_shape(graph))
    desc["tool"] = _tool()
    desc["config"] = {
        "model": model, "q": q, "k": k, "n": gens.n, "gens": args.gens, "seed": args.seed,
        "bipartite": bool(args.bipartite or args.gamma is not None), "gamma": args.gamma,
        "shuffle_seed": args.shuffle_seed,
    }
    _emit(_dump(desc), args.out)
    if args.edges:
        Path(args.edges).write_text("".join(line + "\n" for line in edge_lines(graph)))
    return EXIT_OK


# -- inspect ------------------------------------------------------------------

def cmd_inspect(args) -> int:
    obj, graph = _load_graph(args.descriptor)
    gens = graph.gens
    info = {"type": obj["type"], "model": gens.model, "g": gens.g, "seed": gens.seed, **_shape(graph)}
    if gens.model != "permutation":
        info["q"], info["k"] = gens.params.q, gens.params.k
    if isinstance(graph, MergedGraph):
        info["gamma"], info["shuffle_seed"] = graph.gamma, graph.shuffle_seed
    if args.vertex is not None:
        side = args.side
        if isinstance(graph, SchreierGraph):
            info["neighbors"] = graph.neighbors(args.vertex)
        else:
            info["neighbors"] = graph.neighbors(args.vertex, side)
        info["vertex"], info["side"] = args.vertex, side
    info["tool"] = _tool()
    _emit(_dump(info), None)
    return EXIT_OK


# -- spectrum -------------------------------------------------------------------

def cmd_spectrum(args) -> int:
    obj, graph = _load_graph(args.descriptor)
    try:
        res = spectrum(graph, args.tol, dense=args.dense)
    except SpectrumError as exc:
        raise _Failure(EXIT_SOLVER, str(exc), {
            "error": "no-convergence", "estimate": exc.estimate, "residual": exc.residual,
            "iterations": exc.iterations, "tol": args.tol,
        }) from None
    out = res.to_json()
    out["config"] = {"descriptor_type": obj["type"], "seed": graph.gens.seed, "tol": args.tol,
                     "dense": args.dense, **_shape(graph)}
    out["tool"] = _tool()
    _emit(_dump(out), args.out)
    return EXIT_OK


# -- experiment -------------------------------------------------------------------

def _threads(args) -> int:
    if args.threads is not None:
        value = args.threads
    else:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            value = int(raw)
        except ValueError:
            raise _Failure(EXIT_INVALID, f"{THREADS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise _Failure(EXIT_INVALID, "thread count must be >= 1")
    return value


def _flag_spec(args) -> ExperimentSpec:
    model = MODEL_NAMES[args.model]
    kind = args.kind
    return ExperimentSpec(
        kind=kind, model=model,
        q=None if model == "permutation" else args.q,
        k=None if model == "permutation" else args.k,
        n=args.n, g=args.gens, gamma=args.gamma if args.gamma is not None else 1,
        trials=args.trials if args.trials is not None else 5000, bins=args.bins,
        master_seed=args.seed, tol=args.tol, shuffle_seed=args.shuffle_seed,
    )


def cmd_experiment(args) -> int:
    threads = _threads(args)
    mixed = False
    source = "flags"
    if args.preset:
        specs, mixed = preset(args.preset)
        source = f"preset:{args.preset}"
        if args.trials is not None:
            for s in specs:
                s.trials = args.trials
                s.validate()
    elif args.spec:
        try:
            raw = json.loads(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise _Failure(EXIT_INVALID, f"cannot read experiment spec {args.spec}: {exc}") from None
        items = raw if isinstance(raw, list) else [raw]
        specs = [ExperimentSpec.from_json(item) for item in items]
        source = f"spec:{Path(args.spec).name}"
        mixed = args.allow_mixed_units
    else:
        specs = [_flag_spec(args)]
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise _Failure(EXIT_INVALID, f"experiment labels must be unique: {labels}")
    try:
        if len(specs) == 1:
            hists = [run_distribution(specs[0], threads)]
        else:
            hists = compare_models(specs, threads, allow_mixed_units=mixed)
    except ExperimentError as exc:
        code = EXIT_SOLVER if "failed" in str(exc) else EXIT_INVALID
        raise _Failure(code, str(exc)) from None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for h in hists:
        csv_path = out_dir / f"{h.label}.csv"
        json_path = out_dir / f"{h.label}.json"
        csv_path.write_text(h.to_csv())
        meta = h.sidecar()
        meta["source"] = source
        meta["allow_mixed_units"] = mixed
        meta["common_grid"] = len(hists) > 1
        json_path.write_text(_dump(meta))
        written.append({"label": h.label, "csv": csv_path.name, "sidecar": json_path.name,
                        "summary": h.summary, "failures": h.failures})
    _emit(_dump({"source": source, "out_dir": str(out_dir), "runs": written, "tool": _tool()}), None)
    return EXIT_OK


# -- bound ------------------------------------------------------------------------

def cmd_bound(args) -> int:
    kind = args.kind
    if kind == "prop1":
        res = bd.prop1_result(args.k, args.d, args.q)
    elif kind == "merged":
        if args.gamma is None:
            raise _Failure(EXIT_INVALID, "--kind merged needs --gamma")
        if args.alpha is None:
            bd._check_q(args.q)
        res = bd.merged_result(args.k, args.d, args.gamma, args.alpha, args.variant)
    elif args.m is not None:
        if kind == "regular":
            value, ram, variant = bd.bound_regular(args.k, args.d, args.m, args.q), bd.ramanujan_regular(args.d), "trace-regular"
        else:
            value = bd.bound_bipartite(args.k, args.d, args.m, args.variant, args.q)
            ram, variant = bd.ramanujan_bipartite(args.d), args.variant
        res = bd.BoundResult(kind, args.k, args.d, value, args.m, ram, [(args.m, value)], variant)
    else:
        res = bd.optimize_m(kind, args.k, args.d, args.variant, args.q)
    out = res.to_json()
    out["config"] = {"kind": kind, "k": args.k, "d": args.d, "q": args.q, "gamma": args.gamma,
                     "alpha": args.alpha, "m": args.m, "variant": args.variant}
    out["tool"] = _tool()
    _emit(_dump(out), args.out)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="schreier", description="Random Schreier graphs of GL_k(F_q).")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def graph_flags(sp, defaults_k=None):
        sp.add_argument("--model", choices=sorted(MODEL_NAMES), default="gl")
        sp.add_argument("--q", type=int, default=2)
        sp.add_argument("--k", type=int, default=defaults_k)
        sp.add_argument("--n", type=int, help="vertex count (required for --model perm)")
        sp.add_argument("--gens", type=_positive, default=15, help="number of random generators g")
        sp.add_argument("--gamma", type=_positive, help="merge factor (implies a bipartite graph)")
        sp.add_argument("--shuffle-seed", type=int, help="shuffle right vertices before merging")

    g = sub.add_parser("gen", help="sample a graph and write its descriptor")
    graph_flags(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--bipartite", action="store_true")
    g.add_argument("--out", help="descriptor path (default stdout)")
    g.add_argument("--edges", help="also write an edge list 'u v multiplicity'")
    g.set_defaults(func=cmd_gen)

    i = sub.add_parser("inspect", help="summarize a descriptor")
    i.add_argument("descriptor")
    i.add_argument("--vertex", type=int)
    i.add_argument("--side", choices=("left", "right"), default="left")
    i.set_defaults(func=cmd_inspect)

    s = sub.add_parser("spectrum", help="second eigenvalue of a described graph")
    s.add_argument("descriptor")
    s.add_argument("--dense", action="store_true", help="full dense decomposition (small graphs)")
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    e = sub.add_parser("experiment", help="histogram of normalized second eigenvalues")
    src = e.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=PRESETS)
    src.add_argument("--spec", help="JSON file with one experiment spec or a list of them")
    e.add_argument("--kind", choices=("regular", "bipartite", "merged"), default="regular")
    graph_flags(e, defaults_k=10)
    e.add_argument("--trials", type=_positive)
    e.add_argument("--bins", type=_positive, default=40)
    e.add_argument("--seed", type=int, default=1, help="master seed")
    e.add_argument("--tol", type=float, default=DEFAULT_TOL)
    e.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    e.add_argument("--allow-mixed-units", action="store_true")
    e.add_argument("--out-dir", default=".")
    e.set_defaults(func=cmd_experiment)

    b = sub.add_parser("bound", help="upper bound on the expected second eigenvalue")
    b.add_argument("--kind", choices=("prop1", "regular", "bipartite", "merged"), required=True)
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--d", type=_positive, required=True, help="number of random matrices")
    b.add_argument("--q", type=int, default=2)
    b.add_argument("--gamma", type=_positive)
    b.add_argument("--alpha", type=float, help="normalized bipartite value to use for --kind merged")
    b.add_argument("--m", type=_positive, help="fixed walk half-length instead of the sweep")
    b.add_argument("--variant", choices=bd.VARIANTS, default=bd.DEFAULT_BIPARTITE_VARIANT)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bound)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_PARSE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.payload is not None:
            sys.stderr.write(_dump(exc.payload))
        return exc.code
    except MemoryError as exc:
        print(f"error: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except SpectrumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
