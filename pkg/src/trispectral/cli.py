"""Command-line front end.

Commands
--------
solve      run a problem spec file, write coefficients and diagnostics
spy        dump the sparsity pattern and profile of a named operator
bench      time build, factorization and solve over a list of degrees
eval       evaluate a coefficient file at points from a CSV file
transform  expand a builtin function in a chosen basis

Every command writes ``manifest.json`` into its output directory.  Exit
status is 0 on success, 2 for bad input (unparsable spec, unknown names,
boundary data that does not fit the problem) and 3 when the solver fails.
Errors are also reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__, builtins, clear_caches
from .blockbanded import dof
from .coefficients import EDGE, BasisTag, CoefficientVector, read_coefficients, write_coefficients
from .evaluate import evaluate
from .pde import (
    RegimeError,
    solve_biharmonic,
    solve_first_order_system,
    solve_helmholtz_zero_dirichlet,
    solve_laplace_dirichlet,
    solve_poisson_zero_dirichlet,
    solve_transport,
    transport_regime,
)
from .polygon import PolygonMesh, hexagon_mesh, solve_polygon_helmholtz

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3
PROBLEMS = ("poisson", "helmholtz", "biharmonic", "laplace", "transport", "neumann", "polygon")
SPY_OPERATORS = ("laplacian_strong", "laplacian_weighted", "helmholtz_weighted", "biharmonic", "tilde_laplacian")


class InputError(Exception):
    """Bad spec, file or name; maps to exit status 2."""

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class SolverError(Exception):
    """Numerical failure; maps to exit status 3."""


# ----------------------------------------------------------------- output
def _fmt(v) -> str:
    return f"{float(v):.17g}"


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Collects timings and outputs of one command and writes the manifest."""

    def __init__(self, command: str, out: Path, parameters: dict, inputs=()):
        self.command = command
        self.out = Path(out)
        self.parameters = parameters
        self.inputs = [str(p) for p in inputs]
        self.timings: dict = {}
        self.outputs: list = []
        self.status = "ok"
        self.error = None

    def output(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(p)
        return p

    def timed(self, key: str):
        run = self

        class _T:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[key] = run.timings.get(key, 0.0) + time.perf_counter() - self.t0

        return _T()

    def write_manifest(self) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        manifest = {
            "command": self.command,
            "status": self.status,
            "version": __version__,
            "python": platform.python_version(),
            "parameters": self.parameters,
            "inputs": self.inputs,
            "outputs": {p.name: _sha256(p) for p in self.outputs if p.exists()},
            "timings": self.timings,
        }
        if self.error is not None:
            manifest["error"] = self.error
        path = self.out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return path


# ------------------------------------------------------------- spec parsing
def load_spec(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read spec: {exc}") from None
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc.msg}", line=exc.lineno, column=exc.colno, position=exc.pos) from None
    if not isinstance(spec, dict):
        raise InputError("spec must be a JSON object")
    return spec


def _require(spec: dict, key: str, kind=None):
    if key not in spec:
        raise InputError(f"spec is missing {key!r}")
    v = spec[key]
    if kind is not None and not isinstance(v, kind):
        raise InputError(f"{key!r} has the wrong type: {type(v).__name__}")
    return v


def _degree(spec: dict, default=None) -> int:
    N = spec.get("N", default)
    if N is None:
        raise InputError("spec is missing 'N'")
    if not isinstance(N, int) or isinstance(N, bool) or N < 2:
        raise InputError(f"'N' must be an integer >= 2, got {N!r}")
    return N


def _function(value, base: Path):
    """Builtin name, number or ``{"file": path}`` for a triangle function or forcing."""
    if value is None:
        return None
    if isinstance(value, bool):
        raise InputError(f"invalid function value {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return builtins.lookup(value)
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from None
    if isinstance(value, dict) and "file" in value:
        return _read_coeff_file(base / value["file"])
    raise InputError(f"invalid function value {value!r}")


def _edge_function(value, edge: str, base: Path):
    if value is None or isinstance(value, (int, float)) and not isinstance(value, bool):
        return value
    if isinstance(value, str):
        try:
            return builtins.lookup_edge(value, edge)
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from None
    if isinstance(value, dict) and "file" in value:
        vec = _read_coeff_file(base / value["file"])
        if not vec.basis.is_edge:
            raise InputError(f"edge data file must hold a legendre-edge expansion, got {vec.basis}")
        return vec
    raise InputError(f"invalid edge data {value!r}")


def _edges(value, base: Path, allowed=("x", "y", "z"), all_edges=True) -> dict:
    if isinstance(value, dict) and "file" not in value:
        bad = set(value) - set(allowed)
        if bad:
            raise InputError(f"unknown edges {sorted(bad)}; edges are {list(allowed)}")
        return {e: _edge_function(v, e, base) for e, v in value.items()}
    if not all_edges:
        raise InputError("boundary must map edge names to data")
    return {e: _edge_function(value, e, base) for e in allowed}


def _read_coeff_file(path: Path) -> CoefficientVector:
    try:
        return read_coefficients(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read coefficient file {path}: {exc}") from None


def _mesh(value) -> PolygonMesh:
    if value in (None, "hexagon"):
        return hexagon_mesh()
    try:
        return PolygonMesh.from_vertices(value["vertices"], value["triangles"])
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise InputError(f"invalid mesh: {exc}") from None


def plan_solve(spec: dict, base: Path):
    """Validate ``spec`` and return ``(parameters, thunk)``; the thunk runs the solve."""
    problem = _require(spec, "problem", str)
    if problem not in PROBLEMS:
        raise InputError(f"unknown problem {problem!r}; known: {list(PROBLEMS)}")
    params = {"problem": problem}
    if problem == "poisson":
        N = params["N"] = _degree(spec)
        f = _function(spec.get("forcing", "zero"), base)
        return params, lambda: solve_poisson_zero_dirichlet(f, N)
    if problem == "biharmonic":
        N = params["N"] = _degree(spec)
        f = _function(spec.get("forcing", "zero"), base)
        return params, lambda: solve_biharmonic(f, N)
    if problem == "helmholtz":
        k = params["k"] = float(_require(spec, "k", (int, float)))
        N = params["N"] = _degree(spec, max(int(np.ceil(2 * abs(k))), 32))
        v = _function(spec.get("v", "one"), base)
        f = _function(spec.get("forcing", "zero"), base)
        return params, lambda: solve_helmholtz_zero_dirichlet(v, k, f, N)
    if problem == "laplace":
        N = params["N"] = _degree(spec)
        data = _edges(_require(spec, "boundary"), base)
        f = _function(spec.get("forcing"), base)
        return params, lambda: solve_laplace_dirichlet(data.get("x"), data.get("y"), data.get("z"), N, forcing=f)
    if problem == "transport":
        c = params["c"] = float(_require(spec, "c", (int, float)))
        N = params["N"] = _degree(spec)
        data = _edges(_require(spec, "boundary"), base, all_edges=False)
        flags, needed = transport_regime(c)
        if set(data) != set(needed):
            raise InputError(
                f"c = {c:g} needs boundary data on edges {sorted(needed)}, got {sorted(data)}",
                basis=list(flags),
            )
        return params, lambda: solve_transport(c, data, N)
    if problem == "neumann":
        N = params["N"] = _degree(spec)
        f = _function(spec.get("forcing", "zero"), base)
        data = _edges(spec.get("boundary", {}), base, all_edges=False)
        mean = float(spec.get("mean", 0.0))
        return params, lambda: solve_first_order_system(f, N, boundary="neumann", data=data, mean=mean)
    # polygon
    k = params["k"] = float(spec.get("k", 0.0))
    N = params["N"] = _degree(spec, max(int(np.ceil(2 * abs(k))), 20))
    mesh = _mesh(spec.get("mesh"))
    g = _function(_require(spec, "boundary"), base)
    if isinstance(g, CoefficientVector):
        raise InputError("polygon boundary data must be a builtin name or a number")
    params["elements"] = len(mesh)
    return params, lambda: solve_polygon_helmholtz(mesh, k, g, N)


def _grid_points(n: int):
    s = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(s, s, indexing="ij")
    keep = X + Y < 1
    return X[keep], Y[keep]


def _write_solution(run: Run, sol, grid: int | None) -> None:
    parts = sol.elements if hasattr(sol, "elements") else [sol]
    if len(parts) == 1:
        write_coefficients(run.output("solution.json"), parts[0].u)
        if parts[0].tau.size:
            run.output("tau.json").write_text(json.dumps([float(t) for t in parts[0].tau]) + "\n")
    else:
        for i, p in enumerate(parts):
            write_coefficients(run.output(f"solution_{i}.json"), p.u)
    rows = [(i, n, float(b)) for i, p in enumerate(parts) for n, b in enumerate(p.block_norms)]
    if len(parts) == 1:
        write_csv(run.output("diagnostics.csv"), ["block_index", "block_norm"], [r[1:] for r in rows])
    else:
        write_csv(run.output("diagnostics.csv"), ["element", "block_index", "block_norm"], rows)
    if grid:
        if len(parts) == 1:
            X, Y = _grid_points(grid)
            U = parts[0](X, Y)
        else:
            pts = np.concatenate([e.vertices for e in sol.mesh.elements])
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], grid), np.linspace(lo[1], hi[1], grid), indexing="ij")
            X, Y = gx.ravel(), gy.ravel()
            U = sol(X, Y)
            keep = np.isfinite(U)
            X, Y, U = X[keep], Y[keep], U[keep]
        write_csv(run.output("grid.csv"), ["x", "y", "u"], zip(X.tolist(), Y.tolist(), U.tolist()))


# ---------------------------------------------------------------- commands
def cmd_solve(args) -> int:
    out = Path(args.out)
    run = Run("solve", out, {}, [args.spec])
    try:
        spec = load_spec(args.spec)
        params, thunk = plan_solve(spec, Path(args.spec).resolve().parent)
        run.parameters = params
        grid = spec.get("grid")
        if grid is not None and (not isinstance(grid, int) or grid < 1):
            raise InputError(f"'grid' must be a positive integer, got {grid!r}")
    except InputError as exc:
        return _fail(run, exc, EXIT_INPUT)
    try:
        with run.timed("total"):
            sol = thunk()
    except RegimeError as exc:
        return _fail(run, exc, EXIT_INPUT)
    except (np.linalg.LinAlgError, RuntimeError, ValueError, FloatingPointError) as exc:
        return _fail(run, exc, EXIT_SOLVER)
    parts = sol.elements if hasattr(sol, "elements") else [sol]
    for key in ("assemble", "factor", "solve"):
        run.timings[key] = float(sum(p.timings.get(key, 0.0) for p in parts))
    out.mkdir(parents=True, exist_ok=True)
    _write_solution(run, sol, spec.get("grid"))
    run.parameters["residual_norm"] = float(sol.residual_norm)
    run.write_manifest()
    _info(args, f"solved {params['problem']} (N = {params['N']}), residual {sol.residual_norm:.3e}; wrote {out}")
    return EXIT_OK


def _spy_operator(name: str, N: int):
    from . import dirichlet, triops

    base, _, opts = name.partition(":")
    if base not in SPY_OPERATORS:
        raise InputError(f"unknown operator {name!r}; known: {list(SPY_OPERATORS)}")
    if base == "helmholtz_weighted":
        kv = dict(o.split("=", 1) for o in opts.split(",") if "=" in o)
        from .transform import analysis

        v = analysis((0, 0, 0), _function(kv.get("v", "one"), Path.cwd()), 10)
        v = v.trim(1e-14 * (np.max(np.abs(v.values)) or 1.0))
        return triops.helmholtz_weighted(v, float(kv.get("k", 1.0)), N)
    if base == "tilde_laplacian":
        return dirichlet.tilde_laplacian(N)
    return getattr(triops, base)(N)


def cmd_spy(args) -> int:
    out = Path(args.out)
    run = Run("spy", out, {"operator": args.operator, "N": args.degree})
    try:
        if args.operator is None:
            raise InputError("--operator is required")
        if args.degree is None or args.degree < 2:
            raise InputError("--degree must be an integer >= 2")
        with run.timed("build"):
            op = _spy_operator(args.operator, args.degree)
        if op.nnz == 0:
            raise InputError(f"operator {args.operator!r} has no nonzero entries")
    except InputError as exc:
        return _fail(run, exc, EXIT_INPUT)
    out.mkdir(parents=True, exist_ok=True)
    coo = op.tocsr().tocoo()
    order = np.lexsort((coo.col, coo.row))
    write_csv(run.output("spy.csv"), ["row", "col", "value"],
              zip(coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist()))
    (bl, bu), (sl, su) = op.measured_bandwidths()
    summary = {
        "operator": args.operator,
        "N": args.degree,
        "shape": list(op.shape),
        "nnz": int(op.nnz),
        "block_bandwidths": [bl, bu],
        "sub_bandwidths": [sl, su],
        "source": str(op.source),
        "target": str(op.target),
    }
    p = run.output("summary.json")
    p.write_text(json.dumps(summary, indent=1) + "\n")
    run.write_manifest()
    _info(args, json.dumps(summary))
    return EXIT_OK


def _bench_once(problem: str, N: int):
    from . import pde, triops
    from .blockbanded import band_lu_factor

    clear_caches()
    t0 = time.perf_counter()
    if problem == "poisson":
        op = triops.laplacian_weighted(N).truncate(N + 1, N + 1)
    elif problem == "biharmonic":
        op = triops.biharmonic(N).truncate(N + 1, N + 1)
    elif problem == "helmholtz":
        v = pde._v_coefficients(builtins.lookup("helmholtz-v"), N, 4)
        op = triops.helmholtz_weighted(v, 1.0, N).truncate(N + 1, N + 1)
    else:
        raise InputError(f"bench supports poisson, helmholtz and biharmonic, got {problem!r}")
    t1 = time.perf_counter()
    lu = band_lu_factor(op.to_band())
    t2 = time.perf_counter()
    lu.solve(np.ones(op.shape[0]))
    t3 = time.perf_counter()
    return t1 - t0, t2 - t1, t3 - t2


def cmd_bench(args) -> int:
    out = Path(args.out)
    run = Run("bench", out, {"problem": args.problem, "degrees": args.degrees, "repeat": args.repeat})
    try:
        Ns = [int(s) for s in str(args.degrees).split(",") if s.strip()]
        if not Ns or any(b <= a for a, b in zip(Ns, Ns[1:])) or Ns[0] < 2:
            raise InputError("--degrees must be an increasing list of integers >= 2")
        rows = []
        for N in Ns:
            samples = np.array([_bench_once(args.problem, N) for _ in range(args.repeat)])
            med = np.median(samples, axis=0)
            rows.append((N, dof(N), *[float(m) for m in med]))
            _info(args, f"N = {N}: build {med[0]:.4f}s factor {med[1]:.4f}s solve {med[2]:.4f}s")
    except InputError as exc:
        return _fail(run, exc, EXIT_INPUT)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(run.output("bench.csv"), ["N", "dof", "build_s", "factor_s", "solve_s"], rows)
    run.timings = {f"N{r[0]}": {"build": r[2], "factor": r[3], "solve": r[4]} for r in rows}
    run.write_manifest()
    return EXIT_OK


def read_points(path) -> np.ndarray:
    """Points from a CSV file with one (edge) or two columns; a header row is optional."""
    rows = []
    with open(path, newline="") as fh:
        for i, r in enumerate(csv.reader(fh)):
            r = [c.strip() for c in r if c.strip()]
            if not r:
                continue
            try:
                rows.append([float(c) for c in r])
            except ValueError:
                if i == 0:
                    continue
                raise InputError(f"non-numeric entry on line {i + 1} of {path}") from None
    if not rows or len({len(r) for r in rows}) != 1 or len(rows[0]) not in (1, 2):
        raise InputError(f"{path} must hold one or two numeric columns")
    return np.array(rows)


def cmd_eval(args) -> int:
    out = Path(args.out)
    run = Run("eval", out, {}, [args.coefficients, args.points])
    try:
        if not args.coefficients or not args.points:
            raise InputError("--coefficients and --points are required")
        vec = _read_coeff_file(Path(args.coefficients))
        pts = read_points(args.points)
        if vec.basis.is_edge != (pts.shape[1] == 1):
            raise InputError("edge expansions take one column of points, triangle expansions two")
    except (InputError, OSError) as exc:
        return _fail(run, exc if isinstance(exc, InputError) else InputError(str(exc)), EXIT_INPUT)
    run.parameters = {"basis": vec.basis.to_json(), "degree": vec.degree, "points": len(pts)}
    with run.timed("evaluate"):
        vals = evaluate(vec, pts[:, 0]) if vec.basis.is_edge else evaluate(vec, pts[:, 0], pts[:, 1])
    out.mkdir(parents=True, exist_ok=True)
    header = ["s", "u"] if vec.basis.is_edge else ["x", "y", "u"]
    write_csv(run.output("values.csv"), header, (list(map(float, p)) + [float(v)] for p, v in zip(pts, vals)))
    run.write_manifest()
    return EXIT_OK


def cmd_transform(args) -> int:
    from .transform import analysis, legendre_edge_transform

    out = Path(args.out)
    run = Run("transform", out, {"function": args.function, "degree": args.degree, "basis": args.basis})
    try:
        if args.function is None or args.degree is None or args.degree < 0:
            raise InputError("--function and a nonnegative --degree are required")
        if args.basis == "edge":
            try:
                f = builtins.lookup_edge(args.function, "y")
            except KeyError as exc:
                raise InputError(str(exc.args[0])) from None
        else:
            try:
                p = tuple(int(v) for v in args.basis.split(","))
                BasisTag("P", p)
                if min(p) < 0:
                    raise ValueError
            except ValueError:
                raise InputError(f"--basis must be 'edge' or 'a,b,c' with nonnegative integers, got {args.basis!r}") from None
            f = _function(args.function, Path.cwd())
            if not callable(f):
                c = float(f)
                f = lambda x, y: np.full_like(x, c)  # noqa: E731
    except InputError as exc:
        return _fail(run, exc, EXIT_INPUT)
    with run.timed("transform"):
        vec = legendre_edge_transform(f, args.degree) if args.basis == "edge" else analysis(p, f, args.degree)
    out.mkdir(parents=True, exist_ok=True)
    write_coefficients(run.output("coefficients.json"), vec)
    run.write_manifest()
    return EXIT_OK


# ------------------------------------------------------------------ driver
def _fail(run: Run, exc: Exception, status: int) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_status": status}
    err.update(getattr(exc, "details", {}))
    print(json.dumps(err), file=sys.stderr)
    run.status = "error"
    run.error = err
    try:
        run.out.mkdir(parents=True, exist_ok=True)
        p = run.output("error.json")
        p.write_text(json.dumps(err, indent=1) + "\n")
        run.write_manifest()
    except OSError:
        pass
    return status


def _info(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")

    ap = argparse.ArgumentParser(prog="trispectral", description="Sparse spectral PDE solver on triangles.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve a problem spec")
    s.add_argument("--spec", required=True, help="problem spec JSON file")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("spy", parents=[common], help="sparsity pattern of an operator")
    s.add_argument("--operator", help=f"one of {', '.join(SPY_OPERATORS)}; e.g. helmholtz_weighted:v=xy2")
    s.add_argument("--degree", type=int, help="truncation degree N")
    s.set_defaults(func=cmd_spy)

    s = sub.add_parser("bench", parents=[common], help="time build, factorization and solve")
    s.add_argument("--problem", default="poisson", help="poisson, helmholtz or biharmonic")
    s.add_argument("--degrees", default="40,80,160", help="comma-separated increasing degrees")
    s.add_argument("--repeat", type=int, default=3, help="measurements per degree (median reported)")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("eval", parents=[common], help="evaluate a coefficient file at points")
    s.add_argument("--coefficients", help="coefficient JSON file")
    s.add_argument("--points", help="CSV of x,y (or s for edge expansions)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("transform", parents=[common], help="expand a builtin function")
    s.add_argument("--function", help="builtin function name")
    s.add_argument("--degree", type=int, help="truncation degree N")
    s.add_argument("--basis", default="0,0,0", help="'a,b,c' for P^(a,b,c) or 'edge' (default 0,0,0)")
    s.set_defaults(func=cmd_transform)
    return ap


def _thread_limit():
    n = os.environ.get("THREADS")
    if not n:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(int(n))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    with _thread_limit():
        return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
