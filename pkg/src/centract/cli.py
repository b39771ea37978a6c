"""``centract`` command line: grid sweeps, compositions, integration and checks.

Exit codes: 0 success, 1 failed selftest, 2 invalid input (a JSON error
record goes to stderr), 3 numerical non-convergence (partial output is
written and flagged), 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from . import spaces as sp
from .actions import make_action, spec_from_dict
from .areas import quad_area, quad_diagonal_midpoint, quad_sigma, quad_split_area, triangle_area, triangle_vertices
from .central import CAUSTIC_LARGE, CAUSTIC_SMALL, CentralAction, caustic_indicators, central_map
from .compose import compose2, compose_chain
from .errors import CentractError, InvalidSpec, NoConvergence
from .evolve import Hamiltonian, action_of_flow, flow_action_provider, hj_residual, integrate_flow
from .expr import Expression

EXIT_OK, EXIT_SELFTEST, EXIT_DOMAIN, EXIT_NOCONV, EXIT_USAGE = 0, 1, 2, 3, 64

TOLERANCES = {
    "fd_step": sp.FD_STEP,
    "renorm_tol": sp.RENORM_TOL,
    "drift_tol": sp.DRIFT_TOL,
    "forward_tol": 1e-12,
    "compose_tol": 1e-10,
    "shooting_tol": 1e-12,
    "caustic_large": CAUSTIC_LARGE,
    "caustic_small": CAUSTIC_SMALL,
}

CHUNK = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# -- input parsing --------------------------------------------------------------
def _schema():
    text = resources.files("centract").joinpath("actionspec.schema.json").read_text()
    return json.loads(text)


def chart_names(space):
    return {"plane": ("p", "q"), "torus": ("p", "q"), "sphere": ("theta", "phi"),
            "hyperbolic": ("rho", "phi")}[space.name]


def parse_action(text, space):
    """An ActionSpec JSON string (or a bare expression) as a :class:`CentralAction`."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError:
        d = {"variant": "Expression", "expr": text}
    try:
        jsonschema.validate(d, _schema())
    except jsonschema.ValidationError as exc:
        raise InvalidSpec(f"action spec does not match the schema: {exc.message}") from None
    if d["variant"] == "Expression":
        if d.get("space", space.name) != space.name:
            raise InvalidSpec(f"expression declared for {d['space']} but --space is {space.name}")
        e = Expression(d["expr"], space)
        return CentralAction(space, lambda m: e(m), label=d["expr"])
    spec = spec_from_dict(d)
    if sp.get_space(spec.space) is not space:
        raise InvalidSpec(f"{spec.variant} lives on {spec.space}, not on {space.name}")
    return make_action(spec)


def parse_grid(text, space):
    """``a=lo:hi:n,b=lo:hi:n`` over the space's chart coordinates, as points (row-major)."""
    names = chart_names(space)
    axes = {}
    for part in text.split(","):
        try:
            name, rng = part.split("=")
            lo, hi, n = rng.split(":")
            lo, hi, n = float(lo), float(hi), int(n)
        except ValueError:
            raise UsageError(f"grid component {part!r} is not name=lo:hi:n") from None
        name = name.strip()
        if name not in names:
            raise UsageError(f"grid coordinate {name!r} not in {names}")
        if n < 1:
            raise UsageError("grid resolution must be positive")
        axes[name] = np.linspace(lo, hi, n)
    if set(axes) != set(names):
        raise UsageError(f"grid must give both coordinates {names}")
    A, B = np.meshgrid(axes[names[0]], axes[names[1]], indexing="ij")
    return _from_chart(space, A.ravel(), B.ravel())


def _from_chart(space, a, b):
    if space in (sp.PLANE, sp.TORUS):
        return space.check_point(np.stack([a, b], axis=-1))
    return space.from_chart(a, b)


def parse_point(value, space):
    """A point as chart coordinates (two numbers) or embedding coordinates."""
    if isinstance(value, str):
        try:
            value = json.loads(value) if value.strip().startswith("[") else [float(x) for x in value.split(",")]
        except ValueError:
            raise InvalidSpec(f"cannot read point {value!r}") from None
    a = np.asarray(value, dtype=float)
    if a.shape == (2,) and space.ambient_dim == 3:
        return _from_chart(space, a[0], a[1])
    if a.shape != (space.ambient_dim,):
        raise InvalidSpec(f"a {space.name} point needs 2 chart or {space.ambient_dim} embedding coordinates")
    try:
        return space.check_point(a)
    except sp.ConstraintDrift as exc:
        raise InvalidSpec(str(exc)) from None


def parse_points(text, space, count):
    try:
        pts = json.loads(text)
    except json.JSONDecodeError:
        raise InvalidSpec("midpoints must be a JSON list of points") from None
    if not isinstance(pts, list) or len(pts) != count:
        raise InvalidSpec(f"expected {count} points")
    return [parse_point(p, space) for p in pts]


def parse_hamiltonian(text, space):
    e = Expression(text, space)
    return Hamiltonian(space, e, autonomous=not e.uses_time, label=text)


# -- row evaluation ---------------------------------------------------------------
def _threads():
    raw = os.environ.get("CENTRACT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidSpec(f"CENTRACT_THREADS must be an integer, got {raw!r}") from None
    return (os.cpu_count() or 1) if n <= 0 else n


def _status(exc):
    if isinstance(exc, NoConvergence):
        return "no-convergence"
    return type(exc).__name__


def sweep(points, func):
    """Apply ``func`` (batch of points -> dict of arrays) in chunks; failing chunks retry pointwise.

    Returns a list of ``(values, status)`` pairs.  Output order is the input order whatever
    the thread count.
    """
    n = len(points)
    chunks = [points[i:i + CHUNK] for i in range(0, n, CHUNK)]

    def run(chunk):
        try:
            out = func(chunk)
            return [({k: np.asarray(v)[j] for k, v in out.items()}, "ok") for j in range(len(chunk))]
        except (CentractError, FloatingPointError, np.linalg.LinAlgError):
            pass
        rows = []
        for p in chunk:
            try:
                out = func(p[None])
                rows.append(({k: np.asarray(v)[0] for k, v in out.items()}, "ok"))
            except (CentractError, np.linalg.LinAlgError) as exc:
                rows.append((None, _status(exc)))
        return rows

    workers = _threads()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    flat = [r for res in results for r in res]
    template = next((r for r, s in flat if r is not None), None)
    rows = []
    for (vals, status), p in zip(flat, points):
        if vals is None:
            vals = {k: np.full(np.shape(v), np.nan) for k, v in (template or {}).items()}
            vals["m"] = p
        rows.append((vals, status))
    return rows


def _point_columns(space, m, prefix="m"):
    out = {}
    if space.ambient_dim == 3:
        a, b = space.to_chart(m)
        names = chart_names(space)
        out[names[0]], out[names[1]] = a, b
    for i in range(space.ambient_dim):
        out[f"{prefix}_{i}"] = m[..., i]
    return out


def _expand(vals):
    out = {}
    for k, v in vals.items():
        v = np.asarray(v, dtype=float)
        if v.ndim == 0:
            out[k] = float(v)
        else:
            for i, x in enumerate(v.ravel()):
                out[f"{k}_{i}"] = float(x)
    return out


# -- output -------------------------------------------------------------------------
def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def _jsonable(x):
    if isinstance(x, np.ndarray):
        if x.ndim == 0:
            return _jsonable(x[()])
        return [_jsonable(v) for v in x]
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if np.isfinite(x) else None
    return x


def emit(args, command, rows, extra_meta=None):
    """Write rows (list of dicts) as CSV or JSON with a provenance header."""
    config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("func", "output", "format")}
    meta = {"tool": "centract", "version": __version__, "command": command, "config": config,
            "tolerances": TOLERANCES}
    if extra_meta:
        meta.update({k: _jsonable(v) for k, v in extra_meta.items()})
    fmt = args.format or ("json" if args.output and args.output.endswith(".json") else "csv")
    columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    if fmt == "json":
        doc = {"meta": meta, "rows": [{k: _jsonable(r[k]) for k in columns} for r in rows]}
        json.dump(doc, buf, indent=1, sort_keys=False)
        buf.write("\n")
    else:
        buf.write(f"# centract {__version__}\n")
        buf.write(f"# command: {command}\n")
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        buf.write("# tolerances: " + json.dumps(TOLERANCES, sort_keys=True) + "\n")
        for k, v in (extra_meta or {}).items():
            buf.write(f"# {k}: {_fmt(v) if not isinstance(v, str) else v}\n")
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in columns])
    text = buf.getvalue()
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _finish(args, command, results, make_row, extra_meta=None):
    space = sp.get_space(args.space)
    rows, partial = [], False
    all_failed = all(s != "ok" for _, s in results)
    for vals, status in results:
        row = _point_columns(space, vals["m"]) if all_failed else make_row(vals)
        row["status"] = status
        partial |= status == "no-convergence"
        rows.append(row)
    meta = dict(extra_meta or {})
    meta["partial"] = partial
    emit(args, command, rows, meta)
    return EXIT_NOCONV if partial else EXIT_OK


# -- commands -------------------------------------------------------------------------
def cmd_action_eval(args):
    space = sp.get_space(args.space)
    f = parse_action(args.action, space)
    pts = parse_grid(args.grid, space)

    def func(m):
        return {"m": m, "f_alpha": f.alpha(m), "df": 2.0 * f.differential(m)}

    res = sweep(pts, func)
    return _finish(args, "action-eval", res, lambda v: {
        **_point_columns(space, v["m"]), "f_alpha": float(v["f_alpha"]), **_expand({"df": v["df"]})})


def _indicators(space, f, m):
    try:
        rep = caustic_indicators(space, f, m)
        return rep.central_indicator, rep.graph_indicator
    except CentractError:
        nan = np.full(m.shape[:-1], np.nan)
        return nan, nan


def cmd_map(args):
    space = sp.get_space(args.space)
    f = parse_action(args.action, space)
    pts = parse_grid(args.grid, space)

    def func(m):
        v = central_map(space, f, m)
        ci, gi = _indicators(space, f, m)
        return {"m": m, "v": v, "m_minus": space.exp_map(m, -v), "m_plus": space.exp_map(m, v),
                "central_indicator": ci, "graph_indicator": gi}

    res = sweep(pts, func)

    def row(v):
        out = _point_columns(space, v["m"])
        out.update(_expand({k: v[k] for k in ("v", "m_minus", "m_plus", "central_indicator", "graph_indicator")}))
        return out

    return _finish(args, "map", res, row)


def cmd_caustics(args):
    space = sp.get_space(args.space)
    f = parse_action(args.action, space)
    pts = parse_grid(args.grid, space)

    def func(m):
        rep = caustic_indicators(space, f, m, step=args.step)
        return {"m": m, "central_indicator": rep.central_indicator, "graph_indicator": rep.graph_indicator,
                "near_central_caustic": rep.near_central_caustic, "near_graph_caustic": rep.near_graph_caustic}

    res = sweep(pts, func)

    def row(v):
        out = _point_columns(space, v["m"])
        out["central_indicator"] = float(v["central_indicator"])
        out["graph_indicator"] = float(v["graph_indicator"])
        out["near_central_caustic"] = bool(v["near_central_caustic"] == 1)
        out["near_graph_caustic"] = bool(v["near_graph_caustic"] == 1)
        return out

    return _finish(args, "caustics", res, row)


def cmd_triangle(args):
    space = sp.get_space(args.space)
    m, m1, m2 = parse_points(args.midpoints, space, 3)
    area = triangle_area(space, m, m1, m2)
    row = {"area": float(area)}
    if space in (sp.SPHERE, sp.HYPERBOLIC):
        a, b, c = triangle_vertices(space, m, m1, m2)
        row.update(_expand({"a": a, "b": b, "c": c}))
    emit(args, "triangle", [row])
    return EXIT_OK


def cmd_quad(args):
    space = sp.get_space(args.space)
    q = parse_points(args.midpoints, space, 4)
    row = {"area": float(quad_area(space, *q))}
    if space in (sp.SPHERE, sp.HYPERBOLIC):
        row["split_area"] = float(quad_split_area(space, *q))
        row["sigma"] = float(quad_sigma(space, *q))
        row.update(_expand({"m0": quad_diagonal_midpoint(space, *q)}))
    emit(args, "quad", [row])
    return EXIT_OK


def cmd_compose(args):
    space = sp.get_space(args.space)
    if len(args.action) < 2:
        raise UsageError("compose needs at least two --action options")
    fs = [parse_action(a, space) for a in args.action]
    pts = parse_grid(args.grid, space)

    def func(m):
        if len(fs) == 2:
            r = compose2(space, fs[0], fs[1], m, tol=args.tol)
        else:
            r = compose_chain(space, fs, m, tol=args.tol)
        out = {"m": m, "value": r.value, "m_minus": r.m_minus, "m_plus": r.m_plus,
               "residual": np.full(m.shape[:-1], r.residual)}
        for i, x in enumerate(r.stationary_points):
            out[f"m{i + 1}"] = x
        return out

    res = sweep(pts, func)

    def row(v):
        out = _point_columns(space, v["m"])
        out["value"] = float(v["value"])
        out.update(_expand({k: val for k, val in v.items() if k not in ("m", "value")}))
        return out

    return _finish(args, "compose", res, row)


def cmd_integrate(args):
    space = sp.get_space(args.space)
    H = parse_hamiltonian(args.h, space)
    m0 = parse_point(args.m0, space)
    try:
        tr = integrate_flow(space, H, m0, args.t, args.steps)
    except NoConvergence as exc:
        _error(exc)
        return EXIT_NOCONV
    rows = []
    for i, (t, p) in enumerate(zip(tr.times, tr.points)):
        r = {"step": i, "time": float(t)}
        r.update(_point_columns(space, p, "nu"))
        r["h"] = float(H(p, t))
        rows.append(r)
    emit(args, "integrate", rows, {"accumulated_action": float(tr.accumulated_action)})
    return EXIT_OK


def cmd_action_of_flow(args):
    space = sp.get_space(args.space)
    H = parse_hamiltonian(args.h, space)
    pts = parse_grid(args.grid, space)

    def func(m):
        fa = action_of_flow(space, H, m, args.t, args.steps, full=True)
        return {"m": m, "psi": fa.value, "nu_0": fa.trajectory.points[0], "nu_t": fa.trajectory.points[-1],
                "residual": np.full(m.shape[:-1], fa.residual)}

    res = sweep(pts, func)

    def row(v):
        out = _point_columns(space, v["m"])
        out["psi"] = float(v["psi"])
        out.update(_expand({k: v[k] for k in ("nu_0", "nu_t", "residual")}))
        return out

    return _finish(args, "action-of-flow", res, row)


def _expr_psi(space, text):
    e = Expression(text, space)

    def provider(t):
        return CentralAction(space, lambda m: e(m, t), label=text)
    return provider


def cmd_hj_check(args):
    space = sp.get_space(args.space)
    H = parse_hamiltonian(args.h, space)
    psi = _expr_psi(space, args.psi) if args.psi else flow_action_provider(space, H, args.steps)
    grid = args.grid or {"sphere": "theta=0.3:2.8:5,phi=0:5:3", "hyperbolic": "rho=0.1:1.0:5,phi=0:5:3",
                         "plane": "p=-1:1:5,q=-1:1:3", "torus": "p=0.5:2.5:5,q=0.5:2.5:3"}[space.name]
    pts = parse_grid(grid, space)

    def func(m):
        r, dpsi, h_plus = hj_residual(space, H, psi, m, args.t, dt=args.dt, full=True)
        return {"m": m, "residual": r, "dpsi_dt": dpsi, "h_plus": h_plus}

    res = sweep(pts, func)
    worst = max((abs(float(v["residual"])) for v, s in res if s == "ok"), default=float("nan"))
    sys.stderr.write(f"max |residual| = {worst:.3e}\n")

    def row(v):
        out = _point_columns(space, v["m"])
        for k in ("residual", "dpsi_dt", "h_plus"):
            out[k] = float(v[k])
        return out

    return _finish(args, "hj-check", res, row, {"max_abs_residual": worst})


def cmd_selftest(args):
    from .selftest import run_selftest
    results = run_selftest()
    width = max(len(r[0]) for r in results)
    ok = True
    for name, passed, value, tol in results:
        ok &= passed
        print(f"{name:<{width}}  {'PASS' if passed else 'FAIL'}  {value:.3e}  (tol {tol:.0e})")
    return EXIT_OK if ok else EXIT_SELFTEST


# -- entry point ------------------------------------------------------------------------
def build_parser():
    p = _Parser(prog="centract", description="Central actions on model symplectic surfaces.")
    p.add_argument("--version", action="version", version=f"centract {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(q, grid=True, grid_required=True):
        q.add_argument("--space", required=True, choices=["plane", "torus", "sphere", "hyperbolic"])
        if grid:
            q.add_argument("--grid", required=grid_required,
                           help="chart grid 'a=lo:hi:n,b=lo:hi:n' (theta/phi, rho/phi or p/q)")
        q.add_argument("-o", "--output", help="output file (default stdout)")
        q.add_argument("--format", choices=["csv", "json"], help="default: from the extension, else csv")

    q = sub.add_parser("action-eval", help="evaluate a central action on a grid")
    common(q)
    q.add_argument("--action", required=True, help="ActionSpec JSON or an expression for f_alpha")
    q.set_defaults(func=cmd_action_eval)

    q = sub.add_parser("map", help="chord field and generated pair on a grid")
    common(q)
    q.add_argument("--action", required=True)
    q.set_defaults(func=cmd_map)

    q = sub.add_parser("caustics", help="caustic indicators on a grid")
    common(q)
    q.add_argument("--action", required=True)
    q.add_argument("--step", type=float, default=1e-5)
    q.set_defaults(func=cmd_caustics)

    q = sub.add_parser("triangle", help="area of the triangle with given side midpoints")
    common(q, grid=False)
    q.add_argument("--midpoints", required=True, help="JSON list [m, m1, m2] (chart or embedding coordinates)")
    q.set_defaults(func=cmd_triangle)

    q = sub.add_parser("quad", help="area of the quadrilateral with given side midpoints")
    common(q, grid=False)
    q.add_argument("--midpoints", required=True, help="JSON list [m1, m2, m3, m4]")
    q.set_defaults(func=cmd_quad)

    q = sub.add_parser("compose", help="composed central action on a grid (first --action acts first)")
    common(q)
    q.add_argument("--action", action="append", required=True)
    q.add_argument("--tol", type=float, default=1e-10)
    q.set_defaults(func=cmd_compose)

    q = sub.add_parser("integrate", help="midpoint-centered trajectory of a Hamiltonian")
    common(q, grid=False)
    q.add_argument("--h", required=True, help="expression in the chart coordinates and t")
    q.add_argument("--m0", required=True, help="start point, e.g. '1.0,0.0'")
    q.add_argument("--t", type=float, required=True)
    q.add_argument("--steps", type=int, default=100)
    q.set_defaults(func=cmd_integrate)

    q = sub.add_parser("action-of-flow", help="central action of the time-t flow on a grid")
    common(q)
    q.add_argument("--h", required=True)
    q.add_argument("--t", type=float, required=True)
    q.add_argument("--steps", type=int, default=200)
    q.set_defaults(func=cmd_action_of_flow)

    q = sub.add_parser("hj-check", help="Hamilton-Jacobi residuals")
    common(q, grid_required=False)
    q.add_argument("--h", required=True)
    q.add_argument("--t", type=float, required=True)
    q.add_argument("--psi", help="expression for f_alpha(m, t); default: the numerical action of the flow")
    q.add_argument("--steps", type=int, default=200)
    q.add_argument("--dt", type=float, default=1e-4)
    q.set_defaults(func=cmd_hj_check)

    q = sub.add_parser("selftest", help="run the built-in invariant checks")
    q.set_defaults(func=cmd_selftest)
    return p


def _error(exc):
    rec = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("constraint", "residual", "iterations"):
        val = getattr(exc, attr, None)
        if val is not None:
            rec[attr] = _jsonable(val)
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")


# options whose values are expressions that may start with a minus sign
_VALUE_OPTIONS = ("--h", "--psi", "--action", "--m0", "--midpoints")


def _attach_values(argv):
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_OPTIONS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = _attach_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "steps", 1) is not None and getattr(args, "steps", 1) < 1:
        sys.stderr.write("centract: error: --steps must be positive\n")
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"centract: error: {exc}\n")
        return EXIT_USAGE
    except NoConvergence as exc:
        _error(exc)
        return EXIT_NOCONV
    except (CentractError, ValueError) as exc:
        _error(exc)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
