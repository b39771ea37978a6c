"""Quick invariant checks behind ``centract selftest``."""

from __future__ import annotations

import numpy as np

from . import spaces as sp
from .actions import (FlatQuadratic, FlatTranslation, HyperbolicIdealTranslation, SphereRotation,
                      exact_transform, make_action)
from .areas import triangle_area, triangle_validity, triangle_vertices, vertex_polygon_area
from .central import constant_action, forward_map
from .compose import compose2
from .evolve import Hamiltonian, integrate_flow, midpoint_step, poisson_bracket


def _sphere_points(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _check_oracles(rng):
    err = 0.0
    for spec, space, pts in (
        (FlatTranslation((0.3, -0.2)), "plane", rng.uniform(-1, 1, (50, 2))),
        (FlatQuadratic(((0.3, 0.1), (0.1, -0.2))), "plane", rng.uniform(-1, 1, (50, 2))),
        (SphereRotation((0.0, 0.6, 0.8), 0.4), "sphere", _sphere_points(rng, 50)),
        (HyperbolicIdealTranslation(0.2, 0.5, 0.3), "hyperbolic",
         sp.HYPERBOLIC.from_chart(rng.uniform(0, 0.8, 50), rng.uniform(0, 6, 50))),
    ):
        _, mp = forward_map(space, make_action(spec), pts)
        err = max(err, float(np.max(np.abs(mp - exact_transform(spec, pts)))))
    return err


def _check_triangles(rng):
    m = _sphere_points(rng, 200)
    m1 = sp.SPHERE.exp_map(m, sp.SPHERE.from_frame(m, rng.normal(scale=0.4, size=(200, 2))))
    m2 = sp.SPHERE.exp_map(m, sp.SPHERE.from_frame(m, rng.normal(scale=0.4, size=(200, 2))))
    ok, _ = triangle_validity("sphere", m, m1, m2)
    m, m1, m2 = m[ok], m1[ok], m2[ok]
    a, b, c = triangle_vertices("sphere", m, m1, m2)
    d = triangle_area("sphere", m, m1, m2) - vertex_polygon_area("sphere", np.stack([a, b, c]))
    return float(np.max(np.abs((d + 2 * np.pi) % (4 * np.pi) - 2 * np.pi)))


def _check_compose(rng):
    x1, x2 = np.array([0.3, -0.1]), np.array([-0.2, 0.5])
    m = rng.uniform(-1, 1, (20, 2))
    r = compose2("plane", make_action(FlatTranslation(tuple(x1))), make_action(FlatTranslation(tuple(x2))), m)
    w = lambda a, b: a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]  # noqa: E731
    d = r.value - (w(x1 + x2, m) - 0.5 * w(x1, x2))
    return float(np.max(np.abs(d - d.mean())))


def _check_energy():
    H = Hamiltonian("plane", lambda m: 0.5 * np.sum(m**2, axis=-1), autonomous=True)
    tr = integrate_flow("plane", H, np.array([1.0, 0.0]), 10.0, 1000)
    return float(abs(H(tr.points[-1]) - H(tr.points[0])))


def _check_reversal():
    H = Hamiltonian("sphere", lambda m: -m[..., 2], autonomous=True)
    m0 = sp.SPHERE.from_chart(1.0, 0.3)
    _, mp = midpoint_step("sphere", H, 0.0, 0.05, m0)
    _, back = midpoint_step("sphere", H, 0.05, -0.05, mp)
    return float(np.max(np.abs(back - m0)))


def _check_identity(rng):
    m = _sphere_points(rng, 20)
    _, mp = forward_map("sphere", constant_action("sphere", 1.5), m)
    return float(np.max(np.abs(mp - m)))


def _check_bracket():
    v = poisson_bracket("plane", lambda m: m[..., 1], lambda m: m[..., 0], np.array([0.3, 0.7]))
    return float(abs(v - 1.0))


def run_selftest(seed=0):
    """List of ``(name, passed, value, tolerance)``."""
    rng = np.random.default_rng(seed)
    checks = [
        ("oracle maps", lambda: _check_oracles(rng), 1e-8),
        ("sphere triangle area", lambda: _check_triangles(rng), 1e-9),
        ("plane composition", lambda: _check_compose(rng), 1e-10),
        ("oscillator energy drift", _check_energy, 1e-10),
        ("step time reversal", _check_reversal, 1e-10),
        ("constant action identity", lambda: _check_identity(rng), 1e-15),
        ("bracket {q, p} = 1", _check_bracket, 1e-9),
    ]
    out = []
    for name, fn, tol in checks:
        try:
            val = fn()
            out.append((name, bool(val <= tol), val, tol))
        except Exception:  # a crashing check is reported, not raised
            out.append((name, False, float("nan"), tol))
    return out
