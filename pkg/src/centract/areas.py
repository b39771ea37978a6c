"""Symplectic areas of geodesic triangles and quadrilaterals given by side midpoints.

Convention: the triangle with vertices ``a -> b -> c`` has side midpoints
``m1 = mid(a, b)``, ``m2 = mid(b, c)`` and ``m = mid(c, a)``;
``triangle_area(m, m1, m2)`` is its signed area.  A quadrilateral
``a1 -> a2 -> a3 -> a4`` has midpoints ``m_i = mid(a_i, a_{i+1})``.
"""

from __future__ import annotations

import numpy as np

from . import spaces as sp
from .actions import perp, wedge
from .errors import (CutLocus, DegenerateTriplet, InvalidMidpoints, NonreducibleLoop,
                     OutOfRegime, ParallelogramViolation)

_ZERO = 1e-14
_ETA = np.array([1.0, 1.0, -1.0])


def _points(space, *pts):
    out = [space.check_point(p) for p in pts]
    return np.broadcast_arrays(*out)


def _lift(space, base, *pts):
    """Flat lifts of torus points nearest to ``base``."""
    return [base + sp.Torus.wrap(p - base) for p in pts]


def _cosines(space, a, b):
    if space is sp.HYPERBOLIC:
        return -sp.mdot(a, b)
    return sp.edot(a, b)


# -- validity ---------------------------------------------------------------
def triangle_validity(space, m, m1, m2):
    """Mask of midpoint triplets that determine a standard triangle, and a reason string."""
    space = sp.get_space(space)
    m, m1, m2 = _points(space, m, m1, m2)
    if space is sp.SPHERE:
        c = np.stack([sp.edot(m, m1), sp.edot(m1, m2), sp.edot(m2, m)], axis=-1)
        s = np.where(np.abs(c) < _ZERO, 0, np.sign(c))
        ok = np.all(s == s[..., :1], axis=-1)
        return ok, "sphere-sign: sign(m.m1) = sign(m1.m2) = sign(m2.m)"
    if space is sp.HYPERBOLIC:
        return np.abs(sp.det3(m, m1, m2)) < 1.0, "hyperbolic-det-bound: |det[m, m1, m2]| < 1"
    if space is sp.TORUS:
        d = np.concatenate([sp.Torus.wrap(m1 - m), sp.Torus.wrap(m2 - m), sp.Torus.wrap(m2 - m1)], axis=-1)
        return np.all(np.abs(d) < np.pi / 2, axis=-1), "torus-gap: pairwise |dp|, |dq| < pi/2"
    return np.ones(m.shape[:-1], dtype=bool), ""


def sphere_sigma(m, m1, m2):
    c = np.stack([sp.edot(m, m1), sp.edot(m1, m2), sp.edot(m2, m)], axis=-1)
    s = np.where(np.abs(c) < _ZERO, 0.0, np.sign(c))
    return s[..., 0]


def _require(ok, reason, cls=InvalidMidpoints):
    if not np.all(ok):
        bad = int(np.size(ok) - np.count_nonzero(ok))
        raise cls(f"invalid midpoints ({bad} case(s)): {reason}", constraint=reason.split(":")[0])


# -- triangles ----------------------------------------------------------------
def triangle_area(space, m, m1, m2, check=True):
    """Signed symplectic area of the geodesic triangle with midpoints ``(m, m1, m2)``.

    On the sphere the principal value in ``(-2 pi, 2 pi]`` is returned.
    """
    space = sp.get_space(space)
    m, m1, m2 = _points(space, m, m1, m2)
    if check:
        ok, why = triangle_validity(space, m, m1, m2)
        _require(ok, why)
    if space is sp.PLANE:
        return 2.0 * (wedge(m, m1) + wedge(m1, m2) + wedge(m2, m))
    if space is sp.TORUS:
        x1, x2 = _lift(space, m, m1, m2)
        return 2.0 * (wedge(m, x1) + wedge(x1, x2) + wedge(x2, m))
    D = np.clip(sp.det3(m, m1, m2), -1.0, 1.0)
    if space is sp.HYPERBOLIC:
        return 2.0 * np.arcsin(D)
    sigma = sphere_sigma(m, m1, m2)
    out = 2.0 * np.arctan2(D, sigma * np.sqrt(1.0 - D**2))
    # sigma = 0: |area| = pi with the sign of D
    return np.where(sigma == 0, np.where(D >= 0, np.pi, -np.pi), out)


def triangle_area_grad(space, m, m1, m2):
    """Ambient partial derivatives of :func:`triangle_area` in ``(m, m1, m2)``."""
    space = sp.get_space(space)
    m, m1, m2 = _points(space, m, m1, m2)
    if space in (sp.PLANE, sp.TORUS):
        if space is sp.TORUS:
            m1, m2 = _lift(space, m, m1, m2)
        return (2.0 * (perp(m2) - perp(m1)), 2.0 * (perp(m) - perp(m2)), 2.0 * (perp(m1) - perp(m)))
    D = sp.det3(m, m1, m2)
    k = 2.0 / np.sqrt(np.maximum(1.0 - D**2, 1e-300))
    if space is sp.SPHERE:
        k = k * sphere_sigma(m, m1, m2)
    k = k[..., None]
    return k * sp.cross3(m1, m2), k * sp.cross3(m2, m), k * sp.cross3(m, m1)


def _reflection_matrix(space, c):
    c = np.asarray(c)
    eye = np.broadcast_to(np.eye(3), c.shape[:-1] + (3, 3))
    if space is sp.SPHERE:
        return 2.0 * c[..., :, None] * c[..., None, :] - eye
    return -2.0 * c[..., :, None] * (c * _ETA)[..., None, :] - eye


def triangle_vertices(space, m, m1, m2):
    """Vertices ``(a, b, c)`` of the triangle with ``m1 = mid(a, b)``, ``m2 = mid(b, c)``, ``m = mid(c, a)``.

    ``a`` is the fixed point of the composed reflections through ``m1``, ``m2``
    and ``m``.  Raises :class:`DegenerateTriplet` when that composition is
    the identity, in which case the vertices are not unique.
    """
    space = sp.get_space(space)
    m, m1, m2 = _points(space, m, m1, m2)
    ok, why = triangle_validity(space, m, m1, m2)
    _require(ok, why)
    if space is sp.PLANE:
        a = m + m1 - m2
        b = 2.0 * m1 - a
        return a, b, 2.0 * m2 - b
    if space is sp.TORUS:
        x1, x2 = _lift(space, m, m1, m2)
        a = m + x1 - x2
        b = 2.0 * x1 - a
        c = 2.0 * x2 - b
        return tuple(space.check_point(x) for x in (a, b, c))
    P = _reflection_matrix(space, m) @ _reflection_matrix(space, m2) @ _reflection_matrix(space, m1)
    K = P - np.eye(3)
    if np.any(np.max(np.abs(K), axis=(-1, -2)) < 1e-12):
        raise DegenerateTriplet(f"{space.name}: composed reflections are the identity; vertices are not unique")
    _, _, vt = np.linalg.svd(K)
    a = vt[..., -1, :]
    if space is sp.SPHERE:
        a = a * np.where(sp.edot(a, m1) < 0, -1.0, 1.0)[..., None]
        a = a / np.linalg.norm(a, axis=-1)[..., None]
    else:
        q = -sp.mdot(a, a)
        if np.any(q <= 0):
            raise InvalidMidpoints("hyperbolic: composed reflections have no fixed point", "hyperbolic-det-bound")
        a = a * (np.sign(a[..., 2]) / np.sqrt(q))[..., None]
    b = space.reflect(m1, a)
    c = space.reflect(m2, b)
    return a, b, c


def vertex_triangle_area(space, a, b, c):
    """Signed area of the geodesic triangle with vertices ``a, b, c``."""
    space = sp.get_space(space)
    a, b, c = _points(space, a, b, c)
    if space is sp.PLANE:
        return 0.5 * (wedge(a, b) + wedge(b, c) + wedge(c, a))
    if space is sp.TORUS:
        b, c = _lift(space, a, b, c)
        return 0.5 * (wedge(a, b) + wedge(b, c) + wedge(c, a))
    num = sp.det3(a, b, c)
    den = 1.0 + _cosines(space, a, b) + _cosines(space, b, c) + _cosines(space, c, a)
    return 2.0 * np.arctan2(num, den)


def _wrap_4pi(x):
    # principal value in (-2 pi, 2 pi]
    return 2.0 * np.pi - np.mod(2.0 * np.pi - x, 4.0 * np.pi)


def vertex_polygon_area(space, vertices):
    """Signed area of the closed geodesic polygon through ``vertices`` (in order).

    ``vertices`` is a sequence of points (or an array with the polygon index
    first); every edge, including the closing one, must be a short geodesic.
    """
    space = sp.get_space(space)
    V = np.asarray([space.check_point(v) for v in vertices]) if not isinstance(vertices, np.ndarray) \
        else space.check_point(vertices)
    n = V.shape[0]
    if n < 3:
        return np.zeros(V.shape[1:-1])
    nxt = np.roll(V, -1, axis=0)
    if space is sp.PLANE:
        return 0.5 * np.sum(wedge(V, nxt), axis=0)
    if space is sp.TORUS:
        d = sp.Torus.wrap(nxt - V)
        if np.any(np.abs(np.abs(d) - np.pi) < 1e-12):
            raise CutLocus("torus: polygon edge of length pi")
        L = V[0] + np.concatenate([np.zeros_like(V[:1]), np.cumsum(d, axis=0)], axis=0)
        if np.max(np.abs(L[-1] - L[0])) > 1e-9:
            raise NonreducibleLoop("torus: polygon winds around the torus")
        L = L[:-1]
        return 0.5 * np.sum(wedge(L, np.roll(L, -1, axis=0)), axis=0)
    if space is sp.SPHERE and np.any(sp.edot(V, nxt) < -1.0 + 1e-12):
        raise CutLocus("sphere: antipodal polygon edge")
    a0 = np.broadcast_to(V[0], V[1:-1].shape)
    total = np.sum(vertex_triangle_area(space, a0, V[1:-1], V[2:]), axis=0)
    return _wrap_4pi(total) if space is sp.SPHERE else total


# -- quadrilaterals -------------------------------------------------------------
def _quad_cos(space, ms):
    return {(i, j): _cosines(space, ms[i], ms[j]) for i in range(4) for j in range(4) if i < j}


def quad_sigma(space, m1, m2, m3, m4):
    """Common orientation sign of the four midpoint triples, or 0 if they disagree."""
    ms = [m1, m2, m3, m4]
    D = np.stack([sp.det3(ms[i], ms[(i + 1) % 4], ms[(i + 2) % 4]) for i in range(4)], axis=-1)
    pos = np.all(D > 0, axis=-1)
    neg = np.all(D < 0, axis=-1)
    return np.where(pos, 1.0, np.where(neg, -1.0, 0.0))


def quad_diagonal_midpoint(space, m1, m2, m3, m4):
    """Midpoint ``m0`` of the diagonal ``(a1, a3)`` reconstructed from the side midpoints."""
    space = sp.get_space(space)
    m1, m2, m3, m4 = _points(space, m1, m2, m3, m4)
    if space in (sp.PLANE, sp.TORUS):
        if space is sp.TORUS:
            m2, m3, m4 = _lift(space, m1, m2, m3, m4)
        c = 0.25 * (m1 + m2 + m3 + m4)
        m0 = m4 + m2 - c
        return space.check_point(m0)
    C = _quad_cos(space, [m1, m2, m3, m4])
    if space is sp.SPHERE:
        z = C[0, 1][..., None] * sp.cross3(m3, m4) + C[2, 3][..., None] * sp.cross3(m1, m2)
        n = np.linalg.norm(z, axis=-1)
        z = z * np.where(sp.edot(z, m1) < 0, -1.0, 1.0)[..., None]
        return z / n[..., None]
    z = C[0, 1][..., None] * (_ETA * sp.cross3(m3, m4)) + C[2, 3][..., None] * (_ETA * sp.cross3(m1, m2))
    q = -sp.mdot(z, z)
    if np.any(q <= 0):
        raise OutOfRegime("hyperbolic: diagonal midpoint is not a real point", "convex-small-triangle")
    return z * (np.sign(z[..., 2]) / np.sqrt(q))[..., None]


def quad_validity(space, m1, m2, m3, m4, tol=1e-9):
    """Mask of valid midpoint quadruplets with the name of the checked constraint."""
    space = sp.get_space(space)
    m1, m2, m3, m4 = _points(space, m1, m2, m3, m4)
    if space in (sp.PLANE, sp.TORUS):
        if space is sp.TORUS:
            m2, m3, m4 = _lift(space, m1, m2, m3, m4)
        r = m1 - m2 + m3 - m4
        scale = np.maximum(1.0, np.max(np.abs(np.stack([m1, m2, m3, m4])), axis=(0, -1)))
        return np.max(np.abs(r), axis=-1) <= tol * scale, "parallelogram: m1 - m2 + m3 - m4 = 0"
    sigma = quad_sigma(space, m1, m2, m3, m4)
    ok = sigma != 0
    why = "orientation: D123, D234, D341, D412 share one strict sign"
    if space is sp.HYPERBOLIC:
        C = _quad_cos(space, [m1, m2, m3, m4])
        R = C[0, 1] * C[2, 3] + C[1, 2] * C[0, 3] - C[0, 2] * C[1, 3]
        ok = ok & (np.abs(R) < 1.0)
        why += "; modulus: |C12 C34 + C23 C41 - C13 C24| < 1"
    return ok, why


def quad_area(space, m1, m2, m3, m4):
    """Signed area of the quadrilateral with cyclic side midpoints ``m1 .. m4``."""
    space = sp.get_space(space)
    m1, m2, m3, m4 = _points(space, m1, m2, m3, m4)
    ok, why = quad_validity(space, m1, m2, m3, m4)
    if space in (sp.PLANE, sp.TORUS):
        _require(ok, why, ParallelogramViolation)
        if space is sp.TORUS:
            m2, m3, m4 = _lift(space, m1, m2, m3, m4)
        return 2.0 * (wedge(m1, m2) + wedge(m3, m4))
    _require(ok, why)
    m0 = quad_diagonal_midpoint(space, m1, m2, m3, m4)
    if space is sp.SPHERE:
        inside = np.all(np.stack([sp.edot(m0, x) for x in (m1, m2, m3, m4)]) > 0, axis=0)
        _require(inside, "convex-small-triangle: m0 . m_i > 0", OutOfRegime)
    C = _quad_cos(space, [m1, m2, m3, m4])
    R = C[0, 1] * C[2, 3] + C[1, 2] * C[0, 3] - C[0, 2] * C[1, 3]
    if space is sp.SPHERE and np.any(np.abs(R) > 1.0 + 1e-12):
        raise InvalidMidpoints("sphere: quadrilateral cosine out of range", "modulus")
    return 2.0 * quad_sigma(space, m1, m2, m3, m4) * np.arccos(np.clip(R, -1.0, 1.0))


def quad_split_area(space, m1, m2, m3, m4):
    """Quadrilateral area as two triangle areas through the diagonal midpoint."""
    space = sp.get_space(space)
    m0 = quad_diagonal_midpoint(space, m1, m2, m3, m4)
    return triangle_area(space, m0, m1, m2) + triangle_area(space, m0, m3, m4)
