"""Closed-form central actions and their exact transformations.

Every family comes with an analytic gradient and a matrix oracle
(:func:`exact_transform`) that the implicit forward map is tested against.

Orientation: with the library's symplectic form, :class:`SphereRotation`
with half-angle ``gamma`` rotates the sphere by ``-2*gamma`` about its pole
(right-hand rule), :class:`HyperbolicRotation` rotates by ``+2*gamma`` about
its pole, and :class:`HyperbolicIdealTranslation` with signed length ``z``
slides the hyperbolic plane by ``2*z`` along its axis, so that a point on the
axis lies at distance ``|z|`` from each end of its chord.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spaces as sp
from .central import CentralAction
from .errors import InvalidSpec, OutOfDomain

J_SYMPLECTIC = np.array([[0.0, 1.0], [-1.0, 0.0]])


def wedge(a, b):
    """``a ^ b = a_p b_q - a_q b_p``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def perp(a):
    """Gradient of ``b -> a ^ b``."""
    a = np.asarray(a, dtype=float)
    return np.stack([-a[..., 1], a[..., 0]], axis=-1)


# -- specs -----------------------------------------------------------------
@dataclass(frozen=True)
class FlatTranslation:
    xi: tuple
    space: str = "plane"

    variant = "FlatTranslation"


@dataclass(frozen=True)
class FlatQuadratic:
    B: tuple
    xi: tuple = (0.0, 0.0)
    space: str = "plane"

    variant = "FlatQuadratic"


@dataclass(frozen=True)
class SphereRotation:
    pole: tuple
    gamma: float

    variant = "SphereRotation"
    space = "sphere"


@dataclass(frozen=True)
class HyperbolicRotation:
    pole: tuple
    gamma: float

    variant = "HyperbolicRotation"
    space = "hyperbolic"


@dataclass(frozen=True)
class HyperbolicIdealTranslation:
    nu: float
    eps: float
    z: float

    variant = "HyperbolicIdealTranslation"
    space = "hyperbolic"


SPEC_TYPES = {c.variant: c for c in (FlatTranslation, FlatQuadratic, SphereRotation,
                                       HyperbolicRotation, HyperbolicIdealTranslation)}


def _vec(x, n, name):
    try:
        a = np.asarray(x, dtype=float)
    except (TypeError, ValueError):
        raise InvalidSpec(f"{name} must be numeric") from None
    if a.shape != (n,) or not np.all(np.isfinite(a)):
        raise InvalidSpec(f"{name} must be {n} finite numbers")
    return a


def validate_spec(spec):
    """Check the invariants of a spec; raise :class:`InvalidSpec` otherwise."""
    if isinstance(spec, FlatTranslation):
        _vec(spec.xi, 2, "xi")
        if spec.space not in ("plane", "torus"):
            raise InvalidSpec("flat actions live on the plane or torus")
        if spec.space == "torus" and np.any(np.abs(spec.xi) >= np.pi):
            raise InvalidSpec("torus translation components must be below pi")
    elif isinstance(spec, FlatQuadratic):
        B = np.asarray(spec.B, dtype=float)
        if B.shape != (2, 2) or not np.all(np.isfinite(B)):
            raise InvalidSpec("B must be a finite 2x2 matrix")
        if not np.allclose(B, B.T, rtol=0, atol=1e-12):
            raise InvalidSpec("B must be symmetric")
        _vec(spec.xi, 2, "xi")
        if spec.space not in ("plane", "torus"):
            raise InvalidSpec("flat actions live on the plane or torus")
    elif isinstance(spec, (SphereRotation, HyperbolicRotation)):
        p = _vec(spec.pole, 3, "pole")
        g = float(spec.gamma)
        if not np.isfinite(g) or not abs(g) < np.pi / 2:
            raise InvalidSpec("half-angle gamma must lie in (-pi/2, pi/2)")
        space = sp.SPHERE if isinstance(spec, SphereRotation) else sp.HYPERBOLIC
        try:
            space.check_point(p)
        except sp.ConstraintDrift as exc:
            raise InvalidSpec(f"pole is not a {space.name} point: {exc}") from None
    elif isinstance(spec, HyperbolicIdealTranslation):
        vals = np.array([spec.nu, spec.eps, spec.z], dtype=float)
        if not np.all(np.isfinite(vals)):
            raise InvalidSpec("nu, eps, z must be finite")
        if spec.nu < 0:
            raise InvalidSpec("axis distance nu must be non-negative")
    else:
        raise InvalidSpec(f"unknown action spec {spec!r}")
    return spec


def spec_from_dict(d):
    """Build a spec from its JSON form, e.g. ``{"variant": "SphereRotation", "pole": [0, 0, 1], "gamma": 0.3}``."""
    if not isinstance(d, dict) or "variant" not in d:
        raise InvalidSpec("action spec must be an object with a 'variant' field")
    d = dict(d)
    variant = d.pop("variant")
    cls = SPEC_TYPES.get(variant)
    if cls is None:
        raise InvalidSpec(f"unknown variant {variant!r}")
    try:
        if cls is FlatQuadratic:
            d["B"] = tuple(tuple(float(x) for x in row) for row in d["B"])
        for key in ("xi", "pole"):
            if key in d:
                d[key] = tuple(float(x) for x in d[key])
        spec = cls(**d)
    except (TypeError, KeyError, ValueError) as exc:
        raise InvalidSpec(f"bad fields for {variant}: {exc}") from None
    return validate_spec(spec)


def spec_to_dict(spec):
    out = {"variant": spec.variant}
    for k, v in spec.__dict__.items():
        out[k] = np.asarray(v).tolist() if isinstance(v, (tuple, list, np.ndarray)) else v
    return out


# -- geometry helpers ---------------------------------------------------------
def axis_angle_matrix(axis, angle):
    """Right-handed rotation matrix by ``angle`` about the unit vector ``axis``."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def matrix_axis_angle(R):
    """Axis and angle in ``[0, pi]`` of a rotation matrix."""
    R = np.asarray(R, dtype=float)
    angle = np.arccos(np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0))
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    n = np.linalg.norm(w)
    if n > 1e-8:
        return w / n, angle
    if angle < 1.0:
        return np.array([0.0, 0.0, 1.0]), 0.0
    # half-turn: axis is the +1 eigenvector
    vals, vecs = np.linalg.eigh(0.5 * (R + R.T))
    return vecs[:, np.argmax(vals)], np.pi


def rotation_spec_from_matrix(R):
    """:class:`SphereRotation` generating the rotation matrix ``R``."""
    axis, angle = matrix_axis_angle(R)
    return SphereRotation(tuple(axis), -angle / 2.0)


def lorentz_rotation_matrix(pole, angle):
    """SO(2,1) rotation by ``angle`` about the hyperboloid point ``pole``."""
    B = sp.HYPERBOLIC.boost(np.asarray(pole, dtype=float))
    c, s = np.cos(angle), np.sin(angle)
    Rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    eta = np.diag([1.0, 1.0, -1.0])
    Binv = eta @ B.T @ eta
    return B @ Rz @ Binv


def ideal_axis(nu, eps):
    """Unit normal ``n``, foot ``a0`` and unit direction ``u`` of the axis ``(nu, eps)``."""
    cn, sn, ce, se = np.cosh(nu), np.sinh(nu), np.cos(eps), np.sin(eps)
    n = np.array([cn * ce, cn * se, sn])
    a0 = np.array([sn * ce, sn * se, cn])
    u = np.array([se, -ce, 0.0])
    return n, a0, u


def lorentz_translation_matrix(nu, eps, dist):
    """SO(2,1) translation by ``dist`` along the axis ``(nu, eps)``."""
    n, a0, u = ideal_axis(nu, eps)
    eta = np.diag([1.0, 1.0, -1.0])
    ch, sh = np.cosh(dist), np.sinh(dist)
    old = np.stack([a0, u, n], axis=1)
    new = np.stack([a0 * ch + u * sh, a0 * sh + u * ch, n], axis=1)
    # coordinates in the (a0, u, n) basis: -<x,a0>, <x,u>, <x,n>
    coords = np.diag([-1.0, 1.0, 1.0]) @ old.T @ eta
    return new @ coords


# -- action construction ----------------------------------------------------
def _root(c):
    # NaN outside the domain, without a warning
    with np.errstate(invalid="ignore"):
        return np.sqrt(1.0 - c**2)


def make_action(spec):
    """The :class:`CentralAction` of a closed-form spec (or its JSON dict)."""
    if isinstance(spec, dict):
        spec = spec_from_dict(spec)
    validate_spec(spec)
    if isinstance(spec, FlatTranslation):
        xi = np.asarray(spec.xi, dtype=float)

        def fn(m):
            return wedge(xi, m)

        def grad(m):
            return np.broadcast_to(perp(xi), np.shape(m)).copy()

        return CentralAction(spec.space, fn, grad, label="FlatTranslation", spec=spec)

    if isinstance(spec, FlatQuadratic):
        B = np.asarray(spec.B, dtype=float)
        xi = np.asarray(spec.xi, dtype=float)

        def fn(m):
            return np.einsum("...i,ij,...j->...", m, B, m) + wedge(xi, m)

        def grad(m):
            return 2.0 * np.einsum("ij,...j->...i", B, m) + perp(xi)

        return CentralAction(spec.space, fn, grad, label="FlatQuadratic", spec=spec)

    if isinstance(spec, SphereRotation):
        p = sp.SPHERE.check_point(spec.pole)
        s = np.sin(spec.gamma)

        def fn(m):
            return -2.0 * np.arcsin(np.clip(s * sp.edot(m, p), -1.0, 1.0))

        def grad(m):
            c = s * sp.edot(m, p)
            return (-2.0 * s / _root(c))[..., None] * p

        return CentralAction(sp.SPHERE, fn, grad, label="SphereRotation", spec=spec)

    if isinstance(spec, HyperbolicRotation):
        p = sp.HYPERBOLIC.check_point(spec.pole)
        s = np.sin(spec.gamma)
        dp = np.array([-p[0], -p[1], p[2]])  # ambient gradient of cosh(y) = -<m, p>

        def cosh_y(m):
            return -sp.mdot(m, p)

        def fn(m):
            return -2.0 * np.arcsin(np.clip(s * cosh_y(m), -1.0, 1.0))

        def grad(m):
            c = s * cosh_y(m)
            return (-2.0 * s / _root(c))[..., None] * dp

        def domain(m):
            return np.abs(s) * cosh_y(m) < 1.0

        return CentralAction(sp.HYPERBOLIC, fn, grad, domain, label="HyperbolicRotation", spec=spec)

    if isinstance(spec, HyperbolicIdealTranslation):
        n, _, _ = ideal_axis(spec.nu, spec.eps)
        sz = np.sinh(spec.z)
        dn = np.array([n[0], n[1], -n[2]])  # ambient gradient of sinh(x) = <m, n>

        def fn(m):
            return 2.0 * np.arcsin(np.clip(sz * sp.mdot(m, n), -1.0, 1.0))

        def grad(m):
            c = sz * sp.mdot(m, n)
            return (2.0 * sz / _root(c))[..., None] * dn

        def domain(m):
            return np.abs(sz * sp.mdot(m, n)) < 1.0

        return CentralAction(sp.HYPERBOLIC, fn, grad, domain, label="HyperbolicIdealTranslation", spec=spec)

    raise InvalidSpec(f"unknown action spec {spec!r}")  # pragma: no cover


def transform_matrix(spec):
    """Matrix of the exact transformation (2x2 linear part for flat specs)."""
    validate_spec(spec)
    if isinstance(spec, FlatTranslation):
        return np.eye(2)
    if isinstance(spec, FlatQuadratic):
        JB = J_SYMPLECTIC @ np.asarray(spec.B, dtype=float)
        return (np.eye(2) + JB) @ np.linalg.inv(np.eye(2) - JB)
    if isinstance(spec, SphereRotation):
        return axis_angle_matrix(sp.SPHERE.check_point(spec.pole), -2.0 * spec.gamma)
    if isinstance(spec, HyperbolicRotation):
        return lorentz_rotation_matrix(sp.HYPERBOLIC.check_point(spec.pole), 2.0 * spec.gamma)
    return lorentz_translation_matrix(spec.nu, spec.eps, 2.0 * spec.z)


def exact_transform(spec, m_minus):
    """Group-theoretic image of ``m_minus`` under the transformation of ``spec``."""
    if isinstance(spec, dict):
        spec = spec_from_dict(spec)
    validate_spec(spec)
    if isinstance(spec, FlatTranslation):
        space = sp.get_space(spec.space)
        return space.check_point(space.check_point(m_minus) + np.asarray(spec.xi, dtype=float))
    if isinstance(spec, FlatQuadratic):
        space = sp.get_space(spec.space)
        xi = np.asarray(spec.xi, dtype=float)
        JB = J_SYMPLECTIC @ np.asarray(spec.B, dtype=float)
        if abs(np.linalg.det(np.eye(2) - JB)) < 1e-14:
            raise OutOfDomain("det(I - JB) = 0: the quadratic action generates no map")
        C = transform_matrix(spec)
        x = space.check_point(m_minus)
        out = np.einsum("ij,...j->...i", C, x + 0.5 * xi) + 0.5 * xi
        return space.check_point(out)
    if isinstance(spec, SphereRotation):
        R = transform_matrix(spec)
        return sp.SPHERE.check_point(np.einsum("ij,...j->...i", R, sp.SPHERE.check_point(m_minus)))
    M = transform_matrix(spec)
    m_minus = sp.HYPERBOLIC.check_point(m_minus)
    return sp.HYPERBOLIC.check_point(np.einsum("ij,...j->...i", M, m_minus))


# -- chart closed forms for the cross-checks -----------------------------------
def sphere_rotation_chord_length(spec, m):
    """``|v| = arccos(cos(gamma) / C_f)`` with ``C_f = sqrt(1 - (sin(gamma) cos y)^2)``."""
    p = sp.SPHERE.check_point(spec.pole)
    cy = sp.edot(sp.SPHERE.check_point(m), p)
    cf = np.sqrt(1.0 - (np.sin(spec.gamma) * cy) ** 2)
    return np.arccos(np.clip(np.cos(spec.gamma) / cf, -1.0, 1.0))


def sphere_rotation_chart_pair(spec, theta, phi):
    """Closed-form polar pair of a :class:`SphereRotation` centered at ``(theta, phi)``.

    Written with the same orientation as :func:`centract.central.sphere_chart_pair`.
    Returns ``((theta_minus, phi_minus), (theta_plus, phi_plus))``.
    """
    chi, eps = sp.SPHERE.to_chart(sp.SPHERE.check_point(spec.pole))
    g = spec.gamma
    sg, cg = np.sin(g), np.cos(g)
    st, ct = np.sin(theta), np.cos(theta)
    sd, cd = np.sin(phi - eps), np.cos(phi - eps)
    cy = np.cos(chi) * ct + np.sin(chi) * st * cd
    cf = np.sqrt(1.0 - (sg * cy) ** 2)
    out = []
    for s in (-1.0, 1.0):
        th = np.arccos(np.clip((cg * ct - s * sg * st * np.sin(chi) * sd) / cf, -1.0, 1.0))
        lam = cg * st + s * sg * ct * np.sin(chi) * sd
        num = sg * (np.cos(chi) * st - np.sin(chi) * ct * cd)
        ph = phi - s * np.arctan(num / lam) + np.where(lam < 0, np.pi, 0.0)
        out.append((th, np.mod(ph, sp.TWO_PI)))
    return out[0], out[1]


def ideal_translation_chart_pair(spec, rho, phi):
    """Closed-form polar pair of a :class:`HyperbolicIdealTranslation` centered at ``(rho, phi)``."""
    nu, eps, z = spec.nu, spec.eps, spec.z
    sz, cz = np.sinh(z), np.cosh(z)
    sr, cr = np.sinh(rho), np.cosh(rho)
    sd, cd = np.sin(phi - eps), np.cos(phi - eps)
    sx = np.cosh(nu) * sr * cd - np.sinh(nu) * cr
    cf = np.sqrt(1.0 - (sz * sx) ** 2)
    out = []
    for s in (-1.0, 1.0):
        r = np.arccosh(np.maximum((cz * cr - s * sz * sr * np.cosh(nu) * sd) / cf, 1.0))
        xi = cz * sr - s * sz * cr * np.cosh(nu) * sd
        num = sz * (np.cosh(nu) * cr * cd - np.sinh(nu) * sr)
        ph = phi - s * np.arctan(num / xi) + np.where(xi < 0, np.pi, 0.0)
        out.append((r, np.mod(ph, sp.TWO_PI)))
    return out[0], out[1]
