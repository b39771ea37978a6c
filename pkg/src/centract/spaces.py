"""Chart-free geometry of the four model symplectic surfaces.

Points are numpy arrays whose last axis holds embedding coordinates:

* ``plane``       -- ``(p, q)``
* ``torus``       -- ``(p, q)`` angles reduced to ``[0, 2*pi)``
* ``sphere``      -- unit 3-vectors
* ``hyperbolic``  -- 3-vectors on the upper sheet ``z**2 - x**2 - y**2 = 1``

Tangent vectors live in the same ambient space.  Every method broadcasts
over leading axes, so a whole grid of points is processed in one call.

Orientation.  On the plane and torus ``omega = dp ^ dq``.  On the sphere and
the hyperboloid ``omega(u, w) = ORIENT * det[m, u, w]``; with ``ORIENT = +1``
this is ``sin(theta) dtheta ^ dphi`` and ``sinh(rho) drho ^ dphi`` in the
polar charts.  Hamilton's equations then read ``pdot = -dh/dq``,
``qdot = dh/dp``, i.e. ``omega(v_h, .) = -dh``.
"""

from __future__ import annotations

import numpy as np

from .errors import BaseMismatch, ConstraintDrift, CutLocus, OutsideGroupoid, OutsideImage

ORIENT = 1.0
TWO_PI = 2.0 * np.pi

#: drift above this is silently projected back onto the embedding
RENORM_TOL = 1e-9
#: drift above this is an error
DRIFT_TOL = 1e-6
# below this the constraint already holds to rounding; leave points untouched
ROUNDING_TOL = 4e-15
#: central-difference step for first derivatives (about cbrt(machine eps))
FD_STEP = 6e-6

_CUT_TOL = 1e-12


def mdot(a, b):
    """Minkowski pairing ``a_x b_x + a_y b_y - a_z b_z`` over the last axis."""
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2]


def edot(a, b):
    return np.einsum("...i,...i->...", a, b)


def cross3(a, b):
    """Cross product over the last axis (``np.cross`` without its axis juggling)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def det3(a, b, c):
    """``det[a, b, c]`` of 3-vectors stacked on the last axis."""
    return edot(a, cross3(b, c))


def _as_array(x):
    return np.asarray(x, dtype=float)


def _safe_unit(u, n):
    """``u / n`` with zero where ``n`` vanishes."""
    n = np.asarray(n)
    out = np.zeros_like(u)
    nz = n > 0
    if np.ndim(nz) == 0:
        return u / n if nz else out
    out[nz] = u[nz] / n[nz][..., None]
    return out


class ModelSpace:
    """Common interface of the model spaces.

    Subclasses implement the primitive maps; derived operations (reflection,
    symmetric exponential, frames) are built on top of them here.
    """

    name = ""
    ambient_dim = 2
    chart_names = ("p", "q")

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __reduce__(self):
        return (get_space, (self.name,))

    # -- embedding -----------------------------------------------------
    def check_point(self, m):
        return _as_array(m)

    def project(self, m, u):
        """Orthogonal projection of an ambient vector onto ``T_m M``."""
        return _as_array(u)

    def check_vector(self, m, v):
        v = _as_array(v)
        m = _as_array(m)
        if v.shape[-1] != self.ambient_dim or m.shape[-1] != self.ambient_dim:
            raise BaseMismatch(f"{self.name}: expected {self.ambient_dim}-component vectors")
        return v

    # -- frames --------------------------------------------------------
    def frame(self, m):
        """Oriented orthonormal frame ``(e1, e2)`` of ``T_m M`` with ``omega(e1, e2) = 1``."""
        m = _as_array(m)
        e1 = np.zeros_like(m)
        e2 = np.zeros_like(m)
        e1[..., 0] = 1.0
        e2[..., 1] = 1.0
        return e1, e2

    def to_frame(self, m, u):
        e1, e2 = self.frame(m)
        return np.stack([self.inner(m, u, e1), self.inner(m, u, e2)], axis=-1)

    def from_frame(self, m, c):
        e1, e2 = self.frame(m)
        c = _as_array(c)
        return c[..., 0:1] * e1 + c[..., 1:2] * e2

    # -- metric and symplectic form -------------------------------------
    def inner(self, m, u, w):
        return edot(u, w)

    def norm(self, m, v):
        return np.sqrt(np.maximum(self.inner(m, v, v), 0.0))

    def symplectic_pairing(self, m, u, w):
        """``omega_m(u, w)``."""
        u = self.check_vector(m, u)
        w = self.check_vector(m, w)
        return u[..., 0] * w[..., 1] - u[..., 1] * w[..., 0]

    # -- geodesics -----------------------------------------------------
    def exp_map(self, m, v):
        raise NotImplementedError

    def log_map(self, m, m2):
        raise NotImplementedError

    def distance(self, a, b):
        return self.norm(a, self.log_map(a, b))

    def transport(self, m, v, u):
        """Parallel transport of ``u`` from ``m`` to ``exp_map(m, v)``."""
        return _as_array(u)

    def reflect(self, center, m):
        """Geodesic inversion through ``center``."""
        center = self.check_point(center)
        return self.exp_map(center, -self.log_map(center, m))

    def midpoint(self, a, b):
        a = self.check_point(a)
        return self.exp_map(a, 0.5 * self.log_map(a, b))

    # -- standard central groupoid ---------------------------------------
    def in_groupoid(self, m, v):
        """Membership of ``(m, v)`` in the standard central groupoid."""
        v = _as_array(v)
        return np.ones(v.shape[:-1], dtype=bool)

    def symmetric_exp(self, m, v):
        """``(Exp_m(-v), Exp_m(v))`` for ``(m, v)`` in the standard groupoid."""
        m = self.check_point(m)
        v = self.check_vector(m, v)
        if not np.all(self.in_groupoid(m, v)):
            raise OutsideGroupoid(f"{self.name}: tangent element outside the standard groupoid")
        return self.exp_map(m, -v), self.exp_map(m, v)

    def symmetric_exp_inverse(self, m_minus, m_plus):
        """Center and half-chord ``(m, v)`` of the pair ``(m_minus, m_plus)``."""
        try:
            m = self.midpoint(m_minus, m_plus)
        except CutLocus as exc:
            raise OutsideImage(f"{self.name}: pair outside the image of the symmetric exponential") from exc
        return m, self.log_map(m, m_plus)

    # -- charts --------------------------------------------------------
    def from_chart(self, a, b):
        return np.stack(np.broadcast_arrays(_as_array(a), _as_array(b)), axis=-1)

    def to_chart(self, m):
        m = _as_array(m)
        return m[..., 0], m[..., 1]


class Plane(ModelSpace):
    name = "plane"

    def check_point(self, m):
        m = _as_array(m)
        if m.shape[-1] != 2:
            raise BaseMismatch("plane points have two coordinates")
        return m

    def exp_map(self, m, v):
        return self.check_point(m) + self.check_vector(m, v)

    def log_map(self, m, m2):
        return self.check_point(m2) - self.check_point(m)

    def reflect(self, center, m):
        return 2.0 * self.check_point(center) - self.check_point(m)

    def midpoint(self, a, b):
        return 0.5 * (self.check_point(a) + self.check_point(b))


class Torus(ModelSpace):
    name = "torus"

    def check_point(self, m):
        m = _as_array(m)
        if m.shape[-1] != 2:
            raise BaseMismatch("torus points have two angles")
        return np.mod(m, TWO_PI)

    @staticmethod
    def wrap(d):
        """Shortest representative of an angle difference, in ``[-pi, pi)``."""
        return np.mod(d + np.pi, TWO_PI) - np.pi

    def exp_map(self, m, v):
        return np.mod(self.check_point(m) + self.check_vector(m, v), TWO_PI)

    def log_map(self, m, m2):
        d = self.wrap(self.check_point(m2) - self.check_point(m))
        if np.any(np.abs(np.abs(d) - np.pi) < _CUT_TOL):
            raise CutLocus("torus: angle difference equal to pi")
        return d

    def reflect(self, center, m):
        # globally defined isometry, no cut-locus restriction
        return np.mod(2.0 * self.check_point(center) - self.check_point(m), TWO_PI)

    def in_groupoid(self, m, v):
        v = _as_array(v)
        return np.all(np.abs(v) < np.pi / 2, axis=-1)


class Sphere(ModelSpace):
    name = "sphere"
    ambient_dim = 3
    chart_names = ("theta", "phi")

    def check_point(self, m):
        m = _as_array(m)
        if m.shape[-1] != 3:
            raise BaseMismatch("sphere points are 3-vectors")
        n = np.linalg.norm(m, axis=-1)
        drift = np.max(np.abs(n - 1.0)) if n.size else 0.0
        if drift > DRIFT_TOL:
            raise ConstraintDrift(f"sphere: |m| - 1 = {drift:.3g}")
        if drift > ROUNDING_TOL:
            m = m / n[..., None]
        return m

    def project(self, m, u):
        u = _as_array(u)
        return u - edot(m, u)[..., None] * m

    def check_vector(self, m, v):
        v = super().check_vector(m, v)
        off = np.abs(edot(m, v))
        if off.size and np.max(off) > DRIFT_TOL * max(1.0, float(np.max(np.abs(v)))):
            raise BaseMismatch("sphere: vector is not tangent at its base point")
        return v - edot(m, v)[..., None] * m

    def frame(self, m):
        m = _as_array(m)
        a = np.zeros_like(m)
        polar = np.abs(m[..., 2]) > 0.9
        a[..., 2] = np.where(polar, 0.0, 1.0)
        a[..., 0] = np.where(polar, 1.0, 0.0)
        e1 = cross3(a, m)
        e1 = e1 / np.linalg.norm(e1, axis=-1)[..., None]
        e2 = cross3(m, e1)
        if ORIENT < 0:
            e1, e2 = e2, e1
        return e1, e2

    def symplectic_pairing(self, m, u, w):
        m = self.check_point(m)
        return ORIENT * det3(m, self.check_vector(m, u), self.check_vector(m, w))

    def exp_map(self, m, v):
        m = self.check_point(m)
        v = self.check_vector(m, v)
        n = np.linalg.norm(v, axis=-1)
        out = np.cos(n)[..., None] * m + np.sinc(n / np.pi)[..., None] * v
        out = out / np.linalg.norm(out, axis=-1)[..., None]
        # a zero chord returns the base point bit for bit
        return np.where((n == 0)[..., None], m, out)

    def log_map(self, m, m2):
        m = self.check_point(m)
        m2 = self.check_point(m2)
        c = edot(m, m2)
        u = m2 - c[..., None] * m
        s = np.linalg.norm(u, axis=-1)
        d = np.arctan2(s, c)
        if np.any(d > np.pi - 1e-10):
            raise CutLocus("sphere: antipodal points")
        scale = np.where(s > 0, d / np.where(s > 0, s, 1.0), 1.0)
        return scale[..., None] * u

    def distance(self, a, b):
        a = self.check_point(a)
        b = self.check_point(b)
        return np.arctan2(np.linalg.norm(cross3(a, b), axis=-1), edot(a, b))

    def transport(self, m, v, u):
        m = self.check_point(m)
        n = np.linalg.norm(v, axis=-1)
        vh = _safe_unit(v, n)
        a = edot(u, vh)
        moved = (-np.sin(n))[..., None] * m + (np.cos(n) - 1.0)[..., None] * vh
        return u + a[..., None] * moved

    def reflect(self, center, m):
        # rotation by pi about the center; defined everywhere
        c = self.check_point(center)
        m = self.check_point(m)
        return 2.0 * edot(c, m)[..., None] * c - m

    def midpoint(self, a, b):
        a = self.check_point(a)
        b = self.check_point(b)
        s = a + b
        n = np.linalg.norm(s, axis=-1)
        if np.any(n < 1e-10):
            raise CutLocus("sphere: antipodal points have no unique midpoint")
        return s / n[..., None]

    def in_groupoid(self, m, v):
        return np.linalg.norm(_as_array(v), axis=-1) < np.pi / 2

    def from_chart(self, theta, phi):
        theta, phi = np.broadcast_arrays(_as_array(theta), _as_array(phi))
        st = np.sin(theta)
        return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)

    def to_chart(self, m):
        m = self.check_point(m)
        theta = np.arctan2(np.hypot(m[..., 0], m[..., 1]), m[..., 2])
        phi = np.mod(np.arctan2(m[..., 1], m[..., 0]), TWO_PI)
        return theta, phi

    def chart_basis(self, m):
        """Coordinate vectors ``(d m/d theta, d m/d phi)`` at ``m``."""
        theta, phi = self.to_chart(m)
        ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
        e_t = np.stack([ct * cp, ct * sp, -st], axis=-1)
        e_p = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
        return e_t, e_p


class Hyperbolic(ModelSpace):
    name = "hyperbolic"
    ambient_dim = 3
    chart_names = ("rho", "phi")

    def check_point(self, m):
        m = _as_array(m)
        if m.shape[-1] != 3:
            raise BaseMismatch("hyperboloid points are 3-vectors")
        q = -mdot(m, m)
        if np.any(m[..., 2] <= 0) or np.any(q <= 0):
            raise ConstraintDrift("hyperbolic: point is not on the upper sheet")
        drift = np.max(np.abs(q - 1.0) / np.maximum(1.0, m[..., 2] ** 2)) if q.size else 0.0
        if drift > DRIFT_TOL:
            raise ConstraintDrift(f"hyperbolic: z^2 - x^2 - y^2 - 1 = {drift:.3g}")
        if drift > ROUNDING_TOL:
            m = m / np.sqrt(q)[..., None]
        return m

    def inner(self, m, u, w):
        return mdot(u, w)

    def project(self, m, u):
        u = _as_array(u)
        return u + mdot(m, u)[..., None] * m

    def check_vector(self, m, v):
        v = super().check_vector(m, v)
        m = _as_array(m)
        off = np.abs(mdot(m, v))
        scale = max(1.0, float(np.max(np.abs(v)))) * max(1.0, float(np.max(np.abs(m))))
        if off.size and np.max(off) > DRIFT_TOL * scale:
            raise BaseMismatch("hyperbolic: vector is not tangent at its base point")
        return v + mdot(m, v)[..., None] * m

    def boost(self, m):
        """The SO(2,1) boost taking ``(0, 0, 1)`` to ``m``."""
        m = _as_array(m)
        k = m[..., :2]
        z = m[..., 2]
        out = np.zeros(m.shape[:-1] + (3, 3))
        out[..., :2, :2] = np.eye(2) + k[..., :, None] * k[..., None, :] / (1.0 + z)[..., None, None]
        out[..., :2, 2] = k
        out[..., 2, :2] = k
        out[..., 2, 2] = z
        return out

    def frame(self, m):
        b = self.boost(self.check_point(m))
        e1, e2 = b[..., :, 0], b[..., :, 1]
        if ORIENT < 0:
            e1, e2 = e2, e1
        return e1, e2

    def symplectic_pairing(self, m, u, w):
        m = self.check_point(m)
        return ORIENT * det3(m, self.check_vector(m, u), self.check_vector(m, w))

    def exp_map(self, m, v):
        m = self.check_point(m)
        v = self.check_vector(m, v)
        n = np.sqrt(np.maximum(mdot(v, v), 0.0))
        shc = np.where(n > 1e-8, np.sinh(n) / np.where(n > 1e-8, n, 1.0), 1.0 + n**2 / 6.0)
        out = np.cosh(n)[..., None] * m + shc[..., None] * v
        out = out / np.sqrt(-mdot(out, out))[..., None]
        return np.where((n == 0)[..., None], m, out)

    def log_map(self, m, m2):
        m = self.check_point(m)
        m2 = self.check_point(m2)
        u = m2 + mdot(m, m2)[..., None] * m
        s = np.sqrt(np.maximum(mdot(u, u), 0.0))
        d = np.arcsinh(s)
        scale = np.where(s > 1e-8, d / np.where(s > 1e-8, s, 1.0), 1.0 - s**2 / 6.0)
        return scale[..., None] * u

    def distance(self, a, b):
        a = self.check_point(a)
        b = self.check_point(b)
        u = b + mdot(a, b)[..., None] * a
        return np.arcsinh(np.sqrt(np.maximum(mdot(u, u), 0.0)))

    def transport(self, m, v, u):
        m = self.check_point(m)
        n = np.sqrt(np.maximum(mdot(v, v), 0.0))
        vh = _safe_unit(v, n)
        a = mdot(u, vh)
        moved = np.sinh(n)[..., None] * m + (np.cosh(n) - 1.0)[..., None] * vh
        return u + a[..., None] * moved

    def reflect(self, center, m):
        c = self.check_point(center)
        m = self.check_point(m)
        return -2.0 * mdot(c, m)[..., None] * c - m

    def midpoint(self, a, b):
        a = self.check_point(a)
        b = self.check_point(b)
        s = a + b
        return s / np.sqrt(-mdot(s, s))[..., None]

    def from_chart(self, rho, phi):
        rho, phi = np.broadcast_arrays(_as_array(rho), _as_array(phi))
        sr = np.sinh(rho)
        return np.stack([sr * np.cos(phi), sr * np.sin(phi), np.cosh(rho)], axis=-1)

    def to_chart(self, m):
        m = self.check_point(m)
        rho = np.arcsinh(np.hypot(m[..., 0], m[..., 1]))
        phi = np.mod(np.arctan2(m[..., 1], m[..., 0]), TWO_PI)
        return rho, phi

    def chart_basis(self, m):
        """Coordinate vectors ``(d m/d rho, d m/d phi)`` at ``m``."""
        rho, phi = self.to_chart(m)
        cr, sr, cp, sp = np.cosh(rho), np.sinh(rho), np.cos(phi), np.sin(phi)
        e_r = np.stack([cr * cp, cr * sp, sr], axis=-1)
        e_p = np.stack([-sr * sp, sr * cp, np.zeros_like(sr)], axis=-1)
        return e_r, e_p


PLANE = Plane()
TORUS = Torus()
SPHERE = Sphere()
HYPERBOLIC = Hyperbolic()

_SPACES = {s.name: s for s in (PLANE, TORUS, SPHERE, HYPERBOLIC)}


def get_space(name):
    """Look up a model space by name (``plane``, ``torus``, ``sphere``, ``hyperbolic``)."""
    if isinstance(name, ModelSpace):
        return name
    try:
        return _SPACES[str(name).lower()]
    except KeyError:
        raise ValueError(f"unknown space {name!r}; expected one of {sorted(_SPACES)}") from None


def differential(space, f, m, grad=None, step=FD_STEP):
    """Components ``(df(e1), df(e2))`` of the differential of ``f`` in ``space.frame(m)``.

    ``grad`` returns the ambient partial derivatives of ``f``; without it
    the directional derivatives are taken by central differences along the
    geodesics ``exp_map(m, +-h e_j)``.
    """
    m = space.check_point(m)
    e1, e2 = space.frame(m)
    if grad is not None:
        g = _as_array(grad(m))
        return np.stack([edot(g, e1), edot(g, e2)], axis=-1)
    h = np.full(m.shape[:-1], float(step))
    if space is PLANE:
        h = h * np.maximum(1.0, np.max(np.abs(m), axis=-1))
    out = []
    for e in (e1, e2):
        fp = _as_array(f(space.exp_map(m, h[..., None] * e)))
        fm = _as_array(f(space.exp_map(m, -h[..., None] * e)))
        out.append((fp - fm) / (2.0 * h))
    return np.stack(out, axis=-1)


def hamiltonian_vector_field(space, h, m, grad=None):
    """The vector ``v_h`` with ``omega(v_h, .) = -dh`` at ``m``."""
    space = get_space(space)
    m = space.check_point(m)
    dh = differential(space, h, m, grad=grad)
    e1, e2 = space.frame(m)
    return dh[..., 0:1] * e2 - dh[..., 1:2] * e1


def symplectic_dual(space, m, df, frame=None):
    """The vector ``w`` with ``omega(w, .) = df`` given frame components of ``df``."""
    e1, e2 = space.frame(m) if frame is None else frame
    return df[..., 1:2] * e1 - df[..., 0:1] * e2
