"""Central actions and the central equation.

A central action is a scalar field ``f_alpha`` on a model space.  The library
works with the rescaled ``f = f_alpha / 2``; its differential determines the
centered chord field ``F(m) = (m, v)`` and through the symmetric exponential
map the generated pair ``(m_minus, m_plus) = (Exp_m(-v), Exp_m(v))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import spaces as sp
from .errors import ConsistencyViolation, NoConvergence, StencilOutsideDomain


class CentralAction:
    """A scalar field ``f_alpha`` on a model space.

    Parameters
    ----------
    space:
        model space or its name.
    fn:
        callable taking points of shape ``(..., d)`` and returning values of
        shape ``(...)``.
    grad:
        optional callable returning ambient partial derivatives of ``fn``.
    domain:
        optional predicate returning a boolean mask of valid points.
    half:
        when true ``fn`` returns ``f = f_alpha / 2`` instead of ``f_alpha``.
    """

    def __init__(self, space, fn, grad=None, domain=None, *, half=False, label="callable", spec=None):
        self.space = sp.get_space(space)
        self._fn = fn
        self._grad = grad
        self._domain = domain
        self._factor = 2.0 if half else 1.0
        self.label = label
        self.spec = spec

    def __repr__(self):
        return f"CentralAction({self.space.name}, {self.label})"

    @property
    def has_gradient(self):
        return self._grad is not None

    def __call__(self, m):
        return self.alpha(m)

    def alpha(self, m):
        """Values of ``f_alpha``."""
        return self._factor * np.asarray(self._fn(np.asarray(m, dtype=float)), dtype=float)

    def half_value(self, m):
        """Values of ``f = f_alpha / 2``."""
        return 0.5 * self.alpha(m)

    def alpha_grad(self, m):
        """Ambient gradient of ``f_alpha``, or ``None`` without a closed form."""
        if self._grad is None:
            return None
        return self._factor * np.asarray(self._grad(np.asarray(m, dtype=float)), dtype=float)

    def domain(self, m):
        """Mask of points where the action itself is defined."""
        m = np.asarray(m, dtype=float)
        if self._domain is None:
            return np.ones(m.shape[:-1], dtype=bool)
        return np.asarray(self._domain(m), dtype=bool)

    def differential(self, m, frame=None):
        """Frame components of ``d(f_alpha / 2)`` at ``m``."""
        m = self.space.check_point(m)
        g = self.alpha_grad(m)
        if g is not None:
            e1, e2 = self.space.frame(m) if frame is None else frame
            return 0.5 * np.stack([sp.edot(g, e1), sp.edot(g, e2)], axis=-1)
        return sp.differential(self.space, self.half_value, m)

    # -- algebra ---------------------------------------------------------
    def __neg__(self):
        grad = None if self._grad is None else (lambda m: -self.alpha_grad(m))
        return CentralAction(self.space, lambda m: -self.alpha(m), grad, self._domain,
                             label=f"-({self.label})")

    def __add__(self, c):
        if isinstance(c, CentralAction):
            return NotImplemented
        c = float(c)
        grad = None if self._grad is None else self.alpha_grad
        return CentralAction(self.space, lambda m: self.alpha(m) + c, grad, self._domain,
                             label=f"{self.label}+{c:g}", spec=self.spec)

    __radd__ = __add__

    def scaled(self, s):
        """The action ``s * f_alpha``."""
        s = float(s)
        grad = None if self._grad is None else (lambda m: s * self.alpha_grad(m))
        return CentralAction(self.space, lambda m: s * self.alpha(m), grad, self._domain,
                             label=f"{s:g}*({self.label})")


def constant_action(space, c=0.0):
    space = sp.get_space(space)
    c = float(c)

    def fn(m):
        return np.full(np.shape(m)[:-1], c)

    def grad(m):
        return np.zeros(np.shape(m))

    return CentralAction(space, fn, grad, label=f"const {c:g}")


def as_action(space, f):
    """Wrap a bare callable (values of ``f_alpha``) as a :class:`CentralAction`."""
    if isinstance(f, CentralAction):
        return f
    return CentralAction(space, f)


def _length_from_dual(space, n):
    if space is sp.SPHERE:
        return np.arcsin(np.minimum(n, 1.0))
    if space is sp.HYPERBOLIC:
        return np.arcsinh(n)
    return n


def _consistent(space, df, n):
    if space is sp.SPHERE:
        return n < 1.0
    if space is sp.TORUS:
        return np.all(np.abs(df) < np.pi / 2, axis=-1)
    return np.isfinite(n)


def central_vectors(space, f, m):
    """Chord half-vectors ``v(m)`` and a validity mask, without raising."""
    space = sp.get_space(space)
    f = as_action(space, f)
    m = space.check_point(m)
    fr = space.frame(m)
    df = f.differential(m, fr)
    w = sp.symplectic_dual(space, m, df, fr)
    n = np.hypot(df[..., 0], df[..., 1])
    ok = _consistent(space, df, n) & f.domain(m) & np.isfinite(n)
    length = _length_from_dual(space, np.where(ok, n, 0.0))
    scale = np.where(n > 0, length / np.where(n > 0, n, 1.0), 1.0)
    v = scale[..., None] * np.where(ok[..., None], w, 0.0)
    return v, ok


def central_map(space, f, m):
    """The centered chord ``v`` with ``F(m) = (m, v)`` for the action ``f``.

    Raises :class:`ConsistencyViolation` where the space's consistency
    condition (``||df|| < 1`` on the sphere, ``|f_p|, |f_q| < pi/2`` on the
    torus) or the action's own domain fails.
    """
    space = sp.get_space(space)
    v, ok = central_vectors(space, f, m)
    if not np.all(ok):
        raise ConsistencyViolation(f"{space.name}: consistency condition fails at {int(np.size(ok) - np.count_nonzero(ok))} point(s)")
    return v


def generated_pair(space, f, m):
    """The pair ``(m_minus, m_plus)`` generated by ``f`` with center ``m``."""
    space = sp.get_space(space)
    m = space.check_point(m)
    v = central_map(space, f, m)
    return space.exp_map(m, -v), space.exp_map(m, v)


# -- chart closed forms ---------------------------------------------------
def _branch(x):
    # Sign(0) := +1
    return np.where(x < 0, np.pi, 0.0)


def sphere_chart_pair(theta, phi, f_theta, f_phi):
    """Polar-chart pair on the sphere from the partials of ``f = f_alpha / 2``.

    Returns ``((theta_minus, phi_minus), (theta_plus, phi_plus))``.
    """
    st, ct = np.sin(theta), np.cos(theta)
    norm2 = f_theta**2 + (f_phi / st) ** 2
    c0 = np.sqrt(1.0 - norm2)
    out = []
    for s in (-1.0, 1.0):
        th = np.arccos(np.clip(ct * c0 - s * f_phi, -1.0, 1.0))
        a = st**2 * c0 + s * ct * f_phi
        ph = phi - s * np.arctan(st * f_theta / a) + _branch(a)
        out.append((th, np.mod(ph, sp.TWO_PI)))
    return out[0], out[1]


def hyperbolic_chart_pair(rho, phi, f_rho, f_phi):
    """Polar-chart pair on the hyperbolic plane from the partials of ``f``."""
    sr, cr = np.sinh(rho), np.cosh(rho)
    norm2 = f_rho**2 + (f_phi / sr) ** 2
    c0 = np.sqrt(1.0 + norm2)
    out = []
    for s in (-1.0, 1.0):
        r = np.arccosh(np.maximum(cr * c0 + s * f_phi, 1.0))
        g = sr**2 * c0 + s * cr * f_phi
        ph = phi - s * np.arctan(sr * f_rho / g) + _branch(g)
        out.append((r, np.mod(ph, sp.TWO_PI)))
    return out[0], out[1]


def chart_partials(space, f, m):
    """Partials of ``f = f_alpha / 2`` along the polar coordinate vectors at ``m``."""
    space = sp.get_space(space)
    f = as_action(space, f)
    m = space.check_point(m)
    b1, b2 = space.chart_basis(m)
    df = f.differential(m)
    e1, e2 = space.frame(m)
    # express the coordinate vectors in the orthonormal frame
    d1 = df[..., 0] * space.inner(m, b1, e1) + df[..., 1] * space.inner(m, b1, e2)
    d2 = df[..., 0] * space.inner(m, b2, e1) + df[..., 1] * space.inner(m, b2, e2)
    return d1, d2


def chart_generated_pair(space, f, m):
    """Generated pair via the polar-chart closed forms (sphere and hyperbolic only)."""
    space = sp.get_space(space)
    m = space.check_point(m)
    a, b = space.to_chart(m)
    d1, d2 = chart_partials(space, f, m)
    if space is sp.SPHERE:
        lo, hi = sphere_chart_pair(a, b, d1, d2)
    elif space is sp.HYPERBOLIC:
        lo, hi = hyperbolic_chart_pair(a, b, d1, d2)
    else:
        raise ValueError("chart closed forms exist for the sphere and hyperbolic plane only")
    return space.from_chart(*lo), space.from_chart(*hi)


# -- caustics -------------------------------------------------------------
@dataclass
class CausticReport:
    """Jacobian determinants of the chord field and of the graph map.

    ``central_indicator`` is ``|det dF/dm|`` and ``graph_indicator`` is
    ``|det d(Exp_m(-F(m)))/dm|``, both in exponential coordinates at ``m``
    with fibers parallel-transported back to ``m``.
    """

    central_indicator: np.ndarray
    graph_indicator: np.ndarray
    near_central_caustic: np.ndarray
    near_graph_caustic: np.ndarray
    thresholds: dict = field(default_factory=dict)


CAUSTIC_LARGE = 1e8
CAUSTIC_SMALL = 1e-8


def _local_fields(space, f, m, x):
    """Frame coordinates of ``F`` and of ``Exp(-F)`` at ``exp_m(x)``, referred back to ``m``."""
    u = space.from_frame(m, x)
    mp = space.exp_map(m, u)
    v, ok = central_vectors(space, f, mp)
    back = space.log_map(mp, m)
    v_at_m = space.transport(mp, back, v)
    minus = space.exp_map(mp, -v)
    return space.to_frame(m, v_at_m), space.to_frame(m, space.log_map(m, minus)), ok


def caustic_indicators(space, f, m, step=1e-5, large=CAUSTIC_LARGE, small=CAUSTIC_SMALL):
    """Central and graph caustic indicators of ``f`` at ``m``."""
    space = sp.get_space(space)
    f = as_action(space, f)
    m = space.check_point(m)
    cols_f, cols_g = [], []
    for j in range(2):
        x = np.zeros(m.shape[:-1] + (2,))
        x[..., j] = step
        fp, gp, okp = _local_fields(space, f, m, x)
        fm, gm, okm = _local_fields(space, f, m, -x)
        if not (np.all(okp) and np.all(okm)):
            raise StencilOutsideDomain(f"{space.name}: caustic stencil leaves the consistency domain")
        cols_f.append((fp - fm) / (2 * step))
        cols_g.append((gp - gm) / (2 * step))
    with np.errstate(invalid="ignore", over="ignore"):
        jf = np.stack(cols_f, axis=-1)
        jg = np.stack(cols_g, axis=-1)
        central = np.abs(np.linalg.det(jf))
        graph = np.abs(np.linalg.det(jg))
    return CausticReport(
        central_indicator=central,
        graph_indicator=graph,
        near_central_caustic=~np.isfinite(central) | (central > large),
        near_graph_caustic=~np.isfinite(graph) | (graph < small) | (graph > large),
        thresholds={"large": large, "small": small, "step": step},
    )


# -- implicit forward map ---------------------------------------------------
@dataclass
class ForwardSolution:
    m_minus: np.ndarray
    m_plus: np.ndarray
    center: np.ndarray
    residual: float
    iterations: int


def _forward_residual(space, f, m_minus, m):
    v, ok = central_vectors(space, f, m)
    back = space.exp_map(m, -v)
    with np.errstate(invalid="ignore"):
        try:
            r = space.to_frame(m_minus, space.log_map(m_minus, back))
        except sp.CutLocus:
            r = np.full(m.shape[:-1] + (2,), np.inf)
    r = np.where(ok[..., None], r, np.inf)
    return r, v


def forward_map(space, f, m_minus, guess=None, *, tol=1e-12, max_iter=50, full=False, strict=True):
    """Image ``m_plus`` of ``m_minus`` under the transformation generated by ``f``.

    Solves ``Exp_m(-F(m)) = m_minus`` for the center ``m`` by damped Newton
    iteration with a finite-difference Jacobian, then returns
    ``(m_minus, Exp_m(F(m)))``.  ``guess`` is an initial center; by default
    ``Exp_{m_minus}(F(m_minus))``.  With ``full=True`` a
    :class:`ForwardSolution` is returned instead.  With ``strict=False``
    rows that fail to converge come back as NaN instead of raising.
    """
    space = sp.get_space(space)
    f = as_action(space, f)
    m_minus = space.check_point(m_minus)
    shape = m_minus.shape
    mm = m_minus.reshape(-1, shape[-1])
    if guess is None:
        v0, ok0 = central_vectors(space, f, mm)
        m = space.exp_map(mm, np.where(ok0[:, None], v0, 0.0))
    else:
        m = space.check_point(np.broadcast_to(guess, shape)).reshape(-1, shape[-1]).copy()
    scale = np.maximum(1.0, np.max(np.abs(mm), axis=-1))
    r, v = _forward_residual(space, f, mm, m)
    rn = np.linalg.norm(r, axis=-1)
    retry = ~np.isfinite(rn)
    if np.any(retry):
        # seed left the domain: start from m_minus itself
        m[retry] = mm[retry]
        r[retry], _ = _forward_residual(space, f, mm[retry], m[retry])
        rn = np.linalg.norm(r, axis=-1)
    active = ~(rn < tol * scale)
    growth = np.zeros(len(mm), dtype=int)
    failed = ~np.isfinite(rn)
    if strict and np.any(failed):
        raise NoConvergence(f"{space.name}: initial center outside the consistency domain", float("inf"), 0)
    active &= ~failed
    it = 0
    fd = 1e-7
    while np.any(active) and it < max_iter:
        it += 1
        idx = np.nonzero(active)[0]
        ma, mma, ra = m[idx], mm[idx], r[idx]
        h = fd * scale[idx]
        cols = []
        for j in range(2):
            x = np.zeros((len(idx), 2))
            x[:, j] = h
            rj, _ = _forward_residual(space, f, mma, space.exp_map(ma, space.from_frame(ma, x)))
            with np.errstate(invalid="ignore"):
                cols.append((rj - ra) / h[:, None])
        jac = np.stack(cols, axis=-1)
        with np.errstate(invalid="ignore"):
            bad = ~np.all(np.isfinite(jac), axis=(-1, -2)) | (np.abs(np.linalg.det(jac)) < 1e-300)
            jac[bad] = np.eye(2)
            step = -np.linalg.solve(jac, ra[..., None])[..., 0]
        step[~np.isfinite(step)] = 0.0
        rna = rn[idx]
        lam = np.ones(len(idx))
        accepted = np.zeros(len(idx), dtype=bool)
        new_m, new_r, new_rn = ma.copy(), ra.copy(), rna.copy()
        for _ in range(30):
            todo = ~accepted
            if not np.any(todo):
                break
            t = np.nonzero(todo)[0]
            cand = space.exp_map(ma[t], space.from_frame(ma[t], lam[t, None] * step[t]))
            rc, _ = _forward_residual(space, f, mma[t], cand)
            rcn = np.linalg.norm(rc, axis=-1)
            good = rcn < rna[t]
            gi = t[good]
            new_m[gi], new_r[gi], new_rn[gi] = cand[good], rc[good], rcn[good]
            accepted[gi] = True
            lam[t[~good]] *= 0.5
        m[idx], r[idx], rn[idx] = new_m, new_r, new_rn
        growth[idx] = np.where(accepted, 0, growth[idx] + 1)
        active = ~(rn < tol * scale)
        # stalled at rounding level: accept when already well below 1e-10
        stalled = active & (growth > 0) & (rn < 1e-10 * scale)
        active &= ~stalled
        diverged = active & (growth >= 5)
        if np.any(diverged):
            if strict:
                worst = float(np.max(rn[diverged]))
                raise NoConvergence(f"{space.name}: forward map diverged (caustic or bad guess)", worst, it)
            failed |= diverged
            active &= ~diverged
    if np.any(active):
        if strict:
            raise NoConvergence(f"{space.name}: forward map did not converge in {max_iter} iterations",
                                float(np.max(rn[active])), it)
        failed |= active
    if np.any(failed):
        m[failed] = mm[failed]
    v, _ = central_vectors(space, f, m)
    mp = space.exp_map(m, v)
    mp[failed] = np.nan
    m[failed] = np.nan
    mp = mp.reshape(shape)
    if full:
        return ForwardSolution(m_minus, mp, m.reshape(shape), float(np.max(rn[~failed], initial=0.0)), it)
    return m_minus, mp
