"""Midpoint-centered integration, the accumulated central action, and HJ checks.

One step of size ``eps`` is the transformation generated by the central
action ``-eps * h(., t + eps/2)``: the step's endpoints are centered on the
point where ``h`` is sampled.  On the plane this is the implicit midpoint
rule.  Summing ``-eps * h`` over the step centers and adding the symplectic
area enclosed by the path and the closing chord gives the central action
``Psi_h(m, t)`` of the time-``t`` flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spaces as sp
from .areas import vertex_polygon_area
from .central import CentralAction, as_action, central_map, central_vectors, forward_map
from .errors import NoConvergence


class Hamiltonian:
    """A time-dependent scalar field ``h(m, t)``.

    ``h`` and the optional ``grad`` (ambient partial derivatives) take
    points of shape ``(..., d)`` and a scalar time.  Pass
    ``autonomous=True`` with one-argument callables ``h(m)``.
    """

    def __init__(self, space, h, grad=None, autonomous=False, label="h"):
        self.space = sp.get_space(space)
        self.autonomous = autonomous
        self.label = label
        if autonomous:
            self._h = lambda m, t: h(m)
            self._grad = None if grad is None else (lambda m, t: grad(m))
        else:
            self._h = h
            self._grad = grad

    def __call__(self, m, t=0.0):
        return np.asarray(self._h(np.asarray(m, dtype=float), t), dtype=float)

    def grad(self, m, t=0.0):
        return None if self._grad is None else np.asarray(self._grad(np.asarray(m, dtype=float), t), dtype=float)

    def action(self, scale, t):
        """The central action ``scale * h(., t)``."""
        g = None if self._grad is None else (lambda m: scale * self._grad(m, t))
        return CentralAction(self.space, lambda m: scale * self._h(m, t), g, label=f"{scale:g}*{self.label}")

    def vector_field(self, m, t=0.0):
        g = None if self._grad is None else (lambda x: self._grad(x, t))
        return sp.hamiltonian_vector_field(self.space, lambda x: self._h(x, t), m, grad=g)


def as_hamiltonian(space, h):
    if isinstance(h, Hamiltonian):
        return h
    return Hamiltonian(space, h, autonomous=True)


@dataclass
class Trajectory:
    """Discrete path ``nu(t_i)`` with its step centers and accumulated action.

    ``points`` has the time index first: shape ``(steps + 1, ..., d)``.
    """

    times: np.ndarray
    points: np.ndarray
    centers: np.ndarray
    closing_center: np.ndarray
    accumulated_action: np.ndarray
    hamiltonian_sum: np.ndarray


def _fixed_point_center(space, f, m_minus, seed=None, tol=1e-14, max_iter=60):
    """Center ``m`` with ``Exp_m(-F(m)) = m_minus`` by fixed-point iteration.

    The map ``m -> Exp_{m_minus}(P v(m))``, with ``P`` the parallel transport
    from ``m`` to ``m_minus``, contracts with rate ``O(eps)`` for short steps.
    Returns ``None`` when it fails to contract.
    """
    if seed is None:
        v, ok = central_vectors(space, f, m_minus)
        m = space.exp_map(m_minus, v)
    else:
        m = seed
    scale = max(1.0, float(np.max(np.abs(m_minus), initial=0.0)))
    prev = np.inf
    for _ in range(max_iter):
        v, ok = central_vectors(space, f, m)
        if not np.all(ok):
            return None
        # carry v back to m_minus along the chord from m
        new = space.exp_map(m_minus, space.transport(m, space.log_map(m, m_minus), v))
        d = np.max(np.abs(new - m), initial=0.0) / scale
        if d >= prev:
            # rounding floor reached
            return m if prev < 1e-12 else None
        m = new
        if d <= tol:
            return m
        prev = d
    return m if prev < 1e-12 else None


def midpoint_step(space, H, t, eps, m_minus, seed=None):
    """One centered step from ``m_minus`` at time ``t``; returns ``(center, m_plus)``.

    ``seed`` optionally predicts the center; the default is the explicit
    half step ``Exp(eps/2 v_h)`` from ``m_minus``.
    """
    space = sp.get_space(space)
    H = as_hamiltonian(space, H)
    m_minus = space.check_point(m_minus)
    if eps == 0:
        return m_minus.copy(), m_minus.copy()
    f = H.action(-eps, t + 0.5 * eps)
    m = _fixed_point_center(space, f, m_minus, seed)
    if m is None:
        sol = forward_map(space, f, m_minus, full=True)
        return sol.center, sol.m_plus
    v, _ = central_vectors(space, f, m)
    return m, space.exp_map(m, v)


def integrate_flow(space, H, m0, t_final, steps, t0=0.0):
    """Iterated :func:`midpoint_step` from ``m0`` over ``[t0, t_final]``."""
    space = sp.get_space(space)
    H = as_hamiltonian(space, H)
    m0 = space.check_point(m0)
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be positive")
    eps = (t_final - t0) / steps
    times = t0 + eps * np.arange(steps + 1)
    pts = np.empty((steps + 1,) + m0.shape)
    ctr = np.empty((steps,) + m0.shape)
    pts[0] = m0
    hsum = np.zeros(m0.shape[:-1])
    for i in range(steps):
        # the previous center reflected through the current point predicts the next one
        guess = None if i == 0 else space.reflect(pts[i], ctr[i - 1])
        c, nxt = midpoint_step(space, H, times[i], eps, pts[i], guess)
        ctr[i] = c
        pts[i + 1] = nxt
        hsum = hsum + eps * H(c, times[i] + 0.5 * eps)
    closing = space.midpoint(pts[-1], pts[0])
    area = vertex_polygon_area(space, pts)
    return Trajectory(times, pts, ctr, closing, -hsum + area, hsum)


@dataclass
class FlowAction:
    """Central action of the time-``t`` flow at ``m`` with its shooting trajectory."""

    value: np.ndarray
    trajectory: Trajectory
    residual: float
    iterations: int


def _shoot(space, H, m, t, steps, x, tol, max_iter):
    """Newton over the start point so that the trajectory's end chord is centered on ``m``."""
    h = 1e-7

    def resid(tr, k):
        c = space.midpoint(tr.points[0][k], tr.points[-1][k])
        return space.to_frame(m, space.log_map(m, c))

    def run(x):
        return integrate_flow(space, H, x, t, steps)

    tr = run(x)
    r = space.to_frame(m, space.log_map(m, space.midpoint(tr.points[0], tr.points[-1])))
    rn = np.linalg.norm(r, axis=-1)
    it = 0
    while np.max(rn, initial=0.0) > tol and it < max_iter:
        it += 1
        # both perturbed shots are integrated as one batch
        shifts = [space.exp_map(x, space.from_frame(x, np.broadcast_to(h * e, r.shape))) for e in np.eye(2)]
        big = run(np.stack(shifts))
        J = np.stack([(resid(big, j) - r) / h for j in range(2)], axis=-1)
        step = -(np.linalg.pinv(J) @ r[..., None])[..., 0]
        lam = 1.0
        for _ in range(20):
            cand = space.exp_map(x, space.from_frame(x, lam * step))
            ctr = run(cand)
            rc = space.to_frame(m, space.log_map(m, space.midpoint(ctr.points[0], ctr.points[-1])))
            rcn = np.linalg.norm(rc, axis=-1)
            if np.max(rcn, initial=0.0) < np.max(rn, initial=0.0):
                break
            lam *= 0.5
        else:
            break
        x, tr, r, rn = cand, ctr, rc, rcn
    return x, tr, float(np.max(rn, initial=0.0)), it


def action_of_flow(space, H, m, t, steps, *, tol=1e-12, max_iter=30, full=False):
    """Central action ``Psi_h(m, t)`` of the time-``t`` flow of ``H``.

    Shoots over the start ``nu(0)`` until the discrete trajectory's end
    points are centered on ``m``; then returns ``-sum eps h(m'_i) +`` the
    signed area of the path closed by its chord.
    """
    space = sp.get_space(space)
    H = as_hamiltonian(space, H)
    m = space.check_point(m)
    if t == 0:
        z = np.zeros(m.shape[:-1])
        tr = Trajectory(np.zeros(1), m[None], m[None][:0], m, z, z)
        return FlowAction(z, tr, 0.0, 0) if full else z
    x0 = space.exp_map(m, -central_vectors(space, H.action(-t, 0.5 * t), m)[0])
    try:
        x, tr, res, it = _shoot(space, H, m, t, steps, x0, tol, max_iter)
        if res > 1e-10:
            raise NoConvergence("shooting stalled", res, it)
    except NoConvergence:
        # continuation in time from a short flow
        x = x0
        for frac in (0.25, 0.5, 0.75, 1.0):
            k = max(1, int(round(steps * frac)))
            x, tr, res, it = _shoot(space, H, m, t * frac, k, x, tol, max_iter)
        if res > 1e-10:
            raise NoConvergence("no trajectory centered on m (central caustic?)", res, it)
    value = tr.accumulated_action
    return FlowAction(value, tr, res, it) if full else value


def flow_action_provider(space, H, steps, step=1e-4):
    """Time-indexed provider ``t -> CentralAction`` of the numerically computed ``Psi_h(., t)``.

    The gradient is a central difference of :func:`action_of_flow` with all
    four offsets shot in one batch.  The wide default step keeps the
    shooting noise out of the derivative.
    """
    space = sp.get_space(space)
    H = as_hamiltonian(space, H)

    def provider(t):
        def fn(m):
            return action_of_flow(space, H, m, t, steps)

        def grad(m):
            e1, e2 = space.frame(m)
            offs = [space.exp_map(m, s * step * e) for e in (e1, e2) for s in (1.0, -1.0)]
            vals = fn(np.stack(offs))
            d1 = (vals[0] - vals[1]) / (2 * step)
            d2 = (vals[2] - vals[3]) / (2 * step)
            return d1[..., None] * e1 + d2[..., None] * e2

        return CentralAction(space, fn, grad, label=f"Psi(t={t:g})")

    return provider


# -- Hamilton-Jacobi ---------------------------------------------------------
def _psi_at(space, psi, t):
    act = psi(t)
    return as_action(space, act)


def hj_residual(space, H, psi, m, t, dt=1e-5, full=False):
    """``dPsi/dt + h(Exp_m(F(m)), t)`` for a time-indexed action provider ``psi``.

    ``psi(t)`` returns a :class:`CentralAction` (or a callable giving
    ``f_alpha`` values).  If ``psi`` has an attribute ``dt(m, t)`` it is used
    for the time derivative; otherwise central differences with step ``dt``.
    With ``full=True`` returns ``(residual, dPsi/dt, h(m_plus))``.
    """
    space = sp.get_space(space)
    H = as_hamiltonian(space, H)
    m = space.check_point(m)
    f = _psi_at(space, psi, t)
    v = central_map(space, f, m)
    h_plus = H(space.exp_map(m, v), t)
    dpsi = _psi_dt(space, psi, m, t, dt)
    return (dpsi + h_plus, dpsi, h_plus) if full else dpsi + h_plus


def _psi_dt(space, psi, m, t, dt):
    if hasattr(psi, "dt"):
        return np.asarray(psi.dt(m, t), dtype=float)
    return (_psi_at(space, psi, t + dt).alpha(m) - _psi_at(space, psi, t - dt).alpha(m)) / (2 * dt)


def poisson_bracket(space, a, b, m, grad_a=None, grad_b=None):
    """``{a, b} = da(v_b) = omega(v_b, v_a)``; on the plane ``a_q b_p - a_p b_q``."""
    space = sp.get_space(space)
    m = space.check_point(m)
    va = sp.hamiltonian_vector_field(space, a, m, grad=grad_a)
    vb = sp.hamiltonian_vector_field(space, b, m, grad=grad_b)
    return space.symplectic_pairing(m, vb, va)


def flow_derivative(space, psi, g, H, m, t):
    """Time derivative of ``Psi`` along the flow of ``g``: ``{Psi, g} - h(Exp_m(F(m)), t)``."""
    space = sp.get_space(space)
    H = as_hamiltonian(space, H)
    g = as_hamiltonian(space, g)
    m = space.check_point(m)
    f = _psi_at(space, psi, t)
    bracket = poisson_bracket(space, f.alpha, lambda x: g(x, t), m,
                              grad_a=f.alpha_grad if f.has_gradient else None,
                              grad_b=None if g.grad(m, t) is None else (lambda x: g.grad(x, t)))
    m_plus = space.exp_map(m, central_map(space, f, m))
    return bracket - H(m_plus, t)


def flow_derivative_direct(space, psi, g, m, t, dt=1e-5):
    """``dPsi/dt + dPsi(v_g)`` by finite differences (the total-derivative route)."""
    space = sp.get_space(space)
    g = as_hamiltonian(space, g)
    m = space.check_point(m)
    f = _psi_at(space, psi, t)
    vg = g.vector_field(m, t)
    dpsi = sp.differential(space, f.alpha, m, grad=f.alpha_grad if f.has_gradient else None)
    comp = space.to_frame(m, vg)
    return _psi_dt(space, psi, m, t, dt) + np.sum(dpsi * comp, axis=-1)
