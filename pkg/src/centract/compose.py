"""Composition of central actions by stationary midpoint triangles.

``compose2(f1, f2)`` is the action of ``alpha2 o alpha1`` (``f1`` acts
first)::

    (f1 # f2)(m) = Stat_{m1, m2} { f1(m1) + f2(m2) + Delta(m, m1, m2) }

The stationary triangle is located from the generated maps themselves: the
start point ``a`` with ``midpoint(a, alpha2(alpha1(a))) = m`` fixes the
vertices ``a -> alpha1(a) -> alpha2(alpha1(a))`` whose side midpoints are
``m1`` and ``m2``.  A Newton polish on the gradient then certifies
stationarity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import spaces as sp
from .areas import (quad_area, quad_validity, triangle_area, triangle_area_grad, triangle_validity,
                    triangle_vertices)
from .central import CentralAction, as_action, central_vectors, forward_map
from .errors import (BranchMismatch, DegenerateTriplet, InvalidMidpoints, MultipleBranchesWarning, NoConvergence,
                     NotComposable, OutsideImage)


@dataclass
class CompositionResult:
    """Outcome of a stationary-point composition.

    ``value`` is defined modulo an additive constant.  ``stationary_points``
    holds ``(m1, m2)`` for two actions, or the list of side midpoints of a
    chain.  ``m_minus`` and ``m_plus`` are the ends of the composed chord.
    """

    value: np.ndarray
    stationary_points: tuple
    residual: float
    iterations: int
    branch_note: str = ""
    m_minus: np.ndarray | None = None
    m_plus: np.ndarray | None = None
    branches: list = field(default_factory=list)


# -- stationary objective ---------------------------------------------------
class _Objective:
    """``sum_i f_i(x_{a_i}) + sum_k Delta(x_{t_k})`` over free points ``x``.

    Index ``-1`` in a triangle refers to the fixed center ``m``.
    """

    def __init__(self, space, m, action_terms, triangles):
        self.space = space
        self.m = m
        self.action_terms = action_terms
        self.triangles = triangles

    def _pt(self, X, i):
        return self.m if i < 0 else X[..., i, :]

    def valid(self, X):
        ok = np.ones(X.shape[:-2], dtype=bool)
        for tri in self.triangles:
            good, _ = triangle_validity(self.space, *(self._pt(X, i) for i in tri))
            ok &= good
        for f, i in self.action_terms:
            ok &= central_vectors(self.space, f, X[..., i, :])[1]
        return ok

    def value(self, X):
        total = 0.0
        for f, i in self.action_terms:
            total = total + f.alpha(X[..., i, :])
        for tri in self.triangles:
            total = total + triangle_area(self.space, *(self._pt(X, i) for i in tri), check=False)
        return total

    def grad(self, X):
        """Frame components of the gradient at each free point, shape ``(..., n, 2)``."""
        space = self.space
        amb = np.zeros(X.shape)
        for tri in self.triangles:
            parts = triangle_area_grad(space, *(self._pt(X, i) for i in tri))
            for i, g in zip(tri, parts):
                if i >= 0:
                    amb[..., i, :] += g
        out = np.zeros(X.shape[:-1] + (2,))
        for i in range(X.shape[-2]):
            e1, e2 = space.frame(X[..., i, :])
            out[..., i, 0] = sp.edot(amb[..., i, :], e1)
            out[..., i, 1] = sp.edot(amb[..., i, :], e2)
        for f, i in self.action_terms:
            out[..., i, :] += 2.0 * f.differential(X[..., i, :])
        return out

    def move(self, X, step):
        Y = X.copy()
        for i in range(X.shape[-2]):
            xi = X[..., i, :]
            Y[..., i, :] = self.space.exp_map(xi, self.space.from_frame(xi, step[..., i, :]))
        return Y


def _polish(obj, X, tol, max_iter=30, h=1e-6):
    """Newton iteration on the objective gradient with a finite-difference Hessian."""
    G = obj.grad(X)
    n = X.shape[-2]
    flat = lambda A: A.reshape(A.shape[:-2] + (2 * n,))
    gn = np.linalg.norm(flat(G), axis=-1)
    it = 0
    while np.max(gn, initial=0.0) >= tol and it < max_iter:
        it += 1
        cols = []
        for k in range(2 * n):
            e = np.zeros(X.shape[:-1] + (2,))
            e[..., k // 2, k % 2] = h
            cols.append(flat(obj.grad(obj.move(X, e)) - obj.grad(obj.move(X, -e))) / (2 * h))
        Hm = np.stack(cols, axis=-1)
        Hm = 0.5 * (Hm + np.swapaxes(Hm, -1, -2))
        with np.errstate(all="ignore"):
            step = -(np.linalg.pinv(Hm) @ flat(G)[..., None])[..., 0]
        step = np.where(np.isfinite(step), step, 0.0).reshape(X.shape[:-1] + (2,))
        lam = np.ones(X.shape[:-2])
        done = gn < tol
        newX, newG, newgn = X.copy(), G.copy(), gn.copy()
        for _ in range(20):
            cand = obj.move(X, lam[..., None, None] * step)
            Gc = obj.grad(cand)
            gc = np.linalg.norm(flat(Gc), axis=-1)
            good = ~done & obj.valid(cand) & (gc < gn)
            newX[good], newG[good], newgn[good] = cand[good], Gc[good], gc[good]
            done |= good
            if np.all(done):
                break
            lam = np.where(done, lam, 0.5 * lam)
        if np.array_equal(newgn, gn):
            break
        X, G, gn = newX, newG, newgn
    return X, float(np.max(gn, initial=0.0)), it


# -- start-point solve ---------------------------------------------------------
def _chain_map(space, fs, x, strict=True):
    pts = [x]
    for f in fs:
        pts.append(forward_map(space, f, pts[-1], strict=strict)[1])
    return pts


def _solve_start(space, fs, m, tol=1e-13, max_iter=40):
    """Start point ``a`` with ``midpoint(a, alpha_n o ... o alpha_1 (a)) = m``."""
    v = sum(central_vectors(space, f, m)[0] for f in fs)
    x = space.exp_map(m, -v)

    def resid(x):
        end = _chain_map(space, fs, x, strict=False)[-1]
        bad = ~np.all(np.isfinite(end), axis=-1)
        end = np.where(bad[..., None], x, end)
        with np.errstate(invalid="ignore"):
            r = space.to_frame(m, space.log_map(m, space.midpoint(x, end)))
        return np.where(bad[..., None], np.inf, r)

    r = resid(x)
    rn = np.linalg.norm(r, axis=-1)
    h = 1e-7
    it = 0
    active = rn > tol
    while np.any(active) and it < max_iter:
        it += 1
        cols = []
        for j in range(2):
            e = np.zeros(r.shape)
            e[..., j] = h
            cols.append((resid(space.exp_map(x, space.from_frame(x, e))) - r) / h)
        J = np.stack(cols, axis=-1)
        step = -np.linalg.solve(J, r[..., None])[..., 0]
        lam = np.ones(rn.shape)
        for k in range(20):
            cand = space.exp_map(x, space.from_frame(x, lam[..., None] * step))
            rc = resid(cand)
            rcn = np.linalg.norm(rc, axis=-1)
            if k == 0:
                # a full Newton step that no longer halves a tiny residual means rounding noise
                active &= ~((rn < 1e-10) & ~(rcn < 0.5 * rn))
            good = rcn < rn
            if np.all(good | ~active):
                break
            lam = np.where(good, lam, 0.5 * lam)
        upd = (rcn < rn) & active
        if not np.any(upd):
            break
        x = np.where(upd[..., None], cand, x)
        r = np.where(upd[..., None], rc, r)
        rn = np.where(upd, rcn, rn)
        active &= rn > tol
    if np.max(rn, initial=0.0) > 1e-10:
        raise NoConvergence("composition start point not found (caustic of the composed map?)",
                            float(np.max(rn)), it)
    return x


def _midpoints(space, pts):
    return [space.midpoint(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]


# -- public API ---------------------------------------------------------------
def _squeeze(res):
    """Drop the leading batch axis added for a single center."""
    first = lambda a: None if a is None else a[0]  # noqa: E731
    res.value = first(res.value)
    res.stationary_points = tuple(first(p) for p in res.stationary_points)
    res.m_minus, res.m_plus = first(res.m_minus), first(res.m_plus)
    for b in res.branches:
        _squeeze(b)
    return res


def compose2(space, f1, f2, m, init=None, *, tol=1e-10, restarts=0, seed=0):
    """Composed central action of ``alpha2 o alpha1`` at the center(s) ``m``.

    ``init`` optionally supplies starting midpoints ``(m1, m2)``; otherwise
    they are seeded from the generated maps.  ``restarts`` (at most 4)
    perturbs the seed and reports distinct stationary points through
    :class:`MultipleBranchesWarning`.
    """
    space = sp.get_space(space)
    f1, f2 = as_action(space, f1), as_action(space, f2)
    m = space.check_point(m)
    if m.ndim == 1:
        init = None if init is None else tuple(np.asarray(x, dtype=float)[None] for x in init)
        return _squeeze(compose2(space, f1, f2, m[None], init, tol=tol, restarts=restarts, seed=seed))
    obj = _Objective(space, m, [(f1, 0), (f2, 1)], [(-1, 0, 1)])
    m_minus = m_plus = None
    if init is None:
        a = _solve_start(space, [f1, f2], m)
        pts = _chain_map(space, [f1, f2], a)
        m1, m2 = _midpoints(space, pts)
        m_minus, m_plus = pts[0], pts[-1]
    else:
        m1, m2 = (space.check_point(np.broadcast_to(x, m.shape)) for x in init)
    X = np.stack([m1, m2], axis=-2)
    if not np.all(obj.valid(X)):
        raise InvalidMidpoints("composition seed lies outside the valid midpoint region", "seed")
    X, res, it = _polish(obj, X, tol)
    if res >= tol:
        raise NoConvergence("stationary midpoint triangle not found", res, it)
    value = obj.value(X)
    branches = []
    note = "tracked branch of the generated maps" if init is None else "from supplied initial midpoints"
    if restarts:
        rng = np.random.default_rng(seed)
        found = [X]
        for _ in range(min(int(restarts), 4)):
            Y = obj.move(X, rng.normal(scale=0.2, size=X.shape[:-1] + (2,)))
            if not np.all(obj.valid(Y)):
                continue
            try:
                Y, r2, _ = _polish(obj, Y, tol)
            except (InvalidMidpoints, np.linalg.LinAlgError):
                continue
            if r2 < tol and not any(np.max(np.abs(Y - Z)) < 1e-6 for Z in found):
                found.append(Y)
                branches.append(CompositionResult(obj.value(Y), (Y[..., 0, :], Y[..., 1, :]), r2, 0,
                                                  "restart branch"))
        if branches:
            note += f"; {len(branches)} further stationary point(s) found"
            warnings.warn(f"composition has {len(branches) + 1} stationary points", MultipleBranchesWarning,
                          stacklevel=2)
    if m_minus is None:
        try:
            m_minus, _, m_plus = triangle_vertices(space, m, X[..., 0, :], X[..., 1, :])
        except DegenerateTriplet:
            pass
    return CompositionResult(value, (X[..., 0, :], X[..., 1, :]), res, it, note, m_minus, m_plus, branches)


def composed_action(space, f1, f2, **kw):
    """The composed action as a :class:`CentralAction`.

    Its gradient at ``m`` is the partial derivative of the triangle area in
    ``m`` at the stationary midpoints (the other partials vanish there).
    """
    space = sp.get_space(space)

    def fn(m):
        return compose2(space, f1, f2, m, **kw).value

    def grad(m):
        r = compose2(space, f1, f2, m, **kw)
        return triangle_area_grad(space, m, *r.stationary_points)[0]

    return CentralAction(space, fn, grad, label=f"({getattr(f1, 'label', 'f1')})#({getattr(f2, 'label', 'f2')})")


def compose_chain(space, fs, m, *, tol=1e-10, cross_check=True):
    """Left-associated composition ``((f1 # f2) # f3) # ...`` at ``m``.

    The intermediate composite centers ``M_k = mid(a_0, a_k)`` are extra
    stationary variables.  For three actions the value is compared with the
    direct quadrilateral objective whenever its constraints hold.
    """
    space = sp.get_space(space)
    fs = [as_action(space, f) for f in fs]
    m = space.check_point(m)
    if m.ndim == 1:
        return _squeeze(compose_chain(space, fs, m[None], tol=tol, cross_check=cross_check))
    n = len(fs)
    if n == 0:
        raise ValueError("compose_chain needs at least one action")
    if n == 1:
        v, ok = central_vectors(space, fs[0], m)
        return CompositionResult(fs[0].alpha(m), (m,), 0.0, 0, "single action",
                                 space.exp_map(m, -v), space.exp_map(m, v))
    a = _solve_start(space, fs, m)
    pts = _chain_map(space, fs, a)
    mids = _midpoints(space, pts)
    centers = [space.midpoint(pts[0], pts[k]) for k in range(2, n)]
    X = np.stack(mids + centers, axis=-2)
    # variable layout: m_1..m_n at 0..n-1, M_2..M_{n-1} at n..2n-3
    def M(k):
        if k == 1:
            return 0
        if k == n:
            return -1
        return n + k - 2

    tris = [(M(k), M(k - 1), k - 1) for k in range(2, n + 1)]
    obj = _Objective(space, m, [(f, i) for i, f in enumerate(fs)], tris)
    X, res, it = _polish(obj, X, tol)
    if res >= tol:
        raise NoConvergence("stationary midpoint polygon not found", res, it)
    value = obj.value(X)
    note = "left-associated chain"
    if cross_check and n == 3:
        q = [X[..., 0, :], X[..., 1, :], X[..., 2, :], m]
        ok, _ = quad_validity(space, *q)
        if np.all(ok):
            try:
                direct = sum(f.alpha(X[..., i, :]) for i, f in enumerate(fs)) + quad_area(space, *q)
            except InvalidMidpoints:
                direct = None
            if direct is not None:
                diff = value - direct
                if space is sp.SPHERE:
                    diff = (diff + 2 * np.pi) % (4 * np.pi) - 2 * np.pi
                if np.max(np.abs(diff)) > 1e-6:
                    raise BranchMismatch(f"chain and quadrilateral objectives differ by {np.max(np.abs(diff)):.3g}")
                note += "; quadrilateral cross-check passed"
    return CompositionResult(value, tuple(X[..., i, :] for i in range(n)), res, it, note, pts[0], pts[-1])


def groupoid_product(space, t1, t2, tol=1e-9):
    """Product of centered tangent elements ``t1 = (m1, v1)`` and ``t2 = (m2, v2)``.

    Requires the end of ``t1`` to be the start of ``t2``; returns the
    centered element of the pair (start of ``t1``, end of ``t2``).
    """
    space = sp.get_space(space)
    (c1, v1), (c2, v2) = t1, t2
    lo1, hi1 = space.symmetric_exp(c1, v1)
    lo2, hi2 = space.symmetric_exp(c2, v2)
    gap = space.distance(hi1, lo2)
    if np.any(gap > tol):
        raise NotComposable(f"{space.name}: end of the first element misses the start of the second by {np.max(gap):.3g}")
    try:
        return space.symmetric_exp_inverse(lo1, hi2)
    except OutsideImage:
        raise


def inverse_element(space, t):
    """Inverse ``(m, -v)`` of a centered tangent element."""
    c, v = t
    return sp.get_space(space).check_point(c), -np.asarray(v, dtype=float)
