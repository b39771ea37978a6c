import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from centract import spaces as sp
from centract.errors import BaseMismatch, ConstraintDrift, CutLocus, OutsideGroupoid, OutsideImage

from conftest import CURVED, SPACES, nearby, random_points


@pytest.mark.parametrize("name", SPACES)
def test_exp_log_roundtrip(name, rng):
    space = sp.get_space(name)
    m = random_points(name, rng, 300)
    c = rng.normal(scale=0.7, size=(300, 2))
    v = space.from_frame(m, c)
    back = space.log_map(m, space.exp_map(m, v))
    assert np.max(np.abs(space.to_frame(m, back) - c)) < 1e-10


@pytest.mark.parametrize("name", SPACES)
def test_frame_is_oriented_orthonormal(name, rng):
    space = sp.get_space(name)
    m = random_points(name, rng, 200)
    e1, e2 = space.frame(m)
    assert np.allclose(space.inner(m, e1, e1), 1, atol=1e-12)
    assert np.allclose(space.inner(m, e2, e2), 1, atol=1e-12)
    assert np.allclose(space.inner(m, e1, e2), 0, atol=1e-12)
    assert np.allclose(space.symplectic_pairing(m, e1, e2), 1, atol=1e-12)


@pytest.mark.parametrize("name", SPACES)
def test_midpoint_equidistant(name, rng):
    space = sp.get_space(name)
    a = random_points(name, rng, 200)
    b = nearby(name, rng, a, 0.5)
    c = space.midpoint(a, b)
    assert np.allclose(space.distance(a, c), space.distance(c, b), atol=1e-12)
    assert np.allclose(2 * space.distance(a, c), space.distance(a, b), atol=1e-12)


@pytest.mark.parametrize("name", SPACES)
def test_reflection_is_involution_fixing_center(name, rng):
    space = sp.get_space(name)
    c = random_points(name, rng, 100)
    # keep |m - c| below the injectivity bound for the midpoint check
    m = space.exp_map(c, space.from_frame(c, rng.uniform(-0.5, 0.5, (100, 2))))
    r = space.reflect(c, m)
    assert np.max(np.abs(space.reflect(c, r) - m)) < 1e-12
    assert np.max(np.abs(space.midpoint(m, r) - c)) < 1e-10
    assert np.max(np.abs(space.reflect(c, c) - c)) < 1e-12


@pytest.mark.parametrize("name", SPACES)
def test_symmetric_exp_roundtrip(name, rng):
    space = sp.get_space(name)
    m = random_points(name, rng, 100)
    v = space.from_frame(m, rng.uniform(-0.5, 0.5, (100, 2)))
    lo, hi = space.symmetric_exp(m, v)
    m2, v2 = space.symmetric_exp_inverse(lo, hi)
    assert np.max(np.abs(m2 - m)) < 1e-10
    assert np.max(np.abs(v2 - v)) < 1e-10


def test_symmetric_exp_rejects_long_chords():
    m = np.array([0.0, 0.0, 1.0])
    with pytest.raises(OutsideGroupoid):
        sp.SPHERE.symmetric_exp(m, np.array([1.7, 0.0, 0.0]))
    with pytest.raises(OutsideGroupoid):
        sp.TORUS.symmetric_exp(np.array([1.0, 1.0]), np.array([1.6, 0.0]))


def test_symmetric_exp_inverse_antipodal():
    with pytest.raises(OutsideImage):
        sp.SPHERE.symmetric_exp_inverse(np.array([0, 0, 1.0]), np.array([0, 0, -1.0]))


def test_plane_symplectic_form_is_dp_dq():
    m = np.zeros(2)
    assert sp.PLANE.symplectic_pairing(m, np.array([1.0, 0]), np.array([0, 1.0])) == 1.0


def test_sphere_form_matches_polar_area_element(rng):
    # omega(d/dtheta, d/dphi) = sin(theta)
    theta = rng.uniform(0.1, 3.0, 50)
    m = sp.SPHERE.from_chart(theta, rng.uniform(0, 6, 50))
    bt, bp = sp.SPHERE.chart_basis(m)
    assert np.allclose(sp.SPHERE.symplectic_pairing(m, bt, bp), np.sin(theta), atol=1e-12)


def test_hyperbolic_form_matches_polar_area_element(rng):
    rho = rng.uniform(0.1, 2.0, 50)
    m = sp.HYPERBOLIC.from_chart(rho, rng.uniform(0, 6, 50))
    br, bp = sp.HYPERBOLIC.chart_basis(m)
    assert np.allclose(sp.HYPERBOLIC.symplectic_pairing(m, br, bp), np.sinh(rho), atol=1e-12)


def test_hyperbolic_distance_closed_form():
    a = sp.HYPERBOLIC.from_chart(0.0, 0.0)
    b = sp.HYPERBOLIC.from_chart(1.3, 2.0)
    assert abs(sp.HYPERBOLIC.distance(a, b) - 1.3) < 1e-12


def test_transport_preserves_norm_and_tangency(rng):
    for space in (sp.SPHERE, sp.HYPERBOLIC):
        m = random_points(space, rng, 50)
        v = space.from_frame(m, rng.normal(scale=0.5, size=(50, 2)))
        u = space.from_frame(m, rng.normal(size=(50, 2)))
        w = space.transport(m, v, u)
        end = space.exp_map(m, v)
        assert np.allclose(space.norm(end, w), space.norm(m, u), atol=1e-12)
        assert np.allclose(space.inner(end, end, w) if space is sp.HYPERBOLIC else sp.edot(end, w), 0, atol=1e-12)


def test_errors():
    with pytest.raises(CutLocus):
        sp.SPHERE.log_map(np.array([0, 0, 1.0]), np.array([0, 0, -1.0]))
    with pytest.raises(CutLocus):
        sp.TORUS.log_map(np.array([0.0, 0.0]), np.array([np.pi, 0.0]))
    with pytest.raises(ConstraintDrift):
        sp.SPHERE.check_point(np.array([0, 0, 1.1]))
    with pytest.raises(ConstraintDrift):
        sp.HYPERBOLIC.check_point(np.array([0, 0, -1.0]))
    with pytest.raises(BaseMismatch):
        sp.PLANE.exp_map(np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        sp.get_space("klein bottle")


def test_small_drift_is_renormalized():
    m = sp.SPHERE.check_point(np.array([0, 0, 1 + 1e-8]))
    assert abs(np.linalg.norm(m) - 1) < 1e-15


def test_torus_points_are_reduced():
    assert np.allclose(sp.TORUS.check_point(np.array([7.0, -1.0])), [7 - 2 * np.pi, 2 * np.pi - 1])


@pytest.mark.parametrize("name", CURVED)
def test_chart_roundtrip(name, rng):
    space = sp.get_space(name)
    m = random_points(name, rng, 100)
    assert np.max(np.abs(space.from_chart(*space.to_chart(m)) - m)) < 1e-12


def test_hamiltonian_vector_field_plane_convention():
    # h = p: qdot = 1, pdot = 0
    v = sp.hamiltonian_vector_field("plane", lambda m: m[..., 0], np.array([0.2, 0.3]))
    assert np.allclose(v, [0, 1], atol=1e-9)


def test_differential_analytic_and_numeric_agree(rng):
    m = random_points("sphere", rng, 40)
    f = lambda x: x[..., 0] * x[..., 2] + np.sin(x[..., 1])  # noqa: E731
    g = lambda x: np.stack([x[..., 2], np.cos(x[..., 1]), x[..., 0]], axis=-1)  # noqa: E731
    assert np.max(np.abs(sp.differential(sp.SPHERE, f, m) - sp.differential(sp.SPHERE, f, m, grad=g))) < 1e-9


unit = st.floats(-1.0, 1.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.floats(0.05, 3.1), st.floats(0, 6.28), unit, unit))
def test_sphere_exp_stays_on_sphere(args):
    th, ph, a, b = args
    m = sp.SPHERE.from_chart(th, ph)
    x = sp.SPHERE.exp_map(m, sp.SPHERE.from_frame(m, np.array([a, b])))
    assert abs(np.linalg.norm(x) - 1) < 1e-14


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.floats(0, 2.0), st.floats(0, 6.28), unit, unit, unit, unit))
def test_hyperbolic_isometry_of_reflection(args):
    r, ph, a, b, c, d = args
    H = sp.HYPERBOLIC
    m = H.from_chart(r, ph)
    x = H.exp_map(m, H.from_frame(m, np.array([a, b])))
    y = H.exp_map(m, H.from_frame(m, np.array([c, d])))
    assert abs(H.distance(H.reflect(m, x), H.reflect(m, y)) - H.distance(x, y)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.floats(0.05, 3.1), st.floats(0, 6.28), unit, unit, unit, unit))
def test_symplectic_pairing_antisymmetric_bilinear(args):
    th, ph, a, b, c, d = args
    S = sp.SPHERE
    m = S.from_chart(th, ph)
    u, w = S.from_frame(m, np.array([a, b])), S.from_frame(m, np.array([c, d]))
    assert abs(S.symplectic_pairing(m, u, w) + S.symplectic_pairing(m, w, u)) < 1e-14
    assert abs(S.symplectic_pairing(m, u, w) - (a * d - b * c)) < 1e-12
