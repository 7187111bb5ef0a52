import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from invariant_kahler.geometry import (
    GeometryError,
    closedness_check,
    completeness_trend,
    default_stencil_radius,
    fit_local_quadratic,
    horizontal_closed_form,
    horizontal_three_term,
    metric_eigenvalues,
    positivity_check,
    properness_check,
    ricci_defect,
    spectral_data,
)
from invariant_kahler.oracles import canonical_example, su2_profile, su2_spectral
from invariant_kahler.ot_solver import ConvexPotential
from invariant_kahler.rootsys import chamber_rays, load_root_system, wall_distance

A1 = load_root_system("A1")
KP1 = 1.0685722  # ((3/4)(sinh 2 - 2))^(1/3)


def test_canonical_spectral_fields():
    sm = canonical_example(A1, [1.0])
    assert sm.l[0] == pytest.approx(math.sinh(1.0))
    assert sm.d[0] == pytest.approx(math.cosh(1.0))
    assert sm.phi[0] == pytest.approx(math.tanh(1.0))


def test_su2_d_at_one():
    sm = su2_spectral(A1, 1.0)
    assert sm.d[0] == pytest.approx(KP1 * math.cosh(1.0), abs=1e-6)
    assert sm.d[0] == pytest.approx(1.648893, abs=1e-6)


def test_l_tends_to_one_at_wall():
    sm = spectral_data(A1, [1e-9], [1e-9], [[1.0]])
    assert sm.l[0] == pytest.approx(1.0, abs=1e-15)


def test_wall_ratio_uses_directional_second_derivative():
    rs = load_root_system("A2")
    hess = np.array([[2.0, 0.3], [0.3, 1.5]])
    x = np.array([0.0, 0.5])  # on the wall of the first root (1, 0)
    sm = spectral_data(rs, x, hess @ x, hess)
    assert sm.ratio[0] == pytest.approx(2.0)


def test_input_hessian_is_symmetrized():
    sm = spectral_data(load_root_system("B2"), [0.3, 0.1], [0.3, 0.1], [[1, 0.2], [0.0, 1]])
    assert np.allclose(sm.hess, sm.hess.T)


def test_overflow_raises():
    with pytest.raises(GeometryError):
        spectral_data(A1, [400.0], [400.0], [[1.0]])


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 2.0, 3.0, 10.0])
def test_su2_defect_is_one(t):
    assert ricci_defect(A1, su2_spectral(A1, t)) == pytest.approx(1.0, abs=1e-12)


def test_defect_continuous_toward_wall():
    # the series branch takes over below 1e-4
    assert ricci_defect(A1, su2_spectral(A1, 1e-5)) == pytest.approx(1.0, abs=1e-9)


def test_canonical_defect_at_one():
    assert ricci_defect(A1, canonical_example(A1, [1.0])) == pytest.approx(1 / math.sinh(1.0) ** 2, abs=1e-12)
    assert ricci_defect(A1, canonical_example(A1, [1.0])) == pytest.approx(0.724062, abs=1e-6)


def test_defect_includes_exp_minus_u():
    sm = canonical_example(A1, [1.0])
    assert ricci_defect(A1, sm, 0.7) == pytest.approx(math.exp(-0.7) * ricci_defect(A1, sm))


def test_nonconvex_defect_raises():
    sm = spectral_data(A1, [0.5], [0.5], [[-1.0]])
    with pytest.raises(GeometryError):
        ricci_defect(A1, sm)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_su2_positive(t):
    assert positivity_check(su2_spectral(A1, t)).ok


def test_negative_hessian_flags_phi():
    rs = load_root_system("A2")
    sm = spectral_data(rs, [0.3, 0.4], [0.3, 0.4], [[1.0, 0.0], [0.0, -0.5]])
    v = positivity_check(sm)
    assert not v.ok and "Phi not positive" in v.flags


@pytest.mark.parametrize("name", ["A2", "B2", "G2"])
@settings(max_examples=30, deadline=None)
@given(x=st.tuples(st.floats(-3, 3), st.floats(-3, 3)))
def test_canonical_always_positive(name, x):
    assert positivity_check(canonical_example(load_root_system(name), x)).ok


def test_su2_horizontal_eigenvalue_at_one():
    rep = metric_eigenvalues(A1, su2_spectral(A1, 1.0))
    assert rep.horizontal_root[0] == pytest.approx(KP1 * math.tanh(1.0), abs=1e-6)
    assert rep.horizontal_root[0] == pytest.approx(0.8138183, abs=1e-6)
    assert rep.assembly_mismatch < 1e-12


def test_canonical_horizontal_eigenvalue():
    rep = metric_eigenvalues(A1, canonical_example(A1, [1.0]))
    assert rep.horizontal_root[0] == pytest.approx(0.7615942, abs=1e-7)


def test_su2_cartan_block_is_kpp():
    p = su2_profile(1.3)
    rep = metric_eigenvalues(A1, su2_spectral(A1, 1.3))
    assert rep.horizontal_cartan[0, 0] == pytest.approx(p.Kpp)
    # vertical root eigenvalue is 1/phi
    assert rep.vertical_root[0] == pytest.approx(1 / su2_spectral(A1, 1.3).phi[0])


@pytest.mark.parametrize("name", ["A2", "B2", "G2"])
@settings(max_examples=30, deadline=None)
@given(x=st.tuples(st.floats(0.05, 2.5), st.floats(0.05, 2.5)), s=st.floats(0.5, 3))
def test_three_term_matches_closed_form(name, x, s):
    rs = load_root_system(name)
    x = np.array(x)
    # hess @ x is not an invariant gradient, so it is only meaningful off the walls
    assume(wall_distance(rs, x) > 1e-3)
    hess = np.array([[s, 0.1], [0.1, 1.0]])
    sm = spectral_data(rs, x, hess @ x, hess)
    assert np.allclose(horizontal_three_term(sm), horizontal_closed_form(sm), rtol=1e-10, atol=1e-12)


def test_completeness_su2_rate():
    rep = completeness_trend(lambda t: np.array([su2_profile(s).Kpp for s in np.atleast_1d(t)]), 30.0)
    assert rep.verdict == "diverging"
    assert rep.hessian_rate == pytest.approx(2 / 3, abs=0.1)


def test_completeness_canonical_is_linear():
    rep = completeness_trend(lambda t: np.ones_like(np.atleast_1d(t)), 20.0)
    assert rep.verdict == "diverging"
    assert rep.length_exponent == pytest.approx(1.0, abs=0.02)


def test_completeness_bounded_profile():
    rep = completeness_trend(lambda t: 1 / np.cosh(np.atleast_1d(t)) ** 4, 20.0)
    assert rep.verdict == "bounded length"


def test_closedness_gradient_field():
    pts = np.array([[0.3, 0.4], [1.0, -0.2]])
    assert closedness_check(lambda p: np.asarray(p), pts, spacing=0.01) < 1e-12


def test_closedness_rotation():
    rot = lambda p: np.array([-p[1], p[0]])  # noqa: E731
    assert closedness_check(rot, np.array([[0.3, 0.4]]), spacing=0.01) == pytest.approx(2.0)


def test_closedness_spacing_cap():
    with pytest.raises(GeometryError):
        closedness_check(lambda p: p, np.array([[0.0, 0.0]]), spacing=0.5)


def test_properness_canonical_and_constant():
    rs = load_root_system("A2")
    rays = np.vstack([chamber_rays(rs), -chamber_rays(rs)])
    quad = lambda x: 0.5 * np.sum(np.asarray(x) ** 2, axis=-1)  # noqa: E731
    assert properness_check(quad, rays, 2.0).proper
    const = lambda x: np.zeros(np.asarray(x).shape[:-1])  # noqa: E731
    assert not properness_check(const, rays, 2.0).proper


def test_properness_a2_run(a2_run):
    rs = a2_run.spec.rs
    rays = np.vstack([chamber_rays(rs), -chamber_rays(rs)])
    assert properness_check(a2_run.potential, rays, 1.9).proper


def test_fit_recovers_quadratic():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([0.3, -0.1])
    f = lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, A, x) + np.asarray(x) @ b  # noqa: E731
    fit = fit_local_quadratic(f, [0.2, 0.4], 0.1)
    assert np.allclose(fit.hess, A, atol=1e-9)
    assert np.allclose(fit.grad, A @ [0.2, 0.4] + b, atol=1e-10)


def test_fit_single_piece_flags_resolution():
    pot = ConvexPotential(np.array([[-1.0], [1.0]]), np.zeros(2))
    fit = fit_local_quadratic(pot, [0.5], 0.1)
    assert fit.hess[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert "insufficient cell resolution" in fit.flags


def test_fit_gradient_on_a1_run(a1_run):
    from invariant_kahler.ot_solver import rank1_closed_form

    r = default_stencil_radius(a1_run.cloud.points)
    fit = fit_local_quadratic(a1_run.potential, [0.7], r)
    assert fit.grad[0] == pytest.approx(rank1_closed_form(a1_run.spec, 0.7), rel=0.02)
    assert fit.consistent
