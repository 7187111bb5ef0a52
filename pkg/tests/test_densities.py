import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invariant_kahler.densities import (
    DensityDomainError,
    DensitySpec,
    ball_mass,
    balance_radius,
    parse_u,
    rank1_source_mass_exact,
    source_density,
    source_of,
    target_density,
    target_of,
)
from invariant_kahler.rootsys import load_root_system, weyl_group


def spec(name="A1", u=None, eps=0.0):
    return DensitySpec(load_root_system(name), parse_u(u), eps)


def test_parse_zero_forms():
    for z in ("zero", "0", None):
        assert parse_u(z) is None


def test_parse_expression_with_caret():
    u = parse_u("0.5*r2 - p^2")
    rs = load_root_system("A1")
    # r2 = 4 and p = 4 at x = 2
    assert u(rs, np.array([2.0])) == pytest.approx(2.0 - 16.0)


@pytest.mark.parametrize("bad", ["exp(r2)", "__import__('os')", "r2 ** 0.5", "q + 1", "r2 / 2"])
def test_parse_rejects_non_polynomial(bad):
    with pytest.raises(ValueError):
        parse_u(bad)


def test_source_a1_value():
    s = spec()
    assert source_density(s, [1.0]) == pytest.approx(math.sinh(1.0) ** 2)


def test_target_a1_value():
    assert target_density(spec(eps=0.25), [2.0]) == pytest.approx(4.25)


def test_source_overflow_raises():
    with pytest.raises(DensityDomainError):
        source_density(spec(), [400.0])


@pytest.mark.parametrize("name", ["A2", "B2", "G2"])
@settings(max_examples=40, deadline=None)
@given(x=st.tuples(st.floats(-3, 3), st.floats(-3, 3)))
def test_densities_weyl_invariant(name, x):
    s = spec(name, u="r2 - 0.1*r2^2", eps=0.3)
    x = np.array(x)
    f0, g0 = target_density(s, x), source_density(s, x)
    for g in weyl_group(s.rs):
        assert target_density(s, g @ x) == pytest.approx(f0, rel=1e-12, abs=1e-14)
        assert source_density(s, g @ x) == pytest.approx(g0, rel=1e-12, abs=1e-14)


def test_rank1_ball_mass_matches_exact():
    # int_{-1}^{1} sinh^2 = (sinh 2 - 2)/2
    rep = ball_mass(source_of(spec()), 1.0, resolution=4096)
    assert rep.mass == pytest.approx(rank1_source_mass_exact(1.0), rel=1e-7)
    assert rep.mass == pytest.approx((math.sinh(2) - 2) / 2, rel=1e-7)
    assert rep.mass == pytest.approx(0.81343019, rel=1e-7)


def test_disk_mass_of_constant():
    rep = ball_mass(lambda x: np.ones(len(x)), 1.0, resolution=512, rank=2)
    assert rep.mass == pytest.approx(math.pi, rel=2e-3)


def test_balance_radius_a1_closed_form():
    # int_{-R}^{R} y^2 = (2/3) R^3 equals the source mass, so R = ((3/4)(sinh 2 - 2))^(1/3)
    R = balance_radius(spec(), 1.0)
    assert R == pytest.approx((0.75 * (math.sinh(2) - 2)) ** (1 / 3), rel=1e-7)
    assert R == pytest.approx(1.0685722, abs=1e-7)


def test_balance_radius_with_regularization_solves_cubic():
    s = spec(eps=0.5)
    R = balance_radius(s, 1.0)
    src = (math.sinh(2) - 2) / 2 + 2 * 0.5
    assert 2 * R**3 / 3 + 2 * 0.5 * R == pytest.approx(src, rel=1e-7)


def test_balance_radius_a2_masses_agree():
    s = spec("A2", eps=0.5)
    R = balance_radius(s, 2.0)
    assert R == pytest.approx(2.3905, abs=1e-3)
    m_src = ball_mass(source_of(s), 2.0).mass
    m_tgt = ball_mass(target_of(s), R).mass
    assert m_tgt == pytest.approx(m_src, rel=1e-5)
