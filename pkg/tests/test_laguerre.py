import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invariant_kahler.laguerre import (
    GridSource,
    assign_labels,
    cell_integrals,
    laguerre_polygons,
    upper_envelope_1d,
)


def random_source(rank, n, seed):
    rng = np.random.default_rng(seed)
    shape = (n,) if rank == 1 else (n, n)
    return GridSource(1.0, rng.uniform(0.2, 2.0, shape))


def supersampled_masses(src, points, psi, per_cell):
    """Brute force: assign a fine lattice of sample points to the maximizing piece."""
    n = src.n_cells * per_cell
    c = -src.k + (np.arange(n) + 0.5) * (2 * src.k / n)
    if src.rank == 1:
        x = c[:, None]
    else:
        X, Y = np.meshgrid(c, c)
        x = np.stack([X.ravel(), Y.ravel()], axis=1)
    lab = np.argmax(x @ points.T - psi, axis=1)
    w = src.density_at(x) * (2 * src.k / n) ** src.rank
    return np.bincount(lab, weights=w, minlength=len(points))


def test_grid_total_mass():
    src = GridSource(2.0, np.ones((8, 8)))
    assert src.total_mass == pytest.approx(16.0)


def test_grid_rejects_negative_density():
    with pytest.raises(ValueError):
        GridSource(1.0, -np.ones(4))


def test_upper_envelope_drops_dominated_line():
    # the middle line -1 lies below max(-x, x) everywhere
    act, br = upper_envelope_1d(np.array([-1.0, 0.0, 1.0]), np.array([0.0, -1.0, 0.0]))
    assert act.tolist() == [0, 2]
    assert br == pytest.approx([0.0])


def test_upper_envelope_keeps_supporting_line():
    act, br = upper_envelope_1d(np.array([-1.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]))
    assert act.tolist() == [0, 1, 2]
    assert br == pytest.approx([-1.0, 1.0])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_masses_partition_total_1d(seed):
    rng = np.random.default_rng(seed)
    src = random_source(1, 64, seed)
    pts = np.sort(rng.uniform(-2, 2, (12, 1)), axis=0)
    psi = rng.uniform(-0.3, 0.3, 12)
    ci = cell_integrals(src, pts, psi)
    assert ci.mass.sum() == pytest.approx(src.total_mass, rel=1e-12)
    assert np.all(ci.mass >= 0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_masses_partition_total_2d(seed):
    rng = np.random.default_rng(seed)
    src = random_source(2, 16, seed)
    pts = rng.uniform(-2, 2, (15, 2))
    psi = rng.uniform(-0.5, 0.5, 15)
    ci = cell_integrals(src, pts, psi)
    assert ci.mass.sum() == pytest.approx(src.total_mass, rel=1e-10)
    assert np.all(ci.mass >= -1e-14)


def test_hidden_point_has_empty_cell():
    src = GridSource(1.0, np.ones((8, 8)))
    pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]])
    psi = np.array([0.0, 0.0, 0.0, 0.0, 10.0])
    ci = cell_integrals(src, pts, psi)
    assert ci.mass[4] == 0.0
    assert ci.mass.sum() == pytest.approx(4.0)


@pytest.mark.parametrize("rank,n,per", [(1, 50, 400), (2, 10, 160)])
def test_masses_match_supersampling(rank, n, per):
    rng = np.random.default_rng(7)
    src = random_source(rank, n, 3)
    pts = rng.uniform(-1.5, 1.5, (9, rank))
    psi = rng.uniform(-0.2, 0.2, 9)
    exact = cell_integrals(src, pts, psi).mass
    brute = supersampled_masses(src, pts, psi, per)
    assert np.max(np.abs(exact - brute)) < 2e-3 * src.total_mass / (per / 40)


@pytest.mark.parametrize("rank", [1, 2])
def test_hessian_matches_finite_differences(rank):
    rng = np.random.default_rng(11)
    src = random_source(rank, 32 if rank == 2 else 200, 5)
    m = 8
    pts = rng.uniform(-1.5, 1.5, (m, rank))
    w = rng.uniform(-0.1, 0.1, m)
    psi = 0.5 * np.sum(pts**2, axis=1) - w
    H = cell_integrals(src, pts, psi, hessian=True).hessian
    h = 1e-6
    fd = np.zeros((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        plus = cell_integrals(src, pts, psi - e).mass
        minus = cell_integrals(src, pts, psi + e).mass
        fd[:, j] = (plus - minus) / (2 * h)
    assert np.max(np.abs(H - fd)) < 1e-6 * np.abs(fd).max()
    assert np.allclose(H, H.T, atol=1e-12)
    assert np.allclose(H.sum(axis=1), 0.0, atol=1e-10)


def test_region_restricts_mass_1d():
    src = GridSource(1.0, np.ones(10))
    pts = np.array([[-1.0], [1.0]])
    ci = cell_integrals(src, pts, np.zeros(2), region=(-0.5, 0.5))
    assert ci.mass == pytest.approx([0.5, 0.5])


def test_region_restricts_mass_2d():
    src = GridSource(1.0, np.ones((10, 10)))
    pts = np.array([[-1.0, 0.0], [1.0, 0.0]])
    ci = cell_integrals(src, pts, np.zeros(2), region=[(np.array([0.0, 1.0]), 0.0)])
    assert ci.mass == pytest.approx([1.0, 1.0])


def test_first_moments_give_centroids():
    src = GridSource(1.0, np.ones((4, 4)))
    pts = np.array([[-1.0, 0.0], [1.0, 0.0]])
    ci = cell_integrals(src, pts, np.zeros(2))
    assert ci.first[0] / ci.mass[0] == pytest.approx([-0.5, 0.0], abs=1e-12)
    assert ci.first[1] / ci.mass[1] == pytest.approx([0.5, 0.0], abs=1e-12)


def test_polygons_tile_the_box():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, (20, 2))
    polys = laguerre_polygons(pts, rng.uniform(-0.1, 0.1, 20), 1.0)
    area = 0.0
    for p in polys:
        poly = p[0] if isinstance(p, tuple) else p
        if len(poly) >= 3:
            x, y = poly[:, 0], poly[:, 1]
            area += 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    assert area == pytest.approx(4.0, rel=1e-12)


def test_lumped_labels_agree_with_exact_cells_on_fine_grid():
    src = GridSource(1.0, np.ones((200, 200)))
    pts = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    psi = np.zeros(3)
    lab = assign_labels(src, pts, psi)
    lumped = np.bincount(lab.ravel(), weights=src.cell_masses().ravel(), minlength=3)
    exact = cell_integrals(src, pts, psi).mass
    assert np.max(np.abs(lumped - exact)) < 0.03
