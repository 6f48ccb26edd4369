import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from masspart import measure as M
from masspart import sandwich as S
from masspart.errors import BadSpec, NotWellSeparated


def frac_below(mu, H):
    return float(mu.weights[mu.points @ H.normal < H.offset].sum() / mu.total_mass)


def blob(center, n, seed, scale=0.3):
    return M.gaussian(n, len(center), seed=seed, mean=center, std=scale)


# ---------------------------------------------------------------- ham sandwich


def test_ham_sandwich_planar():
    a = blob([0, 0], 2000, 1)
    b = blob([3, 1], 2000, 2, scale=0.5)
    H = S.ham_sandwich([a, b])
    for mu in (a, b):
        assert abs(frac_below(mu, H) - 0.5) <= 2 / np.sqrt(mu.n)


def test_ham_sandwich_spatial():
    ms = [blob([0, 0, 0], 1500, 1), blob([3, 0, 0], 1500, 2), blob([0, 3, 1], 1500, 3)]
    H = S.ham_sandwich(ms)
    for mu in ms:
        assert abs(frac_below(mu, H) - 0.5) <= 2 / np.sqrt(mu.n)


def test_ham_sandwich_wrong_count():
    with pytest.raises(BadSpec):
        S.ham_sandwich([blob([0, 0], 100, 1)])


@pytest.mark.parametrize("kw", [
    {"measures": [], "fractions": []},
    {"measures": ["x"], "fractions": [0.5, 0.5]},
    {"measures": [M.gaussian(10, 1, seed=1)], "fractions": [1.0]},
    {"measures": [M.gaussian(10, 1, seed=1), M.gaussian(10, 1, seed=2)], "fractions": [0.5, 0.5]},
    {"measures": [M.gaussian(10, 1, seed=1), M.gaussian(10, 2, seed=2)], "fractions": [0.5, 0.5]},
])
def test_cut_request_validation(kw):
    with pytest.raises(BadSpec):
        S.CutRequest(**kw)


# ---------------------------------------------------------------- prescribed fractions


def test_bhj_cut_prescribed_fractions():
    a = blob([0, 0], 2000, 4)
    b = blob([4, 2], 2000, 5)
    hs = S.bhj_cut(S.CutRequest([a, b], [0.3, 0.8]))
    for mu, f in ((a, 0.3), (b, 0.8)):
        got = float(mu.weights[mu.points @ hs.normal <= hs.offset].sum() / mu.total_mass)
        assert abs(got - f) <= 2 / np.sqrt(mu.n)


def test_bhj_cut_rejects_overlap():
    a = blob([0, 0], 500, 4)
    b = blob([0.1, 0], 500, 5)
    with pytest.raises(NotWellSeparated):
        S.bhj_cut(S.CutRequest([a, b], [0.3, 0.8]))


# ---------------------------------------------------------------- separation


def test_separating_two_points():
    H, margin = S.separating_hyperplane([[0.0, 0.0]], [[2.0, 0.0]])
    assert 0 < margin <= 1.0 + 1e-12
    assert H.normal @ [0, 0] < H.offset < H.normal @ [2, 0]


def test_separating_overlap_has_no_margin():
    _, margin = S.separating_hyperplane([[0, 0], [2, 0]], [[1, -1], [1, 1]])
    assert margin <= 0


@given(st.integers(0, 2**16), st.floats(0.5, 5))
def test_separator_splits_clouds(seed, gap):
    rng = np.random.default_rng(seed)
    P = rng.uniform(size=(30, 2))
    Q = rng.uniform(size=(30, 2)) + [1 + gap, 0]
    H, margin = S.separating_hyperplane(P, Q)
    assert margin > 0
    assert np.all(P @ H.normal <= H.offset + 1e-9)
    assert np.all(Q @ H.normal >= H.offset - 1e-9)
    # n = (1, 0) gives slack gap/2 (capped at 1); normalising costs at most sqrt(2)
    assert margin >= min(gap / 2, 1.0) / np.sqrt(2) - 1e-9


def test_well_separated_triangle_vs_collinear():
    tri = [blob(c, 200, i, 0.1) for i, c in enumerate([[0, 0], [5, 0], [0, 5]])]
    assert S.is_well_separated(tri)
    line = [blob(c, 200, i, 0.1) for i, c in enumerate([[0, 0], [5, 0], [10, 0]])]
    assert not S.is_well_separated(line)


# ---------------------------------------------------------------- centerpoints


def test_halfspace_depth_1d_median():
    mu = M.uniform_box(1001, 1, seed=1)
    x = np.median(mu.points[:, 0])
    assert abs(S.halfspace_depth(mu, [x], samples=50) - 0.5) < 1e-3
    assert S.halfspace_depth(mu, [2.0], samples=50) == 0.0


def test_halfspace_depth_loop_oracle(rng):
    mu = M.gaussian(300, 2, seed=3)
    x = rng.standard_normal(2) * 0.3
    depth = S.halfspace_depth(mu, x, samples=400, seed=9)
    r = np.random.default_rng(np.random.SeedSequence([9, 0xDE97]))
    U = r.standard_normal((400, 2))
    U /= np.linalg.norm(U, axis=1)[:, None]
    best = 1.0
    for u in U:
        best = min(best, sum(1 for p in mu.points if (p - x) @ u >= 0) / mu.n)
    assert depth == pytest.approx(best, abs=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_centerpoint_depth(d):
    mu = M.gaussian(3000, d, seed=d)
    c = S.centerpoint(mu)
    assert S.halfspace_depth(mu, c, samples=2000) >= 1 / (d + 1) - 2 / np.sqrt(mu.n)


def test_centerpoint_of_symmetric_cloud(sym2):
    assert np.linalg.norm(S.centerpoint(sym2)) < 1e-9


def test_centerpoint_region_directions_symmetric():
    U, Q = S.centerpoint_region(np.random.default_rng(0).standard_normal((100, 2)))
    assert len(U) == 4 * 24
    assert np.allclose(np.linalg.norm(U, axis=1), 1)
    assert np.allclose(np.sort(U[:, 0]), np.sort(-U[:, 0]))


def test_fibonacci_sphere_unit():
    P = S.fibonacci_sphere(100)
    assert P.shape == (100, 3) and np.allclose(np.linalg.norm(P, axis=1), 1)


# ---------------------------------------------------------------- six sectors


def test_sector_masses_loop_oracle(rng):
    P = rng.standard_normal((200, 2))
    w = rng.uniform(0.5, 1.5, 200)
    c = np.array([0.1, -0.2])
    angles = np.array([0.3, 1.2, 2.5])
    got = S.sector_masses(P, w, c, angles)
    rays = np.sort(np.mod(np.r_[angles, angles + np.pi], 2 * np.pi))
    expect = np.zeros(6)
    for p, wi in zip(P, w):
        a = np.mod(np.arctan2(p[1] - c[1], p[0] - c[0]), 2 * np.pi)
        # sector i runs from ray i to ray i+1, wrapping at the last ray
        i = next((i for i in range(5) if rays[i] <= a < rays[i + 1]), 5)
        expect[i] += wi
    assert np.allclose(got, expect)


def test_buck_buck_six_equal_sectors(square):
    c, angles = S.buck_buck_six(square)
    m = S.sector_masses(square.points, square.weights / square.total_mass, c, angles)
    assert np.max(np.abs(m - 1 / 6)) <= 2 / np.sqrt(square.n)


def test_buck_buck_six_planar_only(cube):
    with pytest.raises(BadSpec):
        S.buck_buck_six(cube)
