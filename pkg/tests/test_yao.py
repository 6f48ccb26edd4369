import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from masspart import geometry as geo
from masspart import measure as M
from masspart import yao
from masspart.errors import InsufficientSupport
from oracles import planar_center_oracle


# ---------------------------------------------------------------- centers


def test_center_1d_is_median():
    mu = M.make_measure(np.arange(1.0, 11.0)[:, None], generic=True)
    c = yao.center_1d(mu, 0.5)
    assert 5 < c[0] < 6


def test_center_1d_alpha():
    mu = M.make_measure(np.arange(1.0, 11.0)[:, None], generic=True)
    assert 2 < yao.center_1d(mu, 0.2)[0] < 3


@pytest.mark.parametrize("seed", range(5))
def test_planar_center_matches_breakpoint_oracle(seed):
    P = np.random.default_rng(seed).standard_normal((50, 2))
    expect, s = planar_center_oracle(P)
    c, g = yao.center_and_vector_coords(P)
    assert np.allclose(c, expect, rtol=0, atol=1e-9 * (1 + np.abs(expect).max()))
    assert abs(g[0] - s) <= 1e-9 * (1 + abs(s))


def test_projected_centers_coincide_only_at_solution(square):
    B = geo.OrthoFrame(np.eye(2))
    v, c = yao.solve_projection_vector(square, B)
    cp, cm = yao.projected_centers(square, B, 0.5, v)
    assert np.linalg.norm(cp - cm) < 1e-9
    assert np.allclose(cp, c, atol=1e-9)
    cp2, cm2 = yao.projected_centers(square, B, 0.5, v + np.array([0.3, 0.0]))
    assert np.linalg.norm(cp2 - cm2) > 1e-3


def test_projection_vector_has_unit_last_component(cube):
    B = geo.random_frame(3, 3, np.random.default_rng(2))
    v, _ = yao.solve_projection_vector(cube, B)
    assert abs(v @ B.vectors[-1] - 1.0) < 1e-12


def test_symmetric_cloud_center_is_origin(sym2):
    c = yao.center_coords(sym2.points)
    assert np.linalg.norm(c) < 0.05


@given(st.integers(0, 2**16), st.floats(0, 2 * np.pi), st.floats(-5, 5), st.floats(-5, 5))
def test_center_is_rigid_motion_equivariant(seed, ang, tx, ty):
    mu = M.gaussian(200, 2, seed=seed)
    R = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    B = geo.OrthoFrame(R.T)
    t = np.array([tx, ty])
    p1 = yao.yao_partition(mu, geo.OrthoFrame(np.eye(2)))
    moved = M.make_measure(mu.points @ R.T + t, generic=True)
    p2 = yao.yao_partition(moved, B)
    assert np.allclose(p1.centers[0] @ R.T + t, p2.centers[0], atol=1e-7)


# ---------------------------------------------------------------- partitions


def counts(p, mu):
    idx, per_point = geo.assign_points(p.cells, mu.points)
    assert np.all(per_point == 1)  # cells are disjoint and miss no point
    return np.bincount(idx, minlength=len(p.cells))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_yao_partition_cells_and_masses(d):
    mu = M.uniform_box(4096, d, seed=d)
    p = yao.yao_partition(mu, geo.OrthoFrame(np.eye(d)))
    assert len(p.cells) == 2 ** d
    cnt = counts(p, mu)
    assert cnt.sum() == mu.n
    assert np.max(np.abs(cnt / mu.n - 2.0 ** -d)) <= 2 / np.sqrt(mu.n)


def test_alpha_beta_masses(square):
    p, fd = yao.alpha_beta_partition(square, geo.OrthoFrame(np.eye(2)), 0.3)
    cnt = counts(p, square) / square.n
    sides = [c.lineage.side for c in p.cells]
    for s, m in zip(sides, cnt):
        assert abs(m - (0.3 if s == "A" else 0.7) / 2) <= 2 / np.sqrt(square.n)
    assert len(fd.pairs) == 2 and len(yao.frame_of(fd)) == 2


def test_frame_cells_are_cylinders_along_first_axis(cube):
    B = geo.random_frame(3, 3, np.random.default_rng(5))
    _, fd = yao.alpha_beta_partition(cube, B, 0.5)
    for D in yao.frame_of(fd):
        assert np.allclose(D.normals @ B.vectors[0], 0, atol=1e-12)


def test_pairs_share_frame_cell(cube):
    _, fd = yao.alpha_beta_partition(cube, geo.OrthoFrame(np.eye(3)), 0.5)
    for A, Bc, C in fd.pairs:
        assert A.lineage.frame_index == Bc.lineage.frame_index
        # witnesses of A and B project into the frame cell
        for w in (A.witness, Bc.witness):
            assert np.all(C.normals @ w <= C.offsets + 1e-9)


@pytest.mark.parametrize("d,t", [(1, 3), (2, 1), (2, 3), (3, 2)])
def test_multicenter_cells_and_masses(d, t):
    mu = M.uniform_box(6000, d, seed=10 + d + t)
    p = yao.multicenter_partition(mu, geo.OrthoFrame(np.eye(d)), t)
    n_cells = (t + 1) * 2 ** (d - 1)
    assert len(p.cells) == n_cells and len(p.centers) == t
    cnt = counts(p, mu)
    assert cnt.sum() == mu.n
    assert np.max(np.abs(cnt / mu.n - 1 / n_cells)) <= 2 / np.sqrt(mu.n)


def test_skeleton_flat_passes_through_center(cube):
    p = yao.yao_partition(cube, geo.OrthoFrame(np.eye(3)))
    S = yao.skeleton_flat(p, 1)
    assert S.distance(p.centers[0])[0] < 1e-12
    assert S.directions.k == 1


def test_insufficient_support():
    mu = M.gaussian(7, 3, seed=1)
    with pytest.raises(InsufficientSupport):
        yao.yao_partition(mu, geo.OrthoFrame(np.eye(3)))


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
def test_alpha_out_of_range(square, alpha):
    with pytest.raises(ValueError):
        yao.alpha_beta_partition(square, geo.OrthoFrame(np.eye(2)), alpha)


def test_multicenter_needs_a_center(square):
    with pytest.raises(ValueError):
        yao.multicenter_partition(square, geo.OrthoFrame(np.eye(2)), 0)
