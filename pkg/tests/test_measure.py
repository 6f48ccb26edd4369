import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from masspart import geometry as geo
from masspart import measure as M
from masspart.errors import BadSpec, EmptyMeasure, ParallelProjection
from oracles import enumerate_mass, sort_quantile


def line_measure(values, weights=None):
    P = np.column_stack([np.asarray(values, dtype=float)])
    return M.make_measure(P, weights, generic=True)


# ---------------------------------------------------------------- mass


def test_mass_left_half_of_square():
    mu = M.uniform_box(1000, 2, seed=3)
    left = geo.Region([[1.0, 0.0]], [0.5])
    assert abs(M.mass(mu, left) / mu.total_mass - 0.5) <= 2 / np.sqrt(1000)


def test_mass_whole_space():
    mu = M.gaussian(500, 3, seed=1)
    assert M.mass(mu, geo.Region.whole_space(3)) == mu.total_mass


def test_mass_triangle_matches_membership_loop(rng):
    mu = M.make_measure(rng.uniform(size=(50, 2)), rng.uniform(0.5, 2, 50), seed=2)
    T = rng.uniform(size=(3, 2))
    c = T.mean(axis=0)
    A, b = [], []
    for i in range(3):
        p, q = T[i], T[(i + 1) % 3]
        n = np.array([q[1] - p[1], p[0] - q[0]])
        if n @ (c - p) > 0:
            n = -n
        A.append(n)
        b.append(n @ p)
    tri = geo.Region(np.array(A), np.array(b))
    expect = enumerate_mass(mu.points, mu.weights, tri)
    assert M.mass(mu, tri) == pytest.approx(expect, rel=0, abs=1e-12)


@given(st.integers(0, 2**16), st.floats(-1, 1), st.floats(0, np.pi))
def test_mass_additive_across_a_cut(seed, off, ang):
    mu = M.gaussian(300, 2, seed=seed)
    n = np.array([np.cos(ang), np.sin(ang)])
    a = M.mass(mu, geo.Region([n], [off]))
    b = M.mass(mu, geo.Region([-n], [-off]))
    assert abs(a + b - mu.total_mass) <= 1e-9 * mu.total_mass


# ---------------------------------------------------------------- quantile


def test_median_of_one_to_ten():
    mu = line_measure(np.arange(1, 11))
    c = M.quantile(mu, [1.0], 0.5)
    assert 5 < c < 6


def test_quantile_one_fifth():
    mu = line_measure(np.arange(1, 11))
    c = M.quantile(mu, [1.0], 1 / 5)
    assert 2 < c < 3


def test_quantile_matches_sort_oracle():
    mu = M.gaussian(2001, 3, seed=8)
    d = np.array([0.3, -0.2, 0.9])
    d /= np.linalg.norm(d)
    c = M.quantile(mu, d, 0.3)
    assert c == sort_quantile(mu.points @ d, None, 0.3)


def test_weighted_quantile_matches_sort_oracle(rng):
    v = rng.standard_normal(301)
    w = rng.uniform(0.1, 3.0, 301)
    for f in (0.1, 0.25, 0.5, 0.9):
        assert M.quantile_1d(v, w, f) == sort_quantile(v, w, f)


def test_quantile_empty_raises():
    with pytest.raises(EmptyMeasure):
        M.quantile_1d([], None, 0.5)


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=60, unique=True),
       st.floats(0.01, 0.98), st.floats(0.01, 0.98))
def test_quantile_monotone_in_fraction(vals, a, b):
    a, b = sorted((a, b))
    assert M.quantile_1d(vals, None, a) <= M.quantile_1d(vals, None, b)


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=60, unique=True),
       st.floats(0.01, 0.99))
def test_quantile_lower_mass_within_one_point(vals, f):
    c = M.quantile_1d(vals, None, f)
    below = np.sum(np.asarray(vals) < c)
    assert abs(below - f * len(vals)) <= 1 + 1e-9


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=60, unique=True))
def test_median_symmetric_under_negation(vals):
    v = np.asarray(vals)
    assert M.quantile_1d(-v, None, 0.5) == -M.quantile_1d(v, None, 0.5)


# ---------------------------------------------------------------- projection / restriction


def test_orthogonal_projection_onto_x_axis():
    mu = M.gaussian(100, 2, seed=4)
    pm = M.project_measure(mu, onto=geo.OrthoFrame(np.array([[1.0, 0.0]])), coords=True)
    assert np.array_equal(pm.points[:, 0], mu.points[:, 0])
    assert np.array_equal(pm.weights, mu.weights)


def test_vertical_oblique_equals_orthogonal():
    mu = M.gaussian(100, 3, seed=4)
    H = geo.Hyperplane([0, 0, 1], 0.0)
    a = M.project_measure(mu, oblique=([0, 0, 1], H))
    b = M.project_measure(mu, onto=geo.OrthoFrame(np.eye(3)[:2]))
    assert np.allclose(a.points, b.points, atol=1e-15)
    assert a.total_mass == mu.total_mass


def test_projection_commutes_with_orthogonal_projection(rng):
    # pi o p_v = p_{pi(v)} o pi, where pi drops the u_1 component
    mu = M.gaussian(400, 3, seed=9)
    v = np.array([0.7, -0.4, 1.0])
    H = geo.Hyperplane([0, 0, 1], 0.3)
    pi = geo.OrthoFrame(np.eye(3)[1:])
    lhs = pi.coords(M.project_measure(mu, oblique=(v, H)).points)
    H2 = geo.Hyperplane([0, 1], 0.3)
    pm = M.project_measure(mu, onto=pi, coords=True)
    rhs = M.project_measure(pm, oblique=(v[1:], H2)).points
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_parallel_projection_raises():
    mu = M.gaussian(10, 2, seed=1)
    with pytest.raises(ParallelProjection):
        M.project_measure(mu, oblique=([1, 0], geo.Hyperplane([0, 1], 0.0)))


def test_restrict_whole_space_is_identity():
    mu = M.gaussian(100, 2, seed=2)
    assert M.restrict(mu, geo.Region.whole_space(2)) is mu


def test_restrict_left_half():
    mu = M.uniform_box(2000, 2, seed=2)
    sub = M.restrict(mu, geo.Region([[1.0, 0.0]], [0.5]))
    assert abs(sub.total_mass / mu.total_mass - 0.5) <= 2 / np.sqrt(2000)


def test_restrict_then_mass_equals_intersection(rng):
    mu = M.gaussian(300, 2, seed=5)
    for _ in range(100):
        A = rng.standard_normal((2, 2))
        b = rng.standard_normal(2)
        r1 = geo.Region(A[:1], b[:1])
        r2 = geo.Region(A[1:], b[1:])
        inside1 = r1.min_slack(mu.points) > 0
        expect = float(mu.weights[inside1 & (r2.min_slack(mu.points) > 0)].sum())
        if not inside1.any():
            continue
        assert M.mass(M.restrict(mu, r1), r2) == expect


def test_restrict_empty_raises():
    mu = M.gaussian(50, 2, seed=5)
    with pytest.raises(EmptyMeasure):
        M.restrict(mu, geo.Region([[1.0, 0.0]], [-1e6]))


# ---------------------------------------------------------------- generators


def test_generate_is_deterministic():
    a = M.uniform_box(4, 2, seed=7)
    b = M.uniform_box(4, 2, seed=7)
    assert np.array_equal(a.points, b.points) and a.jitter_applied


def test_gaussian_mean_within_standard_error():
    n = 10_000
    mu = M.gaussian(n, 3, seed=1, mean=[1.0, -2.0, 0.5])
    assert np.all(np.abs(mu.points.mean(axis=0) - [1.0, -2.0, 0.5]) < 4 / np.sqrt(n))


def test_moment_curve_spec_delegates():
    spec = M.DensitySpec("moment_curve", {"dim": 2, "n_clusters": 4, "eps": 0.01}, 40, seed=3)
    mu = M.generate(spec)
    t = np.round(mu.points[:, 0])
    assert set(t.tolist()) == {1.0, 2.0, 3.0, 4.0}
    assert np.allclose(mu.points[:, 1], mu.points[:, 0] ** 2, atol=0.1)


def test_mixture_and_annulus():
    spec = M.DensitySpec("mixture", {"components": [
        {"kind": "annulus", "dim": 2, "r_inner": 1, "r_outer": 2, "weight": 1},
        {"kind": "gaussian", "dim": 2, "mean": [10, 0], "weight": 3}]}, 4000, seed=1)
    mu = M.generate(spec)
    far = mu.points[:, 0] > 5
    assert abs(far.mean() - 0.75) < 0.03
    r = np.linalg.norm(mu.points[~far], axis=1)
    assert r.min() > 1 - 1e-6 and r.max() < 2 + 1e-6


@pytest.mark.parametrize("bad", [
    {"kind": "nope"},
    {"kind": "uniform_box", "dim": 2, "low": 1, "high": 0},
    {"kind": "gaussian", "dim": 2, "std": -1},
    {"kind": "mixture", "components": []},
    {"kind": "uniform_box", "dim": 2, "n_samples": 0},
])
def test_bad_specs(bad):
    with pytest.raises(BadSpec):
        M.generate(M.DensitySpec.from_dict(bad))


def test_measure_rejects_bad_weights():
    with pytest.raises(BadSpec):
        M.Measure(np.zeros((2, 2)), np.array([1.0, 0.0]))


def test_jitter_is_tiny_and_generic():
    P = np.repeat(np.array([[0.0, 0.0], [1.0, 1.0]]), 5, axis=0)
    mu = M.make_measure(P, seed=1)
    assert np.max(np.abs(mu.points - P)) <= 1e-9 * np.sqrt(2)
    assert len(np.unique(mu.points[:, 0])) == 10
    assert M.is_generic(M.gaussian(300, 3, seed=1))
