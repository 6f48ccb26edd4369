import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from masspart import complexity as C
from masspart import geometry as geo
from masspart import measure as M
from masspart.errors import BadSpec


def cell_fractions(cp, mu):
    idx, per_point = geo.assign_points(cp.cells, mu.points)
    assert np.all(per_point == 1)
    return np.bincount(idx, weights=mu.weights, minlength=len(cp.cells)) / mu.total_mass


def check(cp, mu, n):
    assert len(cp) == n
    f = cell_fractions(cp, mu)
    assert np.max(np.abs(f - 1 / n)) <= 2 / np.sqrt(mu.n)
    assert cp.k >= C.lower_bound(n, mu.dim)
    rep = C.verify_containment(cp, samples=400, mu=mu)
    assert rep.passed, rep.statistics


# ---------------------------------------------------------------- closed forms


def test_expected_k_examples():
    assert C.expected_k("d2x", 8, 2, x=2) == 4
    assert C.expected_k("bhj2d", 7, 2) == 4
    assert C.expected_k("multicenter2d", 7, 2) == 4
    assert C.expected_k("multicenter2d", 1, 2) == 0
    assert C.expected_k("buckbuck3d", 13, 3) == 6
    assert C.expected_k("parallel3d", 6, 3) == 3
    assert C.expected_k("binary", 10, 2) is None


def test_bounds():
    assert C.lower_bound(7, 2) == 3
    assert C.lower_bound(1, 3) == 0
    assert C.binary_bound(8, 2) == pytest.approx(4 + 2 + 0)


@given(st.integers(1, 500), st.integers(1, 3))
def test_binary_blocks_decompose_n(n, d):
    alphas, eps = C.binary_blocks(n, d)
    assert sum(d * 2 ** a for a in alphas) + eps == n
    assert alphas == sorted(set(alphas), reverse=True)
    assert 0 <= eps < d


# ---------------------------------------------------------------- constructions


@pytest.mark.parametrize("d,x", [(1, 2), (2, 0), (2, 2), (3, 1)])
def test_d2x(d, x):
    mu = M.uniform_box(4000, d, seed=20 + d)
    cp = C.d2x_partition(mu, x)
    check(cp, mu, d * 2 ** x)
    assert cp.k == C.expected_k("d2x", d * 2 ** x, d, x=x)


@pytest.mark.parametrize("d,n", [(2, 5), (2, 11), (3, 7), (3, 10)])
def test_binary(d, n):
    mu = M.uniform_box(4000, d, seed=30 + n)
    cp = C.low_complexity_partition(mu, n)
    check(cp, mu, n)
    assert cp.k <= C.binary_bound(n, d) + 1e-9


@pytest.mark.parametrize("strategy", ["bhj", "multicenter"])
@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 8])
def test_planar(square, strategy, n):
    cp = C.partition_2d(square, n, strategy)
    check(cp, square, n)
    assert cp.k == C.expected_k(cp.construction, n, 2)


@pytest.mark.parametrize("strategy", ["buckbuck", "parallel"])
@pytest.mark.parametrize("n", [6, 7, 12])
def test_spatial(cube, strategy, n):
    cp = C.partition_3d(cube, n, strategy)
    check(cp, cube, n)
    assert cp.k == C.expected_k(cp.construction, n, 3)


def test_rotated_basis(square):
    B = geo.random_frame(2, 2, np.random.default_rng(3))
    cp = C.partition_2d(square, 6, "multicenter", basis=B)
    check(cp, square, 6)


def test_partition_forwards_attributes(square):
    cp = C.partition_2d(square, 4, "bhj")
    assert cp.dim == 2 and cp.kind == cp.partition.kind
    with pytest.raises(AttributeError):
        cp.nonexistent


def test_containment_detects_missing_hyperplane(square):
    cp = C.partition_2d(square, 4, "bhj")
    broken = C.ComplexityPartition(cp.partition, cp.hyperplanes[:-1], cp.construction, cp.n)
    assert not C.verify_containment(broken, samples=400, mu=square).passed


@pytest.mark.parametrize("call", [
    lambda sq, cu: C.partition_2d(cu, 4),
    lambda sq, cu: C.partition_2d(sq, 0),
    lambda sq, cu: C.partition_2d(sq, 4, "zigzag"),
    lambda sq, cu: C.partition_3d(cu, 5),
    lambda sq, cu: C.partition_3d(cu, 6, "zigzag"),
    lambda sq, cu: C.d2x_partition(sq, -1),
    lambda sq, cu: C.low_complexity_partition(sq, 0),
])
def test_bad_requests(square, cube, call):
    with pytest.raises(BadSpec):
        call(square, cube)
