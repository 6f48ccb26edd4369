"""Halfspaces, H-representation regions, orthonormal frames and projections.

Regions are stored in H-representation only: a region is the set
``{x : normals @ x <= offsets}``.  Cells produced by the partition routines
are frequently unbounded cones, so nothing here enumerates vertices except
:func:`region_vertices`, which clips against an explicit box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection

from .config import TOL
from .errors import DegenerateInput, ParallelProjection


@dataclass(frozen=True, eq=False)
class Halfspace:
    """The closed halfspace ``{x : <normal, x> <= offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise DegenerateInput("halfspace normal is zero")
        if abs(norm - 1.0) > 1e-9:
            object.__setattr__(self, "offset", float(self.offset) / norm)
            n = n / norm
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def complement(self) -> "Halfspace":
        return Halfspace(-self.normal, -self.offset)

    def signed_distance(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.normal - self.offset


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """The hyperplane ``{x : <normal, x> = offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise DegenerateInput("hyperplane normal is zero")
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "offset", float(self.offset) / norm)

    def below(self) -> Halfspace:
        return Halfspace(self.normal, self.offset)

    def above(self) -> Halfspace:
        return Halfspace(-self.normal, -self.offset)

    def distance(self, x) -> np.ndarray:
        return np.abs(np.asarray(x, dtype=float) @ self.normal - self.offset)

    def flipped(self) -> "Hyperplane":
        return Hyperplane(-self.normal, -self.offset)


@dataclass(frozen=True)
class Lineage:
    frame_index: int = -1
    side: str = "none"  # "A", "B" or "none"
    center_index: int | None = None

    def as_dict(self) -> dict:
        return {"frame_index": self.frame_index, "side": self.side,
                "center_index": self.center_index}


@dataclass(frozen=True, eq=False)
class Region:
    """Convex cell given as an intersection of halfspaces.

    An empty constraint list is the whole space.  ``witness`` is a point
    known to lie in the interior (set by the partition routines).
    """

    normals: np.ndarray
    offsets: np.ndarray
    lineage: Lineage = field(default_factory=Lineage)
    id: int = 0
    witness: np.ndarray | None = None

    def __post_init__(self):
        A = np.asarray(self.normals, dtype=float)
        b = np.asarray(self.offsets, dtype=float).reshape(-1)
        if A.ndim == 1:
            A = A.reshape(len(b), -1)
        if len(A):
            norms = np.linalg.norm(A, axis=1)
            if np.any(norms == 0):
                raise DegenerateInput("region has a zero normal")
            A = A / norms[:, None]
            b = b / norms
        object.__setattr__(self, "normals", A)
        object.__setattr__(self, "offsets", b)

    @classmethod
    def whole_space(cls, dim: int, **kw) -> "Region":
        return cls(np.zeros((0, dim)), np.zeros(0), **kw)

    @classmethod
    def from_halfspaces(cls, halfspaces: Iterable[Halfspace], dim: int, **kw) -> "Region":
        hs = list(halfspaces)
        if not hs:
            return cls.whole_space(dim, **kw)
        return cls(np.array([h.normal for h in hs]), np.array([h.offset for h in hs]), **kw)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def halfspaces(self) -> list[Halfspace]:
        return [Halfspace(a, b) for a, b in zip(self.normals, self.offsets)]

    def intersect(self, other: "Region", **kw) -> "Region":
        return Region(np.vstack([self.normals, other.normals]),
                      np.concatenate([self.offsets, other.offsets]), **kw)

    def with_halfspace(self, h: Halfspace, **kw) -> "Region":
        return Region(np.vstack([self.normals, h.normal[None, :]]),
                      np.append(self.offsets, h.offset), **kw)

    def replace(self, **kw) -> "Region":
        args = dict(normals=self.normals, offsets=self.offsets, lineage=self.lineage,
                    id=self.id, witness=self.witness)
        args.update(kw)
        return Region(**args)

    def slack(self, X) -> np.ndarray:
        """Constraint slacks ``offsets - normals @ x``, shape (n_points, n_constraints)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.offsets[None, :] - X @ self.normals.T

    def min_slack(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.offsets) == 0:
            return np.full(len(X), np.inf)
        return self.slack(X).min(axis=1)


@dataclass(frozen=True, eq=False)
class OrthoFrame:
    """Ordered orthonormal vectors ``(u_1, ..., u_k)`` in ``R^d`` stored as rows."""

    vectors: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if V.size == 0:
            V = V.reshape(0, V.shape[-1] if V.ndim == 2 else 0)
        G = V @ V.T
        if V.shape[0] > V.shape[1] or np.max(np.abs(G - np.eye(len(V))), initial=0.0) > 1e-9:
            raise DegenerateInput("frame vectors are not orthonormal")
        object.__setattr__(self, "vectors", V)

    @classmethod
    def standard(cls, d: int, k: int | None = None) -> "OrthoFrame":
        return cls(np.eye(d)[: d if k is None else k])

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.k

    def __getitem__(self, i):
        return self.vectors[i]

    def complete(self) -> "OrthoFrame":
        """Extend to a full orthonormal basis of ``R^d`` keeping the given vectors first."""
        if self.k == self.d:
            return self
        Q, _ = np.linalg.qr(np.vstack([self.vectors, np.eye(self.d)]).T)
        Q = Q[:, : self.d].T
        Q[: self.k] = self.vectors
        return OrthoFrame(orthonormalize(Q).vectors)

    def coords(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.vectors.T

    def from_coords(self, Y) -> np.ndarray:
        return np.asarray(Y, dtype=float) @ self.vectors


@dataclass(frozen=True, eq=False)
class Subspace:
    """Affine subspace ``base_point + span(directions)``."""

    base_point: np.ndarray
    directions: OrthoFrame

    @property
    def dim(self) -> int:
        return self.directions.k

    def project(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        D = self.directions.vectors
        return self.base_point + ((X - self.base_point) @ D.T) @ D

    def distance(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.linalg.norm(X - self.project(X), axis=1)

    def contains_subspace(self, other: "Subspace", tol: float = 1e-9) -> bool:
        if self.distance(other.base_point)[0] > tol:
            return False
        D = self.directions.vectors
        for u in other.directions.vectors:
            if np.linalg.norm(u - (u @ D.T) @ D) > tol:
                return False
        return True


def orthonormalize(vectors: Sequence[Sequence[float]]) -> OrthoFrame:
    """Gram-Schmidt with reorthogonalisation; keeps the direction of the first vector."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.shape[0] == 0:
        return OrthoFrame(V)
    s = np.linalg.svd(V, compute_uv=False)
    if s[0] == 0 or s[-1] / s[0] < 1e-8 or V.shape[0] > V.shape[1]:
        raise DegenerateInput("vectors are rank deficient")
    out = []
    for v in V:
        w = v.copy()
        for _ in range(2):
            for u in out:
                w -= (w @ u) * u
        n = np.linalg.norm(w)
        if n < 1e-8 * np.linalg.norm(v):
            raise DegenerateInput("vectors are rank deficient")
        out.append(w / n)
    return OrthoFrame(np.array(out))


def random_frame(d: int, k: int | None = None, rng=None) -> OrthoFrame:
    """Haar-random orthonormal k-frame."""
    rng = np.random.default_rng(rng)
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))
    return OrthoFrame(Q.T[: d if k is None else k])


def oblique_project(v, H: Hyperplane, x) -> np.ndarray:
    """Project ``x`` onto ``H`` along direction ``v``."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    nv = H.normal @ v
    if abs(nv) < 1e-10 * np.linalg.norm(v):
        raise ParallelProjection("projection direction is parallel to the hyperplane")
    return x - np.multiply.outer((x @ H.normal - H.offset) / nv, v)


def region_contains(region: Region, x, tol: float = TOL.geom) -> str:
    """Classify ``x`` as ``"interior"``, ``"boundary"`` or ``"outside"``."""
    s = region.min_slack(x)[0]
    if s > tol:
        return "interior"
    if s >= -tol:
        return "boundary"
    return "outside"


def assign_points(cells: Sequence[Region], X, tol: float = 0.0):
    """Index of the cell whose interior holds each point, and the number of such cells.

    Points strictly inside no cell get index -1.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    inside = np.zeros((len(X), len(cells)), dtype=bool)
    for j, c in enumerate(cells):
        inside[:, j] = c.min_slack(X) > tol
    count = inside.sum(axis=1)
    idx = np.where(count > 0, inside.argmax(axis=1), -1)
    return idx, count


def chebyshev_center(region: Region, lo, hi):
    """Deepest point of ``region`` inside the box ``[lo, hi]`` and its depth.

    Returns ``(point, radius)``; the radius is negative or ``None``-like
    (``-inf``) when the region misses the box.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = len(lo)
    A = region.normals
    b = region.offsets
    rmax = float(np.max(hi - lo))
    c = np.zeros(d + 1)
    c[-1] = -1.0
    if len(A):
        A_ub = np.hstack([A, np.ones((len(A), 1))])
        b_ub = b
    else:
        A_ub = None
        b_ub = None
    # box faces count as constraints so the witness stays away from them too
    box_A = np.vstack([np.eye(d), -np.eye(d)])
    box_b = np.concatenate([hi, -lo])
    box_rows = np.hstack([box_A, np.ones((2 * d, 1))])
    A_all = box_rows if A_ub is None else np.vstack([A_ub, box_rows])
    b_all = box_b if b_ub is None else np.concatenate([b_ub, box_b])
    res = linprog(c, A_ub=A_all, b_ub=b_all,
                  bounds=[(None, None)] * d + [(None, rmax)], method="highs")
    if res.status != 0:
        return 0.5 * (lo + hi), -np.inf
    return res.x[:d], float(res.x[-1])


def region_vertices(region: Region, lo, hi, interior=None) -> np.ndarray:
    """Vertices of ``region`` clipped to the box ``[lo, hi]`` (empty array if empty)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = len(lo)
    if d == 1:
        a = region.normals[:, 0] if len(region.offsets) else np.zeros(0)
        b = region.offsets
        left, right = lo[0], hi[0]
        for ai, bi in zip(a, b):
            if ai > 0:
                right = min(right, bi / ai)
            elif ai < 0:
                left = max(left, bi / ai)
            elif bi < 0:
                return np.zeros((0, 1))
        if left > right:
            return np.zeros((0, 1))
        return np.array([[left], [right]])
    if interior is None:
        interior, r = chebyshev_center(region, lo, hi)
        if r <= 1e-12 * float(np.max(hi - lo)):
            return np.zeros((0, d))
    box_A = np.vstack([np.eye(d), -np.eye(d)])
    box_b = np.concatenate([hi, -lo])
    A = np.vstack([region.normals, box_A])
    b = np.concatenate([region.offsets, box_b])
    hs = np.hstack([A, -b[:, None]])
    try:
        hi_ = HalfspaceIntersection(hs, np.asarray(interior, dtype=float))
    except Exception:  # qhull failure on degenerate input
        return np.zeros((0, d))
    V = hi_.intersections
    return V[np.all(np.isfinite(V), axis=1)]


def clip_polygon(region: Region, box_lo, box_hi) -> np.ndarray:
    """Planar region clipped to a rectangle, as an ordered vertex list."""
    x0, y0 = box_lo
    x1, y1 = box_hi
    poly = [np.array(p, dtype=float) for p in [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]]
    for a, b in zip(region.normals, region.offsets):
        out = []
        n = len(poly)
        for i in range(n):
            p, q = poly[i], poly[(i + 1) % n]
            fp, fq = a @ p - b, a @ q - b
            if fp <= 0:
                out.append(p)
            if fp * fq < 0:
                out.append(p + (q - p) * (fp / (fp - fq)))
        poly = out
        if not poly:
            break
    return np.array(poly).reshape(-1, 2)


def bounding_box(X, inflate: float = 0.0):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lo, hi = X.min(axis=0), X.max(axis=0)
    pad = inflate * np.maximum(hi - lo, 1e-12)
    return lo - pad, hi + pad


def moment_curve_points(n: int, d: int, eps: float, seed: int = 0, per_cluster: int = 1):
    """Clusters around ``(t, t^2, ..., t^d)`` for ``t = 1..n``.

    Each cluster is a seeded uniform ball of radius ``eps`` holding
    ``per_cluster`` points of total weight 1.  Returns ``(points, weights)``.
    """
    if n < 1 or d < 1:
        raise DegenerateInput("need n >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    t = np.arange(1, n + 1, dtype=float)
    centers = np.stack([t ** (j + 1) for j in range(d)], axis=1)
    if eps <= 0:
        per_cluster = 1
    pts = []
    for c in centers:
        if eps > 0:
            g = rng.standard_normal((per_cluster, d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            r = eps * rng.random(per_cluster) ** (1.0 / d)
            pts.append(c + g * r[:, None])
        else:
            pts.append(c[None, :])
    P = np.vstack(pts)
    w = np.full(len(P), 1.0 / per_cluster)
    return P, w


def curve_pieces(curve_points, hyperplanes: Sequence[Hyperplane]) -> int:
    """Number of maximal runs of constant sign vector along an ordered point sequence.

    This bounds how many distinct cells of the arrangement a curve sampled
    by ``curve_points`` can visit.
    """
    X = np.atleast_2d(np.asarray(curve_points, dtype=float))
    if not hyperplanes:
        return 1
    S = np.stack([np.sign(X @ h.normal - h.offset) for h in hyperplanes], axis=1)
    keys = [tuple(row) for row in S.astype(int)]
    return sum(1 for _ in groupby(keys))
