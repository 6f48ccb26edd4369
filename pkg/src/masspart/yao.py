"""Yao-Yao, (alpha, beta)- and multicenter partitions of point clouds.

All work happens in the coordinates ``y = U x`` of the ordered basis
``U = (u_1, ..., u_d)``.  At dimension ``k`` the cloud is halved by the
horizontal hyperplane ``y_k = h`` and each half is projected onto it along
``v = u_k + sum_i g_i u_i``.  The two projected halves are partitioned
recursively and ``g`` is tuned until their centers agree.

Components ``2..k-1`` of a center only depend on the orthogonal projection
of the cloud onto ``u_1^perp`` (the frame does not move with alpha), so
``g_2..g_{k-1}`` are the top-level projection vector of the Yao-Yao
partition of that projected cloud.  That leaves a single scalar ``g_1``
per level, and the residual in ``g_1`` is monotone: raising ``g_1`` pushes
the projected top half towards ``-u_1`` and the bottom half towards
``+u_1``.  Each level is therefore a bracketed scalar root find.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import geometry as geo
from .config import TOL
from .errors import EmptyMeasure, InsufficientSupport, NoConvergence
from .measure import Measure, quantile_1d

log = logging.getLogger(__name__)

_MAX_BRACKET = 80


@dataclass
class Partition:
    cells: list
    basis: geo.OrthoFrame
    centers: list
    cuts: list = field(default_factory=list)
    kind: str = "yao"
    info: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.basis.d

    def __len__(self):
        return len(self.cells)


@dataclass
class FrameDecomposition:
    pairs: list  # (A_i, B_i, C_i) regions
    projected_cells: list  # D_i, cylinders along u_1 whose normals are orthogonal to u_1


# ---------------------------------------------------------------- recursion


@dataclass
class _Node:
    k: int
    center: np.ndarray
    h: float = 0.0
    g: np.ndarray | None = None
    pi: "_Node | None" = None
    top: "_Node | None" = None
    bottom: "_Node | None" = None
    residual: float = 0.0


def _leaf(values, w, alpha) -> _Node:
    if len(values) == 0:
        raise EmptyMeasure("empty sub-measure in partition recursion")
    return _Node(1, np.array([quantile_1d(values, w, alpha)]))


def _solve(Y, w, alpha, pi=None, start=0.0) -> _Node:
    """(alpha, beta)-partition tree of the cloud ``Y`` (coordinates)."""
    k = Y.shape[1]
    if k == 1:
        return _leaf(Y[:, 0], w, alpha)
    if pi is None:
        pi = _solve(Y[:, 1:], w, 0.5, start=start)
    h = float(pi.center[-1])
    gp = pi.g if pi.k >= 2 else np.zeros(0)
    pi_top = pi.top if pi.k >= 2 else None
    pi_bot = pi.bottom if pi.k >= 2 else None

    yk = Y[:, k - 1]
    top, bot = yk > h, yk < h
    if not top.any() or not bot.any():
        raise InsufficientSupport("a halving hyperplane left one side empty")
    Yt, dt = Y[top, : k - 1], yk[top] - h
    Yb, db = Y[bot, : k - 1], yk[bot] - h
    wt = None if w is None else w[top]
    wb = None if w is None else w[bot]

    def halves(g1):
        g = np.concatenate([[g1], gp])
        nt = _solve(Yt - dt[:, None] * g, wt, alpha, pi_top, start)
        nb = _solve(Yb - db[:, None] * g, wb, alpha, pi_bot, start)
        return nt, nb

    def F(g1):
        nt, nb = halves(g1)
        return nt.center[0] - nb.center[0]

    g1 = _root_decreasing(F, start)
    nt, nb = halves(g1)
    center = np.concatenate([[0.5 * (nt.center[0] + nb.center[0])], pi.center])
    resid = float(np.linalg.norm(nt.center - nb.center))
    return _Node(k, center, h, np.concatenate([[g1], gp]), pi, nt, nb, resid)


def _root_decreasing(F, start: float) -> float:
    """Root of a decreasing scalar function, bracketing outwards from ``start``."""
    f0 = F(start)
    if f0 == 0.0:
        return start
    step = 1.0
    a, fa = start, f0
    sign = 1.0 if f0 > 0 else -1.0
    for _ in range(_MAX_BRACKET):
        b = start + sign * step
        fb = F(b)
        if fb == 0.0:
            return b
        if np.sign(fb) != np.sign(fa):
            break
        a, fa = b, fb
        step *= 2.0
    else:
        raise NoConvergence("could not bracket the projection vector", abs(fa), a)
    lo, hi = (a, b) if a < b else (b, a)
    try:
        return brentq(F, lo, hi, xtol=1e-13, rtol=1e-14, maxiter=400)
    except RuntimeError as exc:  # maxiter exhausted
        raise NoConvergence(f"projection vector search stalled: {exc}", abs(fa)) from exc


def _node_cells(node: _Node):
    """Cells of a tree as ``(A, b, levels, side, frame_index)`` in node coordinates."""
    if node.k == 1:
        c = node.center[0]
        return [(np.array([[1.0]]), np.array([c]), np.array([1]), "A", 0),
                (np.array([[-1.0]]), np.array([-c]), np.array([1]), "B", 0)]
    k, h, g = node.k, node.h, node.g
    half = 2 ** (k - 2)
    out = []
    for sub, sgn, shift in ((node.top, -1.0, 0), (node.bottom, 1.0, half)):
        for A, b, lev, side, f in _node_cells(sub):
            ag = A @ g
            A2 = np.hstack([A, -ag[:, None]])
            b2 = b - h * ag
            cut = np.zeros(k)
            cut[-1] = sgn
            A2 = np.vstack([A2, cut])
            b2 = np.append(b2, sgn * h)
            out.append((A2, b2, np.append(lev, k), side, f + shift))
    return out


def _check_support(n, d):
    if n < 2 ** d:
        raise InsufficientSupport(f"need at least {2 ** d} points, got {n}")


def _coords(mu: Measure, basis: geo.OrthoFrame):
    if basis.k != basis.d or basis.d != mu.dim:
        raise ValueError("basis must be a full orthonormal basis of the measure's space")
    w = None if mu.uniform_weights else mu.weights
    return basis.coords(mu.points), w


def _to_world(A, b, basis):
    return A @ basis.vectors, b


def _witness(region: geo.Region, lo, hi):
    x, r = geo.chebyshev_center(region, lo, hi)
    return x if r > 0 else None


def _finish_cells(raw, basis, mu, center_index=0, start_id=0):
    lo, hi = mu.bbox(inflate=0.1)
    cells = []
    for i, (A, b, lev, side, f) in enumerate(raw):
        Aw, bw = _to_world(A, b, basis)
        reg = geo.Region(Aw, bw, geo.Lineage(f, side, center_index), start_id + i)
        cells.append(reg.replace(witness=_witness(reg, lo, hi)))
    return cells


def _frame_regions(raw, basis, d):
    frames = {}
    for A, b, lev, side, f in raw:
        keep = lev >= 2
        if f not in frames:
            Aw, bw = _to_world(A[keep], b[keep], basis)
            if d >= 2 and len(Aw):
                Aw = Aw - np.outer(Aw @ basis.vectors[0], basis.vectors[0])
            frames[f] = geo.Region(Aw.reshape(-1, d), bw, geo.Lineage(f, "none", None), f)
    return [frames[f] for f in sorted(frames)]


# ---------------------------------------------------------------- public API


def center_1d(mu: Measure, alpha: float, direction=None) -> np.ndarray:
    """(alpha, beta)-center of a measure on a line with direction ``direction``."""
    if mu.n == 0:
        raise EmptyMeasure("center of an empty measure")
    u = np.ones(1) if direction is None else np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    s = mu.points @ u
    c = quantile_1d(s, None if mu.uniform_weights else mu.weights, alpha)
    base = mu.points[0] - (mu.points[0] @ u) * u
    return base + c * u


def solve_projection_vector(mu: Measure, basis: geo.OrthoFrame, alpha: float = 0.5,
                            start: float = 0.0):
    """Top-level projection vector ``v`` (with ``<v, u_d> = 1``) and the center."""
    Y, w = _coords(mu, basis)
    d = Y.shape[1]
    if d < 2:
        raise ValueError("projection vectors need d >= 2")
    _check_support(mu.n, d)
    node = _solve(Y, w, alpha, start=start)
    vc = np.append(node.g, 1.0)
    return vc @ basis.vectors, node.center @ basis.vectors


def projected_centers(mu: Measure, basis: geo.OrthoFrame, alpha: float, v):
    """Centers of the two projected halves for an arbitrary projection vector ``v``.

    Returns ``(C_plus, C_minus)`` in world coordinates; they coincide only
    for the projection vector of the (alpha, beta)-partition.
    """
    Y, w = _coords(mu, basis)
    vc = basis.coords(np.asarray(v, dtype=float))
    if abs(vc[-1]) < 1e-10:
        raise geo.ParallelProjection("v is parallel to the horizontal hyperplane")
    g = vc[:-1] / vc[-1]
    h = quantile_1d(Y[:, -1], w, 0.5)
    top, bot = Y[:, -1] > h, Y[:, -1] < h
    res = []
    for m in (top, bot):
        Z = Y[m, :-1] - (Y[m, -1] - h)[:, None] * g
        node = _solve(Z, None if w is None else w[m], alpha)
        res.append(np.append(node.center, h) @ basis.vectors)
    return res[0], res[1]


def alpha_beta_partition(mu: Measure, basis: geo.OrthoFrame, alpha: float, *, _pi=None):
    """(alpha, beta)-partition with its A_i/B_i/C_i pairing and projected frame."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    Y, w = _coords(mu, basis)
    d = Y.shape[1]
    _check_support(mu.n, d)
    node = _solve(Y, w, alpha, pi=_pi)
    raw = _node_cells(node)
    cells = _finish_cells(raw, basis, mu)
    frames = _frame_regions(raw, basis, d)
    pairs = []
    for f, C in enumerate(frames):
        A = next(c for c in cells if c.lineage.frame_index == f and c.lineage.side == "A")
        B = next(c for c in cells if c.lineage.frame_index == f and c.lineage.side == "B")
        pairs.append((A, B, C.replace(normals=C.normals, offsets=C.offsets)))
    vectors = _projection_vectors(node, basis)
    resid = _max_residual(node)
    scale = mu.diameter or 1.0
    if resid > TOL.solver * scale:
        log.warning("projection-vector residual %.3e exceeds tolerance (discontinuous data?)", resid)
    kind = "yao" if alpha == 0.5 else f"alpha_beta({alpha:g})"
    part = Partition(cells, basis, [node.center @ basis.vectors], [], kind,
                     {"residual": resid, "projection_vector": vectors, "alpha": alpha})
    fd = FrameDecomposition(pairs, frames)
    part.info["_node"] = node
    return part, fd


def _projection_vectors(node: _Node, basis):
    if node.k < 2:
        return None
    vc = np.zeros(basis.d)
    vc[: node.k - 1] = node.g
    vc[node.k - 1] = 1.0
    return vc @ basis.vectors


def _max_residual(node: _Node) -> float:
    if node.k < 2:
        return 0.0
    return max(node.residual, _max_residual(node.top), _max_residual(node.bottom),
               _max_residual(node.pi))


def yao_partition(mu: Measure, basis: geo.OrthoFrame) -> Partition:
    part, _ = alpha_beta_partition(mu, basis, 0.5)
    return part


def frame_of(fd: FrameDecomposition, mu: Measure | None = None, basis=None) -> list:
    """Projected frame cells ``D_i``: a Yao-Yao partition of the cloud projected along ``u_1``."""
    return list(fd.projected_cells)


def _in_cells(raw, Y):
    """Boolean membership matrix of coordinate points against raw cells."""
    M = np.zeros((len(Y), len(raw)), dtype=bool)
    for j, (A, b, *_rest) in enumerate(raw):
        M[:, j] = np.all(Y @ A.T < b, axis=1)
    return M


def multicenter_partition(mu: Measure, basis: geo.OrthoFrame, t: int) -> Partition:
    """Multicenter partition with ``t`` centers: ``(t+1) 2^(d-1)`` cells of equal mass.

    Level ``j`` takes a ``(1/(t+1-j), (t-j)/(t+1-j))``-partition of what is
    left in the B side, keeps its A cells (cut down to the earlier B cells)
    and recurses on its B side.  Every level reuses the frame of the first
    partition, which is also the frame of each restriction.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    Y, w = _coords(mu, basis)
    d = Y.shape[1]
    lo, hi = mu.bbox(inflate=0.1)
    raw_final = []
    centers = []
    residuals = []
    vectors = []
    pi = None
    prev_B = {}  # frame index -> (A, b) accumulated B constraints
    mask = np.ones(len(Y), dtype=bool)
    for j in range(t):
        alpha = 1.0 / (t + 1 - j)
        Yj = Y[mask]
        wj = None if w is None else w[mask]
        _check_support(len(Yj), d)
        node = _solve(Yj, wj, alpha, pi=pi)
        if pi is None and d >= 2:
            pi = node.pi
        centers.append(node.center @ basis.vectors)
        residuals.append(_max_residual(node))
        vectors.append(_projection_vectors(node, basis))
        raw = _node_cells(node)
        for A, b, lev, side, f in raw:
            if f in prev_B:
                pA, pb, plev = prev_B[f]
                A, b, lev = np.vstack([pA, A]), np.concatenate([pb, b]), np.concatenate([plev, lev])
            if side == "A" or j == t - 1:
                raw_final.append((A, b, lev, side, f, j))
        new_B = {}
        for A, b, lev, side, f in raw:
            if side == "B":
                if f in prev_B:
                    pA, pb, plev = prev_B[f]
                    A, b, lev = np.vstack([pA, A]), np.concatenate([pb, b]), np.concatenate([plev, lev])
                new_B[f] = (A, b, lev)
        prev_B = new_B
        inB = np.zeros(len(Y), dtype=bool)
        for A, b, _lev in new_B.values():
            inB |= np.all(Y @ A.T < b, axis=1)
        mask = inB
    cells = []
    for i, (A, b, lev, side, f, j) in enumerate(raw_final):
        Aw, bw = _to_world(A, b, basis)
        reg = geo.Region(Aw, bw, geo.Lineage(f, side, j), i)
        cells.append(reg.replace(witness=_witness(reg, lo, hi)))
    return Partition(cells, basis, centers, [], f"multicenter({t})",
                     {"residual": max(residuals), "projection_vectors": vectors})


def skeleton_flat(part: Partition, k: int) -> geo.Subspace:
    """Translate of ``span(u_1..u_k)`` through the partition center."""
    return geo.Subspace(part.centers[0], geo.OrthoFrame(part.basis.vectors[:k]))


def center_coords(Y, w=None, alpha: float = 0.5) -> np.ndarray:
    """(alpha, beta)-center of a cloud given in basis coordinates."""
    Y = np.asarray(Y, dtype=float)
    _check_support(len(Y), Y.shape[1])
    return _solve(Y, w, alpha).center


def center_and_vector_coords(Y, w=None, alpha: float = 0.5):
    """Center and top-level projection parameters ``g`` in basis coordinates."""
    Y = np.asarray(Y, dtype=float)
    _check_support(len(Y), Y.shape[1])
    node = _solve(Y, w, alpha)
    return node.center, (node.g if node.k >= 2 else np.zeros(0))
