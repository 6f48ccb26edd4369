"""Convex equipartitions with few cutting hyperplanes.

Each construction keeps the list of hyperplanes that contain all cell
boundaries, so the complexity ``k`` is read off directly.  "Vertical"
hyperplanes are orthogonal to ``u_1``.  They are placed at quantiles along
``u_1`` and cut off blocks from the left.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, log2

import numpy as np

from . import geometry as geo
from . import sandwich
from .errors import BadSpec
from .measure import Measure, quantile_1d
from .verify import AuditReport
from .yao import Partition, multicenter_partition

CONSTRUCTIONS = ("d2x", "binary", "bhj2d", "multicenter2d", "buckbuck3d", "parallel3d")


@dataclass
class ComplexityPartition:
    partition: Partition
    hyperplanes: list
    construction: str
    n: int
    extra: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.hyperplanes)

    @property
    def cells(self):
        return self.partition.cells

    # the audits only need the Partition surface, so forward it
    def __getattr__(self, name):
        if name in ("dim", "kind", "info", "centers", "basis", "cuts"):
            return getattr(self.partition, name)
        raise AttributeError(name)

    def __len__(self):
        return len(self.partition.cells)


@dataclass
class _Piece:
    region: geo.Region
    mask: np.ndarray


def _wts(mu):
    return None if mu.uniform_weights else mu.weights


def _split(mu: Measure, piece: _Piece, H: geo.Hyperplane):
    s = mu.points @ H.normal
    below = piece.mask & (s < H.offset)
    above = piece.mask & (s > H.offset)
    return (_Piece(piece.region.with_halfspace(H.below()), below),
            _Piece(piece.region.with_halfspace(H.above()), above))


def _vertical_cuts(mu, piece, fractions, u1, cuts):
    """Cut a piece into consecutive blocks along ``u_1`` with the given mass fractions."""
    vals = mu.points[piece.mask] @ u1
    w = None if mu.uniform_weights else mu.weights[piece.mask]
    blocks = []
    rest = piece
    acc = 0.0
    for f in fractions[:-1]:
        acc += f
        H = geo.Hyperplane(u1, quantile_1d(vals, w, acc))
        cuts.append(H)
        left, rest = _split(mu, rest, H)
        blocks.append(left)
    blocks.append(rest)
    return blocks


def _d2x_pieces(mu, piece, x, u1, cuts):
    d = mu.dim
    groups = [_vertical_cuts(mu, piece, [1.0 / d] * d, u1, cuts)]
    for _ in range(x):
        nxt = []
        for group in groups:
            H = sandwich.ham_sandwich([mu.subset(p.mask) for p in group])
            cuts.append(H)
            halves = [_split(mu, p, H) for p in group]
            nxt.append([h[0] for h in halves])
            nxt.append([h[1] for h in halves])
        groups = nxt
    return [p for g in groups for p in g]


def _bhj_rounds(mu, group, q, cuts):
    """Split every piece of a well-separated group into ``q`` equal parts with ``q-1`` cuts."""
    cells = []
    rest = list(group)
    for j in range(q - 1):
        frac = 1.0 / (q - j)
        req = sandwich.CutRequest([mu.subset(p.mask) for p in rest], [frac] * len(rest))
        h = sandwich.bhj_cut(req)
        H = geo.Hyperplane(h.normal, h.offset)
        cuts.append(H)
        pairs = [_split(mu, p, H) for p in rest]
        cells += [a for a, _ in pairs]
        rest = [b for _, b in pairs]
    return cells + rest


def _finish(mu, pieces, cuts, construction, n, basis, centers=(), extra=None):
    lo, hi = mu.bbox(inflate=0.1)
    cells = []
    for i, p in enumerate(pieces):
        x, r = geo.chebyshev_center(p.region, lo, hi)
        cells.append(p.region.replace(id=i, witness=x if r > 0 else None))
    part = Partition(cells, basis, [np.asarray(c) for c in centers], list(cuts),
                     f"complexity({construction})",
                     {"line_threshold": max(n - (len(cuts) + 1), 0)})
    return ComplexityPartition(part, list(cuts), construction, n, extra or {})


def _basis(mu, basis):
    return geo.OrthoFrame.standard(mu.dim) if basis is None else basis


def _whole(mu):
    return _Piece(geo.Region.whole_space(mu.dim), np.ones(mu.n, dtype=bool))


def _check_dim(mu, dims):
    if mu.dim not in dims:
        raise BadSpec(f"construction needs d in {dims}, got {mu.dim}")


def d2x_partition(mu: Measure, x: int, basis=None) -> ComplexityPartition:
    """``d 2^x`` equal cells from ``d-1`` vertical cuts and ``x`` rounds of ham sandwich cuts."""
    _check_dim(mu, (1, 2, 3))
    if x < 0:
        raise BadSpec("x must be >= 0")
    basis = _basis(mu, basis)
    cuts = []
    pieces = _d2x_pieces(mu, _whole(mu), x, basis.vectors[0], cuts)
    return _finish(mu, pieces, cuts, "d2x", mu.dim * 2 ** x, basis, extra={"x": x})


def binary_blocks(n: int, d: int):
    """Decompose ``n = sum d 2^a_i + eps`` with distinct exponents, largest first."""
    q, eps = divmod(n, d)
    alphas = [i for i in range(q.bit_length() - 1, -1, -1) if q >> i & 1]
    return alphas, eps


def low_complexity_partition(mu: Measure, n: int, basis=None) -> ComplexityPartition:
    """``n`` equal cells: vertical blocks of ``d 2^a`` parts plus a remainder block of slabs."""
    _check_dim(mu, (1, 2, 3))
    if n < 1:
        raise BadSpec("n must be >= 1")
    basis = _basis(mu, basis)
    d = mu.dim
    u1 = basis.vectors[0]
    alphas, eps = binary_blocks(n, d)
    sizes = [d * 2 ** a for a in alphas] + ([eps] if eps else [])
    cuts = []
    blocks = _vertical_cuts(mu, _whole(mu), [s / n for s in sizes], u1, cuts)
    pieces = []
    for a, block in zip(alphas, blocks):
        pieces += _d2x_pieces(mu, block, a, u1, cuts)
    if eps:
        pieces += _vertical_cuts(mu, blocks[-1], [1.0 / eps] * eps, u1, cuts)
    return _finish(mu, pieces, cuts, "binary", n, basis,
                   extra={"alphas": alphas, "remainder": eps})


def binary_bound(n: int, d: int) -> float:
    return n / d + (d - 1) * log2(n / d) + d - 2


def lower_bound(n: int, d: int) -> int:
    return ceil((n - 1) / d)


def _precut(mu, n, r, u1, cuts):
    """``r`` vertical cuts, each removing a ``1/n`` cell from the left."""
    if r == 0:
        return [], _whole(mu)
    fr = [1.0 / n] * r + [1.0 - r / n]
    blocks = _vertical_cuts(mu, _whole(mu), fr, u1, cuts)
    return blocks[:-1], blocks[-1]


def _trivial(mu, basis, construction):
    return _finish(mu, [_whole(mu)], [], construction, 1, basis)


def partition_2d(mu: Measure, n: int, strategy: str = "multicenter", basis=None) -> ComplexityPartition:
    """Planar equipartitions with ``n/2 + r/2`` (bhj) or ``ceil(n/2)`` (multicenter) lines."""
    _check_dim(mu, (2,))
    if n < 1:
        raise BadSpec("n must be >= 1")
    if strategy not in ("bhj", "multicenter"):
        raise BadSpec(f"unknown strategy {strategy!r}")
    basis = _basis(mu, basis)
    name = "bhj2d" if strategy == "bhj" else "multicenter2d"
    if n == 1:
        return _trivial(mu, basis, name)
    u1, u2 = basis.vectors
    q, r = divmod(n, 2)
    cuts = []
    left, block = _precut(mu, n, r, u1, cuts)
    if strategy == "bhj":
        vals = mu.points[block.mask] @ u2
        H = geo.Hyperplane(u2, quantile_1d(vals, None if mu.uniform_weights else mu.weights[block.mask], 0.5))
        cuts.append(H)
        bottom, top = _split(mu, block, H)
        pieces = left + _bhj_rounds(mu, [bottom, top], q, cuts)
        return _finish(mu, pieces, cuts, name, n, basis)
    t = q - 1
    sub = mu.subset(block.mask)
    if t == 0:
        H = geo.Hyperplane(u2, quantile_1d(sub.points @ u2, _wts(sub), 0.5))
        cuts.append(H)
        pieces = left + list(_split(mu, block, H))
        return _finish(mu, pieces, cuts, name, n, basis)
    mc = multicenter_partition(sub, basis, t)
    c0 = mc.centers[0]
    cuts.append(geo.Hyperplane(u2, float(c0 @ u2)))
    for c, v in zip(mc.centers, mc.info["projection_vectors"]):
        nrm = np.array([-v[1], v[0]])
        cuts.append(geo.Hyperplane(nrm, float(nrm @ c)))
    pieces = list(left)
    for cell in mc.cells:
        region = block.region.intersect(cell, lineage=cell.lineage)
        pieces.append(_Piece(region, np.zeros(mu.n, dtype=bool)))
    return _finish(mu, pieces, cuts, name, n, basis, mc.centers)


def _fan_regions(center2, angles, basis, block):
    """Six wedge prisms (along ``u_1``) of three concurrent planes."""
    rays = np.sort(np.mod(np.concatenate([angles, np.asarray(angles) + np.pi]), 2 * np.pi))
    u2, u3 = basis.vectors[1], basis.vectors[2]
    out = []
    for i in range(6):
        a, b = rays[i], rays[(i + 1) % 6]
        la = np.array([-np.sin(a), np.cos(a)])
        lb = np.array([-np.sin(b), np.cos(b)])
        na = -(la[0] * u2 + la[1] * u3)
        nb = lb[0] * u2 + lb[1] * u3
        R = geo.Region(np.vstack([na, nb]), np.array([-la @ center2, lb @ center2]))
        out.append(block.region.intersect(R))
    return out


def partition_3d(mu: Measure, n: int, strategy: str = "buckbuck", basis=None) -> ComplexityPartition:
    """Spatial equipartitions into ``n >= 6`` cells with ``n/3 + 2r/3 + 1`` planes (``n = 6q + r``)."""
    _check_dim(mu, (3,))
    if n < 6:
        raise BadSpec("n must be >= 6")
    if strategy not in ("buckbuck", "parallel"):
        raise BadSpec(f"unknown strategy {strategy!r}")
    basis = _basis(mu, basis)
    u1 = basis.vectors[0]
    q, r = divmod(n, 6)
    cuts = []
    left, block = _precut(mu, n, r, u1, cuts)
    centers = []
    if strategy == "buckbuck":
        sub = mu.subset(block.mask)
        P2 = sub.points @ basis.vectors[1:].T
        flat = Measure(P2, sub.weights, sub.seed, sub.jitter_applied)
        c2, angles = sandwich.buck_buck_six(flat)
        for a in angles:
            nrm2 = np.array([-np.sin(a), np.cos(a)])
            nrm = nrm2[0] * basis.vectors[1] + nrm2[1] * basis.vectors[2]
            cuts.append(geo.Hyperplane(nrm, float(nrm2 @ c2)))
        regions = _fan_regions(c2, angles, basis, block)
        six = [_Piece(R, block.mask & (R.min_slack(mu.points) > 0)) for R in regions]
        triplets = [[six[0], six[2], six[4]], [six[1], six[3], six[5]]]
        centers = [c2[0] * basis.vectors[1] + c2[1] * basis.vectors[2]]
        name = "buckbuck3d"
    else:
        slabs = _vertical_cuts(mu, block, [1 / 3] * 3, u1, cuts)
        H = sandwich.ham_sandwich([mu.subset(p.mask) for p in slabs])
        cuts.append(H)
        (lm, lp), (cm, cp), (rm, rp) = [_split(mu, p, H) for p in slabs]
        triplets = [[lp, rp, cm], [lm, rm, cp]]
        name = "parallel3d"
    pieces = list(left)
    for tri in triplets:
        pieces += _bhj_rounds(mu, tri, q, cuts)
    return _finish(mu, pieces, cuts, name, n, basis, centers)


def expected_k(construction: str, n: int, d: int, x: int | None = None) -> int | None:
    """Closed-form hyperplane count for a construction (``None`` where only a bound exists)."""
    if construction == "d2x":
        return (d - 1) + 2 ** x - 1
    if n == 1:
        return 0
    if construction == "bhj2d":
        q, r = divmod(n, 2)
        return q + r
    if construction == "multicenter2d":
        return ceil(n / 2)
    if construction in ("buckbuck3d", "parallel3d"):
        q, r = divmod(n, 6)
        return 2 * q + r + 1
    return None


def verify_containment(cp: ComplexityPartition, samples: int = 2000, seed: int = 0,
                       mu: Measure | None = None, tol: float = 1e-7) -> AuditReport:
    """Locate cell-boundary crossings along random segments; each must lie on a listed hyperplane."""
    cells = cp.partition.cells
    d = cp.partition.dim
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0C]))
    if mu is not None:
        lo, hi = mu.bbox(inflate=0.1)
    else:
        W = np.array([c.witness for c in cells if c.witness is not None])
        lo, hi = W.min(axis=0) - 1, W.max(axis=0) + 1
    scale = float(np.linalg.norm(hi - lo)) or 1.0
    A = rng.uniform(lo, hi, size=(samples, d))
    B = rng.uniform(lo, hi, size=(samples, d))

    def label(X):
        S = np.column_stack([c.min_slack(X) for c in cells])
        return S.argmax(axis=1)

    la, lb = label(A), label(B)
    flip = la != lb
    a, b, ta = A[flip], B[flip], la[flip]
    for _ in range(64):
        m = 0.5 * (a + b)
        same = label(m) == ta
        a = np.where(same[:, None], m, a)
        b = np.where(same[:, None], b, m)
    pts = 0.5 * (a + b)
    if cp.hyperplanes:
        N = np.array([h.normal for h in cp.hyperplanes])
        C = np.array([h.offset for h in cp.hyperplanes])
        dist = np.abs(pts @ N.T - C).min(axis=1) if len(pts) else np.zeros(0)
    else:
        dist = np.full(len(pts), np.inf)
    dev = float(dist.max()) if len(dist) else 0.0
    return AuditReport("containment", dev <= tol * scale,
                       {"max_deviation": dev, "crossings": int(flip.sum()),
                        "samples": samples, "seed": seed, "tol": tol * scale})
