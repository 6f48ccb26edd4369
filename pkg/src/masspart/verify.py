"""Audits that turn partition guarantees into pass/fail statistics.

Every audit is deterministic for a fixed ``(seed, samples)``.  Random
transversals are drawn in fixed-size chunks, and each chunk gets its own
seed derived from the master seed and the chunk index, so worker count
never changes a result.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np
from scipy.spatial import HalfspaceIntersection, QhullError

from . import geometry as geo
from .config import TOL, default_threads
from .measure import Measure, mass
from .yao import Partition, alpha_beta_partition, frame_of

CHUNK = 256
ANCHOR_CAP = 100_000


@dataclass
class AuditReport:
    name: str
    passed: bool
    statistics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": bool(self.passed), "statistics": _jsonable(self.statistics)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __bool__(self):
        return bool(self.passed)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _chunk_rng(seed: int, chunk: int, tag: int):
    return np.random.default_rng(np.random.SeedSequence([seed, tag, chunk]))


def _map_chunks(fn, n_chunks: int, threads: int | None):
    threads = threads or default_threads()
    if threads <= 1 or n_chunks <= 1:
        return [fn(i) for i in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n_chunks)))


# ---------------------------------------------------------------- equipartition / coverage


def audit_equipartition(p: Partition, mu: Measure, tol: float | None = None) -> AuditReport:
    if tol is None:
        tol = TOL.mass_tol(mu.n)
    masses = np.array([mass(mu, c) for c in p.cells])
    target = mu.total_mass / len(p.cells)
    dev = float(np.max(np.abs(masses - target)) / mu.total_mass)
    return AuditReport("equipartition", dev <= tol,
                       {"max_deviation": dev, "tol": tol, "masses": masses,
                        "cells": len(p.cells), "total_mass": mu.total_mass})


def audit_coverage(p: Partition, mu: Measure) -> AuditReport:
    _, count = geo.assign_points(p.cells, mu.points, 0.0)
    exactly_one = float(np.mean(count == 1))
    return AuditReport("coverage", exactly_one == 1.0,
                       {"fraction_exactly_one": exactly_one,
                        "uncovered": int(np.sum(count == 0)),
                        "multiply_covered": int(np.sum(count > 1))})


# ---------------------------------------------------------------- avoidance


class _CellGeometry:
    """Per-cell data for deciding whether a line or hyperplane meets the interior."""

    def __init__(self, cells, lo, hi, tol):
        self.cells = cells
        self.tol = tol
        self.lo, self.hi = lo, hi
        self.vertices = None

    def ensure_vertices(self):
        if self.vertices is not None:
            return
        verts = []
        span = self.hi - self.lo
        big_lo, big_hi = self.lo - 1e6 * span, self.hi + 1e6 * span
        for c in self.cells:
            verts.append(_shrunk_vertices(c, big_lo, big_hi, self.tol))
        self.vertices = verts


def _shrunk_vertices(cell: geo.Region, lo, hi, tol):
    """Vertices of the cell shrunk by ``tol`` and clipped to a large box."""
    d = cell.dim
    A = np.vstack([cell.normals, np.eye(d), -np.eye(d)])
    b = np.concatenate([cell.offsets - tol, hi, -lo])
    shrunk = geo.Region(A, b)
    x, r = geo.chebyshev_center(shrunk, lo, hi)
    if not r > 0:
        return np.zeros((0, d))
    try:
        hs = HalfspaceIntersection(np.hstack([shrunk.normals, -shrunk.offsets[:, None]]), x)
        return hs.intersections
    except QhullError:
        return np.zeros((0, d))


def _line_meets(cell: geo.Region, p, u, tol):
    """Does the line ``p + s u`` pass through the cell interior (slack > tol)?

    Returns ``(meets, ambiguous)``.  Cyrus-Beck interval clipping against
    the shrunken cell; an interval shorter than ``tol`` counts as a contact.
    """
    A, b = cell.normals, cell.offsets - tol
    if len(A) == 0:
        return True, False
    au = A @ u
    slack = b - A @ p
    lo, hi = -np.inf, np.inf
    par = np.abs(au) < 1e-14
    if np.any(slack[par] <= 0):
        near = np.any(slack[par] > -2 * tol)
        return False, bool(near and np.all(slack[par] > -2 * tol))
    s = slack[~par] / au[~par]
    pos = au[~par] > 0
    if np.any(pos):
        hi = np.min(s[pos])
    if np.any(~pos):
        lo = np.max(s[~pos])
    if hi - lo > tol:
        return True, False
    return False, hi - lo > -tol


def _count_missed_lines(cells, P, U, tol):
    """Vectorised :func:`_line_meets` over all lines, one cell at a time."""
    missed = np.zeros(len(P), dtype=int)
    flagged = np.zeros(len(P), dtype=int)
    for c in cells:
        A, b = c.normals, c.offsets - tol
        if len(A) == 0:
            continue
        au = U @ A.T
        slack = b[None, :] - P @ A.T
        par = np.abs(au) < 1e-14
        blocked = np.any(par & (slack <= 0), axis=1)
        par_near = np.all(~par | (slack > -2 * tol), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = slack / np.where(par, 1.0, au)
        hi = np.min(np.where(~par & (au > 0), s, np.inf), axis=1)
        lo = np.max(np.where(~par & (au < 0), s, -np.inf), axis=1)
        width = hi - lo
        meets = ~blocked & (width > tol)
        amb = np.where(blocked, par_near, ~meets & (width > -tol))
        missed += ~meets
        flagged += amb & ~meets
    return missed, flagged


def _count_missed_planes(geom: _CellGeometry, N, C, tol):
    geom.ensure_vertices()
    missed = np.zeros(len(N), dtype=int)
    flagged = np.zeros(len(N), dtype=int)
    for V in geom.vertices:
        if len(V) == 0:
            missed += 1
            flagged += 1
            continue
        s = V @ N.T  # (n_vertices, n_planes)
        lo, hi = s.min(axis=0), s.max(axis=0)
        meets = (lo < C - tol) & (hi > C + tol)
        near = (lo < C + tol) & (hi > C - tol) & ~meets
        missed += ~meets
        flagged += near
    return missed, flagged


def _random_transversals(kind, d, lo, hi, n, rng, support):
    if kind == "line":
        U = rng.standard_normal((n, d))
        U /= np.linalg.norm(U, axis=1)[:, None]
        P = rng.uniform(lo, hi, size=(n, d))
        return P, U
    N = rng.standard_normal((n, d))
    N /= np.linalg.norm(N, axis=1)[:, None]
    proj = support @ N.T
    C = rng.uniform(proj.min(axis=0), proj.max(axis=0))
    return N, C


def _anchored_transversals(kind, X, d, cap, seed):
    """Lines through 2 support points or hyperplanes through d support points."""
    m = 2 if kind == "line" else d
    n = len(X)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA7C]))
    total = _n_choose(n, m)
    if total <= cap:
        idx = np.array(list(combinations(range(n), m)))
    else:
        idx = np.array([np.sort(rng.choice(n, m, replace=False)) for _ in range(cap)])
    pts = X[idx]  # (n_cand, m, d)
    if kind == "line":
        P = pts[:, 0]
        U = pts[:, 1] - pts[:, 0]
        nrm = np.linalg.norm(U, axis=1)
        ok = nrm > 0
        return P[ok], U[ok] / nrm[ok][:, None]
    if d == 1:
        N = np.ones((len(pts), 1))
        return N, pts[:, 0, 0]
    D = pts[:, 1:] - pts[:, :1]
    if d == 2:
        N = np.column_stack([-D[:, 0, 1], D[:, 0, 0]])
    else:
        N = np.cross(D[:, 0], D[:, 1])
    nrm = np.linalg.norm(N, axis=1)
    ok = nrm > 1e-14
    N = N[ok] / nrm[ok][:, None]
    C = np.einsum("ij,ij->i", N, pts[ok, 0])
    return N, C


def _n_choose(n, k):
    return comb(n, k)


def audit_avoidance(p: Partition, mu: Measure, transversal_kind: str = "hyperplane",
                    mode: str = "random", n_samples: int = 10_000, seed: int = 0,
                    threshold: int | None = None, anchor_points: int | None = None,
                    threads: int | None = None) -> AuditReport:
    """Minimum number of cell interiors missed by sampled lines or hyperplanes.

    ``mode`` is ``random``, ``anchored`` or ``both``.  A transversal meets a
    cell only when it passes through the cell shrunk by the geometric
    tolerance; touching contacts count as misses and are flagged.
    """
    if transversal_kind not in ("hyperplane", "line"):
        raise ValueError("transversal_kind must be 'hyperplane' or 'line'")
    if threshold is None:
        threshold = _default_threshold(p, transversal_kind)
    d = p.dim
    kind = transversal_kind if d > 1 else "hyperplane"
    lo, hi = mu.bbox()
    scale = mu.diameter or 1.0
    tol = TOL.geom * scale
    geom = _CellGeometry(p.cells, lo, hi, tol)
    missed_all, flagged_all = [], []
    counts = {}

    def run(batch):
        if kind == "line" and d > 1:
            return _count_missed_lines(p.cells, *batch, tol)
        return _count_missed_planes(geom, *batch, tol)

    if mode in ("random", "both"):
        n_chunks = (n_samples + CHUNK - 1) // CHUNK

        def chunk(i):
            m = min(CHUNK, n_samples - i * CHUNK)
            rng = _chunk_rng(seed, i, 0x7A5)
            return run(_random_transversals(kind, d, lo, hi, m, rng, mu.points))

        if kind == "hyperplane":
            geom.ensure_vertices()
        res = _map_chunks(chunk, n_chunks, threads)
        missed_all += [r[0] for r in res]
        flagged_all += [r[1] for r in res]
        counts["random"] = n_samples
    if mode in ("anchored", "both"):
        if anchor_points is None:
            anchor_points = 60 if kind == "line" or d == 2 else 40
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11]))
        k = min(anchor_points, mu.n)
        X = mu.points[np.sort(rng.choice(mu.n, k, replace=False))]
        batch = _anchored_transversals(kind, X, d, ANCHOR_CAP, seed)
        n_b = len(batch[0])
        n_chunks = (n_b + CHUNK - 1) // CHUNK

        def achunk(i):
            sl = slice(i * CHUNK, min((i + 1) * CHUNK, n_b))
            return run((batch[0][sl], batch[1][sl]))

        if kind == "hyperplane":
            geom.ensure_vertices()
        res = _map_chunks(achunk, n_chunks, threads)
        missed_all += [r[0] for r in res]
        flagged_all += [r[1] for r in res]
        counts["anchored"] = n_b
    missed = np.concatenate(missed_all) if missed_all else np.zeros(0, dtype=int)
    flagged = np.concatenate(flagged_all) if flagged_all else np.zeros(0, dtype=int)
    min_missed = int(missed.min()) if len(missed) else len(p.cells)
    stats = {"min_missed": min_missed, "threshold": int(threshold), "kind": kind,
             "mode": mode, "samples": counts, "seed": seed,
             "flagged_contacts": int(flagged.sum()), "cells": len(p.cells)}
    return AuditReport(f"avoidance[{kind}]", min_missed >= threshold, stats)


def _default_threshold(p: Partition, transversal_kind: str) -> int:
    """Guaranteed miss count: ``t`` for multicenter (1 for Yao-Yao), ``n - (k+1)`` lines for complexity partitions.

    A line lies in some hyperplane, so hyperplane guarantees carry over to
    lines.  Complexity partitions promise nothing for hyperplanes.
    """
    if "line_threshold" in p.info:
        return int(p.info["line_threshold"]) if transversal_kind == "line" else 0
    if p.kind.startswith("multicenter("):
        return len(p.centers)
    return 1


# ---------------------------------------------------------------- frame and center checks


def _frame_labels(fd, Y):
    """Index of the projected frame cell holding each point (-1 if none)."""
    labels = np.full(len(Y), -1)
    for i, D in enumerate(frame_of(fd)):
        inside = D.min_slack(Y) > 0
        labels[inside & (labels == -1)] = i
    return labels


def audit_frame_invariance(mu: Measure, basis: geo.OrthoFrame, alphas,
                           tol: float | None = None) -> AuditReport:
    """Projected frames for several alphas must agree on the projected measure."""
    alphas = list(alphas)
    if len(alphas) < 2:
        raise ValueError("need at least two alphas")
    if tol is None:
        tol = TOL.mass_tol(mu.n)
    # the projected frame cells have normals orthogonal to u_1, so testing the
    # projected points is the same as testing the points themselves
    u1 = basis.vectors[0]
    Y = mu.points - np.outer(mu.points @ u1, u1)
    w = mu.weights / mu.total_mass
    labels = []
    for a in alphas:
        _, fd = alpha_beta_partition(mu, basis, a)
        labels.append(_frame_labels(fd, Y))
    dev = 0.0
    for i in range(len(alphas)):
        for j in range(i + 1, len(alphas)):
            dev = max(dev, float(w[labels[i] != labels[j]].sum()))
    d = basis.d
    share = [float(w[labels[0] == i].sum()) for i in range(2 ** (d - 1))]
    return AuditReport("frame_invariance", dev < tol,
                       {"max_symmetric_difference": dev, "tol": tol, "alphas": alphas,
                        "projected_masses": share})


def audit_center_monotonicity(mu: Measure, basis: geo.OrthoFrame, alpha: float,
                              alpha_prime: float) -> AuditReport:
    """The center of the restriction to the B side lies further along ``u_1``."""
    part, _ = alpha_beta_partition(mu, basis, alpha)
    B = [c for c in part.cells if c.lineage.side == "B"]
    idx, _ = geo.assign_points(B, mu.points)
    sub = mu.subset(idx >= 0)
    part_b, _ = alpha_beta_partition(sub, basis, alpha_prime)
    u1 = basis.vectors[0]
    c0 = float(part.centers[0] @ u1)
    c1 = float(part_b.centers[0] @ u1)
    return AuditReport("center_monotonicity", c1 > c0,
                       {"center": c0, "restricted_center": c1, "margin": c1 - c0,
                        "alpha": alpha, "alpha_prime": alpha_prime})


def audit_skeleton(p: Partition, k: int, samples: int = 200, seed: int = 0,
                   mu: Measure | None = None, min_cells: int = 2) -> AuditReport:
    """Points on ``center + span(u_1..u_k)`` must lie on the boundary of >= ``min_cells`` cells."""
    d = p.dim
    if not 0 <= k < d:
        raise ValueError("need 0 <= k < d")
    center = p.centers[0]
    U = p.basis.vectors[:k]
    if mu is not None:
        lo, hi = mu.bbox()
        radius = 0.5 * float(np.linalg.norm(hi - lo))
        scale = mu.diameter or 1.0
    else:
        radius, scale = 1.0, 1.0
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5E1]))
    coef = rng.uniform(-radius, radius, size=(samples, k))
    X = center + coef @ U if k else np.tile(center, (samples, 1))
    tol = max(TOL.geom, TOL.solver) * scale
    hits = np.zeros(samples, dtype=int)
    for c in p.cells:
        s = c.min_slack(X)
        hits += np.abs(s) <= tol
    ok = hits >= min_cells
    return AuditReport("skeleton", bool(ok.all()),
                       {"k": k, "samples": samples, "seed": seed, "min_boundary_cells": int(hits.min()),
                        "fraction_ok": float(ok.mean()), "tol": tol})
