"""Central transversals and flags found as zeros of equivariant maps on Stiefel manifolds.

A frame ``V = (v_1, ..., v_k)`` is stored as a ``(k, d)`` array of rows.
Points ``p_i`` attached to a frame live in ``span(v_1..v_k)`` and are kept
as coordinates in that basis.  Every point construction (centerpoints with
a sign-symmetric direction set, Yao-Yao centers, symmetric medians) is
invariant under flipping the sign of a frame vector.  So the residual
blocks ``x_j = <v_j, p_i - p_1>`` are equivariant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares, minimize, root

from . import geometry as geo
from . import sandwich
from .config import MULTISTARTS, TOL
from .errors import BadSpec, NoConvergence, NotWellSeparated
from .measure import Measure
from .yao import center_and_vector_coords, yao_partition

log = logging.getLogger(__name__)

SOLVER_SUBSAMPLE = 3000


# ---------------------------------------------------------------- residuals


@dataclass
class EquivariantResidual:
    """Map from ``(k, d)`` frames to the stacked blocks ``R^(d-1) x ... x R^(d-k)``."""

    evaluator: object
    k: int
    d: int
    scale: float = 1.0

    def __call__(self, V) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(V, dtype=float)), dtype=float)

    @property
    def block_sizes(self):
        return [self.d - j for j in range(1, self.k + 1)]

    @property
    def size(self) -> int:
        return sum(self.block_sizes)

    def blocks(self, r):
        out, s = [], 0
        for m in self.block_sizes:
            out.append(r[s:s + m])
            s += m
        return out

    def equivariance_error(self, n_frames: int = 20, seed: int = 0) -> float:
        """Max deviation from ``f(sV) = s f(V)`` (blockwise) over random frames and flips."""
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE9]))
        worst = 0.0
        for _ in range(n_frames):
            V = geo.random_frame(self.d, self.k, rng).vectors
            r = self(V)
            s = rng.choice([-1.0, 1.0], size=self.k)
            if np.all(s == 1):
                s[rng.integers(self.k)] = -1.0
            r2 = self(V * s[:, None])
            expect = np.concatenate([sj * b for sj, b in zip(s, self.blocks(r))])
            worst = max(worst, float(np.max(np.abs(r2 - expect), initial=0.0)))
        return worst / self.scale


def standard_map(k: int, d: int) -> EquivariantResidual:
    """The reference map ``x_j = ((v_j)_{j+1}, ..., (v_j)_d)``; zeros are ``(+-e_1, ..., +-e_k)``."""

    def g(V):
        return np.concatenate([V[j, j + 1:] for j in range(k)])

    return EquivariantResidual(g, k, d)


# ---------------------------------------------------------------- solver


def _n_params(k, d):
    return k * (k - 1) // 2 + k * (d - k)


def _skew(theta, k, d):
    S = np.zeros((d, d))
    idx = 0
    for i in range(k):
        for j in range(i + 1, d):
            S[i, j] = theta[idx]
            S[j, i] = -theta[idx]
            idx += 1
    return S


def _frame(Q0, theta, k, d):
    Q = Q0 @ expm(_skew(theta, k, d)) if len(theta) else Q0
    return Q[:, :k].T


def _completion(V):
    return geo.OrthoFrame(np.asarray(V)).complete().vectors.T


def _orthonormal_rows(V):
    q, r = np.linalg.qr(np.asarray(V).T)
    q = q * np.sign(np.diag(r))
    return q.T


def _local_solve(res, Q0, k, d, scale, max_nfev=400, rounds=4):
    """Powell hybrid root finding in the exponential chart at ``Q0``, re-centred between rounds.

    Falls back to least squares when the system is not square.
    """
    n = _n_params(k, d)
    best_V, best_r = Q0[:, :k].T, float(np.linalg.norm(res(Q0[:, :k].T))) / scale
    for _ in range(rounds):
        f = lambda th, Q0=Q0: res(_frame(Q0, th, k, d)) / scale
        if res.size == n:
            x = root(f, np.zeros(n), method="hybr", options={"maxfev": max_nfev, "xtol": 1e-14}).x
        else:
            x = least_squares(f, np.zeros(n), method="trf", diff_step=1e-7, xtol=1e-15,
                              ftol=1e-15, gtol=1e-15, max_nfev=max_nfev).x
        V = _frame(Q0, x, k, d)
        r = float(np.linalg.norm(res(V))) / scale
        if r < best_r:
            best_V, best_r = V, r
        Q0 = _completion(best_V)
        if best_r < 1e-13 or np.linalg.norm(x) < 1e-10:
            break
    return best_V, best_r


def _polish(res, V, k, d, scale):
    """Nelder-Mead on the squared residual, for kinks that stall least squares."""
    Q0 = _completion(V)
    n = _n_params(k, d)
    f = lambda th: float(np.sum((res(_frame(Q0, th, k, d)) / scale) ** 2))
    sol = minimize(f, np.zeros(n), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-30, "maxiter": 400 * n,
                            "initial_simplex": np.vstack([np.zeros(n), 1e-3 * np.eye(n)])})
    V2 = _frame(Q0, sol.x, k, d)
    return V2, float(np.linalg.norm(res(V2))) / scale


def _homotopy(res, k, d, scale, dt=0.02):
    """Track a zero of ``t f + (1 - t) g`` from the reference orbit at ``t = 0``."""
    g = standard_map(k, d)
    Q0 = np.eye(d)
    t = 0.0
    while t < 1.0 - 1e-12:
        t = min(1.0, t + dt)
        T = EquivariantResidual(lambda V, t=t: t * res(V) / scale + (1 - t) * g(V), k, d)
        V, r = _local_solve(T, Q0, k, d, 1.0, max_nfev=100)
        if r > 1e-4:
            return None, np.inf
        Q0 = _completion(V)
    V = Q0[:, :k].T
    return V, float(np.linalg.norm(res(V))) / scale


def stiefel_solve(res: EquivariantResidual, k: int | None = None, d: int | None = None, *,
                  starts: int = MULTISTARTS, seed: int = 0, tol: float | None = None,
                  homotopy: bool = False, initial=None, polish: bool = True,
                  good_enough: float | None = None) -> geo.OrthoFrame:
    """Zero of an equivariant residual over orthonormal ``k``-frames in ``R^d``.

    Multi-start least squares in an exponential chart, Nelder-Mead polish
    and (optionally) predictor-corrector homotopy from the reference map.
    ``tol`` is relative to ``res.scale``.  Raises ``NoConvergence``
    carrying the best residual and frame.  ``polish=False`` skips the
    derivative-free stage, which is slow on large clouds.  When a start
    finishes below ``good_enough`` the remaining starts are skipped and the
    best frame is returned, even if it misses ``tol``.
    """
    k = res.k if k is None else k
    d = res.d if d is None else d
    if not 1 <= k <= d:
        raise BadSpec("need 1 <= k <= d")
    tol = TOL.solver if tol is None else tol
    scale = res.scale
    best_V, best_r = None, np.inf

    def consider(V, r):
        nonlocal best_V, best_r
        if r < best_r:
            best_V, best_r = _orthonormal_rows(V), r
        return best_r <= tol

    if homotopy:
        V, r = _homotopy(res, k, d, scale)
        if V is not None and consider(V, r):
            return geo.OrthoFrame(best_V)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x57F]))
    cands = [] if initial is None else [np.asarray(initial, dtype=float)]
    cands += [np.eye(d)[:k]] + [geo.random_frame(d, k, rng).vectors for _ in range(4 * starts)]
    vals = np.array([np.linalg.norm(res(V)) / scale for V in cands])
    order = [0] if initial is not None else []
    order += [i for i in np.argsort(vals, kind="stable") if i not in order]
    for i in order[:starts]:
        V, r = _local_solve(res, _completion(cands[i]), k, d, scale)
        if consider(V, r):
            return geo.OrthoFrame(best_V)
        if not polish:
            continue
        V, r = _polish(res, V, k, d, scale)
        if consider(V, r):
            return geo.OrthoFrame(best_V)
        if r < 1e-3 and consider(*_local_solve(res, _completion(V), k, d, scale)):
            return geo.OrthoFrame(best_V)
        if good_enough is not None and best_r <= good_enough:
            return geo.OrthoFrame(best_V)
    raise NoConvergence(f"frame residual {best_r:.3e} above {tol:.1e}", best_r,
                        None if best_V is None else geo.OrthoFrame(best_V))


# ---------------------------------------------------------------- point constructions


def _sub(mu: Measure, cap: int | None, seed: int = 0) -> Measure:
    if cap is None or mu.n <= cap:
        return mu
    return sandwich._subsample(mu, cap, seed)


def _w(mu):
    return None if mu.uniform_weights else mu.weights


def _cp_coords(mu, V):
    """Centerpoint of the projection of ``mu`` onto ``span(V)``, in ``V`` coordinates."""
    return sandwich._centerpoint_xy(mu.points @ V.T, _w(mu))


def _yao_coords(mu, V):
    """Yao-Yao center of the projection onto ``span(V)`` in the reversed basis, in ``V`` coordinates."""
    U = V[::-1]
    c, _ = center_and_vector_coords(mu.points @ U.T, _w(mu))
    return c[::-1]


_FULL_CP: dict = {}


def _full_centerpoint(mu):
    """Centerpoint in the whole space; it does not depend on the frame, so compute it once."""
    key = id(mu)
    hit = _FULL_CP.get(key)
    if hit is None or hit[0] is not mu:
        if len(_FULL_CP) > 64:
            _FULL_CP.clear()
        hit = (mu, sandwich.centerpoint(mu))
        _FULL_CP[key] = hit
    return hit[1]


def _flag_points(V, measures, lam, p1=None):
    """Coordinates (in ``v_1..v_k``) of ``p_1..p_d``; missing coordinates are zero."""
    k, d = V.shape
    pts = []
    for m in range(1, d + 1):
        dim = k if m <= lam + 1 else d - m + 1
        if m == 1 and p1 is not None:
            c = p1(measures[0], V)
        elif dim == d:
            c = V @ _full_centerpoint(measures[m - 1])
        else:
            c = _cp_coords(measures[m - 1], V[:dim])
        full = np.zeros(k)
        full[:dim] = c
        pts.append(full)
    return pts


def _flag_blocks(pts, k, d):
    return np.concatenate([[pts[m - 1][j] - pts[0][j] for m in range(2, d + 2 - (j + 1))]
                           for j in range(k)]) if k else np.zeros(0)


def flag_residual(measures, lam: int, p1=None) -> EquivariantResidual:
    d = measures[0].dim
    k = d - lam
    scale = max(m.diameter for m in measures) or 1.0

    def f(V):
        return _flag_blocks(_flag_points(V, measures, lam, p1), k, d)

    return EquivariantResidual(f, k, d, scale)


# ---------------------------------------------------------------- results


@dataclass
class TransversalResult:
    frame: geo.OrthoFrame
    subspaces: list  # L_lambda ... L_{d-1}
    depths: dict = field(default_factory=dict)
    residual: float = 0.0
    lam: int = 0
    base_point: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def nested(self, tol: float = 1e-9) -> bool:
        return _check_nesting(self.subspaces, tol)


def subspace_depth(mu: Measure, L: geo.Subspace, samples: int = 10_000, seed: int = 0) -> float:
    """Minimum mass fraction over sampled closed halfspaces whose boundary contains ``L``."""
    d = mu.dim
    dirs = L.directions.vectors if L.dim else np.zeros((0, d))
    if len(dirs) >= d:
        raise BadSpec("L must be a proper subspace")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDE9]))
    N = rng.standard_normal((samples, d))
    if len(dirs):
        N -= (N @ dirs.T) @ dirs
    N /= np.linalg.norm(N, axis=1)[:, None]
    N = np.vstack([N, -N])
    X = mu.points - L.base_point
    w = mu.weights / mu.total_mass
    return min(float(np.min(w @ (X @ N[i:i + 1024].T >= 0))) for i in range(0, len(N), 1024))


def _subspace(base, dirs, d):
    dirs = np.asarray(dirs, dtype=float).reshape(-1, d)
    return geo.Subspace(np.asarray(base, dtype=float), geo.OrthoFrame(dirs))


def _nested_subspaces(V, p1_coords, lam, d):
    k = V.shape[0]
    W = _completion(V)[:, k:].T  # complement directions (lam of them)
    base = p1_coords @ V
    out = []
    for i in range(lam, d):
        extra = V[d - i:k][::-1]  # v_k, ..., v_{d-i+1}
        out.append(_subspace(base, np.vstack([W, extra]) if len(W) or len(extra) else np.zeros((0, d)), d))
    return out


def _check_nesting(subspaces, tol=1e-9) -> bool:
    return all(b.contains_subspace(a, tol) for a, b in zip(subspaces, subspaces[1:]))


def _solve_flag(measures, lam, p1=None, seed=0, cap=SOLVER_SUBSAMPLE, homotopy=False):
    """Two-phase solve: subsampled measures first, then a polish on the full data."""
    subs = [_sub(m, cap, seed + i) for i, m in enumerate(measures)]
    res_sub = flag_residual(subs, lam, p1)
    try:
        enough = 0.1 * min(TOL.mass_tol(m.n) for m in measures)
        V0 = stiefel_solve(res_sub, seed=seed, tol=1e-9, homotopy=homotopy,
                           good_enough=enough).vectors
    except NoConvergence as exc:
        if exc.best is None:
            raise
        V0 = exc.best.vectors
    res = flag_residual(measures, lam, p1)
    if all(s is m for s, m in zip(subs, measures)):
        V = V0
    else:
        try:
            V = stiefel_solve(res, seed=seed, tol=1e-9, initial=V0, starts=2,
                              polish=False).vectors
        except NoConvergence as exc:
            V = exc.best.vectors if exc.best is not None else V0
    r = float(np.linalg.norm(res(V))) / res.scale
    # centers of finite clouds move in jumps, so an exact zero need not exist;
    # anything within the mass tolerance is left for the depth audit to judge
    accept = min(TOL.mass_tol(m.n) for m in measures)
    if r > accept:
        raise NoConvergence(f"flag residual {r:.3e}", r, geo.OrthoFrame(V))
    if r > 1e-6:
        log.warning("flag residual %.3e: no exact zero on the sample", r)
    return V, r


def transversal_flag(measures, lam: int, samples: int = 10_000, seed: int = 0,
                     homotopy: bool = False) -> TransversalResult:
    """Nested ``L_lam ⊂ ... ⊂ L_{d-1}`` with ``L_lam`` central to ``mu_1..mu_{lam+1}``
    and each ``L_i`` central to ``mu_{i+1}``."""
    measures = list(measures)
    d = measures[0].dim
    if len(measures) != d:
        raise BadSpec("a flag needs exactly d measures")
    if not 0 <= lam <= d - 1:
        raise BadSpec("need 0 <= lambda <= d-1")
    if lam == d - 1:
        H = sandwich.ham_sandwich(measures)
        V = H.normal[None, :]
        p1 = np.array([H.offset])
        r = 0.0
    else:
        V, r = _solve_flag(measures, lam, seed=seed, homotopy=homotopy)
        p1 = _flag_points(V, measures, lam)[0]
    subspaces = _nested_subspaces(V, p1, lam, d)
    depths = {}
    for m in range(1, lam + 2):
        depths[f"L{lam}/mu{m}"] = subspace_depth(measures[m - 1], subspaces[0], samples, seed)
    for i in range(lam + 1, d):
        depths[f"L{i}/mu{i + 1}"] = subspace_depth(measures[i], subspaces[i - lam], samples, seed)
    return TransversalResult(geo.OrthoFrame(V), subspaces, depths, r, lam, p1 @ V,
                             {"nested": _check_nesting(subspaces)})


def depth_target(d: int, i: int) -> float:
    return 1.0 / (d - i + 1)


def central_transversal(measures, k: int, samples: int = 10_000, seed: int = 0) -> geo.Subspace:
    """Affine ``k``-subspace that is central for each of the ``k+1`` measures."""
    measures = list(measures)
    d = measures[0].dim
    if len(measures) != k + 1:
        raise BadSpec("central k-transversal takes k+1 measures")
    if not 0 <= k <= d - 1:
        raise BadSpec("need 0 <= k <= d-1")
    if k == 0:
        return _subspace(sandwich.centerpoint(measures[0]), np.zeros((0, d)), d)
    padded = measures + [measures[0]] * (d - k - 1)
    return transversal_flag(padded, k, samples, seed).subspaces[0]


# ---------------------------------------------------------------- Yao-Yao flavoured variants


def _quadrant_masses(mu, H1, H2):
    s1 = mu.points @ H1.normal < H1.offset
    s2 = mu.points @ H2.normal < H2.offset
    w = mu.weights / mu.total_mass
    return np.array([w[s1 & s2].sum(), w[s1 & ~s2].sum(), w[~s1 & s2].sum(), w[~s1 & ~s2].sum()])


def _two_planes_from(V, mu1):
    """The two Yao-Yao lines of the projection onto ``span(v_1, v_2)`` (basis ``(v_2, v_1)``), lifted."""
    U = V[:2][::-1]
    c, g = center_and_vector_coords(mu1.points @ U.T, _w(mu1))
    base = c @ U
    v1, v2 = V[0], V[1]
    H1 = geo.Hyperplane(v1, float(v1 @ base))
    n2 = v2 - g[0] * v1
    n2 = n2 / np.linalg.norm(n2)
    H2 = geo.Hyperplane(n2, float(n2 @ base))
    return H1, H2, base


def two_hyperplanes(measures, samples: int = 10_000, seed: int = 0, full: bool = False):
    """Two hyperplanes quartering ``mu_1`` whose intersection is central for ``mu_2..mu_{d-1}``
    and where the first one halves ``mu_d``."""
    measures = list(measures)
    d = measures[0].dim
    if d not in (2, 3) or len(measures) != d:
        raise BadSpec("two_hyperplanes needs d measures with d in {2, 3}")
    V, r = _solve_flag(measures, d - 2, p1=_yao_coords, seed=seed)
    H1, H2, base = _two_planes_from(V, measures[0])
    if not full:
        return H1, H2
    subspaces = _nested_subspaces(V, _yao_coords(measures[0], V[:2]), d - 2, d)
    quad = _quadrant_masses(measures[0], H1, H2)
    depths = {f"L{d - 2}/mu{m}": subspace_depth(measures[m - 1], subspaces[0], samples, seed)
              for m in range(2, d)}
    depths[f"H1/mu{d}"] = subspace_depth(measures[d - 1], subspaces[-1], samples, seed)
    res = TransversalResult(geo.OrthoFrame(V), subspaces, depths, r, d - 2, base,
                            {"quadrants": quad, "nested": _check_nesting(subspaces)})
    return H1, H2, res


def yao_transversal(measures, samples: int = 10_000, seed: int = 0):
    """Basis whose Yao-Yao partition of ``mu_1`` has skeleton flats central to ``mu_2..mu_d``.

    Returns ``(basis, partition, subspaces)`` with ``subspaces[i-1] = L_i``.
    """
    measures = list(measures)
    d = measures[0].dim
    if d not in (2, 3) or len(measures) != d:
        raise BadSpec("yao_transversal needs d measures with d in {2, 3}")
    V, r = _solve_flag(measures, 0, p1=_yao_coords, seed=seed)
    basis = geo.OrthoFrame(V[::-1])
    part = yao_partition(measures[0], basis)
    center = part.centers[0]
    U = basis.vectors
    subspaces = [_subspace(center, U[:i], d) for i in range(1, d)]
    part.info["transversal_residual"] = r
    part.info["depths"] = {f"L{i}/mu{i + 1}": subspace_depth(measures[i], subspaces[i - 1], samples, seed)
                           for i in range(1, d)}
    return basis, part, subspaces


def separated_two_planes(mu1: Measure, mu2: Measure, seed: int = 0, full: bool = False):
    """Two planes quartering ``mu1`` whose common line is central for ``mu2``.

    The supports must be separable by a plane ``H``.  We look for a direction
    ``v`` such that, after projecting both measures onto ``H`` along ``v``,
    the planar Yao-Yao center of ``mu1`` equals the centerpoint of ``mu2``.
    The two Yao-Yao lines are then extended along ``v``.
    """
    if mu1.dim != 3 or mu2.dim != 3:
        raise BadSpec("separated_two_planes works in R^3")
    H, margin = sandwich.separating_hyperplane(mu1.points, mu2.points)
    if H is None or not margin > 0:
        raise NotWellSeparated("supports are not separated by a plane")
    n = H.normal
    E = geo.OrthoFrame(n[None, :]).complete().vectors[1:]  # basis of H's direction space
    scale = max(mu1.diameter, mu2.diameter) or 1.0

    def project(mu, v):
        # coordinates in H of the projection along v
        t = (mu.points @ n - H.offset) / (v @ n)
        P = mu.points - t[:, None] * v
        return P @ E.T

    def resid(ab, m1, m2):
        v = n + ab @ E
        c1, _ = center_and_vector_coords(project(m1, v), _w(m1))
        c2 = sandwich._centerpoint_xy(project(m2, v), _w(m2))
        return (c1 - c2) / scale

    best = (np.inf, None)
    s1, s2 = _sub(mu1, SOLVER_SUBSAMPLE, seed), _sub(mu2, SOLVER_SUBSAMPLE, seed + 1)
    c1 = sandwich.centerpoint(s1)
    c2 = sandwich.centerpoint(s2)
    gap = c2 - c1
    a0 = (gap @ E.T) / (gap @ n) if abs(gap @ n) > 1e-12 else np.zeros(2)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EB]))
    starts = [a0, np.zeros(2)] + [a0 + rng.standard_normal(2) for _ in range(MULTISTARTS)]
    for x0 in starts:
        sol = least_squares(resid, x0, args=(s1, s2), method="trf", diff_step=1e-7, max_nfev=300)
        x = sol.x
        if s1 is not mu1 or s2 is not mu2:
            sol = least_squares(resid, x, args=(mu1, mu2), method="trf", diff_step=1e-7, max_nfev=200)
            x = sol.x
        r = float(np.linalg.norm(resid(x, mu1, mu2)))
        if r < best[0]:
            best = (r, x)
        if r < 1e-9:
            break
    r, ab = best
    if r > 1e-6:
        raise NoConvergence(f"separated-planes residual {r:.3e}", r, ab)
    v = n + ab @ E
    v_unit = v / np.linalg.norm(v)
    Z = project(mu1, v)
    c, g = center_and_vector_coords(Z, _w(mu1))
    # Yao lines in H coordinates (e_1, e_2): one parallel to e_1, one along e_2 + g e_1
    base = H.offset * n + c @ E
    lines = [E[0], E[1] + g[0] * E[0]]
    planes = []
    for ell in lines:
        nrm = np.cross(ell, v_unit)
        nrm /= np.linalg.norm(nrm)
        planes.append(geo.Hyperplane(nrm, float(nrm @ base)))
    H1, H2 = planes
    if not full:
        return H1, H2
    line = _subspace(base, v_unit[None, :], 3)
    info = {"direction": v_unit, "residual": r, "separator": H,
            "quadrants": _quadrant_masses(mu1, H1, H2), "line": line,
            "depth": subspace_depth(mu2, line, 10_000, seed)}
    return H1, H2, info
