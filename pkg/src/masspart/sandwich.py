"""Single-cut solvers: ham sandwich, prescribed-fraction cuts, centerpoints, six-sector fans.

Every cut solver uses the same reduction.  For a unit normal ``n`` the
offset is pinned by the first measure (its prescribed quantile along ``n``),
so only the remaining measures contribute residuals.  In the plane that
leaves one scalar residual on a circle, which we scan and bisect.  In space
it leaves two residuals on the sphere.  There we run least squares on a
sigmoid-smoothed version with shrinking bandwidth, then check the exact
counts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError
from scipy.special import expit

from . import geometry as geo
from .config import MULTISTARTS, TOL
from .errors import BadSpec, NoConvergence, NotWellSeparated
from .measure import Measure, quantile_1d

log = logging.getLogger(__name__)


@dataclass
class CutRequest:
    measures: list
    fractions: list

    def __post_init__(self):
        if len(self.measures) != len(self.fractions):
            raise BadSpec("one fraction per measure is required")
        if not self.measures:
            raise BadSpec("at least one measure is required")
        dims = {m.dim for m in self.measures}
        if len(dims) != 1:
            raise BadSpec("measures live in different dimensions")
        if len(self.measures) > self.dim:
            raise BadSpec("a single cut handles at most d measures")
        for f in self.fractions:
            if not 0 < f < 1:
                raise BadSpec("fractions must lie in (0, 1)")

    @property
    def dim(self) -> int:
        return self.measures[0].dim


# ---------------------------------------------------------------- helpers


def _wts(mu: Measure):
    return None if mu.uniform_weights else mu.weights


def _frac_below(mu: Measure, normal, offset) -> float:
    below = mu.points @ normal < offset
    if mu.uniform_weights:
        return float(below.mean())
    return float(mu.weights[below].sum() / mu.total_mass)


def _smooth_frac_below(mu: Measure, normal, offset, sigma) -> float:
    s = expit((offset - mu.points @ normal) / sigma)
    if mu.uniform_weights:
        return float(s.mean())
    return float(s @ mu.weights / mu.total_mass)


def fibonacci_sphere(n: int) -> np.ndarray:
    """Roughly uniform unit vectors on the 2-sphere."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _circle(theta) -> np.ndarray:
    return np.array([np.cos(theta), np.sin(theta)])


def _subsample(mu: Measure, cap: int, seed: int = 0) -> Measure:
    if mu.n <= cap:
        return mu
    rng = np.random.default_rng(np.random.SeedSequence([seed, mu.n, 0x5A5]))
    idx = np.sort(rng.choice(mu.n, cap, replace=False))
    return Measure(mu.points[idx], mu.weights[idx], mu.seed, mu.jitter_applied)


def _accept_tol(measures) -> float:
    return min(TOL.mass_tol(m.n) for m in measures)


class _CutProblem:
    """Offset pinned by the first measure, residuals from the rest."""

    def __init__(self, measures, fractions):
        self.measures = list(measures)
        self.fractions = np.asarray(fractions, dtype=float)

    def offset(self, n) -> float:
        m0 = self.measures[0]
        return quantile_1d(m0.points @ n, _wts(m0), self.fractions[0])

    def residual(self, n) -> np.ndarray:
        c = self.offset(n)
        return np.array([_frac_below(m, n, c) - f
                         for m, f in zip(self.measures[1:], self.fractions[1:])])

    def smooth_residual(self, n, sigma) -> np.ndarray:
        c = self.offset(n)
        return np.array([_smooth_frac_below(m, n, c, sigma) - f
                         for m, f in zip(self.measures[1:], self.fractions[1:])])

    def full_error(self, n) -> float:
        c = self.offset(n)
        return max(abs(_frac_below(m, n, c) - f) for m, f in zip(self.measures, self.fractions))

    def hyperplane(self, n) -> geo.Hyperplane:
        return geo.Hyperplane(n, self.offset(n))

    def scale(self) -> float:
        pts = np.vstack([m.points for m in self.measures])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        return float(np.linalg.norm(hi - lo)) or 1.0


def _solve_circle(prob: _CutProblem, span: float, n_scan: int) -> np.ndarray:
    """Sign change of the scalar residual over angles in ``[0, span]``, refined by bisection."""
    thetas = np.linspace(0.0, span, n_scan + 1)
    r = np.array([prob.residual(_circle(t))[0] for t in thetas])
    best = int(np.argmin(np.abs(r)))
    if r[best] == 0.0:
        return _circle(thetas[best])
    sgn = np.sign(r)
    changes = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    if len(changes) == 0:
        return _circle(thetas[best])
    # the crossing nearest the best grid value; ties go to the lowest angle
    j = changes[np.argmin(np.minimum(np.abs(r[changes]), np.abs(r[changes + 1])))]
    a, b, ra = thetas[j], thetas[j + 1], r[j]
    rb = r[j + 1]
    for _ in range(60):
        m = 0.5 * (a + b)
        rm = prob.residual(_circle(m))[0]
        if rm == 0.0:
            return _circle(m)
        if np.sign(rm) == np.sign(ra):
            a, ra = m, rm
        else:
            b, rb = m, rm
        if b - a < 1e-15:
            break
    return _circle(a if abs(ra) <= abs(rb) else b)


def _chart(n0):
    """Orthonormal tangent basis at ``n0`` on the sphere."""
    q, _ = np.linalg.qr(np.column_stack([n0, np.eye(len(n0))]))
    return q[:, 1:len(n0)]


def _solve_sphere(prob: _CutProblem, candidates, target: float) -> np.ndarray:
    """Smoothed least squares on the sphere from the best coarse-grid starts."""
    scale = prob.scale()
    errs = np.array([np.max(np.abs(prob.residual(n))) for n in candidates])
    order = np.argsort(errs, kind="stable")
    best_n, best_err = candidates[order[0]], errs[order[0]]
    if best_err <= target:
        return best_n
    for s in order[:MULTISTARTS]:
        n0 = candidates[s]
        for sigma in scale * np.array([3e-2, 1e-2, 3e-3, 1e-3, 3e-4]):
            B = _chart(n0)

            def fun(p, n0=n0, B=B, sigma=sigma):
                v = n0 + B @ p
                return prob.smooth_residual(v / np.linalg.norm(v), sigma)

            sol = least_squares(fun, np.zeros(B.shape[1]), method="trf",
                                diff_step=1e-6, xtol=1e-12, ftol=1e-12, max_nfev=200)
            v = n0 + B @ sol.x
            n0 = v / np.linalg.norm(v)
            err = float(np.max(np.abs(prob.residual(n0))))
            if err < best_err:
                best_n, best_err = n0, err
            if err <= target:
                return n0
    return best_n


def _solve_cut(measures, fractions, *, symmetric: bool) -> geo.Hyperplane:
    d = measures[0].dim
    prob = _CutProblem(measures, fractions)
    accept = _accept_tol(measures)
    target = 0.25 * accept
    if d == 1 or len(measures) == 1:
        n = np.zeros(d)
        n[-1] = 1.0
    elif d == 2:
        n = _solve_circle(prob, np.pi if symmetric else 2 * np.pi, 256 if symmetric else 512)
    elif d == 3:
        grid = fibonacci_sphere(600)
        if symmetric:
            grid = grid[grid[:, 2] >= 0]
        n = _solve_sphere(prob, grid, target)
    else:
        raise BadSpec("cuts are implemented for d <= 3")
    err = prob.full_error(n)
    if err > accept:
        raise NoConvergence(f"cut residual {err:.3e} above {accept:.3e}", err, prob.hyperplane(n))
    return prob.hyperplane(n)


# ---------------------------------------------------------------- public API


def ham_sandwich(measures) -> geo.Hyperplane:
    """Hyperplane halving each of ``d`` measures in ``R^d`` (d <= 3)."""
    measures = list(measures)
    req = CutRequest(measures, [0.5] * len(measures))
    if len(measures) != req.dim:
        raise BadSpec("ham sandwich needs exactly d measures")
    return _solve_cut(measures, req.fractions, symmetric=True)


def bhj_cut(req: CutRequest, check: bool = True) -> geo.Halfspace:
    """Halfspace holding the prescribed fraction of each well-separated measure."""
    if check and len(req.measures) > 1 and not is_well_separated(req.measures):
        raise NotWellSeparated("supports are not well separated")
    symmetric = all(f == 0.5 for f in req.fractions)
    H = _solve_cut(req.measures, req.fractions, symmetric=symmetric)
    return H.below()


def _hull_points(X: np.ndarray) -> np.ndarray:
    if X.shape[1] == 1:
        return np.array([[X.min()], [X.max()]])
    if len(X) <= X.shape[1] + 1:
        return X
    try:
        return X[ConvexHull(X).vertices]
    except QhullError:
        return X


def separating_hyperplane(P, Q):
    """Separating hyperplane from an LP over ``||normal||_inf <= 1``.

    The LP maximises the slack ``delta <= 1`` so the margin is a
    certificate of strict separation, not the largest possible gap.
    Returns ``(hyperplane, margin)``: ``P`` lies below, ``Q`` above.  A
    non-positive margin means the hulls touch or overlap.
    """
    P = _hull_points(np.asarray(P, dtype=float))
    Q = _hull_points(np.asarray(Q, dtype=float))
    d = P.shape[1]
    # variables (n, c, delta): n.p - c + delta <= 0, -n.q + c + delta <= 0
    A = np.vstack([np.hstack([P, -np.ones((len(P), 1)), np.ones((len(P), 1))]),
                   np.hstack([-Q, np.ones((len(Q), 1)), np.ones((len(Q), 1))])])
    b = np.zeros(len(A))
    cost = np.zeros(d + 2)
    cost[-1] = -1.0
    bounds = [(-1, 1)] * d + [(None, None), (None, 1.0)]
    res = linprog(cost, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        return None, -np.inf
    n, c, delta = res.x[:d], res.x[d], res.x[-1]
    if delta <= 0 or np.linalg.norm(n) == 0:
        return None, float(delta)
    return geo.Hyperplane(n, c), float(delta / np.linalg.norm(n))


def is_well_separated(supports, tol: float = 1e-12) -> bool:
    """Every bipartition of the supports can be split by a hyperplane."""
    supports = list(supports)
    m = len(supports)
    if m <= 1:
        return True
    for mask in range(1, 2 ** (m - 1)):
        left = [s.points for i, s in enumerate(supports) if mask >> i & 1]
        right = [s.points for i, s in enumerate(supports) if not mask >> i & 1]
        _, margin = separating_hyperplane(np.vstack(left), np.vstack(right))
        if not margin > tol:
            return False
    return True


# ---------------------------------------------------------------- centerpoints


def _sym_directions(m: int, per_orthant: int) -> np.ndarray:
    """Unit directions closed under flipping the sign of any coordinate."""
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        t = (np.arange(per_orthant) + 0.5) * (0.5 * np.pi / per_orthant)
        base = np.column_stack([np.cos(t), np.sin(t)])
    else:
        base = np.abs(fibonacci_sphere(8 * per_orthant))
        base = base[:per_orthant]
    out = []
    for signs in np.array(np.meshgrid(*[[1, -1]] * m)).T.reshape(-1, m):
        out.append(base * signs)
    return np.vstack(out)


def _upper_level(proj, w, tau):
    """Largest ``q`` per column with mass{proj >= q} >= tau * total."""
    n = proj.shape[0]
    if w is None:
        k = int(np.ceil(tau * n - 1e-9))
        k = min(max(k, 1), n)
        return -np.partition(-proj, k - 1, axis=0)[k - 1]
    order = np.argsort(-proj, axis=0, kind="stable")
    cw = np.cumsum(w[order], axis=0)
    idx = np.argmax(cw >= tau * w.sum() * (1 - 1e-12), axis=0)
    return proj[order[idx, np.arange(proj.shape[1])], np.arange(proj.shape[1])]


def centerpoint_region(X, w=None, tau=None, per_orthant: int | None = None):
    """Polytope ``{x : every sampled closed halfspace at x has mass >= tau}``.

    Returned as ``(normals, offsets)`` with rows ``<u, x> <= Q_u``.
    """
    X = np.asarray(X, dtype=float)
    m = X.shape[1]
    if tau is None:
        tau = 1.0 / (m + 1)
    if per_orthant is None:
        per_orthant = {1: 1, 2: 24, 3: 48}.get(m, 48)
    U = _sym_directions(m, per_orthant)
    Q = _upper_level(X @ U.T, w, tau)
    return U, Q


def _polytope_centroid(U, Q, interior):
    m = U.shape[1]
    hs = HalfspaceIntersection(np.hstack([U, -Q[:, None]]), interior)
    V = hs.intersections
    hull = ConvexHull(V)
    if m == 2:
        P = V[hull.vertices]
        x, y = P[:, 0], P[:, 1]
        x1, y1 = np.roll(x, -1), np.roll(y, -1)
        cr = x * y1 - x1 * y
        A = cr.sum() / 2
        return np.array([((x + x1) * cr).sum(), ((y + y1) * cr).sum()]) / (6 * A)
    ref = V.mean(axis=0)
    tot, acc = 0.0, np.zeros(m)
    for s in hull.simplices:
        T = V[s]
        vol = abs(np.linalg.det(T - ref)) / 6.0
        tot += vol
        acc += vol * (T.sum(axis=0) + ref) / 4.0
    return acc / tot


def _centerpoint_xy(X, w=None, tau=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    m = X.shape[1]
    if m == 0:
        return np.zeros(0)
    U, Q = centerpoint_region(X, w, tau)
    if m == 1:
        return np.array([0.5 * (Q[0] - Q[1])])
    lo, hi = X.min(axis=0), X.max(axis=0)
    region = geo.Region(U, Q)
    x, r = geo.chebyshev_center(region, lo - 1, hi + 1)
    spread = float(np.max(hi - lo)) or 1.0
    if r > 1e-9 * spread:
        try:
            return _polytope_centroid(U, Q, x)
        except (QhullError, ValueError, ZeroDivisionError):
            pass
    return x


def centerpoint(mu: Measure, tau: float | None = None) -> np.ndarray:
    """Barycenter of the depth-``1/(m+1)`` region of ``mu`` (sampled directions)."""
    return _centerpoint_xy(mu.points, _wts(mu), tau)


def halfspace_depth(mu: Measure, x, samples: int = 5000, seed: int = 0) -> float:
    """Minimum mass fraction of sampled closed halfspaces with ``x`` on their boundary."""
    x = np.asarray(x, dtype=float)
    m = mu.dim
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDE97]))
    U = rng.standard_normal((samples, m))
    U /= np.linalg.norm(U, axis=1)[:, None]
    X = mu.points - x
    w = mu.weights / mu.total_mass
    return min(float(np.min(w @ (X @ U[i:i + 1024].T >= 0))) for i in range(0, len(U), 1024))


# ---------------------------------------------------------------- six sectors


def _angular_residual(P, w, c, theta0):
    ang = np.mod(np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0]) - theta0, 2 * np.pi)
    order = np.argsort(ang, kind="stable")
    a = ang[order]
    cw = np.cumsum(w[order])
    knots_f = np.concatenate([[0.0], cw - 0.5 * w[order], [1.0]])
    knots_a = np.concatenate([[0.0], a, [2 * np.pi]])

    def G(psi):
        return np.interp(psi, knots_a, knots_f)

    def Qf(f):
        return np.interp(f, knots_f, knots_a)

    r1, r2 = Qf(1 / 6), Qf(2 / 6)
    return np.array([G(np.pi) - 0.5, G(r1 + np.pi) - 4 / 6, G(r2 + np.pi) - 5 / 6]), (r1, r2)


def sector_masses(P, w, center, angles) -> np.ndarray:
    """Masses of the six sectors cut by three concurrent lines at ``angles``."""
    rays = np.sort(np.mod(np.concatenate([angles, np.asarray(angles) + np.pi]), 2 * np.pi))
    ang = np.mod(np.arctan2(P[:, 1] - center[1], P[:, 0] - center[0]), 2 * np.pi)
    idx = np.searchsorted(rays, ang, side="right") % 6
    return np.bincount(idx, weights=w, minlength=6)[np.r_[1:6, 0]]


def buck_buck_six(mu: Measure, seed: int = 0):
    """Center and three line angles splitting a planar measure into six equal sectors."""
    if mu.dim != 2:
        raise BadSpec("six-sector fans are planar")
    sub = _subsample(mu, 4000, seed)
    P, w = sub.points, sub.weights / sub.total_mass
    Pf, wf = mu.points, mu.weights / mu.total_mass
    accept = TOL.mass_tol(mu.n)
    scale = mu.diameter or 1.0
    c0 = centerpoint(sub)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB6]))
    starts = [(c0, t) for t in np.arange(6) * np.pi / 6]
    starts += [(c0 + 0.05 * scale * rng.standard_normal(2), rng.uniform(0, np.pi))
               for _ in range(MULTISTARTS)]
    best = (np.inf, None, None)
    for c, t in starts:
        for pts, wts in ((P, w), (Pf, wf)):

            def fun(z, pts=pts, wts=wts):
                return _angular_residual(pts, wts, z[:2], z[2])[0] / np.array([1, 1, 1])

            sol = least_squares(fun, np.array([c[0], c[1], t]), method="trf",
                                x_scale=np.array([scale, scale, 1.0]), diff_step=1e-4,
                                max_nfev=300)
            c, t = sol.x[:2], sol.x[2]
        _, (r1, r2) = _angular_residual(Pf, wf, c, t)
        angles = np.mod(np.array([t, t + r1, t + r2]), np.pi)
        err = float(np.max(np.abs(sector_masses(Pf, wf, c, angles) - 1 / 6)))
        if err < best[0]:
            best = (err, c, angles)
        if err <= 0.25 * accept:
            break
    err, c, angles = best
    if err > accept:
        raise NoConvergence(f"six-sector residual {err:.3e} above {accept:.3e}", err, (c, angles))
    return np.asarray(c), np.sort(angles)
