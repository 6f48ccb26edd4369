"""Weighted point clouds standing in for absolutely continuous measures.

Every equality that holds for a continuous measure holds here only up to
the weight of a point or so.  To keep cuts from landing on data points,
ingested clouds get a deterministic seeded jitter of relative size 1e-9
unless the caller declares them generic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import geometry as geo
from .errors import BadSpec, EmptyMeasure

JITTER_SCALE = 1e-9


@dataclass(frozen=True, eq=False)
class Measure:
    points: np.ndarray
    weights: np.ndarray
    seed: int = 0
    jitter_applied: bool = False

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(w) != len(P):
            raise BadSpec("points and weights differ in length")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise BadSpec("weights must be positive and finite")
        if not np.all(np.isfinite(P)):
            raise BadSpec("points must be finite")
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return len(self.weights)

    def __len__(self):
        return self.n

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def uniform_weights(self) -> bool:
        return self.n > 0 and bool(np.all(self.weights == self.weights[0]))

    @property
    def diameter(self) -> float:
        if self.n == 0:
            return 0.0
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def bbox(self, inflate: float = 0.0):
        return geo.bounding_box(self.points, inflate)

    def subset(self, mask) -> "Measure":
        return Measure(self.points[mask], self.weights[mask], self.seed, self.jitter_applied)


def make_measure(points, weights=None, seed: int = 0, generic: bool = False) -> Measure:
    """Build a measure, jittering the points unless ``generic`` is set."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    w = np.ones(len(P)) if weights is None else np.asarray(weights, dtype=float)
    if len(P) == 0:
        raise EmptyMeasure("no points")
    if generic:
        return Measure(P, w, seed, False)
    return Measure(jitter(P, seed), w, seed, True)


def jitter(points, seed: int) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    lo, hi = P.min(axis=0), P.max(axis=0)
    diam = float(np.linalg.norm(hi - lo)) or 1.0
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6A17]))
    return P + JITTER_SCALE * diam * rng.uniform(-1.0, 1.0, size=P.shape)


def is_generic(mu: Measure, samples: int = 200, tol: float = 1e-14, seed: int = 0) -> bool:
    """Spot check that random (d+1)-subsets are affinely independent."""
    d = mu.dim
    if mu.n <= d:
        return True
    rng = np.random.default_rng(seed)
    scale = mu.diameter or 1.0
    for _ in range(samples):
        idx = rng.choice(mu.n, size=d + 1, replace=False)
        M = (mu.points[idx[1:]] - mu.points[idx[0]]) / scale
        if abs(np.linalg.det(M)) < tol:
            return False
    return True


# ---------------------------------------------------------------- 1-D core


def quantile_1d(values, weights, fraction: float) -> float:
    """Cut offset whose lower side carries ``fraction`` of the mass.

    Among all cut positions between consecutive sorted values, those whose
    lower mass is closest to ``fraction * total`` are feasible; the
    midpoint of their hull is returned.  ``weights=None`` means equal
    weights and uses a selection instead of a full sort.
    """
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n == 0:
        raise EmptyMeasure("quantile of an empty measure")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    if n == 1:
        return float(v[0])
    if weights is None:
        target = fraction * n
        j = np.arange(1, n)
        dev = np.abs(j - target)
    else:
        w = np.asarray(weights, dtype=float)
        order = np.argsort(v, kind="stable")
        v = v[order]
        cw = np.cumsum(w[order])[:-1]
        target = fraction * (cw[-1] + w[order][-1])
        j = np.arange(1, n)
        dev = np.abs(cw - target)
    best = dev.min()
    hit = j[dev <= best + 1e-12 * max(1.0, abs(target))]
    jlo, jhi = int(hit[0]), int(hit[-1])
    if weights is None:
        lo_val, hi_val = np.partition(v, [jlo - 1, jhi])[[jlo - 1, jhi]]
    else:
        lo_val, hi_val = v[jlo - 1], v[jhi]
    return 0.5 * (float(lo_val) + float(hi_val))


def median_1d(values, weights=None) -> float:
    return quantile_1d(values, weights, 0.5)


# ---------------------------------------------------------------- operations


def _w(mu: Measure):
    return None if mu.uniform_weights else mu.weights


def mass(mu: Measure, region: geo.Region) -> float:
    """Weight of the points strictly inside ``region``."""
    if len(region.offsets) == 0:
        return mu.total_mass
    inside = region.min_slack(mu.points) > 0
    return float(mu.weights[inside].sum())


def mass_below(mu: Measure, direction, offset: float) -> float:
    direction = np.asarray(direction, dtype=float)
    return float(mu.weights[mu.points @ direction < offset].sum())


def quantile(mu: Measure, direction, fraction: float) -> float:
    """Offset ``c`` such that ``{x : <direction, x> < c}`` holds ``fraction`` of the mass."""
    if mu.n == 0:
        raise EmptyMeasure("quantile of an empty measure")
    direction = np.asarray(direction, dtype=float)
    return quantile_1d(mu.points @ direction, _w(mu), fraction)


def project_measure(mu: Measure, *, oblique=None, onto: geo.OrthoFrame | None = None,
                    coords: bool = False) -> Measure:
    """Push ``mu`` forward under an oblique or orthogonal projection.

    ``oblique=(v, H)`` projects along ``v`` onto the hyperplane ``H``.
    ``onto=frame`` projects orthogonally onto the span of the frame; with
    ``coords=True`` the result is expressed in frame coordinates.
    """
    if (oblique is None) == (onto is None):
        raise ValueError("give exactly one of oblique= or onto=")
    if oblique is not None:
        v, H = oblique
        P = geo.oblique_project(v, H, mu.points)
    else:
        C = onto.coords(mu.points)
        P = C if coords else onto.from_coords(C)
    return Measure(P, mu.weights, mu.seed, mu.jitter_applied)


def restrict(mu: Measure, region: geo.Region) -> Measure:
    if len(region.offsets) == 0:
        return mu
    inside = region.min_slack(mu.points) > 0
    if not inside.any():
        raise EmptyMeasure("restriction is empty")
    return mu.subset(inside)


# ---------------------------------------------------------------- generators


KINDS = ("uniform_box", "gaussian", "annulus", "moment_curve", "mixture")


@dataclass
class DensitySpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    n_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadSpec(f"unknown density kind {self.kind!r}")
        if int(self.n_samples) < 1:
            raise BadSpec("n_samples must be >= 1")
        self.n_samples = int(self.n_samples)

    @classmethod
    def from_dict(cls, data: dict) -> "DensitySpec":
        data = dict(data)
        try:
            kind = data.pop("kind")
        except KeyError:
            raise BadSpec("density spec needs a 'kind'") from None
        n = data.pop("n_samples", data.pop("n", 1000))
        seed = data.pop("seed", 0)
        params = data.pop("params", {})
        params.update(data)
        return cls(kind, params, n, seed)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "n_samples": self.n_samples,
                "seed": self.seed}


def _dim(params: dict, *keys) -> int:
    if "dim" in params:
        return int(params["dim"])
    for k in keys:
        if k in params and np.ndim(params[k]) == 1:
            return len(params[k])
    raise BadSpec("cannot infer dimension; give 'dim'")


def _sample(kind: str, params: dict, n: int, rng) -> np.ndarray:
    if kind == "uniform_box":
        d = _dim(params, "low", "high")
        low = np.broadcast_to(np.asarray(params.get("low", 0.0), dtype=float), (d,))
        high = np.broadcast_to(np.asarray(params.get("high", 1.0), dtype=float), (d,))
        if np.any(high <= low):
            raise BadSpec("uniform_box needs high > low")
        return low + (high - low) * rng.random((n, d))
    if kind == "gaussian":
        d = _dim(params, "mean", "std")
        mean = np.broadcast_to(np.asarray(params.get("mean", 0.0), dtype=float), (d,))
        if "cov" in params:
            cov = np.asarray(params["cov"], dtype=float)
            if cov.shape != (d, d):
                raise BadSpec("cov has the wrong shape")
            return rng.multivariate_normal(mean, cov, size=n)
        std = np.broadcast_to(np.asarray(params.get("std", 1.0), dtype=float), (d,))
        if np.any(std <= 0):
            raise BadSpec("std must be positive")
        return mean + std * rng.standard_normal((n, d))
    if kind == "annulus":
        d = int(params.get("dim", 2))
        r0 = float(params.get("r_inner", 0.5))
        r1 = float(params.get("r_outer", 1.0))
        if not 0 <= r0 < r1:
            raise BadSpec("annulus needs 0 <= r_inner < r_outer")
        center = np.broadcast_to(np.asarray(params.get("center", 0.0), dtype=float), (d,))
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        u = rng.random(n)
        r = (r0 ** d + u * (r1 ** d - r0 ** d)) ** (1.0 / d)
        return center + g * r[:, None]
    if kind == "moment_curve":
        d = int(params.get("dim", 2))
        k = int(params.get("n_clusters", 5))
        eps = float(params.get("eps", 0.05))
        per = max(1, n // k)
        P, _ = geo.moment_curve_points(k, d, eps, seed=int(rng.integers(2**31)), per_cluster=per)
        return P
    if kind == "mixture":
        comps = params.get("components")
        if not comps:
            raise BadSpec("mixture needs components")
        wts = np.array([float(c.get("weight", 1.0)) for c in comps])
        if np.any(wts <= 0):
            raise BadSpec("mixture weights must be positive")
        counts = rng.multinomial(n, wts / wts.sum())
        parts = []
        for c, m in zip(comps, counts):
            c = dict(c)
            c.pop("weight", None)
            sub_kind = c.pop("kind", None)
            if sub_kind not in KINDS or sub_kind == "mixture":
                raise BadSpec(f"bad mixture component kind {sub_kind!r}")
            sub = dict(c.pop("params", {}))
            sub.update(c)
            if m:
                parts.append(_sample(sub_kind, sub, int(m), rng))
        dims = {p.shape[1] for p in parts}
        if len(dims) != 1:
            raise BadSpec("mixture components differ in dimension")
        return np.vstack(parts)
    raise BadSpec(f"unknown density kind {kind!r}")


def generate(spec: DensitySpec) -> Measure:
    """Sample ``spec`` deterministically and apply the generic-position jitter."""
    rng = np.random.default_rng(spec.seed)
    P = _sample(spec.kind, spec.params, spec.n_samples, rng)
    return make_measure(P, None, seed=spec.seed)


def uniform_box(n: int, dim: int, seed: int = 0, low=0.0, high=1.0) -> Measure:
    return generate(DensitySpec("uniform_box", {"dim": dim, "low": low, "high": high}, n, seed))


def gaussian(n: int, dim: int, seed: int = 0, mean=0.0, std=1.0) -> Measure:
    return generate(DensitySpec("gaussian", {"dim": dim, "mean": mean, "std": std}, n, seed))


def symmetrize(mu: Measure, center=None) -> Measure:
    """Union of ``mu`` with its reflection through ``center`` (centrally symmetric cloud)."""
    c = np.zeros(mu.dim) if center is None else np.asarray(center, dtype=float)
    P = np.vstack([mu.points, 2 * c - mu.points])
    return Measure(P, np.concatenate([mu.weights, mu.weights]), mu.seed, mu.jitter_applied)
