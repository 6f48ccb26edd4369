"""Numerical tolerances shared by every module."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    geom: float = 1e-9
    solver: float = 1e-7
    mass: float | None = None  # None: 2/sqrt(N) relative to total mass

    def mass_tol(self, n_points: int) -> float:
        if self.mass is not None:
            return self.mass
        return 2.0 / math.sqrt(max(n_points, 1))


TOL = Tolerances()

MAX_SOLVER_ITER = 200
MULTISTARTS = 16


def default_threads() -> int:
    env = os.environ.get("MASSPART_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1
