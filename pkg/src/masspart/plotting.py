"""Figures: planar partitions as SVG and a summary plot for benchmark tables.

Output is byte-stable: the SVG hash salt and id are pinned, the date
metadata is dropped and text is emitted as paths.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import PolyCollection  # noqa: E402

from . import geometry as geo  # noqa: E402
from .complexity import ComplexityPartition  # noqa: E402
from .errors import BadSpec  # noqa: E402

STABLE_RC = {
    "svg.hashsalt": "masspart",
    "svg.id": "masspart",
    "svg.fonttype": "path",
    "path.simplify": False,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def viewport(mu=None, partition=None, inflate: float = 0.1):
    """Support bounding box inflated by ``inflate`` of its size on every side."""
    if mu is not None:
        return mu.bbox(inflate)
    pts = [c for c in partition.centers]
    pts += [c.witness for c in partition.cells if c.witness is not None]
    if not pts:
        return np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    return geo.bounding_box(np.array(pts), inflate + 0.5)


def _unwrap(p):
    return p.partition if isinstance(p, ComplexityPartition) else p


def cell_polygons(p, lo, hi) -> list:
    """Each cell clipped to the box ``[lo, hi]``; empty cells give empty arrays."""
    return [geo.clip_polygon(c, lo, hi) for c in _unwrap(p).cells]


def plot_partition(p, mu=None, ax=None, show_points: int = 2000):
    p = _unwrap(p)
    if p.dim != 2:
        raise BadSpec("only planar partitions can be drawn")
    lo, hi = viewport(mu, p)
    if ax is None:
        _, ax = plt.subplots(figsize=(5, 5))
    polys = [q for q in cell_polygons(p, lo, hi) if len(q) >= 3]
    cmap = plt.get_cmap("tab20")
    colors = [cmap(i % 20) for i in range(len(polys))]
    ax.add_collection(PolyCollection(polys, facecolors=colors, edgecolors="k",
                                     linewidths=0.6, alpha=0.55))
    if mu is not None and show_points:
        # evenly strided subsample keeps the file small and deterministic
        step = max(1, mu.n // show_points)
        P = mu.points[::step]
        ax.plot(P[:, 0], P[:, 1], ",", color="0.2")
    if p.centers:
        C = np.array(p.centers)
        ax.plot(C[:, 0], C[:, 1], "o", color="crimson", ms=4)
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    ax.set_title(f"{p.kind}: {len(p.cells)} cells")
    return ax


def save_partition_svg(p, path, mu=None):
    with plt.rc_context(STABLE_RC):
        fig, ax = plt.subplots(figsize=(5, 5))
        plot_partition(p, mu, ax)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def plot_bench(rows, path):
    """Audited value against the theorem bound, one marker style per construction."""
    with plt.rc_context(STABLE_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        groups = {}
        for r in rows:
            groups.setdefault(r["construction"], []).append(r)
        for name in sorted(groups):
            g = groups[name]
            x = [r["param"] for r in g]
            ax.plot(x, [r["value"] for r in g], "o", label=f"{name} measured")
            ax.plot(x, [r["bound"] for r in g], "k_", ms=10)
        ax.set_xlabel("n or t")
        ax.set_ylabel("k or min avoided")
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        fmt = "svg" if str(path).endswith(".svg") else None
        meta = {"Date": None} if fmt == "svg" else {"Software": None}
        fig.savefig(path, format=fmt, metadata=meta)
        plt.close(fig)
