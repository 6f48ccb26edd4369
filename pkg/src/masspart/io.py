"""Reading and writing partitions, measures and density specs.

Partitions are stored as H-representations so unbounded cells survive the
round trip.  Floats go through ``float.__repr__`` (what ``json`` uses), which
is exact for doubles, so ``load(save(p))`` reproduces every coefficient.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import geometry as geo
from .complexity import ComplexityPartition
from .errors import BadSpec, DegenerateInput, SchemaMismatch
from .measure import DensitySpec, Measure, generate, make_measure
from .yao import Partition

SCHEMA_KEYS = ("dim", "kind", "basis", "centers", "cuts", "cells", "manifest")


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _plain(obj):
    """Recursively convert numpy values to JSON-native ones."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, geo.Hyperplane):
        return {"normal": _floats(obj.normal), "offset": float(obj.offset)}
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    return repr(obj)


def _public_info(info: dict) -> dict:
    return _plain({k: v for k, v in info.items() if not k.startswith("_")})


# ---------------------------------------------------------------- partitions


def partition_to_dict(p, manifest: dict | None = None) -> dict:
    cp = None
    if isinstance(p, ComplexityPartition):
        cp, p = p, p.partition
    cells = []
    for c in p.cells:
        cells.append({
            "id": int(c.id),
            "halfspaces": [{"normal": _floats(a), "offset": float(b)}
                           for a, b in zip(c.normals, c.offsets)],
            "lineage": c.lineage.as_dict(),
            "witness": None if c.witness is None else _floats(c.witness),
        })
    man = dict(manifest or {})
    man["info"] = _public_info(p.info)
    if cp is not None:
        man["complexity"] = {"construction": cp.construction, "n": int(cp.n), "k": int(cp.k),
                             "extra": _plain(cp.extra)}
    return {
        "dim": int(p.dim),
        "kind": p.kind,
        "basis": _floats(p.basis.vectors),
        "centers": [_floats(c) for c in p.centers],
        "cuts": [{"normal": _floats(h.normal), "offset": float(h.offset)} for h in p.cuts],
        "cells": cells,
        "manifest": _plain(man),
    }


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def save_partition(p, path, manifest: dict | None = None) -> dict:
    data = partition_to_dict(p, manifest)
    Path(path).write_text(dumps(data))
    return data


def _raw_region(A, b, **kw) -> geo.Region:
    """Region with coefficients taken verbatim (no renormalisation)."""
    r = geo.Region(A, b, **kw)
    object.__setattr__(r, "normals", np.asarray(A, dtype=float).reshape(len(b), -1))
    object.__setattr__(r, "offsets", np.asarray(b, dtype=float))
    return r


def _raw_hyperplane(normal, offset) -> geo.Hyperplane:
    h = geo.Hyperplane(normal, offset)
    object.__setattr__(h, "normal", np.asarray(normal, dtype=float))
    object.__setattr__(h, "offset", float(offset))
    return h


def _need(cond, msg):
    if not cond:
        raise SchemaMismatch(msg)


def partition_from_dict(data: dict):
    """Inverse of :func:`partition_to_dict`; returns a ``ComplexityPartition`` when one was saved."""
    _need(isinstance(data, dict), "partition file must hold a JSON object")
    missing = [k for k in SCHEMA_KEYS if k not in data]
    _need(not missing, f"partition file lacks keys {missing}")
    try:
        d = int(data["dim"])
        basis = np.asarray(data["basis"], dtype=float)
        _need(basis.shape == (d, d), "basis must be d x d")
        centers = [np.asarray(c, dtype=float) for c in data["centers"]]
        _need(all(c.shape == (d,) for c in centers), "centers must have length d")
        cuts = [_raw_hyperplane(h["normal"], h["offset"]) for h in data["cuts"]]
        _need(all(h.normal.shape == (d,) for h in cuts), "cut normals must have length d")
        cells = []
        for c in data["cells"]:
            hs = c["halfspaces"]
            A = np.asarray([h["normal"] for h in hs], dtype=float).reshape(len(hs), d)
            b = np.asarray([h["offset"] for h in hs], dtype=float)
            lin = c.get("lineage") or {}
            lineage = geo.Lineage(int(lin.get("frame_index", -1)), str(lin.get("side", "none")),
                                  lin.get("center_index"))
            w = c.get("witness")
            w = None if w is None else np.asarray(w, dtype=float)
            _need(w is None or w.shape == (d,), "witness must have length d")
            cells.append(_raw_region(A, b, lineage=lineage, id=int(c["id"]), witness=w))
        man = data["manifest"]
        _need(isinstance(man, dict), "manifest must be an object")
    except SchemaMismatch:
        raise
    except (KeyError, TypeError, ValueError, DegenerateInput) as exc:
        raise SchemaMismatch(f"malformed partition file: {exc}") from None
    try:
        frame = geo.OrthoFrame(basis)
    except DegenerateInput:
        raise SchemaMismatch("basis is not orthonormal") from None
    info = dict(man.get("info", {}))
    part = Partition(cells, frame, centers, cuts, str(data["kind"]), info)
    comp = man.get("complexity")
    if comp:
        return ComplexityPartition(part, list(cuts), comp["construction"], int(comp["n"]),
                                   dict(comp.get("extra", {})))
    return part


def load_partition(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not JSON ({exc.msg})") from None
    return partition_from_dict(data)


# ---------------------------------------------------------------- measures


def measure_to_dict(mu: Measure) -> dict:
    return {"dim": mu.dim, "points": mu.points.tolist(), "weights": mu.weights.tolist(),
            "seed": int(mu.seed), "generic": True}


def save_measure(mu: Measure, path):
    Path(path).write_text(dumps(measure_to_dict(mu)))


def _measure_from_json(data: dict, seed: int) -> Measure:
    if "kind" in data and "points" not in data:
        spec = DensitySpec.from_dict(data)
        if "seed" not in data:
            spec.seed = seed
        return generate(spec)
    try:
        P = np.asarray(data["points"], dtype=float)
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaMismatch(f"measure JSON needs a 'points' array ({exc})") from None
    if P.ndim != 2:
        raise SchemaMismatch("points must be a list of equal-length coordinate lists")
    if "dim" in data and int(data["dim"]) != P.shape[1]:
        raise SchemaMismatch("declared dim disagrees with the points")
    w = data.get("weights")
    return make_measure(P, w, seed=int(data.get("seed", seed)), generic=bool(data.get("generic", False)))


def _measure_from_csv(path, seed: int, weight_column: bool | None) -> Measure:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                if rows:
                    raise SchemaMismatch(f"{path}: non-numeric row {row}") from None
                continue  # header line
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    if len({len(r) for r in rows}) != 1:
        raise SchemaMismatch(f"{path}: rows differ in length")
    M = np.asarray(rows)
    if weight_column:
        return make_measure(M[:, :-1], M[:, -1], seed=seed)
    return make_measure(M, None, seed=seed)


def load_measure(path, seed: int = 0, weight_column: bool | None = None) -> Measure:
    """Read a CSV point list or a JSON measure / density spec.

    CSV rows are points; with ``weight_column`` the last column holds weights.
    JSON is either ``{"dim", "points", "weights", "seed"}`` or a density spec
    with a ``kind`` key, which is sampled.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _measure_from_csv(path, seed, weight_column)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise SchemaMismatch(f"{path}: expected a JSON object")
    try:
        return _measure_from_json(data, seed)
    except BadSpec as exc:
        raise SchemaMismatch(f"{path}: {exc}") from None


def load_spec(path, seed: int | None = None) -> DensitySpec:
    try:
        data = json.loads(Path(path).read_text())
        spec = DensitySpec.from_dict(data)
    except (json.JSONDecodeError, BadSpec, AttributeError) as exc:
        raise SchemaMismatch(f"{path}: bad density spec ({exc})") from None
    if seed is not None:
        spec.seed = seed
    return spec
