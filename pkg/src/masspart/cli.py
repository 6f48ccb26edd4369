"""Command line: build partitions, audit them, solve transversal problems, benchmark, export.

Exit codes: 0 success, 2 an audit failed, 3 a solver did not converge,
4 bad input.  Everything written to an output file is a pure function of
the flags and seeds.  Thread count and wall-clock time only go to the
optional ``--manifest`` side file.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import complexity as cx
from . import geometry as geo
from . import io
from . import transversal as tv
from . import verify as vf
from . import yao
from .config import TOL, default_threads
from .errors import (BadSpec, DegenerateInput, EmptyMeasure, InsufficientSupport,
                     MassPartError, NoConvergence, NotWellSeparated, ParallelProjection,
                     SchemaMismatch)
from .measure import DensitySpec, generate

log = logging.getLogger("masspart")

EXIT_OK, EXIT_AUDIT, EXIT_SOLVER, EXIT_INPUT = 0, 2, 3, 4

KINDS = ("yao", "alpha-beta", "multicenter", "d2x", "binary", "bhj2d", "multicenter2d",
         "buckbuck3d", "parallel3d")
CHECKS = ("equipartition", "coverage", "avoidance", "line-avoidance", "skeleton",
          "containment", "frame-invariance", "monotonicity")
TRANSVERSALS = ("ctt", "flag", "two-hyperplanes", "yao-transversal", "separated")


class InputError(MassPartError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers


def _int_list(text: str) -> list[int]:
    """``"2,3"``, ``"2..32"`` or a mix like ``"1..3,8"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    return out


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _versions() -> dict:
    return {"masspart": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


OUTPUT_FLAGS = ("out", "svg", "figure")


def _manifest(args) -> dict:
    """Reproducibility record embedded in every output.

    Destinations, thread count and timing are left out so that the same run
    writes the same bytes wherever it writes them; those go to ``--manifest``.
    """
    skip = {"func", "threads", "manifest", "log_level", "_embedded", *OUTPUT_FLAGS}
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    produced = [f for f in OUTPUT_FLAGS if getattr(args, f, None)] or ["stdout"]
    return {"command": args.command, "flags": io._plain(flags), "seed": args.seed,
            "versions": _versions(),
            "config": {"geom_tol": TOL.geom, "solver_tol": TOL.solver},
            "outputs": produced}


def _write_side_manifest(args, embedded: dict, started: float):
    if not getattr(args, "manifest", None):
        return
    full = dict(embedded)
    full["argv"] = sys.argv[1:]
    full["output_paths"] = {f: str(getattr(args, f)) for f in OUTPUT_FLAGS if getattr(args, f, None)}
    full["threads"] = args.threads
    full["wall_clock_seconds"] = round(time.time() - started, 3)
    full["finished_utc"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    Path(args.manifest).write_text(io.dumps(full))


def _emit(text: str, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_measure(args, path=None):
    path = path or getattr(args, "input", None)
    if path:
        return io.load_measure(path, seed=args.seed)
    if getattr(args, "spec", None):
        return generate(io.load_spec(args.spec, seed=args.seed))
    dim = getattr(args, "dim", None) or 2
    return generate(DensitySpec("gaussian", {"dim": dim}, args.points, args.seed))


def _basis(args, d):
    if getattr(args, "random_basis", False):
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0xBA5]))
        return geo.random_frame(d, d, rng)
    return geo.OrthoFrame.standard(d)


def _need(value, flag):
    if value is None:
        raise InputError(f"{flag} is required for this kind")
    return value


# ---------------------------------------------------------------- partition


def build_partition(kind, mu, args):
    d = mu.dim
    basis = _basis(args, d)
    if kind == "yao":
        return yao.yao_partition(mu, basis)
    if kind == "alpha-beta":
        return yao.alpha_beta_partition(mu, basis, _need(args.alpha, "--alpha"))[0]
    if kind == "multicenter":
        return yao.multicenter_partition(mu, basis, _need(args.t, "--t"))
    if kind == "d2x":
        return cx.d2x_partition(mu, _need(args.x, "--x"), basis)
    n = _need(args.n, "--n")
    if kind == "binary":
        return cx.low_complexity_partition(mu, n, basis)
    if kind in ("bhj2d", "multicenter2d"):
        return cx.partition_2d(mu, n, kind[:-2], basis)
    if kind in ("buckbuck3d", "parallel3d"):
        return cx.partition_3d(mu, n, kind[:-2], basis)
    raise InputError(f"unknown kind {kind!r}")


def cmd_partition(args) -> int:
    mu = _load_measure(args)
    if args.dim is not None and mu.dim != args.dim:
        raise InputError(f"measure has dimension {mu.dim}, --dim says {args.dim}")
    if args.svg and mu.dim != 2:
        raise InputError("--svg needs a planar measure")
    p = build_partition(args.kind, mu, args)
    man = _manifest(args)
    _emit(io.dumps(io.partition_to_dict(p, man)), args.out)
    if args.svg:
        from .plotting import save_partition_svg
        save_partition_svg(p, args.svg, mu)
    args._embedded = man
    return EXIT_OK


# ---------------------------------------------------------------- verify


def _run_check(name, p, mu, args):
    kind = p.kind
    is_ab = kind == "yao" or kind.startswith("alpha_beta") or kind.startswith("multicenter(")
    if name == "equipartition":
        return [vf.audit_equipartition(p, mu)]
    if name == "coverage":
        return [vf.audit_coverage(p, mu)]
    if name in ("avoidance", "line-avoidance"):
        t = "line" if name == "line-avoidance" else "hyperplane"
        if t == "hyperplane" and isinstance(p, cx.ComplexityPartition):
            raise InputError("check 'avoidance' is unsupported for complexity partitions; "
                             "use 'line-avoidance'")
        return [vf.audit_avoidance(p, mu, t, mode=args.mode, n_samples=args.samples,
                                   seed=args.seed, threads=args.threads)]
    if name == "skeleton":
        if not (kind == "yao" or kind.startswith("alpha_beta")):
            raise InputError(f"check 'skeleton' is unsupported for partition kind {kind!r}")
        return [vf.audit_skeleton(p, k, samples=min(args.samples, 200), seed=args.seed, mu=mu)
                for k in range(p.dim)]
    if name == "containment":
        if not isinstance(p, cx.ComplexityPartition):
            raise InputError(f"check 'containment' is unsupported for partition kind {kind!r}")
        return [cx.verify_containment(p, samples=min(args.samples, 2000), seed=args.seed, mu=mu)]
    if name == "frame-invariance":
        if not is_ab:
            raise InputError(f"check 'frame-invariance' is unsupported for partition kind {kind!r}")
        return [vf.audit_frame_invariance(mu, p.basis, args.alphas)]
    if name == "monotonicity":
        if not is_ab:
            raise InputError(f"check 'monotonicity' is unsupported for partition kind {kind!r}")
        a = args.alphas
        return [vf.audit_center_monotonicity(mu, p.basis, a[0], a[-1])]
    raise InputError(f"unknown check {name!r}")


def cmd_verify(args) -> int:
    p = io.load_partition(args.partition)
    mu = io.load_measure(args.measure, seed=args.seed)
    if mu.dim != p.dim:
        raise SchemaMismatch(f"partition is {p.dim}-D but the measure is {mu.dim}-D")
    if args.checks is None:
        args.checks = ("equipartition,coverage,line-avoidance,containment"
                       if isinstance(p, cx.ComplexityPartition) else "equipartition,coverage,avoidance")
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    bad = [c for c in checks if c not in CHECKS]
    if bad:
        raise InputError(f"unknown checks {bad}; choose from {', '.join(CHECKS)}")
    reports = []
    for c in checks:
        reports += _run_check(c, p, mu, args)
    ok = all(r.passed for r in reports)
    man = _manifest(args)
    out = {"pass": ok, "reports": [r.to_dict() for r in reports], "manifest": man}
    _emit(io.dumps(out), args.out)
    args._embedded = man
    return EXIT_OK if ok else EXIT_AUDIT


# ---------------------------------------------------------------- transversal


def _subspace_dict(L: geo.Subspace) -> dict:
    return {"base_point": L.base_point.tolist(), "directions": L.directions.vectors.tolist(),
            "dim": L.dim}


def _hyperplane_dict(H) -> dict:
    return {"normal": H.normal.tolist(), "offset": float(H.offset)}


def _depth_check(depths: dict, targets: dict, eps: float) -> tuple[bool, dict]:
    slack = {k: depths[k] - (targets[k] - (eps + 0.01)) for k in depths}
    return all(v >= 0 for v in slack.values()), slack


def run_transversal(kind, measures, args) -> dict:
    d = measures[0].dim
    eps = min(TOL.mass_tol(m.n) for m in measures)
    samples, seed = args.samples, args.seed
    if kind == "ctt":
        k = len(measures) - 1
        L = tv.central_transversal(measures, k, samples, seed)
        depths = {f"mu{i + 1}": tv.subspace_depth(m, L, samples, seed)
                  for i, m in enumerate(measures)} if k < d else {}
        targets = {key: tv.depth_target(d, k) for key in depths}
        ok, slack = _depth_check(depths, targets, eps)
        return {"k": k, "subspace": _subspace_dict(L), "depths": depths, "targets": targets,
                "slack": slack, "pass": ok}
    if kind == "flag":
        lam = _need(args.lam, "--lambda")
        R = tv.transversal_flag(measures, lam, samples, seed)
        targets = {key: tv.depth_target(d, int(key[1:key.index("/")])) for key in R.depths}
        ok, slack = _depth_check(R.depths, targets, eps)
        return {"lambda": lam, "frame": R.frame.vectors.tolist(), "residual": R.residual,
                "subspaces": [_subspace_dict(L) for L in R.subspaces], "depths": R.depths,
                "targets": targets, "slack": slack, "nested": R.nested(),
                "pass": bool(ok and R.nested())}
    if kind == "two-hyperplanes":
        H1, H2, R = tv.two_hyperplanes(measures, samples, seed, full=True)
        quad = np.asarray(R.extra["quadrants"], dtype=float)
        targets = {key: (1 / 3 if key.startswith("L") else 0.5) for key in R.depths}
        ok, slack = _depth_check(R.depths, targets, eps)
        qdev = float(np.max(np.abs(quad - 0.25)))
        return {"hyperplanes": [_hyperplane_dict(H1), _hyperplane_dict(H2)],
                "quadrants": quad.tolist(), "quadrant_deviation": qdev, "depths": R.depths,
                "targets": targets, "slack": slack, "residual": R.residual,
                "pass": bool(ok and qdev <= eps)}
    if kind == "yao-transversal":
        basis, part, subspaces = tv.yao_transversal(measures, samples, seed)
        depths = part.info["depths"]
        targets = {key: tv.depth_target(d, int(key[1:key.index("/")])) for key in depths}
        ok, slack = _depth_check(depths, targets, eps)
        return {"basis": basis.vectors.tolist(), "center": part.centers[0].tolist(),
                "subspaces": [_subspace_dict(L) for L in subspaces], "depths": depths,
                "targets": targets, "slack": slack,
                "residual": part.info["transversal_residual"], "pass": ok}
    if kind == "separated":
        if len(measures) != 2:
            raise InputError("separated needs exactly two measures")
        H1, H2, info = tv.separated_two_planes(measures[0], measures[1], seed, full=True)
        quad = np.asarray(info["quadrants"], dtype=float)
        depth = tv.subspace_depth(measures[1], info["line"], samples, seed)
        qdev = float(np.max(np.abs(quad - 0.25)))
        return {"hyperplanes": [_hyperplane_dict(H1), _hyperplane_dict(H2)],
                "quadrants": quad.tolist(), "quadrant_deviation": qdev,
                "line": _subspace_dict(info["line"]), "depth_mu2": depth,
                "residual": info["residual"],
                "pass": bool(qdev <= eps and depth >= 1 / 3 - (eps + 0.01))}
    raise InputError(f"unknown transversal kind {kind!r}")


def cmd_transversal(args) -> int:
    measures = [io.load_measure(p, seed=args.seed + i) for i, p in enumerate(args.measures)]
    if len({m.dim for m in measures}) != 1:
        raise InputError("measures differ in dimension")
    result = run_transversal(args.kind, measures, args)
    man = _manifest(args)
    result = io._plain(result)
    result["manifest"] = man
    _emit(io.dumps(result), args.out)
    args._embedded = man
    return EXIT_OK if result["pass"] else EXIT_AUDIT


# ---------------------------------------------------------------- bench


BENCH_FIELDS = ["suite", "construction", "d", "n", "t", "trial", "k", "k_expected",
                "k_lower_bound", "min_avoided", "bound", "margin", "pass"]


def _bench_measure(args, d, trial):
    seed = args.seed + 1000 * trial + d
    return generate(DensitySpec("uniform_box", {"dim": d}, args.points, seed))


def bench_rows(args) -> list[dict]:
    rows = []
    for trial in range(args.trials):
        for d in args.dims:
            mu = _bench_measure(args, d, trial)
            if args.suite == "avoidance":
                for t in args.ts:
                    p = yao.multicenter_partition(mu, geo.OrthoFrame.standard(d), t)
                    r = vf.audit_avoidance(p, mu, "hyperplane", mode="both",
                                           n_samples=args.samples, seed=args.seed + trial,
                                           threads=args.threads)
                    m = r.statistics["min_missed"]
                    rows.append({"suite": "avoidance", "construction": "multicenter", "d": d,
                                 "n": len(p.cells), "t": t, "trial": trial, "k": "",
                                 "k_expected": "", "k_lower_bound": "", "min_avoided": m,
                                 "bound": t, "margin": m - t, "pass": r.passed})
            else:
                for construction, n in _complexity_configs(d, args.ns):
                    cp = _complexity(construction, mu, n)
                    r = vf.audit_avoidance(cp, mu, "line", mode="both", n_samples=args.samples,
                                           seed=args.seed + trial, threads=args.threads)
                    m = r.statistics["min_missed"]
                    bound = max(cp.n - (cp.k + 1), 0)
                    ke = cx.expected_k(construction, cp.n, d, cp.extra.get("x"))
                    k_ok = cp.k == ke if ke is not None else cp.k <= cx.binary_bound(cp.n, d)
                    rows.append({"suite": "complexity", "construction": construction, "d": d,
                                 "n": cp.n, "t": "", "trial": trial, "k": cp.k,
                                 "k_expected": "" if ke is None else ke,
                                 "k_lower_bound": cx.lower_bound(cp.n, d), "min_avoided": m,
                                 "bound": bound, "margin": m - bound,
                                 "pass": bool(r.passed and k_ok
                                              and cp.k >= cx.lower_bound(cp.n, d))})
    return rows


def _complexity_configs(d, ns):
    names = {1: ["binary"], 2: ["multicenter2d", "bhj2d", "binary"],
             3: ["buckbuck3d", "parallel3d", "binary"]}.get(d, ["binary"])
    return [(c, n) for c in names for n in ns
            if n >= d and not (c.endswith("3d") and n < 6)]


def _complexity(construction, mu, n):
    if construction == "binary":
        return cx.low_complexity_partition(mu, n)
    if construction.endswith("2d"):
        return cx.partition_2d(mu, n, construction[:-2])
    return cx.partition_3d(mu, n, construction[:-2])


def cmd_bench(args) -> int:
    rows = bench_rows(args)
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    man = _manifest(args)
    text = "# manifest: " + json.dumps(man, sort_keys=True) + "\n" + buf.getvalue()
    _emit(text, args.out)
    if args.figure:
        from .plotting import plot_bench
        pts = [{"construction": f"{r['construction']} d={r['d']}",
                "param": r["t"] if r["suite"] == "avoidance" else r["n"],
                "value": r["min_avoided"] if r["suite"] == "avoidance" else r["k"],
                "bound": r["bound"] if r["suite"] == "avoidance" else
                (r["k_expected"] if r["k_expected"] != "" else r["k_lower_bound"])}
               for r in rows]
        plot_bench(pts, args.figure)
    args._embedded = man
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_AUDIT


# ---------------------------------------------------------------- export


def cmd_export(args) -> int:
    p = io.load_partition(args.partition)
    if p.dim != 2:
        raise InputError("SVG export needs a planar partition")
    mu = io.load_measure(args.measure, seed=args.seed) if args.measure else None
    from .plotting import save_partition_svg
    save_partition_svg(p, args.svg, mu)
    args._embedded = _manifest(args)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="masspart", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"masspart {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for audits (default: MASSPART_THREADS or all cores)")
    common.add_argument("--manifest", help="also write a run manifest with timing to this path")
    common.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("partition", parents=[common], help="construct a partition")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--dim", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--x", type=int)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="measure file (CSV or JSON)")
    src.add_argument("--spec", help="density spec JSON to sample")
    p.add_argument("--points", type=int, default=20_000,
                   help="sample size of the default gaussian when no input is given")
    p.add_argument("--random-basis", action="store_true")
    p.add_argument("--out")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_partition)

    v = sub.add_parser("verify", parents=[common], help="audit a saved partition")
    v.add_argument("--partition", required=True)
    v.add_argument("--measure", required=True)
    v.add_argument("--checks", help="comma-separated subset of: " + ", ".join(CHECKS)
                   + " (default: equipartition,coverage plus the avoidance and"
                   " containment checks that apply to the partition kind)")
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--mode", choices=("random", "anchored", "both"), default="both")
    v.add_argument("--alphas", type=_float_list, default=[0.2, 0.35, 0.5, 0.65, 0.8])
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("transversal", parents=[common], help="central transversals")
    t.add_argument("--kind", choices=TRANSVERSALS, required=True)
    t.add_argument("--measures", nargs="+", required=True)
    t.add_argument("--lambda", dest="lam", type=int)
    t.add_argument("--samples", type=int, default=10_000)
    t.add_argument("--out")
    t.set_defaults(func=cmd_transversal)

    b = sub.add_parser("bench", parents=[common], help="bound comparison table")
    b.add_argument("--suite", choices=("avoidance", "complexity"), required=True)
    b.add_argument("--dims", type=_int_list, default=[2])
    b.add_argument("--ns", type=_int_list, default=list(range(2, 17)))
    b.add_argument("--ts", type=_int_list, default=[1, 2, 3, 4])
    b.add_argument("--trials", type=int, default=1)
    b.add_argument("--points", type=int, default=4000)
    b.add_argument("--samples", type=int, default=2000)
    b.add_argument("--out")
    b.add_argument("--figure", help="optional PNG/SVG plot of the table")
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("export", parents=[common], help="render a planar partition as SVG")
    e.add_argument("--partition", required=True)
    e.add_argument("--measure")
    e.add_argument("--svg", required=True)
    e.set_defaults(func=cmd_export)
    return ap


INPUT_ERRORS = (InputError, BadSpec, SchemaMismatch, DegenerateInput, EmptyMeasure,
                InsufficientSupport, NotWellSeparated, ParallelProjection, FileNotFoundError,
                IsADirectoryError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is None:
        args.threads = default_threads()
    if args.threads < 1:
        print("masspart: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    started = time.time()
    try:
        code = args.func(args)
    except NoConvergence as exc:
        print(f"masspart: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except INPUT_ERRORS as exc:
        print(f"masspart: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _write_side_manifest(args, getattr(args, "_embedded", {}), started)
    return code


if __name__ == "__main__":
    sys.exit(main())
