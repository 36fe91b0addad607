"""Command line front end.

Exit codes: 0 pass, 1 certification failure, 2 input error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import platform
import sys
import time

import numpy as np

from . import __version__
from . import bench
from . import certificates as cert
from .errors import PdamaError, SchemaError, TooLarge, ValidationError
from .io import dump_json, load_problem, load_reference, read_trace, write_trace
from .model import prox_diameter, spectral_norm
from .solver import AMASolver, SolverConfig, _default_center, run

EXIT_PASS = 0
EXIT_CERT = 1
EXIT_INPUT = 2
EXIT_RUNTIME = 3

ALGOS = {"ama": "ama", "fama": "ama_accel"}


def _versions():
    out = {"pdama": __version__, "numpy": np.__version__, "python": platform.python_version()}
    try:
        import numba

        out["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        out["numba"] = None
    return out


def _write_manifest(path, argv, seed, config, elapsed):
    dump_json(
        {
            "command": list(argv),
            "seed": seed,
            "config": {k: v for k, v in config.items() if k != "func"},
            "versions": _versions(),
            "timing": {"wall_time_s": elapsed},
        },
        f"{path}.manifest.json",
    )


def _csv_list(text):
    return [item.strip() for item in text.split(",") if item.strip()]


def cmd_solve(args, argv) -> int:
    spec = load_problem(args.problem)
    cfg = SolverConfig(
        variant=ALGOS[args.algo],
        strongly_convex=args.strongly_convex,
        epsilon=args.eps,
        gamma=args.gamma,
        step_policy="line_search" if args.line_search else "fixed",
        max_iter=args.max_iter,
        momentum_mode=args.momentum,
        swap_sides=args.swap_sides,
        f_star=args.f_star,
    )
    kind = cert.bound_kind(cfg.variant, cfg.strongly_convex)
    t0 = time.perf_counter()
    res = run(spec, cfg)
    elapsed = time.perf_counter() - t0
    meta = {"variant": cfg.label, "bound": kind, "step": cfg.step_policy, "momentum": cfg.momentum_mode}
    write_trace(args.out, res.trace, meta)
    summary = {
        "variant": cfg.label,
        "bound": kind,
        "iterations": res.iterations,
        "final_objective": res.last.f_avg if res.last else None,
        "final_feasibility": res.last.feas if res.last else None,
        "gamma": None if res.smoothing is None else res.smoothing.gamma,
        "lipschitz": res.lipschitz,
        "swapped": res.swapped,
        "wall_time_s": elapsed,
    }
    if args.reference_out:
        if res.swapped:
            raise ValidationError("--reference-out is not available with swapped sides")
        ref = bench.oracle_solve(spec)
        if res.smoothing is not None:
            d_u, gamma = res.smoothing.d_u, res.smoothing.gamma
        elif spec.U.is_bounded:
            d_u, gamma = prox_diameter(spec.U, _default_center(spec.U)), 1.0
        else:
            d_u, gamma = math.inf, 1.0
        dump_json(
            {
                "f_star": ref.f_star,
                "lambda_star": ref.lambda_star,
                "d_u": d_u,
                "gamma": gamma,
                "mode": cfg.step_policy,
                "norm_A": AMASolver(spec, cfg).norm_A,
                "mu_g": spec.g.mu,
                "lambda0": np.zeros(spec.n),
                "bound": kind,
            },
            args.reference_out,
        )
    print(dump_json(summary), end="")
    _write_manifest(args.out, argv, None, vars(args), elapsed)
    return EXIT_PASS


def cmd_bench(args, argv) -> int:
    recipe = bench.InstanceRecipe(seed=args.seed, n=args.n, p1=args.p1, strongly_convex=args.strongly_convex)
    if not recipe.oracle_eligible:
        raise TooLarge(f"n + p1 = {args.n + args.p1} exceeds {bench.MAX_DESK}")
    variants = [ALGOS.get(v, v) for v in _csv_list(args.variants)]
    modes = _csv_list(args.momentum)
    t0 = time.perf_counter()
    report = bench.run_experiment(
        recipe,
        variants=variants,
        epsilon=args.eps,
        max_iter=args.max_iter,
        step_policy="line_search" if args.line_search else "fixed",
        momentum_modes=modes,
        series_every=args.series_every,
    )
    elapsed = time.perf_counter() - t0
    dump_json(report, args.out)
    if args.series_out:
        with open(args.series_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("variant", "k", "obj_resid", "obj_bound", "feas", "feas_bound"))
            for name, entry in report["variants"].items():
                for row in entry["series"]:
                    w.writerow((name, row["k"], repr(row["obj_resid"]), repr(row["obj_bound"]),
                                repr(row["feas"]), repr(row["feas_bound"])))
    _write_manifest(args.out, argv, args.seed, vars(args), elapsed)
    for name, entry in report["variants"].items():
        v = entry["verdict"]
        status = "PASS" if v["passed"] else f"FAIL first violation at k={v['first_violation']}"
        print(f"{name} [{entry['bound']}]: {status}")
    return EXIT_PASS if report["passed"] else EXIT_CERT


def cmd_verify(args, argv) -> int:
    meta, trace = read_trace(args.trace)
    ref = load_reference(args.reference)
    if "norm_A" not in ref:
        if args.problem is None:
            raise SchemaError("reference file has no 'norm_A'; pass --problem")
        ref["norm_A"] = spectral_norm(load_problem(args.problem).A)
    n = ref["lambda_star"].size
    inp = cert.CertificateInputs(
        f_star=ref["f_star"],
        lambda_star=ref["lambda_star"],
        lambda0=ref.get("lambda0", np.zeros(n)),
        d_u=ref["d_u"],
        norm_A=ref["norm_A"],
        gamma=ref["gamma"],
        mu_g=ref.get("mu_g", 0.0),
        line_search=ref["mode"] == "line_search",
    )
    if inp.lambda0.shape != inp.lambda_star.shape:
        raise SchemaError("lambda0 and lambda_star differ in length")
    rel = cert.REL_TOL if args.tol is None else args.tol
    report = cert.check_trace(trace, inp, args.variant, trace_kind=meta.get("bound"), rel_tol=rel)
    if report.passed:
        print(f"{args.variant}: PASS ({len(report.checks)} records)")
        return EXIT_PASS
    print(f"{args.variant}: FAIL first violation at k={report.first_violation} ({report.reason})")
    return EXIT_CERT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdama", description="Primal-dual AMA solver and bound certifier")
    p.add_argument("--version", action="version", version=f"pdama {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a problem file and write a trace")
    s.add_argument("--problem", required=True)
    s.add_argument("--algo", choices=sorted(ALGOS), default="ama")
    s.add_argument("--eps", type=float, default=1e-2)
    s.add_argument("--max-iter", type=int, default=1000)
    s.add_argument("--line-search", action="store_true")
    s.add_argument("--gamma", type=float, default=None, help="override the automatic smoothing parameter")
    s.add_argument("--strongly-convex", action="store_true", help="use the unsmoothed strongly convex variant")
    s.add_argument("--momentum", choices=("extrapolated", "classic"), default="extrapolated")
    s.add_argument("--swap-sides", action="store_true")
    s.add_argument("--f-star", type=float, default=None, help="stop at the first epsilon-solution")
    s.add_argument("--reference-out", default=None, help="also write an oracle reference file")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="seeded instance, oracle and bound verification")
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--p1", type=int, required=True)
    b.add_argument("--strongly-convex", action="store_true")
    b.add_argument("--variants", default="ama,fama")
    b.add_argument("--momentum", default="extrapolated,classic", help="momentum modes for fama")
    b.add_argument("--eps", type=float, default=1e-2)
    b.add_argument("--max-iter", type=int, default=2000)
    b.add_argument("--line-search", action="store_true")
    b.add_argument("--series-every", type=int, default=1)
    b.add_argument("--series-out", default=None, help="CSV of residuals against bounds")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="certify a trace against a bound family")
    v.add_argument("--trace", required=True)
    v.add_argument("--reference", required=True)
    v.add_argument("--variant", choices=cert.BOUND_KINDS, required=True)
    v.add_argument("--problem", default=None, help="problem file, if the reference lacks norm_A")
    v.add_argument("--tol", type=float, default=None, help="relative tolerance (default 1e-6)")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    if args.command == "bench":
        allowed = {"momentum": ("extrapolated", "classic"), "variants": tuple(ALGOS) + tuple(ALGOS.values())}
        for name, ok in allowed.items():
            bad = [x for x in _csv_list(getattr(args, name)) if x not in ok]
            if bad:
                print(f"error: unknown {name} {bad}", file=sys.stderr)
                return EXIT_INPUT
    try:
        return args.func(args, argv)
    except ValidationError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PdamaError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
