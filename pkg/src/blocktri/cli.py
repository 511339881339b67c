"""
Command-line interface.

Exit codes: 0 success, 1 I/O or parse error, 2 validation or precondition
failure, 3 defective matrix detected, 4 numerical check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time

import numpy as np

from . import core, generators, jordan, spectral, spider
from .dst import OpCounter

log = logging.getLogger("blocktri")

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_DEFECTIVE, EXIT_NUMERICAL = 0, 1, 2, 3, 4


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _c(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _tolerances(args) -> dict:
    return {"tol_validate": args.tol_validate, "tol_null": args.tol_null, "tol_cluster": args.tol_cluster}


def _emit(args, report: dict, text: str, output_obj: dict | None = None) -> None:
    if args.output:
        core.atomic_write_text(args.output, json.dumps(output_obj if output_obj is not None else report) + "\n")
    if args.json:
        print(json.dumps(report))
    elif text:
        print(text)


def _load(args) -> core.BlockTridiagonalMatrix:
    if not args.input:
        raise CommandError("--input is required", EXIT_IO)
    return core.read_matrix(args.input)


# --- commands -------------------------------------------------------------------------

def cmd_decompose(args) -> int:
    a = _load(args)
    res = spectral.decompose(a, inverse=args.inverse, tol_validate=args.tol_validate, null_tol=args.tol_null,
                             cluster_tol=args.tol_cluster)
    if isinstance(res, spectral.DefectReport):
        report = {"tolerances": _tolerances(args), "spectrum": res.spectrum.to_dict(), **res.to_dict()}
        lines = [f"defective: geometric total {res.geometric_total} < N = {a.n}"]
        lines += [f"  lambda={z:.6g} algebraic={al} geometric={g}" for _, z, al, g in res.deficient]
        _emit(args, report, "\n".join(lines))
        return EXIT_DEFECTIVE
    threshold = 1e-8 * math.sqrt(a.n)
    report = {"tolerances": _tolerances(args), "threshold": threshold, "spectrum": res.spectrum.to_dict(),
              **res.to_dict()}
    if res.W is not None:
        report["W"] = [[_c(z) for z in row] for row in res.W]
    ok = res.residual_AV <= threshold and (res.residual_WV is None or res.residual_WV <= threshold)
    text = (f"N={a.n} distinct eigenvalues={res.spectrum.m} residual_AV={res.residual_AV:.3e}"
            + (f" residual_WV={res.residual_WV:.3e} offblock_W0V={res.offblock_W0V:.3e}" if res.W is not None else "")
            + ("" if ok else f"  FAILED (threshold {threshold:.3e})"))
    _emit(args, report, text)
    return EXIT_OK if ok else EXIT_NUMERICAL


def _instance(args) -> core.BlockTridiagonalMatrix:
    if args.input:
        return core.read_matrix(args.input)
    if args.K is None or args.L is None:
        raise CommandError("give --input or -K/-L (with --kind) for a generated instance", EXIT_IO)
    return generators.generate(args.kind or "random", args.K, args.L, args.seed)


def verify_instance(a: core.BlockTridiagonalMatrix, *, tol_validate=1e-12, tol_null=spectral.NULL_TOL,
                    tol_cluster=spectral.CLUSTER_TOL, eig_tol=1e-7, poly_tol=1e-7) -> dict:
    """Compare the polynomial path against a dense eigensolver."""
    from scipy.optimize import linear_sum_assignment
    seq = spectral.generate_sequence(a, tol_validate)
    sp = spectral.compute_spectrum(seq, tol_cluster)
    dense = np.linalg.eigvals(core.assemble_dense(a))
    ours = sp.expanded()
    cost = np.abs(dense[:, None] - ours[None, :])
    r, c = linear_sum_assignment(cost)
    eig_err = float(cost[r, c].max())
    p = seq.determinant_polynomial(trim=False)
    coeffs = np.zeros(a.n + 1, dtype=complex)
    coeffs[:min(a.n + 1, p.coeffs.size)] = p.coeffs[:a.n + 1]
    coeffs[a.n] = seq.determinant_leading()
    monic = coeffs[::-1] / coeffs[-1]
    ref = np.poly(dense)
    poly_err = float(np.abs(monic - ref).max() / np.abs(ref).max())
    bases = spectral.eigen_bases(seq, sp, tol_null)
    flags = [{"lambda": _c(z), "algebraic": int(b), "geometric": h.dim, "flag": "geometric < algebraic"}
             for z, b, h in zip(sp.eigenvalues, sp.multiplicities, bases) if h.dim < b]
    return {"n": a.n, "eigenvalue_abs_error": eig_err, "eigenvalues_pass": eig_err <= eig_tol,
            "charpoly_rel_error": poly_err, "charpoly_pass": poly_err <= poly_tol, "multiplicity_flags": flags,
            "passed": eig_err <= eig_tol and poly_err <= poly_tol}


def cmd_verify(args) -> int:
    a = _instance(args)
    if a.n > args.cap:
        raise CommandError(f"N={a.n} exceeds the dense cap {args.cap}", EXIT_VALIDATION)
    rep = verify_instance(a, tol_validate=args.tol_validate, tol_null=args.tol_null, tol_cluster=args.tol_cluster)
    rep["tolerances"] = _tolerances(args)
    rows = [("eigenvalues (abs)", rep["eigenvalue_abs_error"], rep["eigenvalues_pass"]),
            ("charpoly (rel)", rep["charpoly_rel_error"], rep["charpoly_pass"])]
    text = "\n".join(f"{name:<20} {err:.3e}  {'pass' if ok else 'FAIL'}" for name, err, ok in rows)
    for f in rep["multiplicity_flags"]:
        text += f"\nlambda={complex(*f['lambda']):.6g}: {f['flag']} ({f['geometric']} < {f['algebraic']})"
    _emit(args, rep, text)
    return EXIT_OK if rep["passed"] else EXIT_NUMERICAL


def cmd_spider(args) -> int:
    k, l, variant = args.K, args.L, args.variant
    if k is None or l is None:
        raise CommandError("spider needs -K and -L", EXIT_VALIDATION)
    if variant == "ring" and args.closed_form:
        raise CommandError("no closed form exists for the ring variant", EXIT_VALIDATION)
    report: dict = {"k": k, "l": l, "variant": variant, "tolerances": _tolerances(args)}
    lines = []
    output_obj = None
    if args.spectrum or not (args.expand or args.bench):
        if variant == "star":
            ss = spider.spider_spectrum(k, l, check_general=args.check)
            report["spectrum"] = ss.spectrum.to_dict()
            report["families"] = {name: v.tolist() for name, v in ss.families.items()}
            if ss.general_error is not None:
                report["general_path_error"] = ss.general_error
        else:
            a = spider.spider_matrix(k, l, variant)
            sp = spectral.compute_spectrum(spectral.generate_sequence(a, args.tol_validate), args.tol_cluster)
            report["spectrum"] = sp.to_dict()
            ss = None
        vals = report["spectrum"]["eigenvalues"]
        lines.append("spectrum: " + ", ".join(f"{e['lambda'][0]:.10g}" + (f" (x{e['multiplicity']})"
                                                                          if e["multiplicity"] > 1 else "")
                                              for e in vals))
    code = EXIT_OK
    if args.expand or args.bench:
        if variant != "star":
            raise CommandError("fast expansion is available for the star variant only", EXIT_VALIDATION)
        plan = spider.build_plan(k, l)
        report["plan"] = {"version": plan.version, "sign": plan.sign, "dst_fast": plan.dst_fast}
        if args.expand:
            y = core.read_vector(args.expand)
            if y.size != plan.n:
                raise CommandError(f"vector has length {y.size}, expected N={plan.n}", EXIT_VALIDATION)
            y = y.real if np.all(y.imag == 0) else y
            counter = OpCounter()
            y_hat = spider.fast_expansion(plan, y, counter=counter)
            report["alpha_ops"] = counter.to_dict()
            report["direct_alpha_ops"] = spider.direct_alpha_ops(k, l)
            output_obj = core.vector_to_dict(y_hat)
            if args.check:
                direct = spider.direct_expansion(plan, y)
                dev = float(np.linalg.norm(y_hat - direct) / max(np.linalg.norm(direct), np.finfo(float).tiny))
                report["max_relative_deviation"] = dev
                lines.append(f"fast vs direct relative deviation {dev:.3e}")
                if dev > 1e-9:
                    code = EXIT_NUMERICAL
        if args.bench:
            rng = np.random.default_rng(args.seed)
            y = rng.standard_normal(plan.n)
            v = spider.spider_vectors(plan)
            t_fast = t_direct = math.inf
            for _ in range(max(1, args.reps)):
                t0 = time.perf_counter()
                spider.fast_expansion(plan, y)
                t_fast = min(t_fast, time.perf_counter() - t0)
                t0 = time.perf_counter()
                v.T @ y
                t_direct = min(t_direct, time.perf_counter() - t0)
            counter = OpCounter()
            spider.expand_alpha(plan, y, counter)
            report["bench"] = {"reps": args.reps, "fast_seconds": t_fast, "direct_seconds": t_direct,
                               "time_ratio": t_fast / t_direct, "alpha_ops": counter.total,
                               "direct_alpha_ops": spider.direct_alpha_ops(k, l),
                               "op_ratio": counter.total / spider.direct_alpha_ops(k, l)}
            b = report["bench"]
            lines.append(f"fast {t_fast:.3e}s direct {t_direct:.3e}s ratio {b['time_ratio']:.3f}; "
                         f"alpha ops {b['alpha_ops']} vs direct {b['direct_alpha_ops']}")
    if output_obj is None:
        output_obj = report
    _emit(args, report, "\n".join(lines), output_obj)
    return code


def cmd_jordan(args) -> int:
    a = _load(args)
    rep = jordan.jordan_analysis(a, powers=args.powers, tol_validate=args.tol_validate, null_tol=args.tol_null,
                                 cluster_tol=args.tol_cluster)
    d = rep.to_dict()
    d["spans"] = rep.spans()
    lines = [f"defective: {rep.defective}"]
    for e in rep.entries:
        lines.append(f"lambda={e.eigenvalue:.6g} algebraic={e.algebraic} geometric={e.geometric} "
                     f"chains={[c.length for c in e.chains]}")
    _emit(args, d, "\n".join(lines))
    bad = any(max(c.residuals) > jordan.CHAIN_TOL for e in rep.entries for c in e.chains)
    return EXIT_NUMERICAL if bad else EXIT_OK


def cmd_gen(args) -> int:
    if args.K is None or args.L is None:
        raise CommandError("gen needs -K and -L", EXIT_VALIDATION)
    try:
        a = generators.generate(args.kind, args.K, args.L, args.seed, variant=args.variant) \
            if args.kind == "spider" else generators.generate(args.kind, args.K, args.L, args.seed)
    except ValueError as exc:
        raise CommandError(str(exc), EXIT_VALIDATION) from exc
    text = json.dumps(core.matrix_to_dict(a)) + "\n"
    if args.output:
        core.atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------

def _positive(x: str) -> float:
    v = float(x)
    if not v > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input JSON file")
    common.add_argument("--output", help="output JSON file (written atomically)")
    common.add_argument("--tol-validate", type=_positive, default=1e-12)
    common.add_argument("--tol-null", type=_positive, default=spectral.NULL_TOL)
    common.add_argument("--tol-cluster", type=_positive, default=spectral.CLUSTER_TOL)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--json", action="store_true", help="print the machine-readable report")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="blocktri", description="Block tridiagonal eigensolver via matrix polynomials.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", parents=[common], help="eigenvalues, eigenvectors and optionally V^{-1}")
    d.add_argument("--inverse", action="store_true")
    d.set_defaults(func=cmd_decompose)

    v = sub.add_parser("verify", parents=[common], help="compare against a dense eigensolver")
    v.add_argument("-K", type=int)
    v.add_argument("-L", type=int)
    v.add_argument("--kind", choices=generators.KINDS[:-1])
    v.add_argument("--cap", type=int, default=512)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("spider", parents=[common], help="spider graph spectrum and fast expansion")
    s.add_argument("-K", type=int)
    s.add_argument("-L", type=int)
    s.add_argument("--variant", choices=spider.VARIANTS, default="star")
    s.add_argument("--spectrum", action="store_true")
    s.add_argument("--expand", metavar="Y_JSON")
    s.add_argument("--check", action="store_true")
    s.add_argument("--bench", action="store_true")
    s.add_argument("--reps", type=int, default=5)
    s.add_argument("--closed-form", action="store_true")
    s.set_defaults(func=cmd_spider)

    j = sub.add_parser("jordan", parents=[common], help="Jordan chains of a defective matrix")
    j.add_argument("--powers", action="store_true", help="cross-check chains with the matrix-power test")
    j.set_defaults(func=cmd_jordan)

    g = sub.add_parser("gen", parents=[common], help="write a deterministic test instance")
    g.add_argument("--kind", choices=generators.KINDS, required=True)
    g.add_argument("-K", type=int)
    g.add_argument("-L", type=int)
    g.add_argument("--variant", choices=spider.VARIANTS, default="star")
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, core.MatrixParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (core.ValidationError, core.StructureError, jordan.PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (core.NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
