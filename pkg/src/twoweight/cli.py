"""Command-line interface: ``twoweight {gen,verify,norm,cantor,rubio}``.

Exit codes: 0 success, 1 computational failure, 2 invalid input,
3 invariant violation.
"""

import argparse
import json
import sys

from . import cantor
from .lattice import InstanceFormatError, deserialize, random_instance, serialize
from .prooftools import rubio_majorant
from .suite import check_instance, run_batch
from .testing import norm_ascent, norm_exact_p2q2, report_document, testing_report, verdict

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_VIOLATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _depth_list(text):
    try:
        depths = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not depths or min(depths) < 1:
        raise argparse.ArgumentTypeError("depths must be integers >= 1")
    return depths


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_instance(path):
    try:
        with open(path) as fh:
            return deserialize(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def cmd_gen(args):
    try:
        inst = random_instance(args.seed, branching=args.branching, depth=args.depth, p=args.p,
                               q=args.q, zero_fraction=args.zero_fraction,
                               alpha_zero_fraction=args.alpha_zero_fraction,
                               repeat_fraction=args.repeat_fraction)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = serialize(inst) + "\n"
    try:
        _emit(text, args.out)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc.strerror}") from None
    msg = f"cells={inst.lattice.n_cells} leaves={inst.lattice.n_leaves}\n"
    (sys.stdout if args.out else sys.stderr).write(msg)
    return EXIT_OK


def cmd_verify(args):
    if args.instance:
        inst = _load_instance(args.instance)
        results = check_instance(inst, seed=args.seed, f_samples=args.f_samples,
                                 restarts=args.restarts)
    else:
        params = {k: v for k, v in (("branching", args.branching), ("depth", args.depth),
                                    ("p", args.p), ("q", args.q)) if v is not None}
        seeds = range(args.seed, args.seed + args.batch)
        results = run_batch(seeds, params, f_samples=args.f_samples, restarts=args.restarts,
                            jobs=args.jobs)
    checks = [r.to_dict() for r in results.values()]
    ok = all(c["holds"] for c in checks)
    _emit(json.dumps({"all_hold": ok, "checks": checks}, indent=1) + "\n", args.out)
    for c in checks:
        if not c["holds"]:
            sys.stderr.write(f"FAILED {c['name']}: {json.dumps(c['witness'])}\n")
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_norm(args):
    inst = _load_instance(args.instance)
    if args.method == "exact":
        if inst.p != 2 or inst.q != 2:
            raise UsageError(f"--method exact needs p = q = 2 (instance has p={inst.p}, q={inst.q})")
        est = norm_exact_p2q2(inst)
    else:
        est = norm_ascent(inst, restarts=args.restarts, tol=args.tol, seed=args.seed)
    report = testing_report(inst)
    doc = report_document(inst, report, est, verdict(inst, report, est))
    doc["estimate"] = est.to_dict(inst.lattice.leaves)
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_cantor(args):
    p, q, r = args.p, args.q, args.r
    if not (q < p and 1.0 / p < r < 1.0 / q):
        raise UsageError(f"need q < p and 1/p < r < 1/q, i.e. {1 / p:g} < r < {1 / q:g}; "
                         f"got p={p:g}, q={q:g}, r={r:g}")
    rows = cantor.divergence_sweep(p, q, r, args.depths, materialize_up_to=args.materialize_up_to)
    _emit(cantor.rows_to_csv(rows), args.out)
    info = sys.stdout if args.out else sys.stderr
    info.write(f"growth exponent (last 4 rows): {cantor.growth_exponent(rows):.6g} "
               f"(asymptotic {(1 - q * r) * p / q:.6g})\n")
    info.write(f"verdict: {cantor.sweep_verdict(rows, p)}\n")
    return EXIT_OK


def cmd_rubio(args):
    inst = _load_instance(args.instance)
    if not inst.q < inst.p:
        raise UsageError(f"the majorant needs q < p (instance has p={inst.p}, q={inst.q})")
    try:
        with open(args.function) as fh:
            doc = json.load(fh)
        f = inst.function(doc)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read function {args.function}: {exc}") from None
    if (f < 0).any():
        raise UsageError("the majorant needs f >= 0")
    res = rubio_majorant(inst, f, tol=args.tol)
    out = {
        "truncation_k": res.truncation_k,
        "norm_ratio": res.norm_ratio,
        "norm_ratio_bound": 2.0 ** (1.0 / inst.q),
        "a1_constant": res.a1_constant,
        "a1_bound": 2.0 * inst.s_conj,
        "tail_norm": res.tail_norm,
        "certified_tail": res.certified_tail,
        "measured_maximal_norm": res.measured_maximal_norm,
        "doob_bound": inst.s_conj,
        "F": inst.function_dict(res.F),
    }
    _emit(json.dumps(out, indent=1) + "\n", args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="twoweight", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a random instance")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--branching", type=int, default=2)
    g.add_argument("--depth", type=_positive_int, default=3)
    g.add_argument("--p", type=float, default=2.0)
    g.add_argument("--q", type=float, default=1.0)
    g.add_argument("--zero-fraction", type=float, default=0.1)
    g.add_argument("--alpha-zero-fraction", type=float, default=0.2)
    g.add_argument("--repeat-fraction", type=float, default=0.0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("instance", nargs="?")
    v.add_argument("--seed", type=int, default=1, help="first seed of a batch / RNG seed")
    v.add_argument("--batch", type=_positive_int, default=20, help="number of seeds without an instance")
    v.add_argument("--branching", type=int)
    v.add_argument("--depth", type=_positive_int)
    v.add_argument("--p", type=float)
    v.add_argument("--q", type=float)
    v.add_argument("--f-samples", type=_positive_int, default=10)
    v.add_argument("--restarts", type=_positive_int, default=8)
    v.add_argument("--jobs", type=_positive_int, default=1)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    n = sub.add_parser("norm", help="estimate the operator norm")
    n.add_argument("instance")
    n.add_argument("--method", choices=["exact", "ascent"], default="ascent")
    n.add_argument("--restarts", type=_positive_int, default=32)
    n.add_argument("--tol", type=float, default=1e-10)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out")
    n.set_defaults(func=cmd_norm)

    c = sub.add_parser("cantor", help="Cantor counterexample sweep (CSV)")
    c.add_argument("--p", type=float, default=2.0)
    c.add_argument("--q", type=float, default=1.0)
    c.add_argument("--r", type=float, default=0.7)
    c.add_argument("--depths", type=_depth_list, default=[4, 8, 16, 32, 64])
    c.add_argument("--materialize-up-to", type=int, default=6)
    c.add_argument("--out")
    c.set_defaults(func=cmd_cantor)

    r = sub.add_parser("rubio", help="Rubio de Francia majorant of a function")
    r.add_argument("instance")
    r.add_argument("function", help="JSON object {leaf-id: decimal}")
    r.add_argument("--tol", type=float, default=1e-12)
    r.add_argument("--out")
    r.set_defaults(func=cmd_rubio)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, InstanceFormatError) as exc:
        sys.stderr.write(f"twoweight {args.command}: {exc}\n")
        return EXIT_INPUT
    except (ValueError, FloatingPointError, ArithmeticError) as exc:
        sys.stderr.write(f"twoweight {args.command}: computation failed: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
