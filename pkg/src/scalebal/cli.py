"""Command-line front end.

Exit codes: 0 on success (TestPassed or RandomStop), 2 when the solver ran out
of iterations or a verification failed, 1 on bad input or usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from fractions import Fraction
from typing import List, Optional

from . import diagnostics
from .errors import ScalebalError
from .estimators import EstimatorBackend
from .fixedpoint import FixedVector, parse_fixed
from .instances import build_gadget_instance, random_balanceable, random_positive, random_scalable
from .oracle import TargetMarginals, format_matrix, format_vector, load_matrix, load_targets
from .osborne import check_balanced, derive_params_osborne, run_random_osborne, run_random_osborne_boosted
from .sinkhorn import (
    InstanceMeta,
    StopReason,
    derive_params_full,
    derive_params_positive,
    derive_params_random,
    run_full_sinkhorn,
    run_positive_sinkhorn,
    run_randomized_sinkhorn,
    run_randomized_sinkhorn_boosted,
)

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _unit_rational(text: str) -> Fraction:
    try:
        q = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None
    if not (0 < q <= 1):
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1]")
    return q


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="scalebal", description="Finite-precision matrix scaling and balancing.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def solver_flags(p, scaling: bool):
        p.add_argument("--input", required=True, help="matrix file ('n m' header, then 'i j num/den')")
        if scaling:
            p.add_argument("--targets", help="marginals file for r and c, or 'r.txt,c.txt'; uniform if omitted")
            p.add_argument("--variant", choices=["full", "random", "positive"], default="full")
        p.add_argument("--epsilon", type=_unit_rational, required=True)
        p.add_argument("--p", type=_unit_rational, default=Fraction(1, 3), help="failure probability (randomized)")
        p.add_argument("--backend", choices=["exact", "classical", "quantum-sim"], default="classical")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trace", help="write a per-iteration CSV trace here")
        p.add_argument("--out", help="write the result JSON here instead of stdout")
        p.add_argument("--boost", action="store_true", help="repeat at p=1/3 and certify (randomized variants)")

    solver_flags(sub.add_parser("scale", help="scale a matrix to target marginals"), True)
    solver_flags(sub.add_parser("balance", help="balance a matrix with random Osborne"), False)

    g = sub.add_parser("gen", help="generate a test instance")
    g.add_argument("kind", choices=["scalable", "balanceable", "positive", "gadget"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--s", type=int, help="gadget sparsity (defaults to n)")
    g.add_argument("--mu", type=_unit_rational, default=Fraction(1, 256))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="matrix file (stdout if omitted)")
    g.add_argument("--descriptor-out", help="gadget only: write the hidden bits here")

    v = sub.add_parser("verify", help="recompute metrics for a matrix and a result JSON")
    v.add_argument("--input", required=True)
    v.add_argument("--scaling", required=True, help="JSON written by 'scale' or 'balance'")
    v.add_argument("--targets")
    v.add_argument("--epsilon", type=_unit_rational, required=True)

    b = sub.add_parser("bench", help="compare backends on one instance; CSV output")
    b.add_argument("--input", required=True)
    b.add_argument("--targets")
    b.add_argument("--epsilon", type=_unit_rational, required=True)
    b.add_argument("--variant", choices=["full", "random", "positive"], default="full")
    b.add_argument("--p", type=_unit_rational, default=Fraction(1, 3))
    b.add_argument("--backends", default="exact,classical,quantum-sim")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    return ap


# ---------------------------------------------------------------------------


def _targets(spec: Optional[str], n: int) -> TargetMarginals:
    return load_targets(spec, n) if spec else TargetMarginals.uniform(n)


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _vec_fields(name: str, v: FixedVector) -> dict:
    return {name: v.strings(), f"{name}_decimal": v.floats()}


def _solve_scaling(A, targets, args, backend):
    meta = InstanceMeta.from_problem(A, targets)
    tr = None
    if args.variant == "random":
        if args.boost:
            st = run_randomized_sinkhorn_boosted(A, targets, backend, args.epsilon, args.p, seed=args.seed)
        else:
            params = derive_params_random(meta, args.epsilon, args.p)
            st = run_randomized_sinkhorn(A, targets, backend, params, seed=args.seed)
    elif args.variant == "positive":
        params = derive_params_positive(meta, args.epsilon)
        st, tr = run_positive_sinkhorn(A, targets, backend, params, trace=bool(getattr(args, "trace", None)))
    else:
        params = derive_params_full(meta, args.epsilon)
        st, tr = run_full_sinkhorn(A, targets, backend, params, trace=bool(getattr(args, "trace", None)))
    return st, tr


def cmd_scale(args) -> int:
    A = load_matrix(args.input)
    targets = _targets(args.targets, A.n)
    backend = EstimatorBackend(args.backend, args.seed)
    st, tr = _solve_scaling(A, targets, args, backend)
    rep = diagnostics.metric_report(A, targets, st.x.fractions(), st.y.fractions())
    out = {
        "kind": "scale",
        "variant": args.variant,
        "format": list(st.x.format),
        "iterations": st.t,
        "stopped_reason": st.stopped_reason.value,
        "metrics": rep.__dict__,
        "ledger": A.ledger.snapshot(),
    }
    out.update(_vec_fields("x", st.x))
    out.update(_vec_fields("y", st.y))
    _emit(_dump(out), args.out)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(tr.to_csv() if tr is not None else "")
    return EXIT_FAIL if st.stopped_reason is StopReason.EXHAUSTED else EXIT_OK


def cmd_balance(args) -> int:
    A = load_matrix(args.input)
    backend = EstimatorBackend(args.backend, args.seed)
    if args.boost:
        res = run_random_osborne_boosted(A, backend, args.epsilon, args.p, seed=args.seed)
    else:
        params = derive_params_osborne(A, args.epsilon, args.p)
        res = run_random_osborne(A, backend, params, seed=args.seed, trace=bool(args.trace))
    rep = diagnostics.balance_report(A, res.x.fractions())
    out = {
        "kind": "balance",
        "format": list(res.x.format),
        "iterations": res.tau,
        "stopped_reason": res.stopped_reason,
        "metrics": rep.__dict__,
        "ledger": A.ledger.snapshot(),
    }
    out.update(_vec_fields("x", res.x))
    _emit(_dump(out), args.out)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(res.trace.to_csv() if res.trace is not None else "")
    return EXIT_FAIL if res.stopped_reason == "Exhausted" else EXIT_OK


def cmd_gen(args) -> int:
    descriptor = None
    if args.kind == "gadget":
        inst = build_gadget_instance(args.n, args.s or args.n, seed=args.seed)
        A, descriptor = inst.matrix, inst.z
    elif args.kind == "positive":
        A = random_positive(args.n, seed=args.seed)
    else:
        if args.m is None:
            raise UsageError("--m is required for random instances")
        gen = random_scalable if args.kind == "scalable" else random_balanceable
        A = gen(args.n, args.m, args.mu, seed=args.seed)
    _emit(format_matrix(A), args.out)
    if args.descriptor_out:
        if descriptor is None:
            raise UsageError("--descriptor-out only applies to gadget instances")
        with open(args.descriptor_out, "w") as fh:
            fh.write("".join(map(str, descriptor)) + "\n")
    return EXIT_OK


def _read_vec(obj, key) -> List[Fraction]:
    if key not in obj:
        raise UsageError(f"result JSON lacks '{key}'")
    return [parse_fixed(s).value for s in obj[key]]


def cmd_verify(args) -> int:
    A = load_matrix(args.input)
    with open(args.scaling) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad JSON: {exc}") from None
    eps = float(args.epsilon)
    x = _read_vec(obj, "x")
    if len(x) != A.n:
        raise UsageError("scaling length does not match the matrix")
    if obj.get("kind") == "balance":
        ok, res = check_balanced(A, x, args.epsilon)
        rep = diagnostics.balance_report(A, x)
        verdict = {"result": "PASS" if ok else "FAIL", "residual": res, "metrics": rep.__dict__}
    else:
        y = _read_vec(obj, "y")
        if len(y) != A.n:
            raise UsageError("scaling length does not match the matrix")
        rep = diagnostics.metric_report(A, _targets(args.targets, A.n), x, y)
        ok = rep.D_row <= eps and rep.D_col <= eps
        verdict = {"result": "PASS" if ok else "FAIL", "residual": max(rep.D_row, rep.D_col), "metrics": rep.__dict__}
    sys.stdout.write(_dump(verdict))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bench(args) -> int:
    A0 = load_matrix(args.input)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "m", "epsilon", "backend", "iterations", "classical_queries", "quantum_charged_queries", "wall_time"])
    for name in [b.strip() for b in args.backends.split(",") if b.strip()]:
        A = load_matrix(args.input)  # fresh ledger per backend
        targets = _targets(args.targets, A.n)
        args.boost = False
        t0 = time.perf_counter()
        st, _ = _solve_scaling(A, targets, args, EstimatorBackend(name, args.seed))
        wall = time.perf_counter() - t0
        led = A.ledger
        w.writerow([A.n, A.m, str(args.epsilon), name, st.t, led.classical_queries, led.quantum_charged_queries, f"{wall:.6f}"])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


COMMANDS = {"scale": cmd_scale, "balance": cmd_balance, "gen": cmd_gen, "verify": cmd_verify, "bench": cmd_bench}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ScalebalError, UsageError, ValueError, OSError) as exc:
        sys.stderr.write(f"scalebal {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
