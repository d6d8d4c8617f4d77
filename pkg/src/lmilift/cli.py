"""Command-line entry point: ``lmilift <command> --spec problem.json ...``.

Exit codes: 0 success, 1 mathematical failure, 2 I/O or input error, 3 solver limit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .harness import (
    EmptyRegionError,
    Frame,
    PipelineAbort,
    ProblemSpec,
    SpecError,
    classify,
    exactness_sweep,
    pipeline,
)
from .lift import LiftError, build_lift, linmin_problem, membership_problem, min_order
from .polyalg import PolynomialSyntaxError
from .reparam import ReparamError, concave_reparam
from .sdpcore import ProblemError, SdpaFormatError, SolverOptions, Status, read_sdpa, solve, write_sdpa

EXIT_OK, EXIT_MATH, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3


class CliFailure(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _vector(text: str, n: int | None = None) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise CliFailure(f"cannot parse vector {text!r}", EXIT_IO) from None
    if n is not None and v.size != n:
        raise CliFailure(f"expected {n} coordinates, got {v.size}", EXIT_IO)
    return v


def _load_spec(path: str) -> ProblemSpec:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CliFailure(f"cannot read {path}: {e.strerror}", EXIT_IO) from None
    try:
        return ProblemSpec.from_json(text)
    except json.JSONDecodeError as e:
        raise CliFailure(f"{path}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}", EXIT_IO) from None
    except (SpecError, PolynomialSyntaxError) as e:
        raise CliFailure(f"{path}: {e}", EXIT_IO) from None


def _options(args) -> SolverOptions:
    return SolverOptions(tol=args.tol, max_iter=args.max_iter, psd_cap=args.psd_cap)


def _emit(obj, args, table: str | None = None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as e:
            raise CliFailure(f"cannot write {args.out}: {e.strerror}", EXIT_IO) from None
        if table:
            print(table)
    else:
        sys.stdout.write(text)
        if table:
            print(table, file=sys.stderr)


def _kind(args, spec: ProblemSpec) -> str:
    return args.kind or spec.kind


def _lift(args, spec: ProblemSpec, frame: Frame):
    gz = [frame.pull(g) for g in spec.gs]
    kind = _kind(args, spec)
    N = args.N
    if N is None and spec.N_range is not None and kind != "sosconcave":
        N = max(spec.N_range[0], min_order(gz, kind))
    return build_lift(kind, gz, N)


def cmd_lift(args) -> int:
    spec = _load_spec(args.spec)
    frame = Frame.identity(spec.n) if args.raw else Frame.from_box(spec.box)
    lift = _lift(args, spec, frame)
    out = lift.to_dict()
    out["frame"] = frame.to_dict()
    _emit(out, args)
    return EXIT_OK


def cmd_classify(args) -> int:
    spec = _load_spec(args.spec)
    sampler = spec.sampler()
    labels = [classify(g, sampler, _options(args)) for g in spec.gs]
    rows = [{"g": i + 1, "class": str(c), **c.to_dict()} for i, c in enumerate(labels)]
    _emit(rows, args, "\n".join(f"g{r['g']}: {r['class']}" for r in rows))
    return EXIT_MATH if any(c.label == "unclassified" for c in labels) else EXIT_OK


def cmd_reparam(args) -> int:
    spec = _load_spec(args.spec)
    sampler = spec.sampler()
    idx = [args.index - 1] if args.index else range(spec.m)
    reports, failed = {}, False
    for i in idx:
        if not 0 <= i < spec.m:
            raise CliFailure(f"no constraint g{i + 1}", EXIT_IO)
        try:
            r = concave_reparam(spec.gs[i], sampler)
            reports[f"g{i + 1}"] = r.report() | {"p_degree": int(r.p.degree)}
        except ReparamError as e:
            reports[f"g{i + 1}"] = {"error": str(e)}
            failed = True
    _emit(reports, args)
    return EXIT_MATH if failed else EXIT_OK


def _status_exit(status: Status) -> int:
    return EXIT_SOLVER if status == Status.NUMERICAL_LIMIT else EXIT_OK


def cmd_solve(args) -> int:
    opts = _options(args)
    if args.sdpa:
        try:
            prob = read_sdpa(args.sdpa)
        except OSError as e:
            raise CliFailure(f"cannot read {args.sdpa}: {e.strerror}", EXIT_IO) from None
        except SdpaFormatError as e:
            raise CliFailure(f"{args.sdpa}: {e}", EXIT_IO) from None
        sol = solve(prob, opts)
        _emit({"status": sol.status.value, "objective": sol.objective, "y": sol.y.tolist()}, args)
        return _status_exit(sol.status)
    if not args.spec or not args.direction:
        raise CliFailure("solve needs --sdpa FILE or --spec FILE --direction L", EXIT_IO)
    spec = _load_spec(args.spec)
    ell = _vector(args.direction, spec.n)
    ell = ell / np.linalg.norm(ell)
    frame = Frame.from_box(spec.box)
    lift = _lift(args, spec, frame)
    sol = solve(linmin_problem(lift, ell), opts)
    value = frame.value(ell, sol.objective) if sol.status == Status.OPTIMAL else None
    _emit({"kind": lift.kind, "N": lift.order, "ell": ell.tolist(), "status": sol.status.value, "value": value}, args)
    return _status_exit(sol.status)


def cmd_member(args) -> int:
    spec = _load_spec(args.spec)
    x = _vector(args.point, spec.n)
    frame = Frame.from_box(spec.box)
    lift = _lift(args, spec, frame)
    sol = solve(membership_problem(lift, frame.to_z(x).tolist()), _options(args))
    verdict = {Status.OPTIMAL: "INSIDE", Status.INFEASIBLE: "OUTSIDE"}.get(sol.status, "UNDECIDED")
    _emit({"point": x.tolist(), "kind": lift.kind, "N": lift.order, "verdict": verdict, "status": sol.status.value}, args, verdict)
    return _status_exit(sol.status)


def _N_range(args, spec):
    if args.N is not None:
        return (args.N, args.N)
    if args.N_max is not None:
        return (1, args.N_max)
    return spec.N_range


def cmd_sweep(args) -> int:
    spec = _load_spec(args.spec)
    kind = _kind(args, spec)
    K = args.K if args.K is not None else spec.K
    seed = args.seed if args.seed is not None else spec.seed
    report = exactness_sweep(
        spec.gs, spec.box, kind, _N_range(args, spec), K, seed,
        resolution=spec.grid_resolution, opts=_options(args), workers=args.workers,
    )
    _emit(report.to_dict(), args, report.table())
    if any(lv.flagged for lv in report.levels):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_pipeline(args) -> int:
    spec = _load_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    if args.K is not None:
        spec.K = args.K
    try:
        res = pipeline(spec, out=args.out, variant=args.variant, N_max=args.N_max, opts=_options(args), workers=args.workers)
    except PipelineAbort as e:
        print(f"pipeline aborted: {e}", file=sys.stderr)
        return EXIT_MATH
    if args.out is None:
        sys.stdout.write(json.dumps(res.to_dict(), indent=2) + "\n")
    print(res.report.table(), file=sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK


def cmd_sdpa_export(args) -> int:
    spec = _load_spec(args.spec)
    frame = Frame.from_box(spec.box)
    lift = _lift(args, spec, frame)
    if args.point:
        prob = membership_problem(lift, frame.to_z(_vector(args.point, spec.n)).tolist())
    elif args.direction:
        ell = _vector(args.direction, spec.n)
        prob = linmin_problem(lift, ell / np.linalg.norm(ell))
    else:
        raise CliFailure("sdpa-export needs --point or --direction", EXIT_IO)
    if not args.out:
        raise CliFailure("sdpa-export needs --out FILE", EXIT_IO)
    try:
        write_sdpa(prob, args.out)
    except OSError as e:
        raise CliFailure(f"cannot write {args.out}: {e.strerror}", EXIT_IO) from None
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lmilift", description="Lifted LMI representations of convex semialgebraic sets.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, spec_required=True):
        p.add_argument("--spec", required=spec_required, help="ProblemSpec JSON file")
        p.add_argument("--out", help="write the JSON result here instead of stdout")
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--max-iter", type=int, default=200)
        p.add_argument("--psd-cap", type=int, default=400)

    def lift_opts(p):
        p.add_argument("--kind", choices=["schmudgen", "putinar", "sosconcave", "refined-schmudgen", "refined-putinar"])
        p.add_argument("-N", type=int, help="relaxation order (default: smallest admissible)")

    p = sub.add_parser("lift", help="dump the lifted LMI as JSON")
    common(p)
    lift_opts(p)
    p.add_argument("--raw", action="store_true", help="build in the original coordinates")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("classify", help="classify each constraint")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("reparam", help="concave reparametrization report")
    common(p)
    p.add_argument("--index", type=int, help="1-based constraint index (default: all)")
    p.set_defaults(func=cmd_reparam)

    p = sub.add_parser("solve", help="minimize a linear functional over the lift, or solve an SDPA file")
    common(p, spec_required=False)
    lift_opts(p)
    p.add_argument("--direction", help="comma-separated direction, normalized before use")
    p.add_argument("--sdpa", help="SDPA sparse file to solve")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("member", help="test a point against the projection of the lift")
    common(p)
    lift_opts(p)
    p.add_argument("--point", required=True)
    p.set_defaults(func=cmd_member)

    for name, func in (("sweep", cmd_sweep), ("pipeline", cmd_pipeline)):
        p = sub.add_parser(name, help="exactness sweep" if name == "sweep" else "classify, reparametrize, lift and sweep")
        common(p)
        p.add_argument("-K", type=int, help="number of random directions")
        p.add_argument("--seed", type=int)
        p.add_argument("--N-max", type=int)
        p.add_argument("--workers", type=int, default=1)
        if name == "sweep":
            lift_opts(p)
        else:
            p.add_argument("--variant", choices=["schmudgen", "putinar"], default="schmudgen")
        p.set_defaults(func=func)

    p = sub.add_parser("sdpa-export", help="write a membership or linmin SDP in SDPA format")
    common(p)
    lift_opts(p)
    p.add_argument("--point")
    p.add_argument("--direction")
    p.set_defaults(func=cmd_sdpa_export)
    return ap


def _join_vectors(argv: list[str]) -> list[str]:
    """Glue ``--point -1,0`` into ``--point=-1,0`` so argparse does not read a flag."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in ("--point", "--direction") and i + 1 < len(argv):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = _join_vectors(list(sys.argv[1:] if argv is None else argv))
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (EmptyRegionError, ReparamError, LiftError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MATH
    except ProblemError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
