"""Acceptance criteria 1-11, one check each.

Each check returns ``(passed, detail)``; results are printed one line per
criterion in the pytest terminal summary, or directly with
``python tests/test_acceptance.py``.
"""

import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from cases import MONOTONE_INSTANCES, sos_convex_case
from lmilift.harness import GridOracle, ProblemSpec, exactness_sweep, pdlh_probe, pipeline
from lmilift.lift import build_putinar, build_schmudgen, linmin_problem, quartic_lift_problem
from lmilift.polyalg import MatrixPolynomial, matpoly_norm, parse_polynomial, poly_norm
from lmilift.reparam import (
    RegionSampler,
    modified_hessian_check,
    modified_hessian_M,
    phi_polynomial,
    polynomial_hessians,
    psi_coefficients,
)
from lmilift.sdpcore import ConicProblem, Status, dumps_sdpa, loads_sdpa, solve
from lmilift.soscert import hessian_form, hessian_sos_certificate, lagrange_decompose, sos_concave_check
from oracles import barrier_sdp, random_sdp

RESULTS: dict[int, tuple[bool, str]] = {}


def P(text, n=2):
    return parse_polynomial(text, n)


T = [P("1 - x1^4 - x2^4")]
T_BOX = [[-1.1, 1.1], [-1.1, 1.1]]
EX1 = {
    "n": 2,
    "gs": ["x1*x2 - 1", "1 - (x1-1)^2 - (x2-1)^2"],
    "box": [[-0.5, 2.5], [-0.5, 2.5]],
    "options": {"N": [1, 4], "K": 20, "seed": 3},
}


def criterion_1():
    t0 = time.perf_counter()
    cert = sos_concave_check(T[0])
    resid = cert.certificate.residual if cert.certificate else math.inf
    rep = exactness_sweep(T, T_BOX, "sosconcave", None, 50, 7, oracle=GridOracle(T, T_BOX, 2001))
    dt = time.perf_counter() - t0
    gap = rep.levels[0].max_gap
    ok = cert.is_sos and resid <= 1e-7 and gap <= 1e-4 and not rep.levels[0].flagged and dt <= 60
    return ok, f"sos residual {resid:.1e}, max gap {gap:.1e} over 50 directions, {dt:.1f} s"


def criterion_2():
    rng = np.random.default_rng(2)
    wrong = tested = 0
    while tested < 200:
        x = rng.uniform(-1.2, 1.2, 2)
        gx = 1 - x[0] ** 4 - x[1] ** 4
        if abs(gx) <= 1e-3:
            continue
        tested += 1
        status = solve(quartic_lift_problem(x)).status
        inside = status == Status.OPTIMAL
        if status not in (Status.OPTIMAL, Status.INFEASIBLE) or inside != (gx > 0):
            wrong += 1
    return wrong == 0, f"{wrong} disagreements on {tested} points"


def criterion_3():
    spec = ProblemSpec.from_dict(EX1)
    s = spec.sampler()
    g1 = spec.gs[0]
    M = modified_hessian_M(g1, s)
    low = modified_hessian_check(g1, s, F(2, 5))
    grid = s.grid_points()
    on_grid = bool(np.any(np.all(np.isclose(grid, low.worst_point), axis=1)))
    cusp = RegionSampler([P("1/4 - x1^2 - x2^2")], [[-0.6, 0.6]] * 2)
    M2 = modified_hessian_M(P("x2 - x1^3"), cusp)
    ok = M is not None and F(1, 2) < M <= 1 and not low.passed and on_grid and M2 is None
    return ok, f"M = {M}; M = 0.4 fails at {low.worst_point.tolist()} (eig {low.min_eig:.2f}); cusp M = {M2}"


def criterion_4():
    parts, ok = [], True
    for M in (1, 2, 4):
        phi = phi_polynomial(M)
        series = psi_coefficients(M, 1)
        a0, a1 = float(phi.coeffs[0]), float(phi.coeffs[1])
        good = (
            all(m > 0 for m in phi.margins)
            and abs(a0 - 1) <= 1e-12
            and abs(a1 + (M + 1) / 2) <= 1e-12
            and phi.coeffs[:2] == series
        )
        ok &= good
        parts.append(f"M={M}: deg {phi.degree}, min margin {min(phi.margins):.2e}")
    return ok, "; ".join(parts)


def criterion_5():
    spec = ProblemSpec.from_dict(EX1)
    res = pipeline(spec)
    p1 = res.ps[0]
    grid = RegionSampler(spec.gs, spec.box, 201, 0).grid_points()
    eig = float(np.linalg.eigvalsh(-polynomial_hessians(p1, grid))[:, 0].min())
    lv = [lv for lv in res.report.levels if lv.N <= 4]
    best = min(lv_.max_gap for lv_ in lv)
    ok = eig >= 1e-8 and best <= 1e-3 and res.report.K == 20
    ns = ", ".join(f"N={lv_.N}: {lv_.max_gap:.1e}" for lv_ in lv)
    return ok, f"min eig of -hess p1 on {len(grid)} grid points {eig:.2e}; max gap {ns}"


def criterion_6():
    rng = np.random.default_rng(2024)
    worst_res, worst_eig, nonzero = 0.0, math.inf, 0
    for _ in range(20):
        p, u = sos_convex_case(rng)
        _, resid = hessian_form(p, u)
        nonzero += not resid.is_zero()
        cert = hessian_sos_certificate(p, u)
        worst_res = max(worst_res, cert.residual)
        worst_eig = min(worst_eig, cert.min_eig)
    ok = nonzero == 0 and worst_res <= 1e-7 and worst_eig >= -1e-9
    return ok, f"exact identity failures {nonzero}/20, worst Gram residual {worst_res:.1e}, min eig {worst_eig:.1e}"


def criterion_7():
    disk = [P("1 - x1^2 - x2^2")]
    cases = [(disk, (1, 0), (-1, 0), F(1, 2)), (disk, (0, 1), (0, -1), F(1, 2))]
    cases += [(T, e, tuple(-v for v in e), F(1, 4)) for e in [(1, 0), (-1, 0), (0, 1), (0, -1)]]
    residuals = [lagrange_decompose(gs, ell, u, [lam]) for gs, ell, u, lam in cases]
    ok = all(d.exact and d.residual == 0 for d in residuals)
    return ok, f"{len(cases)} exact decompositions, residuals {sorted({d.residual for d in residuals})}"


def criterion_8():
    rng = np.random.default_rng(8)
    agree, worst = 0, 0.0
    for k in range(50):
        c, A0, As = random_sdp(rng, feasible=k % 5 != 0)
        status, value, _ = barrier_sdp(c, A0, As)
        prob = ConicProblem(len(c), np.asarray(c), [np.concatenate([b[None], np.stack(bs)]) for b, bs in zip(A0, As)])
        sol = solve(prob)
        same = sol.status.value == status
        if same and value is not None:
            worst = max(worst, abs(sol.objective - value))
            same = abs(sol.objective - value) <= 1e-4
        agree += same
    B = np.zeros((2, 2, 2))
    B[0] = np.eye(2)
    B[1] = [[0, 1], [1, 0]]
    hankel = solve(ConicProblem(1, np.array([1.0]), [B]))
    hank_ok = hankel.status == Status.OPTIMAL and abs(hankel.objective + 1) <= 1e-8
    trips = 0
    for k in range(20):
        c, A0, As = random_sdp(rng)
        prob = ConicProblem(len(c), np.asarray(c), [np.concatenate([b[None], np.stack(bs)]) for b, bs in zip(A0, As)])
        back = loads_sdpa(dumps_sdpa(prob))
        trips += np.array_equal(back.c, prob.c) and all(np.array_equal(a, b) for a, b in zip(back.blocks, prob.blocks))
    ok = agree == 50 and hank_ok and trips == 20
    return ok, (
        f"{agree}/50 agree with the barrier oracle (worst value error {worst:.1e}); "
        f"Hankel {hankel.objective:.10f}; {trips}/20 bit-exact round trips"
    )


def _linmin(lift, ell):
    sol = solve(linmin_problem(lift, ell))
    return sol.objective if sol.status == Status.OPTIMAL else math.nan


def criterion_9():
    rng = np.random.default_rng(9)
    bad = []
    for name, gs, sch_orders, put_orders in MONOTONE_INSTANCES:
        sch_lifts = {N: build_schmudgen(gs, N) for N in sch_orders}
        put_lifts = {N: build_putinar(gs, N) for N in put_orders}
        for _ in range(10):
            ell = rng.standard_normal(2)
            ell /= np.linalg.norm(ell)
            sch = {N: _linmin(L, ell) for N, L in sch_lifts.items()}
            put = {N: _linmin(L, ell) for N, L in put_lifts.items()}
            for vals in (sch, put):
                seq = [vals[N] for N in sorted(vals)]
                if any(not (a <= b + 1e-6) for a, b in zip(seq, seq[1:])):
                    bad.append(f"{name} not monotone {seq}")
            for N in set(sch) & set(put):
                if not sch[N] >= put[N] - 1e-6:
                    bad.append(f"{name} N={N} schmudgen {sch[N]} < putinar {put[N]}")
    return not bad, f"3 instances x 10 directions, {len(bad)} violations" + (f": {bad[:2]}" if bad else "")


def criterion_10():
    disk = [P("1 - x1^2 - x2^2")]
    d = pdlh_probe(disk, RegionSampler(disk, T_BOX), 50, 0)
    axes = [[1, 0], [-1, 0], [0, 1], [0, -1]]
    t = pdlh_probe(T, RegionSampler(T, T_BOX), 0, 0, directions=axes)
    axis_eigs = [r.min_eig for r in t.rows]
    ok = d.worst_eig >= 0.9 and not d.failures and t.failures == [0, 1, 2, 3] and max(axis_eigs) <= 1e-3
    return ok, f"disk worst eig {d.worst_eig:.4f} over 50 directions; T axis eigs {[f'{e:.1e}' for e in axis_eigs]}"


def criterion_11():
    x1, x2 = (P(v) for v in ("x1", "x2"))
    polys = [
        ("x1*x2", 2, F(1, 2)),
        ("5", 2, F(5)),
        ("x1^2 + x1*x2", 2, F(1)),
        ("6*x1^2*x2", 2, F(2)),
        ("x1*x2*x3", 3, F(1, 6)),
        ("-4*x1^3 + 3*x2", 2, F(4)),
        ("12*x1^2*x2^2", 2, F(2)),
        ("1/3*x1 - 7", 2, F(7)),
        ("10*x1^3*x2", 2, F(5, 2)),
        ("3*x1^2*x2*x3", 3, F(1, 4)),
    ]
    bad = [t for t, n, want in polys if poly_norm(P(t, n)) != want]
    mats = [
        (MatrixPolynomial.from_rows([[x1, 0], [0, x1]]), 1.0),
        (MatrixPolynomial.from_rows([[0, x1 * x2], [x1 * x2, 0]]), 0.5),
        (MatrixPolynomial.from_rows([[x1 * x1 * 12, 0], [0, x2 * x2 * 12]]), 12.0),
        (MatrixPolynomial.from_rows([[1, x1], [x1, 1]]), 1.0),
    ]
    bad += [str(k) for k, (M, want) in enumerate(mats) if matpoly_norm(M) != want]
    scalar = P("6*x1^2*x2")
    if matpoly_norm(MatrixPolynomial.from_rows([[scalar]])) != float(poly_norm(scalar)):
        bad.append("scalar")
    return not bad, f"10 polynomial norms and 4 matrix norms exact, {len(bad)} mismatches"


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 12)}


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    ok, detail = CRITERIA[k]()
    RESULTS[k] = (ok, detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


if __name__ == "__main__":
    for k, fn in CRITERIA.items():
        ok, detail = fn()
        print(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
