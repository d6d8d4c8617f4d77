"""Problem specs, brute-force oracles and the empirical exactness procedures."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .lift import KINDS, MomentLift, build_lift, build_refined, build_sosconcave, linmin_problem, membership_problem, min_order
from .polyalg import Polynomial, format_polynomial, gradient, hessian, parse_polynomial
from .reparam import RegionSampler, ReparamError, concave_reparam, modified_hessian_M
from .sdpcore import SolverOptions, Status, solve, write_sdpa
from .soscert import SosStatus, kkt_multipliers, sos_concave_check

EXACT_THRESHOLD = 1e-4
GAP_FLOOR = -1e-6
PDLH_FAIL = 1e-3


class SpecError(ValueError):
    """Malformed or inconsistent problem spec."""


class EmptyRegionError(RuntimeError):
    pass


class PipelineAbort(RuntimeError):
    pass


@dataclass
class ProblemSpec:
    n: int
    gs: list[Polynomial]
    box: list[tuple[float, float]]
    kind: str = "schmudgen"
    N_range: tuple[int, int] | None = None
    grid_resolution: int = 2001
    sampler_resolution: int = 101
    seed: int = 0
    K: int = 20
    name: str = ""

    @property
    def m(self) -> int:
        return len(self.gs)

    @classmethod
    def from_dict(cls, d: dict) -> ProblemSpec:
        if not isinstance(d, dict):
            raise SpecError("spec must be a JSON object")
        try:
            n = int(d["n"])
            texts = d["gs"]
            box = [(float(lo), float(hi)) for lo, hi in d["box"]]
        except KeyError as e:
            raise SpecError(f"missing field {e.args[0]!r}") from None
        except (TypeError, ValueError) as e:
            raise SpecError(f"bad field value: {e}") from None
        if n < 1:
            raise SpecError("n must be positive")
        if not isinstance(texts, list) or not texts:
            raise SpecError("gs must be a nonempty list of polynomial strings")
        if "m" in d and int(d["m"]) != len(texts):
            raise SpecError(f"m = {d['m']} but {len(texts)} polynomials given")
        if len(box) != n or any(lo >= hi for lo, hi in box):
            raise SpecError("box needs one (low, high) pair per variable with low < high")
        gs = []
        for k, t in enumerate(texts):
            try:
                gs.append(parse_polynomial(str(t), n))
            except ValueError as e:
                raise SpecError(f"gs[{k}]: {e}") from None
        opts = d.get("options", {})
        kind = opts.get("kind", "schmudgen")
        if kind not in KINDS:
            raise SpecError(f"unknown lift kind {kind!r}")
        nr = opts.get("N")
        N_range = None
        if nr is not None:
            nr = [nr, nr] if isinstance(nr, int) else list(nr)
            if len(nr) != 2 or nr[0] > nr[1] or nr[0] < 1:
                raise SpecError("options.N must be an integer or [low, high]")
            N_range = (int(nr[0]), int(nr[1]))
        return cls(
            n, gs, box, kind, N_range,
            int(opts.get("grid_resolution", 2001)),
            int(opts.get("sampler_resolution", 101)),
            int(opts.get("seed", 0)),
            int(opts.get("K", 20)),
            str(d.get("name", "")),
        )

    @classmethod
    def from_json(cls, text: str) -> ProblemSpec:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | os.PathLike) -> ProblemSpec:
        return cls.from_json(Path(path).read_text())

    def to_dict(self) -> dict:
        opts = {
            "kind": self.kind,
            "grid_resolution": self.grid_resolution,
            "sampler_resolution": self.sampler_resolution,
            "seed": self.seed,
            "K": self.K,
        }
        if self.N_range is not None:
            opts["N"] = list(self.N_range)
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "gs": [format_polynomial(g) for g in self.gs],
            "box": [list(b) for b in self.box],
            "options": opts,
        }

    def sampler(self, n_quasi: int = 10_000) -> RegionSampler:
        return RegionSampler(self.gs, self.box, self.sampler_resolution, n_quasi, self.seed)

    def check_box(self) -> None:
        """Raise if an accepted grid point sits on the box boundary."""
        if self.sampler(n_quasi=0).touches_box():
            raise SpecError("the bounding box does not contain S: a sample of S lies on its boundary")


# ---------------------------------------------------------------------------
# grid oracle


class GridOracle:
    """Brute-force ``min ell^T x`` over accepted grid points, refined by SLSQP."""

    def __init__(self, gs: Sequence[Polynomial], box, resolution: int = 2001, chunk: int = 1 << 20):
        self.gs = list(gs)
        self.box = np.asarray(box, dtype=float)
        self.resolution = resolution
        axes = [np.linspace(lo, hi, resolution) for lo, hi in self.box]
        total = resolution ** len(axes)
        keep = []
        for start in range(0, total, chunk):
            flat = np.arange(start, min(start + chunk, total))
            idx = np.unravel_index(flat, (resolution,) * len(axes))
            X = np.stack([ax[i] for ax, i in zip(axes, idx)], axis=1)
            ok = np.ones(X.shape[0], dtype=bool)
            for g in self.gs:
                ok &= g.eval_many(X) >= 0
            keep.append(X[ok])
        self.points = np.vstack(keep)
        self._grads = [gradient(g) for g in self.gs]

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    def _refine(self, ell: np.ndarray, x0: np.ndarray, iters: int) -> np.ndarray:
        cons = [
            {
                "type": "ineq",
                "fun": (lambda x, g=g: float(g.eval_many(x)[0])),
                "jac": (lambda x, d=d: np.array([float(p.eval_many(x)[0]) for p in d])),
            }
            for g, d in zip(self.gs, self._grads)
        ]
        res = minimize(
            lambda x: float(ell @ x), x0, jac=lambda x: ell, method="SLSQP",
            constraints=cons, options={"maxiter": iters, "ftol": 1e-14},
        )
        return res.x

    def minimize(self, ell, refine_iters: int = 20) -> tuple[float, np.ndarray]:
        if self.empty:
            raise EmptyRegionError("no grid point satisfies every constraint")
        ell = np.asarray(ell, dtype=float)
        vals = self.points @ ell
        k = int(np.argmin(vals))
        best, xbest = float(vals[k]), self.points[k].copy()
        if refine_iters > 0:
            x = self._pull_back(xbest, self._refine(ell, xbest, refine_iters))
            if float(ell @ x) < best:
                best, xbest = float(ell @ x), x
        return best, xbest

    def _feasible(self, x) -> bool:
        return all(float(g.eval_many(x)[0]) >= 0 for g in self.gs)

    def _pull_back(self, x0: np.ndarray, x: np.ndarray, steps: int = 60) -> np.ndarray:
        """Last feasible point on the segment from the feasible ``x0`` to ``x``."""
        if not np.all(np.isfinite(x)):
            return x0
        if self._feasible(x):
            return x
        lo, hi = 0.0, 1.0
        for _ in range(steps):
            mid = (lo + hi) / 2
            if self._feasible(x0 + mid * (x - x0)):
                lo = mid
            else:
                hi = mid
        return x0 + lo * (x - x0)


def grid_min(gs, ell, box, resolution: int = 2001, refine_iters: int = 20) -> tuple[float, np.ndarray]:
    return GridOracle(gs, box, resolution).minimize(ell, refine_iters)


@dataclass(frozen=True)
class Frame:
    """Affine change of coordinates ``x = center + radius * z`` mapping the box into [-1, 1]^n.

    Lifts are equivariant under affine maps, so exactness is unaffected, while
    moments of bounded size keep the interior-point iterations well conditioned.
    """

    center: tuple[Fraction, ...]
    radius: Fraction

    @classmethod
    def from_box(cls, box) -> Frame:
        box = np.asarray(box, dtype=float)
        center = tuple(Fraction(repr(float((lo + hi) / 2))) for lo, hi in box)
        radius = Fraction(repr(float(np.max(box[:, 1] - box[:, 0]) / 2)))
        return cls(center, radius)

    @classmethod
    def identity(cls, n: int) -> Frame:
        return cls((Fraction(0),) * n, Fraction(1))

    def pull(self, p: Polynomial) -> Polynomial:
        """``p(center + radius * z)`` as a polynomial in ``z``."""
        n = p.nvars
        subs = [Polynomial.variable(i, n) * self.radius + self.center[i] for i in range(n)]
        return p.compose(subs)

    def to_z(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.array([float(c) for c in self.center])) / float(self.radius)

    def value(self, ell, z_value: float) -> float:
        """``ell^T x`` given ``ell^T z``."""
        return float(np.dot(ell, [float(c) for c in self.center])) + float(self.radius) * z_value

    def to_dict(self) -> dict:
        return {"center": [float(c) for c in self.center], "radius": float(self.radius)}


def random_directions(n: int, K: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((K, n))
    return L / np.linalg.norm(L, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# classification


@dataclass
class Classification:
    label: str
    M: float | None = None
    sos_status: str = ""
    residual: float | None = None

    def __str__(self):
        if self.label == "strictly-quasi-concave":
            return f"strictly-quasi-concave(M={self.M:g})"
        return self.label

    def to_dict(self) -> dict:
        return {"label": self.label, "M": self.M, "sos_status": self.sos_status, "residual": self.residual}


def classify(g: Polynomial, sampler: RegionSampler, opts: SolverOptions | None = None) -> Classification:
    res = sos_concave_check(g, opts)
    resid = res.certificate.residual if res.certificate is not None else None
    if res.status == SosStatus.SOS:
        return Classification("sos-concave", None, res.status.value, resid)
    M = modified_hessian_M(g, sampler)
    if M is not None:
        return Classification("strictly-quasi-concave", float(M), res.status.value, resid)
    return Classification("unclassified", None, res.status.value, resid)


# ---------------------------------------------------------------------------
# PDLH probe


@dataclass
class PdlhRow:
    ell: list[float]
    u: list[float]
    lam: list[float]
    kkt_residual: float
    min_eig: float


@dataclass
class PdlhReport:
    rows: list[PdlhRow]
    worst_eig: float
    failures: list[int]
    kkt_failures: list[int]
    threshold: float = PDLH_FAIL

    def to_dict(self) -> dict:
        return {
            "rows": [r.__dict__ for r in self.rows],
            "worst_eig": self.worst_eig,
            "failures": self.failures,
            "kkt_failures": self.kkt_failures,
            "threshold": self.threshold,
        }


def pdlh_probe(
    gs: Sequence[Polynomial],
    sampler: RegionSampler,
    K: int,
    seed: int,
    directions=None,
    oracle: GridOracle | None = None,
    kkt_tol: float = 1e-5,
) -> PdlhReport:
    """Lagrangian Hessian at grid minimizers for ``K`` random directions plus any given ones."""
    X = sampler.points
    for i, g in enumerate(gs):
        worst = np.linalg.eigvalsh(-hessian(g).eval_many(X))[:, 0].min()
        if worst < -1e-8:
            raise ValueError(f"g{i + 1} is not concave on the samples (eigenvalue {worst:.3e})")
    ells = list(random_directions(sampler.n, K, seed)) if K > 0 else []
    if directions is not None:
        ells += [np.asarray(d, float) / np.linalg.norm(d) for d in directions]
    if not ells:
        return PdlhReport([], math.inf, [], [])
    oracle = oracle or GridOracle(gs, sampler.box, 2001)
    H = [hessian(g) for g in gs]
    rows, fails, kfails = [], [], []
    for k, ell in enumerate(ells):
        _, u = oracle.minimize(ell)
        lam, resid = kkt_multipliers(gs, ell, u)
        L = -sum(l * h.eval_many(u[None, :])[0] for l, h in zip(lam, H))
        eig = float(np.linalg.eigvalsh(np.atleast_2d(L))[0])
        rows.append(PdlhRow(ell.tolist(), u.tolist(), lam.tolist(), resid, eig))
        if resid > kkt_tol:
            kfails.append(k)
        if eig <= PDLH_FAIL:
            fails.append(k)
    return PdlhReport(rows, min(r.min_eig for r in rows), fails, kfails)


# ---------------------------------------------------------------------------
# exactness sweep


@dataclass
class SweepRow:
    ell: list[float]
    lift_value: float | None
    oracle_value: float
    gap: float | None
    status: str
    flagged: bool


@dataclass
class SweepLevel:
    N: int
    rows: list[SweepRow]

    @property
    def max_gap(self) -> float:
        gaps = [r.gap for r in self.rows if r.gap is not None]
        return max(gaps) if gaps else math.nan

    @property
    def min_gap(self) -> float:
        gaps = [r.gap for r in self.rows if r.gap is not None]
        return min(gaps) if gaps else math.nan

    @property
    def flagged(self) -> list[int]:
        return [k for k, r in enumerate(self.rows) if r.flagged]


@dataclass
class ExactnessReport:
    kind: str
    seed: int
    K: int
    levels: list[SweepLevel]
    threshold: float = EXACT_THRESHOLD
    classification: list[str] = field(default_factory=list)
    frame: dict = field(default_factory=dict)

    @property
    def exact_N(self) -> int | None:
        for lv in self.levels:
            if not lv.flagged and lv.max_gap <= self.threshold:
                return lv.N
        return None

    @property
    def max_gap(self) -> float:
        return self.levels[-1].max_gap if self.levels else math.nan

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "K": self.K,
            "threshold": self.threshold,
            "classification": self.classification,
            "exact_N": self.exact_N,
            "frame": self.frame,
            "levels": [
                {
                    "N": lv.N,
                    "max_gap": lv.max_gap,
                    "min_gap": lv.min_gap,
                    "flagged": lv.flagged,
                    "rows": [r.__dict__ for r in lv.rows],
                }
                for lv in self.levels
            ],
        }

    def table(self) -> str:
        lines = [f"kind={self.kind} seed={self.seed} K={self.K}"]
        lines.append(f"{'N':>3} {'max gap':>12} {'min gap':>12} {'flagged':>8}")
        for lv in self.levels:
            lines.append(f"{lv.N:>3} {lv.max_gap:>12.3e} {lv.min_gap:>12.3e} {len(lv.flagged):>8}")
        ex = self.exact_N
        lines.append(f"empirically exact at N={ex}" if ex is not None else "not empirically exact in the tested range")
        return "\n".join(lines)


def solve_linmin(lift: MomentLift, ell, opts: SolverOptions | None = None):
    return solve(linmin_problem(lift, ell), opts)


def solve_member(lift: MomentLift, point, opts: SolverOptions | None = None):
    return solve(membership_problem(lift, point), opts)


def _sweep_level(lift, ells, oracle_vals, opts, workers, frame: Frame) -> list[SweepRow]:
    def one(k):
        sol = solve_linmin(lift, ells[k], opts)
        if sol.status == Status.OPTIMAL:
            value = frame.value(ells[k], sol.objective)
            gap = oracle_vals[k] - value
            return SweepRow(ells[k].tolist(), value, oracle_vals[k], gap, sol.status.value, gap < GAP_FLOOR)
        return SweepRow(ells[k].tolist(), None, oracle_vals[k], None, sol.status.value, True)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(one, range(len(ells))))
    return [one(k) for k in range(len(ells))]


def exactness_sweep(
    gs: Sequence[Polynomial],
    box,
    kind: str,
    N_range: tuple[int, int] | None,
    K: int,
    seed: int,
    ps: Sequence[Polynomial] = (),
    oracle: GridOracle | None = None,
    resolution: int = 2001,
    threshold: float = EXACT_THRESHOLD,
    stop_at_exact: bool = True,
    opts: SolverOptions | None = None,
    workers: int = 1,
    frame: Frame | None = None,
) -> ExactnessReport:
    """Compare lift lower bounds with the grid oracle over ``K`` seeded directions per order.

    Lifts are built in ``frame`` coordinates (default: the box mapped onto [-1, 1]^n).
    """
    gs = list(gs)
    n = gs[0].nvars
    oracle = oracle or GridOracle(gs, box, resolution)
    frame = frame or Frame.from_box(box)
    gs = [frame.pull(g) for g in gs]
    ps = [frame.pull(p) for p in ps]
    ells = random_directions(n, K, seed)
    oracle_vals = [oracle.minimize(e)[0] for e in ells]
    if kind == "sosconcave":
        orders = [None]
    else:
        lo = min_order(gs, kind, ps)
        if N_range is None:
            N_range = (lo, lo)
        orders = list(range(max(lo, N_range[0]), max(lo, N_range[1]) + 1))
    report = ExactnessReport(kind, seed, K, [], threshold, frame=frame.to_dict())
    for N in orders:
        if kind == "sosconcave":
            lift = build_sosconcave(gs)
        elif kind.startswith("refined"):
            lift = build_refined(ps or gs, gs, N, kind.split("-", 1)[1])
        else:
            lift = build_lift(kind, gs, N)
        report.levels.append(SweepLevel(lift.order, _sweep_level(lift, ells, oracle_vals, opts, workers, frame)))
        if stop_at_exact and report.exact_N is not None:
            break
    return report


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class PipelineResult:
    classification: list[Classification]
    ps: list[Polynomial]
    reparam_reports: dict[int, dict]
    report: ExactnessReport
    artifact_min_row: float
    lift: MomentLift

    def to_dict(self) -> dict:
        return {
            "classification": [str(c) for c in self.classification],
            "ps": [format_polynomial(p.to_float()) for p in self.ps],
            "reparam": {str(k): v for k, v in sorted(self.reparam_reports.items())},
            "artifact_min_scalar_row": self.artifact_min_row,
            "sweep": self.report.to_dict(),
        }


def pipeline(
    spec: ProblemSpec,
    out: str | os.PathLike | None = None,
    variant: str = "schmudgen",
    N_max: int | None = None,
    opts: SolverOptions | None = None,
    oracle: GridOracle | None = None,
    workers: int = 1,
) -> PipelineResult:
    """Classify, reparametrize where needed, build the refined lift and sweep it."""
    sampler = spec.sampler()
    labels = [classify(g, sampler, opts) for g in spec.gs]
    bad = [i for i, c in enumerate(labels) if c.label == "unclassified"]
    if bad:
        raise PipelineAbort(
            "; ".join(
                f"g{i + 1} = {format_polynomial(spec.gs[i])} is neither sos-concave nor strictly "
                f"quasi-concave on S (modified Hessian singular for every scheduled M)"
                for i in bad
            )
        )
    ps, reports = [], {}
    for i, (g, c) in enumerate(zip(spec.gs, labels)):
        if c.label == "sos-concave":
            ps.append(g)
            continue
        try:
            r = concave_reparam(g, sampler)
        except ReparamError as e:
            raise PipelineAbort(f"g{i + 1}: reparametrization failed: {e}") from None
        ps.append(r.p)
        reports[i] = r.report()
        c.label = "reparametrized"
    oracle = oracle or GridOracle(spec.gs, spec.box, spec.grid_resolution)
    if all(c.label == "sos-concave" for c in labels):
        kind, N_range = "sosconcave", None
    else:
        kind = f"refined-{variant}"
        lo = min_order(spec.gs, kind, ps)
        hi = N_max if N_max is not None else (spec.N_range[1] if spec.N_range else lo)
        N_range = (lo, max(lo, hi))
    report = exactness_sweep(
        spec.gs, spec.box, kind, N_range, spec.K, spec.seed, ps, oracle, opts=opts, workers=workers
    )
    report.classification = [str(c) for c in labels]
    N_last = report.levels[-1].N
    frame = Frame.from_box(spec.box)
    gz, pz = [frame.pull(g) for g in spec.gs], [frame.pull(p) for p in ps]
    lift = build_sosconcave(gz) if kind == "sosconcave" else build_refined(pz, gz, N_last, variant)
    pts = sampler.points
    pick = pts[np.linspace(0, len(pts) - 1, min(100, len(pts))).astype(int)]
    min_row = min((lift.check_point(frame.to_z(x))[1] for x in pick), default=math.inf)
    result = PipelineResult(labels, ps, reports, report, float(min_row), lift)
    if out is not None:
        write_artifacts(result, spec, Path(out), opts)
    return result


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def write_artifacts(result: PipelineResult, spec: ProblemSpec, out: Path, opts=None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    dump_json(spec.to_dict(), out / "spec.json")
    dump_json(result.to_dict(), out / "report.json")
    dump_json(result.lift.to_dict(), out / "lift.json")
    for i, rep in sorted(result.reparam_reports.items()):
        dump_json(rep, out / f"reparam_g{i + 1}.json")
    sd = out / "sdpa"
    sd.mkdir(exist_ok=True)
    for k, row in enumerate(result.report.levels[-1].rows):
        write_sdpa(linmin_problem(result.lift, row.ell), sd / f"linmin_{k:03d}.dat-s")
