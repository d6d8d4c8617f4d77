"""Dense primal-dual interior-point method on the homogeneous self-dual embedding.

The user problem ``min c^T y s.t. A_0 + sum y_j A_j >= 0`` is treated as the
dual of the standard form pair

    (P)  min <C, X>   s.t. <G_j, X> = b_j,  X >= 0
    (D)  max b^T y    s.t. sum y_j G_j + S = C, S >= 0

with ``C = A_0``, ``G_j = -A_j`` and ``b = -c``. Search directions use
Nesterov-Todd scaling and a Mehrotra predictor-corrector.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
import scipy.linalg

from .problem import ConicProblem, ConicSolution, ProblemError, SolverOptions, Status

log = logging.getLogger(__name__)


def _inner(A, B):
    return float(np.sum(A * B))


def _factor(M):
    """Lower factor ``L`` with ``M = L L^T``; eigenvalue fallback when Cholesky fails."""
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh((M + M.T) / 2)
        w = np.maximum(w, max(float(w[-1]), 1e-300) * 1e-15)
        return V * np.sqrt(w)


def _max_step(lam, dtilde):
    """Largest alpha with ``Lam + alpha*dtilde >= 0`` for diagonal ``Lam``."""
    s = 1.0 / np.sqrt(lam)
    M = dtilde * np.outer(s, s)
    if not np.all(np.isfinite(M)):
        raise np.linalg.LinAlgError("non-finite scaled direction")
    e = np.linalg.eigvalsh((M + M.T) / 2)[0]
    return np.inf if e >= 0 else -1.0 / e


class _Scaling:
    __slots__ = ("R", "Rinv", "W", "lam")

    def __init__(self, X, S):
        Lx = _factor(X)
        Ls = _factor(S)
        U, lam, Vt = np.linalg.svd(Ls.T @ Lx)
        lam = np.maximum(lam, 1e-300)
        self.lam = lam
        self.R = (Lx @ Vt.T) / np.sqrt(lam)
        self.Rinv = np.linalg.solve(self.R, np.eye(len(lam)))
        self.W = self.R @ self.R.T


def _trivial(prob: ConicProblem, opts: SolverOptions) -> ConicSolution:
    """Problems with no free variables or no blocks."""
    y = np.zeros(prob.nvars)
    if not prob.blocks:
        if np.any(prob.c != 0):
            ray = -prob.c / np.linalg.norm(prob.c)
            sol = ConicSolution(Status.UNBOUNDED, ray, -np.inf, np.inf, 0.0)
            return sol
        return ConicSolution(Status.OPTIMAL, y, 0.0, 0.0, 0.0, dual=[])
    # nvars == 0: just check the constant blocks
    worst = np.inf
    witness = None
    for k, b in enumerate(prob.blocks):
        w, V = np.linalg.eigh(b[0])
        if w[0] < worst:
            worst = w[0]
            witness = (k, V[:, 0])
    if worst >= -opts.tol:
        dual = [np.zeros_like(b[0]) for b in prob.blocks]
        return ConicSolution(Status.OPTIMAL, y, 0.0, 0.0, max(0.0, -worst), dual=dual)
    k, v = witness
    cert = [np.zeros_like(b[0]) for b in prob.blocks]
    cert[k] = np.outer(v, v) / -worst
    return ConicSolution(
        Status.INFEASIBLE, y, np.nan, np.nan, -worst, certificate=cert, certificate_residual=0.0
    )


def solve(prob: ConicProblem, opts: SolverOptions | None = None) -> ConicSolution:
    """Solve ``prob``; deterministic for identical inputs and options.

    Linearly dependent constraint matrices are removed first: ``y = U z`` with
    ``U`` spanning the row space of the stacked ``A_j``.
    """
    opts = opts or SolverOptions()
    if prob.psd_dim > opts.psd_cap:
        raise ProblemError(f"total PSD dimension {prob.psd_dim} exceeds cap {opts.psd_cap}")
    if prob.nvars == 0 or not prob.blocks:
        return _trivial(prob, opts)
    V = np.concatenate([b[1:].reshape(prob.nvars, -1) for b in prob.blocks], axis=1)
    U, sv, _ = np.linalg.svd(V, full_matrices=True)
    data_scale = max(1.0, max(float(np.max(np.abs(b))) for b in prob.blocks))
    rank = int(np.sum(sv > max(sv[0] if sv.size else 0.0, data_scale) * 1e-12))
    if rank == prob.nvars:
        return _solve_hsd(prob, opts)
    Ur, Un = U[:, :rank], U[:, rank:]
    reduced = lambda cost: ConicProblem(
        rank, cost, [np.concatenate([b[:1], np.tensordot(Ur.T, b[1:], axes=1)]) for b in prob.blocks], prob.tag
    )
    drift = Un.T @ prob.c
    if np.linalg.norm(drift) > 1e-12 * max(1.0, float(np.linalg.norm(prob.c))):
        # the objective moves along directions the constraints cannot see
        feas = _solve_hsd(reduced(np.zeros(rank)), opts) if rank else _trivial(reduced(np.zeros(0)), opts)
        if feas.status == Status.OPTIMAL:
            ray = -Un @ drift
            return ConicSolution(Status.UNBOUNDED, ray / -float(prob.c @ ray), -np.inf, np.inf, 0.0, iterations=feas.iterations)
        if feas.status == Status.INFEASIBLE:
            return ConicSolution(
                Status.INFEASIBLE, np.zeros(prob.nvars), np.nan, np.nan, np.nan,
                certificate=feas.certificate, certificate_residual=feas.certificate_residual, iterations=feas.iterations,
            )
        return ConicSolution(feas.status, np.zeros(prob.nvars), np.nan, np.nan, np.nan, iterations=feas.iterations)
    sub = reduced(Ur.T @ prob.c)
    sol = _solve_hsd(sub, opts) if rank else _trivial(sub, opts)
    y = Ur @ sol.y if sol.y is not None and sol.y.size == rank else np.zeros(prob.nvars)
    obj = prob.objective(y) if sol.status in (Status.OPTIMAL, Status.NUMERICAL_LIMIT) else sol.objective
    return ConicSolution(
        sol.status, y, obj, sol.gap, sol.primal_residual, dual=sol.dual, iterations=sol.iterations,
        certificate=sol.certificate, certificate_residual=sol.certificate_residual,
    )


def _solve_hsd(prob: ConicProblem, opts: SolverOptions) -> ConicSolution:

    m = prob.nvars
    # column scaling of the free variables
    colnorm = np.zeros(m)
    for b in prob.blocks:
        colnorm = np.maximum(colnorm, np.sqrt(np.sum(b[1:] ** 2, axis=(1, 2))))
    unused = colnorm == 0
    if np.any(unused & (prob.c != 0)):
        ray = np.where(unused, -np.sign(prob.c), 0.0)
        return ConicSolution(Status.UNBOUNDED, ray, -np.inf, np.inf, 0.0)
    scale = np.where(unused, 1.0, 1.0 / np.where(unused, 1.0, colnorm))
    keep = ~unused
    c = prob.c[keep] * scale[keep]
    A = [b[1:][keep] * scale[keep][:, None, None] for b in prob.blocks]
    C = [b[0].copy() for b in prob.blocks]
    # normalize data magnitudes so the embedding stays balanced
    cnorm = max(1.0, float(np.linalg.norm(c)))
    Cnorm = max(1.0, float(np.sqrt(sum(_inner(Ck, Ck) for Ck in C))))
    c = c / cnorm
    C = [Ck / Cnorm for Ck in C]
    mk = int(keep.sum())
    b_vec = -c
    dims = [Ck.shape[0] for Ck in C]
    nu = sum(dims)

    X = [np.eye(d) for d in dims]
    S = [np.eye(d) for d in dims]
    y = np.zeros(mk)
    tau = kappa = 1.0

    def G_op(Ms):  # G(X)_j = -sum <A_kj, X_k>
        out = np.zeros(mk)
        for Ak, Mk in zip(A, Ms):
            out -= np.tensordot(Ak, Mk, axes=([1, 2], [0, 1]))
        return out

    def Gt_op(v):  # sum v_j G_j  per block
        return [-np.tensordot(v, Ak, axes=1) for Ak in A]

    status = Status.NUMERICAL_LIMIT
    it = 0
    info = {}
    best = None
    polish = 0
    for it in range(1, opts.max_iter + 1):
        rp = G_op(X) - b_vec * tau
        GtY = Gt_op(y)
        rd = [g + s - Ck * tau for g, s, Ck in zip(GtY, S, C)]
        cx = sum(_inner(Ck, Xk) for Ck, Xk in zip(C, X))
        by = float(b_vec @ y)
        rg = kappa + cx - by
        xs = sum(_inner(Xk, Sk) for Xk, Sk in zip(X, S))
        mu = (xs + tau * kappa) / (nu + 1)

        pres = np.linalg.norm(rp) / tau / (1 + np.linalg.norm(b_vec))
        dres = np.sqrt(sum(_inner(r, r) for r in rd)) / tau / (1 + np.sqrt(sum(_inner(Ck, Ck) for Ck in C)))
        pobj = cx / tau
        dobj = by / tau
        gap = abs(pobj - dobj)
        info = dict(pres=pres, dres=dres, pobj=pobj, dobj=dobj, gap=gap, tau=tau, kappa=kappa, mu=mu, xs=xs / tau**2)
        log.debug("iter %d %s", it, info)
        # relative gap as in SDPT3: |p - d| / (1 + |p| + |d|)
        denom = 1 + abs(pobj) + abs(dobj)
        measure = max(pres, dres, gap / denom, xs / tau**2 / denom)
        if measure <= opts.tol:
            # converged; a few polishing steps may sharpen it, the best iterate is kept
            if best is None or measure < best[0]:
                best = (measure, X, S, y, tau, kappa, it)
            polish += 1
            if measure <= opts.tol * 1e-2 or polish > 3:
                break
        # infeasibility of the user problem: X with G(X) ~ 0, <C, X> < 0
        if cx < 0:
            GX = G_op(X)
            if np.linalg.norm(GX) / -cx <= opts.infeas_tol:
                status = Status.INFEASIBLE
                break
        if by > 0:
            ray_res = np.sqrt(sum(_inner(g + s, g + s) for g, s in zip(GtY, S)))
            if ray_res / by <= opts.infeas_tol:
                status = Status.UNBOUNDED
                break

        try:
            sc = [_Scaling(Xk, Sk) for Xk, Sk in zip(X, S)]
        except np.linalg.LinAlgError:
            break
        WAW = [s.W @ Ak @ s.W for s, Ak in zip(sc, A)]
        WCW = [s.W @ Ck @ s.W for s, Ck in zip(sc, C)]
        H = np.zeros((mk, mk))
        for Ak, WAk in zip(A, WAW):
            H += Ak.reshape(mk, -1) @ WAk.reshape(mk, -1).T
        H = (H + H.T) / 2
        a = G_op(WCW)
        delta0 = sum(_inner(Ck, W) for Ck, W in zip(C, WCW))
        K = np.zeros((mk + 1, mk + 1))
        K[:mk, :mk] = H
        K[:mk, mk] = -(a + b_vec)
        K[mk, :mk] = b_vec - a
        K[mk, mk] = delta0 + kappa / tau
        try:
            lu = _LU(K)
        except np.linalg.LinAlgError:
            break

        def direction(eta, rc, rtau):
            r1 = -eta * rp
            r2 = [-eta * r for r in rd]
            r3 = eta * rg
            T = []
            for s, r2k, rck in zip(sc, r2, rc):
                lam = s.lam
                D = 2 * rck / (lam[:, None] + lam[None, :])
                T.append(s.R @ D @ s.R.T - s.W @ r2k @ s.W)
            rho1 = r1 - G_op(T)
            rho2 = r3 + sum(_inner(Ck, Tk) for Ck, Tk in zip(C, T)) + rtau / tau
            sol = lu(np.concatenate([rho1, [rho2]]))
            dy, dtau = sol[:mk], sol[mk]
            # W (G^T dy) W = -sum dy_j W A_j W
            dX = [Tk - dtau * WC - np.tensordot(dy, WAk, axes=1) for Tk, WC, WAk in zip(T, WCW, WAW)]
            dkappa = (rtau - kappa * dtau) / tau
            GtD = Gt_op(dy)
            dS = [r2k + Ck * dtau - g for r2k, Ck, g in zip(r2, C, GtD)]
            return dX, dy, dS, dtau, dkappa

        def scaled(dX, dS):
            dXt = [s.Rinv @ d @ s.Rinv.T for s, d in zip(sc, dX)]
            dSt = [s.R.T @ d @ s.R for s, d in zip(sc, dS)]
            return dXt, dSt

        def step_len(dXt, dSt, dtau, dkappa):
            amax = np.inf
            for s, dx, ds in zip(sc, dXt, dSt):
                amax = min(amax, _max_step(s.lam, dx), _max_step(s.lam, ds))
            if dtau < 0:
                amax = min(amax, -tau / dtau)
            if dkappa < 0:
                amax = min(amax, -kappa / dkappa)
            return amax

        try:
            # predictor
            rc_aff = [-np.diag(s.lam**2) for s in sc]
            dXa, dya, dSa, dta, dka = direction(1.0, rc_aff, -tau * kappa)
            dXta, dSta = scaled(dXa, dSa)
            alpha_aff = min(1.0, step_len(dXta, dSta, dta, dka))
            sigma = (1 - alpha_aff) ** 3
            # corrector
            rc = []
            for s, dx, ds in zip(sc, dXta, dSta):
                corr = (dx @ ds + ds @ dx) / 2
                rc.append(sigma * mu * np.eye(len(s.lam)) - np.diag(s.lam**2) - corr)
            rtau = sigma * mu - tau * kappa - dta * dka
            dX, dy, dS, dtau, dkappa = direction(1 - sigma, rc, rtau)
            dXt, dSt = scaled(dX, dS)
            alpha = min(1.0, opts.step_fraction * step_len(dXt, dSt, dtau, dkappa))
        except (np.linalg.LinAlgError, FloatingPointError):
            break
        if not np.isfinite(alpha) or alpha < 1e-12:
            break
        X = [(Xk + alpha * d + (Xk + alpha * d).T) / 2 for Xk, d in zip(X, dX)]
        S = [(Sk + alpha * d + (Sk + alpha * d).T) / 2 for Sk, d in zip(S, dS)]
        y = y + alpha * dy
        tau += alpha * dtau
        kappa += alpha * dkappa
        if tau <= 0 or kappa <= 0:
            break

    if best is not None:
        _, X, S, y, tau, kappa, it = best
        status = Status.OPTIMAL
    # undo normalization
    y_full = np.zeros(m)
    sol_kwargs = dict(iterations=it)
    if status == Status.OPTIMAL:
        ys = y / tau * Cnorm
        y_full[keep] = ys * scale[keep]
        Z = [Xk / tau * cnorm for Xk in X]
        obj = prob.objective(y_full)
        gap = abs(float(sum(_inner(Ck, Zk) for Ck, Zk in zip((b[0] for b in prob.blocks), Z))) + obj)
        pres = max(0.0, -prob.min_eig(y_full))
        return ConicSolution(status, y_full, obj, gap, pres, dual=Z, **sol_kwargs)
    if status == Status.INFEASIBLE:
        cx = sum(_inner(b[0], Xk) for b, Xk in zip(prob.blocks, X))
        Z = [Xk / -cx for Xk in X]
        res = np.array([sum(_inner(b[1 + j], Zk) for b, Zk in zip(prob.blocks, Z)) for j in range(m)])
        return ConicSolution(
            status, y_full, np.nan, np.nan, np.nan,
            certificate=Z, certificate_residual=float(np.linalg.norm(res)), **sol_kwargs,
        )
    if status == Status.UNBOUNDED:
        y_full[keep] = y * scale[keep]
        y_full /= -prob.objective(y_full)
        return ConicSolution(status, y_full, -np.inf, np.inf, np.nan, **sol_kwargs)
    # numerical limit: report the last normalized iterate
    if tau > 0:
        y_full[keep] = y / tau * Cnorm * scale[keep]
    obj = prob.objective(y_full)
    return ConicSolution(
        status, y_full, obj, float(info.get("gap", np.nan)), max(0.0, -prob.min_eig(y_full)), **sol_kwargs
    )


class _LU:
    """LU solve of the reduced system, with a least-squares fallback for tiny pivots."""

    def __init__(self, K):
        self._K = K
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            self._lu = scipy.linalg.lu_factor(K, check_finite=True)
        piv = np.abs(np.diag(self._lu[0]))
        self._singular = piv.min() <= 1e-14 * max(piv.max(), 1e-300)

    def __call__(self, rhs):
        if self._singular:
            return np.linalg.lstsq(self._K, rhs, rcond=1e-14)[0]
        return scipy.linalg.lu_solve(self._lu, rhs)
