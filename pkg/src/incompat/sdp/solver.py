"""Primal-dual interior-point method for Hermitian SDPs.

Homogeneous self-dual embedding of

    maximize <c, x>  s.t.  A x = b,  x >= 0
    minimize <b, y>  s.t.  s = A^T y - c >= 0

solved with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
Complex Hermitian blocks are handled natively (Hermitian matrices form a
Euclidean Jordan algebra over the reals); no real embedding is used.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .problem import SdpProblem, StandardForm, basis, hvec, presolve, to_standard_form, unhvec

log = logging.getLogger(__name__)


class Status(str, Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    NUMERICAL_LIMIT = "NumericalLimit"


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    seed: int = 0  # the method is deterministic; kept for reproducible configs
    step_fraction: float = 0.99
    debug: bool = False


@dataclass
class SdpSolution:
    status: Status
    objective: float
    dual_objective: float
    duality_gap: float
    feasibility_residual: float
    iterations: int
    block_values: dict[str, np.ndarray] = field(default_factory=dict)
    scalar_values: dict[str, float] = field(default_factory=dict)
    dual_certificate: np.ndarray = field(default_factory=lambda: np.zeros(0))
    removed_rows: list[int] = field(default_factory=list)
    solve_time: float = 0.0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "objective": self.objective,
            "dual_objective": self.dual_objective,
            "duality_gap": self.duality_gap,
            "feasibility_residual": self.feasibility_residual,
            "iterations": self.iterations,
            "removed_rows": len(self.removed_rows),
            "solve_time": self.solve_time,
        }


class _Scaling:
    """NT scaling point for one group of equally sized blocks."""

    def __init__(self, X: np.ndarray, S: np.ndarray):
        lx = np.linalg.cholesky(X)
        ls = np.linalg.cholesky(S)
        u, sig, vh = np.linalg.svd(np.swapaxes(ls.conj(), -1, -2) @ lx)
        root = np.sqrt(sig)
        lx_inv = np.linalg.inv(lx)
        # X = R diag(sig) R^H,  S = R^-H diag(sig) R^-1
        self.R = (lx @ np.swapaxes(vh.conj(), -1, -2)) / root[:, None, :]
        self.Rinv = root[:, :, None] * (vh @ lx_inv)
        self.lam = sig
        self.W = self.R @ np.swapaxes(self.R.conj(), -1, -2)
        n = X.shape[-1]
        B = basis(n)
        wbw = np.einsum("cab,jbd,cde->cjae", self.W, B, self.W)
        # K[c] is the matrix of Y -> W Y W in hvec coordinates
        self.K = np.einsum("iae,cjae->cij", B.conj(), wbw).real

    def scale_primal(self, dX: np.ndarray) -> np.ndarray:
        return self.Rinv @ dX @ np.swapaxes(self.Rinv.conj(), -1, -2)

    def scale_dual(self, dS: np.ndarray) -> np.ndarray:
        return np.swapaxes(self.R.conj(), -1, -2) @ dS @ self.R

    def unscale(self, D: np.ndarray) -> np.ndarray:
        return self.R @ D @ np.swapaxes(self.R.conj(), -1, -2)


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a.conj(), -1, -2))


def _max_step(lam: np.ndarray, d: np.ndarray) -> float:
    """Largest alpha with diag(lam) + alpha d >= 0 (inf if unbounded)."""
    inv_root = 1.0 / np.sqrt(lam)
    scaled = _herm(inv_root[:, :, None] * d * inv_root[:, None, :])
    lo = np.linalg.eigvalsh(scaled)[:, 0].min()
    return np.inf if lo >= 0 else -1.0 / lo


def _jordan(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 0.5 * (a @ b + b @ a)


class _Ipm:
    def __init__(self, sf: StandardForm, opts: SolverOptions):
        self.sf = sf
        self.opts = opts
        self.A = sf.A
        self.b = sf.b
        self.c = sf.c
        self.m, self.N = sf.A.shape
        self.nu = sf.degree
        self.slices = [slice(off, off + k * n * n) for n, k, off in sf.groups]

    def wop(self, scalings: list[_Scaling], vec: np.ndarray) -> np.ndarray:
        out = np.empty_like(vec)
        for (n, k, _), sl, sc in zip(self.sf.groups, self.slices, scalings):
            out[sl] = np.einsum("cij,cj->ci", sc.K, vec[sl].reshape(k, n * n)).ravel()
        return out

    def schur(self, scalings: list[_Scaling]) -> np.ndarray:
        M = np.zeros((self.m, self.m))
        if self.m == 0:
            return M
        for (n, k, _), sl, sc in zip(self.sf.groups, self.slices, scalings):
            Ag = self.A[:, sl]
            AK = np.einsum("mci,cij->mcj", Ag.reshape(self.m, k, n * n), sc.K).reshape(self.m, -1)
            M += AK @ Ag.T
        return 0.5 * (M + M.T)

    @staticmethod
    def factor(M: np.ndarray):
        """Cholesky of the Schur complement, with a tiny diagonal shift if it is
        numerically singular (happens near degenerate optima)."""
        if M.shape[0] == 0:
            return None
        try:
            return scipy.linalg.cho_factor(M)
        except np.linalg.LinAlgError:
            pass
        scale = float(np.max(np.abs(np.diag(M)), initial=1.0))
        for shift in (1e-14, 1e-12, 1e-10):
            try:
                return scipy.linalg.cho_factor(M + shift * scale * np.eye(M.shape[0]))
            except np.linalg.LinAlgError:
                continue
        return scipy.linalg.cho_factor(M)

    @staticmethod
    def back(chol, rhs: np.ndarray) -> np.ndarray:
        return rhs.copy() if chol is None else scipy.linalg.cho_solve(chol, rhs)

    def run(self):
        A, b, c = self.A, self.b, self.c
        opts = self.opts
        tau0 = 1.0 + float(np.max(np.abs(b), initial=0.0))
        e = self.sf.identity()
        x = tau0 * e
        s = e.copy()
        y = np.zeros(self.m)
        tau, kappa = 1.0, tau0
        nb, nc = np.linalg.norm(b), np.linalg.norm(c)
        status = Status.NUMERICAL_LIMIT
        message = "iteration limit reached"
        it = 0
        info = {}
        for it in range(opts.max_iter + 1):
            r_p = A @ x - b * tau
            r_d = A.T @ y - c * tau - s
            r_g = c @ x - b @ y - kappa
            xs = float(x @ s)
            mu = (xs + tau * kappa) / (self.nu + 1)

            pobj, dobj = c @ x / tau, b @ y / tau
            pres = np.linalg.norm(r_p) / tau / (1 + nb)
            dres = np.linalg.norm(r_d) / tau / (1 + nc)
            gap = max(xs / tau**2, abs(dobj - pobj)) / (1 + abs(pobj) + abs(dobj))
            info = dict(pobj=pobj, dobj=dobj, pres=pres, dres=dres, gap=gap, tau=tau, kappa=kappa)
            log.debug("it %3d pobj %+.10e dobj %+.10e pres %.2e dres %.2e gap %.2e tau %.2e kappa %.2e",
                      it, pobj, dobj, pres, dres, gap, tau, kappa)
            if opts.debug and pres < 1e-6 and dres < 1e-6:
                assert pobj <= dobj + 1e-6 * (1 + abs(pobj)), (pobj, dobj)
            if pres <= opts.feas_tol and dres <= opts.feas_tol and gap <= opts.gap_tol:
                status, message = Status.OPTIMAL, "converged"
                break
            by, cx = b @ y, c @ x
            if by < 0 and np.linalg.norm(A.T @ y - s) / -by <= opts.feas_tol:
                status, message = Status.PRIMAL_INFEASIBLE, "Farkas certificate for the primal"
                break
            if cx > 0 and np.linalg.norm(A @ x) / cx <= opts.feas_tol:
                status, message = Status.DUAL_INFEASIBLE, "primal improving ray"
                break
            if it == opts.max_iter:
                break

            X = self.sf.split(x)
            S = self.sf.split(s)
            try:
                scalings = [_Scaling(Xg, Sg) for Xg, Sg in zip(X, S)]
                chol = self.factor(self.schur(scalings))
            except (np.linalg.LinAlgError, ValueError) as exc:
                message = f"factorization failed: {exc}"
                break

            wcw = self.wop(scalings, c)
            v = self.back(chol, A @ wcw - b)
            x1 = wcw - self.wop(scalings, A.T @ v)
            denom_base = c @ x1 - b @ v

            def direction(sigma, target, rk):
                f = 1.0 - sigma
                rc = np.concatenate([
                    hvec(sc.unscale(2.0 * t / (sc.lam[:, :, None] + sc.lam[:, None, :]))).ravel()
                    for sc, t in zip(scalings, target)
                ])
                t1 = rc - f * self.wop(scalings, r_d)
                u = self.back(chol, A @ t1 + f * r_p)
                x0 = t1 - self.wop(scalings, A.T @ u)
                dtau = (-f * r_g - c @ x0 + b @ u + rk / tau) / (denom_base + kappa / tau)
                dx = x0 + dtau * x1
                dy = u + dtau * v
                ds = A.T @ dy - c * dtau + f * r_d
                dkappa = (rk - kappa * dtau) / tau
                return dx, dy, ds, dtau, dkappa

            def step_length(dx, ds, dtau, dkappa):
                dX = self.sf.split(dx)
                dS = self.sf.split(ds)
                sx = [sc.scale_primal(d) for sc, d in zip(scalings, dX)]
                ss = [sc.scale_dual(d) for sc, d in zip(scalings, dS)]
                alpha = np.inf
                for sc, a_, b_ in zip(scalings, sx, ss):
                    alpha = min(alpha, _max_step(sc.lam, a_), _max_step(sc.lam, b_))
                if dtau < 0:
                    alpha = min(alpha, -tau / dtau)
                if dkappa < 0:
                    alpha = min(alpha, -kappa / dkappa)
                return alpha, sx, ss

            lam2 = [-np.einsum("ci,ij->cij", sc.lam**2, np.eye(sc.lam.shape[1])) for sc in scalings]
            dxa, dya, dsa, dta, dka = direction(0.0, lam2, -tau * kappa)
            alpha_a, sxa, ssa = step_length(dxa, dsa, dta, dka)
            alpha_a = min(1.0, alpha_a)
            mu_aff = ((x + alpha_a * dxa) @ (s + alpha_a * dsa)
                      + (tau + alpha_a * dta) * (kappa + alpha_a * dka)) / (self.nu + 1)
            sigma = float(np.clip(mu_aff / mu, 0.0, 1.0) ** 3)

            target = []
            for sc, l2, a_, b_ in zip(scalings, lam2, sxa, ssa):
                n = sc.lam.shape[1]
                target.append(l2 + sigma * mu * np.eye(n) - _jordan(a_, b_))
            dx, dy, ds, dtau, dkappa = direction(sigma, target, sigma * mu - tau * kappa - dta * dka)
            alpha, _, _ = step_length(dx, ds, dtau, dkappa)
            alpha = min(1.0, opts.step_fraction * alpha)
            if alpha < 1e-10:
                message = "step length collapsed"
                break
            x = x + alpha * dx
            y = y + alpha * dy
            s = s + alpha * ds
            tau = tau + alpha * dtau
            kappa = kappa + alpha * dkappa
        return status, message, it, x, y, s, tau, kappa, info


def solve(problem: SdpProblem, opts: SolverOptions | None = None, **kwargs) -> SdpSolution:
    """Presolve, lower to standard form and run the interior-point method."""
    opts = opts or SolverOptions(**kwargs)
    t0 = time.perf_counter()
    pre = presolve(problem)
    plog = pre.presolve_log
    if plog.infeasible:
        return SdpSolution(
            Status.PRIMAL_INFEASIBLE, float("nan"), float("nan"), float("nan"), plog.inconsistency, 0,
            removed_rows=plog.removed_rows, solve_time=time.perf_counter() - t0,
            message="inconsistent equality rows detected in presolve",
        )
    sf = to_standard_form(pre)
    status, message, it, x, y, s, tau, kappa, info = _Ipm(sf, opts).run()
    if status in (Status.OPTIMAL, Status.NUMERICAL_LIMIT):
        xh, yh = x / tau, y / tau
    else:
        xh, yh = x, y

    blocks_by_group = sf.split(xh)
    block_values = {}
    for name, (g, j) in sf.block_index.items():
        block_values[name] = _herm(blocks_by_group[g][j])
    scalar_values = dict(plog.eliminated_scalars)
    for name, (v0, terms) in sf.scalar_map.items():
        scalar_values[name] = float(v0 + sum(e * blocks_by_group[g][j][0, 0].real for (g, j), e in terms))

    # duals for the original user rows (zero on rows dropped by presolve)
    y_user = yh * sf.row_scale
    full = np.zeros(problem.num_constraints)
    kept = [i for i in range(problem.num_constraints) if i not in set(plog.removed_rows)]
    full[kept] = y_user[: sf.num_user_rows]

    objective = float(sf.c @ xh + sf.offset)
    dual_objective = float(sf.b @ yh + sf.offset)
    residual = _user_residual(problem, block_values, scalar_values)
    return SdpSolution(
        status=status,
        objective=objective,
        dual_objective=dual_objective,
        duality_gap=float(info.get("gap", np.nan)),
        feasibility_residual=max(residual, float(info.get("dres", 0.0))),
        iterations=it,
        block_values=block_values,
        scalar_values=scalar_values,
        dual_certificate=full,
        removed_rows=plog.removed_rows,
        solve_time=time.perf_counter() - t0,
        message=message,
    )


def _user_residual(p: SdpProblem, blocks: dict[str, np.ndarray], scalars: dict[str, float]) -> float:
    """Max relative equality violation measured on the original rows."""
    worst = 0.0
    for con in p.constraints:
        val = sum(np.vdot(coef, blocks[name]).real for name, coef in con.blocks.items())
        val += sum(v * scalars[name] for name, v in con.scalars.items())
        scale = 1.0 + sum(np.linalg.norm(cf) for cf in con.blocks.values()) + sum(abs(v) for v in con.scalars.values())
        worst = max(worst, abs(val - con.rhs) / scale)
    return worst
