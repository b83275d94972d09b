"""Operator-splitting solver for small dense conic programs.

The iteration is ADMM on the splitting ``(x~, s~) = (x, s)`` with the affine
set ``A x~ + s~ = b`` on one side and the cone ``K`` on the other, with
over-relaxation, Ruiz equilibration, occasional step-size adaptation and
safeguarded Anderson acceleration of the fixed-point map.
The dual returned satisfies ``c + A'z = 0``, ``z in K*``.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
from scipy.linalg.lapack import dpotrf, dpotrs

from ..array import ValidationError
from .cones import NONNEG, PSD, SOC, ZERO, _svec_layout, project_soc
from .program import INFEASIBLE, MAX_ITER, OPTIMAL, UNBOUNDED, ConicProgram, ConicSolution

log = logging.getLogger(__name__)

RHO_EQ_FACTOR = 1e3
STAGNATION_LEVEL = 1e-3
STAGNATION_ITERS = 5000
SAFEGUARD = 1.0


class _ConeProjector:
    def __init__(self, cones):
        self.zero = []
        self.nonneg = []
        self.soc = []
        self.psd = []
        i = 0
        for cone in cones:
            sl = slice(i, i + cone.dim)
            if cone.kind == ZERO:
                self.zero.append(sl)
            elif cone.kind == NONNEG:
                self.nonneg.append(sl)
            elif cone.kind == SOC:
                self.soc.append(sl)
            else:
                self.psd.append((sl, cone.size, _svec_layout(cone.size)))
            i += cone.dim
        self.m = i

    def project(self, v, dual=False):
        out = v.copy()
        if not dual:
            for sl in self.zero:
                out[sl] = 0.0
        for sl in self.nonneg:
            np.maximum(out[sl], 0.0, out=out[sl])
        for sl in self.soc:
            out[sl] = project_soc(v[sl])
        for sl, side, (rows, cols, scale) in self.psd:
            seg = v[sl] / scale
            S = np.empty((side, side))
            S[rows, cols] = seg
            S[cols, rows] = seg
            w, V = np.linalg.eigh(S)
            if w[0] < 0:
                pos = w > 0
                Vp = V[:, pos]
                S = (Vp * w[pos]) @ Vp.T
                out[sl] = S[rows, cols] * scale
        return out

    def block_ids(self):
        """Row groups whose scaling must be shared to keep the cone invariant."""
        groups = [[sl] for sl in self.soc] + [[sl] for sl, _, _ in self.psd]
        return groups


def _equilibrate(A, projector, iters=15):
    """Ruiz scaling ``E A D`` with uniform row factors on SOC/PSD blocks."""
    m, n = A.shape
    D = np.ones(n)
    E = np.ones(m)
    As = A.copy().tocsc()
    groups = projector.block_ids()
    for _ in range(iters):
        absA = abs(As)
        col = np.asarray(absA.max(axis=0).todense()).ravel() if m else np.zeros(n)
        row = np.asarray(absA.max(axis=1).todense()).ravel() if n else np.zeros(m)
        col = np.where(col < 1e-8, 1.0, col)
        row = np.where(row < 1e-8, 1.0, row)
        for grp in groups:
            for sl in grp:
                row[sl] = np.mean(row[sl])
        dc = 1.0 / np.sqrt(col)
        dr = 1.0 / np.sqrt(row)
        As = sp.diags(dr) @ As @ sp.diags(dc)
        D *= dc
        E *= dr
    D = np.clip(D, 1e-4, 1e4)
    E = np.clip(E, 1e-4, 1e4)
    return sp.diags(E) @ A @ sp.diags(D), D, E


class _Anderson:
    """Type-II Anderson acceleration of a fixed-point map with restarts."""

    def __init__(self, dim, memory):
        self.memory = memory
        self.reset()

    def reset(self):
        self.dF = []
        self.dG = []
        self.last = None

    def step(self, w, g, f):
        if self.last is not None:
            g0, f0 = self.last
            self.dF.append(f - f0)
            self.dG.append(g - g0)
            if len(self.dF) > self.memory:
                self.dF.pop(0)
                self.dG.pop(0)
        self.last = (g, f)
        if not self.dF:
            return g
        F = np.column_stack(self.dF)
        M = F.T @ F
        M[np.diag_indices_from(M)] += 1e-10 * (np.trace(M) + 1e-30)
        try:
            gam = np.linalg.solve(M, F.T @ f)
        except np.linalg.LinAlgError:
            self.reset()
            return g
        if not np.all(np.isfinite(gam)):
            self.reset()
            return g
        return g - np.column_stack(self.dG) @ gam


class _Factor:
    def __init__(self, A, AT, rho, sigma):
        n = A.shape[1]
        M = (AT @ sp.diags(rho) @ A).toarray() if n else np.zeros((0, 0))
        M[np.diag_indices(n)] += sigma
        L, info = dpotrf(M, lower=1, clean=1)
        if info != 0:
            raise np.linalg.LinAlgError(f"KKT factorization failed (info={info})")
        self.L = L

    def solve(self, rhs):
        x, info = dpotrs(self.L, rhs, lower=1)
        return x


def solve(prog: ConicProgram, tol: float = 1e-7, max_iter: int = 50000, *,
          rho: float = 0.1, sigma: float = 1e-6, alpha: float = 1.6,
          eps_infeasible: float = 1e-5, check_every: int = 10,
          warm_start: ConicSolution | None = None, scale: bool = True,
          adapt: bool = True,
          memory: int = 10, method: str = "admm") -> ConicSolution:
    """Solve ``min c'x s.t. Ax + s = b, s in K``.

    Termination uses residuals normalized by the data and iterate sizes:
    ``primal_residual = |Ax+s-b|_inf / (1 + max(|Ax|, |s|, |b|))`` and
    similarly for the dual residual ``|c + A'z|`` and the duality gap.
    Status is ``optimal`` only when all three are at most ``tol``.

    ``method="ipm"`` hands the program to the interior-point engine
    (accurate, but without infeasibility detection); the remaining keyword
    arguments only affect the default operator-splitting engine.
    """
    if not isinstance(prog, ConicProgram):
        raise ValidationError("solve expects a ConicProgram")
    if method == "ipm":
        from .ipm import solve_ipm
        return solve_ipm(prog, tol=tol, max_iter=min(max_iter, 200))
    if method != "admm":
        raise ValidationError(f"unknown method {method!r}")
    if tol <= 0 or max_iter < 1:
        raise ValidationError("tol must be positive and max_iter at least 1")
    m, n = prog.A.shape
    proj = _ConeProjector(prog.cones)
    if proj.m != m:
        raise ValidationError("cone layout does not match A")

    if scale and m and n:
        As, D, E = _equilibrate(prog.A, proj)
    else:
        As, D, E = prog.A.copy(), np.ones(n), np.ones(m)
    As = sp.csr_matrix(As)
    AsT = sp.csr_matrix(As.T)
    bs = E * prog.b
    cs_raw = D * prog.c
    cscale = 1.0 / np.clip(np.max(np.abs(cs_raw)) if n else 1.0, 1e-4, 1e4)
    cs = cscale * cs_raw

    is_eq = np.zeros(m, dtype=bool)
    for sl in proj.zero:
        is_eq[sl] = True
    rho_vec = np.where(is_eq, RHO_EQ_FACTOR * rho, rho)
    factor = _Factor(As, AsT, rho_vec, sigma)

    x = np.zeros(n)
    s = np.zeros(m)
    y = np.zeros(m)
    if warm_start is not None:
        x = warm_start.primal / D
        s = proj.project(E * warm_start.slack)
        y = -warm_start.dual * cscale / E
    # fixed-point state: x and the projection argument p = s + y/rho
    w = np.concatenate([x, s + y / rho_vec])
    accel = _Anderson(n + m, memory) if memory else None
    fallback = None

    def iterate(w):
        x, p = w[:n], w[n:]
        s = proj.project(p)
        y = rho_vec * (p - s)
        rhs = sigma * x - cs + AsT @ (rho_vec * (bs - s) + y)
        xt = factor.solve(rhs)
        st = bs - As @ xt
        x_new = alpha * xt + (1 - alpha) * x
        p_new = alpha * st + (1 - alpha) * s + y / rho_vec
        return np.concatenate([x_new, p_new]), y

    A, AT = prog.A, sp.csr_matrix(prog.A.T)
    b, c = prog.b, prog.c
    stagnant_since = None
    stagnant_norm = 0.0
    adapt_at = 25
    refactors = 0
    rejected = 0
    status = MAX_ITER
    it = 0
    rp = rd = rg = np.inf
    w_prev = w
    for it in range(1, max_iter + 1):
        g, y_old = iterate(w)
        f = g - w
        fn = np.linalg.norm(f)
        if fallback is not None:
            g_ref, fn_ref = fallback
            fallback = None
            if fn > SAFEGUARD * fn_ref:
                # extrapolated point was worse: take the plain step instead
                rejected += 1
                accel.reset()
                w = g_ref
                g, y_old = iterate(w)
                f = g - w
                fn = np.linalg.norm(f)
        w_prev, w_plain = w, g
        if accel is not None:
            w_next = accel.step(w, g, f)
            if w_next is not g:
                fallback = (g, fn)
        else:
            w_next = g
        x_new = g[:n]
        s_new = proj.project(g[n:])
        y_new = rho_vec * (g[n:] - s_new)

        if it % check_every == 0 or it == max_iter:
            x_out = D * x_new
            s_out = s_new / E
            z = -E * y_new / cscale
            Ax = A @ x_out
            ATz = AT @ z
            cx = float(c @ x_out)
            bz = float(b @ z)
            rp = np.max(np.abs(Ax + s_out - b), initial=0.0) / (
                1 + max(np.max(np.abs(Ax), initial=0), np.max(np.abs(s_out), initial=0),
                        np.max(np.abs(b), initial=0)))
            rd = np.max(np.abs(c + ATz), initial=0.0) / (
                1 + max(np.max(np.abs(c), initial=0), np.max(np.abs(ATz), initial=0)))
            rg = abs(cx + bz) / (1 + max(abs(cx), abs(bz)))
            if rp <= tol and rd <= tol and rg <= tol:
                status = OPTIMAL
                break

            dy = y_new - y_old
            ndy = np.max(np.abs(dy), initial=0.0)
            if ndy > 1e-12:
                u = -dy / ndy
                if (np.max(np.abs(AsT @ u), initial=0) <= eps_infeasible
                        and bs @ u < -eps_infeasible
                        and np.max(np.abs(u - proj.project(u, dual=True)), initial=0) <= eps_infeasible):
                    status = INFEASIBLE
                    break
            dx = x_new - w_prev[:n]
            ndx = np.max(np.abs(dx), initial=0.0)
            if ndx > 1e-12:
                v = dx / ndx
                Av = -(As @ v)
                if (cs @ v < -eps_infeasible
                        and np.max(np.abs(Av - proj.project(Av)), initial=0) <= eps_infeasible):
                    status = UNBOUNDED
                    break

            if max(rp, rd) > STAGNATION_LEVEL:
                norm_now = np.linalg.norm(np.concatenate([x_new, y_new]))
                if stagnant_since is None:
                    stagnant_since, stagnant_norm = it, norm_now
                elif it - stagnant_since >= STAGNATION_ITERS and norm_now > 10 * max(stagnant_norm, 1e-12):
                    status = INFEASIBLE if np.linalg.norm(y_new) >= np.linalg.norm(x_new) else UNBOUNDED
                    break
            else:
                stagnant_since = None

            if adapt and it >= adapt_at:
                adapt_at *= 2
                # scaled residuals drive the step-size update
                sp_res = np.max(np.abs(As @ x_new + s_new - bs), initial=0) / (
                    1e-10 + max(np.max(np.abs(As @ x_new), initial=0), np.max(np.abs(s_new), initial=0),
                                np.max(np.abs(bs), initial=0)))
                sd_res = np.max(np.abs(cs - AsT @ y_new), initial=0) / (
                    1e-10 + max(np.max(np.abs(cs), initial=0), np.max(np.abs(AsT @ y_new), initial=0)))
                ratio = np.sqrt(sp_res / max(sd_res, 1e-14))
                if ratio > 5 or ratio < 0.2:
                    new_rho = float(np.clip(rho * ratio, 1e-6, 1e6))
                    if new_rho != rho:
                        rho = new_rho
                        rho_old = rho_vec
                        rho_vec = np.where(is_eq, RHO_EQ_FACTOR * rho, rho)
                        factor = _Factor(As, AsT, rho_vec, sigma)
                        refactors += 1
                        # keep (s, y) fixed across the change of rho
                        w_plain = np.concatenate([x_new, s_new + y_new / rho_vec])
                        w_next = w_plain
                        fallback = None
                        if accel is not None:
                            accel.reset()
        w = w_next

    x = x_new
    s = s_new
    y = y_new
    x_out = D * x
    s_out = s / E
    z = -E * y / cscale
    return ConicSolution(
        primal=x_out, dual=z, slack=s_out, status=status,
        primal_residual=float(rp), dual_residual=float(rd), gap=float(rg),
        objective=float(c @ x_out), iterations=it,
        info={"rho": rho, "refactors": refactors, "rejected": rejected},
    )
