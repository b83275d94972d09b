"""Primal-dual interior-point method for small dense conic programs.

Infeasible-start path following with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step. It solves the same standard form as the ADMM
engine and reports residuals with the same normalization, but assumes the
program is feasible and bounded: it has no infeasibility certificates and
returns ``max_iter`` when it fails to converge.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from ..array import ValidationError
from .cones import NONNEG, PSD, SOC, ZERO, _svec_layout
from .program import MAX_ITER, OPTIMAL, ConicProgram, ConicSolution

STEP_FRACTION = 0.99
REFINE_STEPS = 2
STALL_ITERS = 3


def _smat_batch(V, side):
    rows, cols, scale = _svec_layout(side)
    out = np.zeros(V.shape[:-1] + (side, side))
    out[..., rows, cols] = V / scale
    out[..., cols, rows] = V / scale
    return out


def _svec_batch(M, side):
    rows, cols, scale = _svec_layout(side)
    return M[..., rows, cols] * scale


def _jnorm2(u):
    """``u0^2 - |u1|^2`` without cancellation near the cone boundary."""
    r = np.linalg.norm(u[1:])
    return (u[0] - r) * (u[0] + r)


class _Blocks:
    """Index bookkeeping for the inequality (non-zero-cone) rows."""

    def __init__(self, cones):
        self.lp = []
        self.soc = []
        self.psd = []
        self.num_eq = 0
        i = 0
        for cone in cones:
            if cone.kind == ZERO:
                if i != self.num_eq:
                    raise ValidationError("zero-cone rows must come first")
                self.num_eq += cone.dim
                i += cone.dim
                continue
            j = i - self.num_eq
            sl = slice(j, j + cone.dim)
            if cone.kind == NONNEG:
                self.lp.append(sl)
            elif cone.kind == SOC:
                self.soc.append(sl)
            else:
                self.psd.append((sl, cone.size))
            i += cone.dim
        self.m = i - self.num_eq
        self.degree = (sum(s.stop - s.start for s in self.lp) + len(self.soc)
                       + sum(side for _, side in self.psd))

    def identity(self):
        e = np.zeros(self.m)
        for sl in self.lp:
            e[sl] = 1.0
        for sl in self.soc:
            e[sl.start] = 1.0
        for sl, side in self.psd:
            rows, cols, _ = _svec_layout(side)
            e[sl] = (rows == cols).astype(float)
        return e

    def min_eig(self, v):
        """Most negative 'eigenvalue' of ``v`` over all blocks."""
        out = np.inf
        for sl in self.lp:
            if sl.stop > sl.start:
                out = min(out, v[sl].min())
        for sl in self.soc:
            out = min(out, v[sl.start] - np.linalg.norm(v[sl.start + 1:sl.stop]))
        for sl, side in self.psd:
            out = min(out, np.linalg.eigvalsh(_smat_batch(v[sl], side))[0])
        return out


class _NormalPlan:
    """Dense column restrictions of each cone block of ``G`` (fixed per solve)."""

    def __init__(self, blocks: _Blocks, G):
        self.n = G.shape[1]
        G = sp.csr_matrix(G)

        def restrict(sl):
            Gb = G[sl].tocsc()
            cols = np.flatnonzero(np.diff(Gb.indptr))
            return cols, Gb[:, cols].toarray()

        # nonnegative rows grouped by column support: (rows, cols, dense block)
        self.lp = []
        for sl in blocks.lp:
            Gb = G[sl]
            groups = {}
            for i in range(Gb.shape[0]):
                key = tuple(Gb.indices[Gb.indptr[i]:Gb.indptr[i + 1]])
                groups.setdefault(key, []).append(i)
            parts = []
            for key, rows in groups.items():
                cols = np.array(sorted(key), dtype=int)
                if len(cols):
                    parts.append((np.array(rows), cols, Gb[rows][:, cols].toarray()))
            self.lp.append(parts)
        self.soc = [restrict(sl) for sl in blocks.soc]
        self.psd = []
        for sl, side in blocks.psd:
            cols, Gd = restrict(sl)
            self.psd.append((cols, Gd, _smat_batch(Gd.T, side), side))


class _Scaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^-T s = lambda``."""

    def __init__(self, blocks: _Blocks, s, z):
        self.b = blocks
        self.lp = [np.sqrt(s[sl] / z[sl]) for sl in blocks.lp]
        self.soc = []
        for sl in blocks.soc:
            u, v = s[sl], z[sl]
            js = _jnorm2(u)
            jz = _jnorm2(v)
            sb = u / np.sqrt(js)
            zb = v / np.sqrt(jz)
            g = np.sqrt((1 + sb @ zb) / 2)
            w = sb.copy()
            w[0] += zb[0]
            w[1:] -= zb[1:]
            w /= 2 * g
            beta = (js / jz) ** 0.25
            w0, w1 = w[0], w[1:]
            core = np.eye(len(w1)) + np.outer(w1, w1) / (1 + w0)
            Wm = np.block([[np.array([[w0]]), w1[None, :]], [w1[:, None], core]])
            Winv = np.block([[np.array([[w0]]), -w1[None, :]], [-w1[:, None], core]])
            Wm *= beta
            Winv /= beta
            self.soc.append((Wm, Winv))
        self.psd = []
        for sl, side in blocks.psd:
            S = _smat_batch(s[sl], side)
            Z = _smat_batch(z[sl], side)
            Ls = np.linalg.cholesky(S)
            Lz = np.linalg.cholesky(Z)
            U, lam, Vt = np.linalg.svd(Lz.T @ Ls)
            R = Ls @ Vt.T / np.sqrt(lam)
            Rinv = np.sqrt(lam)[:, None] * (Vt @ la.solve_triangular(Ls, np.eye(side), lower=True))
            self.psd.append((R, Rinv, lam))
        self.lam = self.apply(z)

    def apply(self, v, transpose=False, inverse=False):
        """``W v``; with flags ``W^T v``, ``W^-1 v`` or ``W^-T v``."""
        out = np.empty_like(v)
        for sl, d in zip(self.b.lp, self.lp):
            out[sl] = v[sl] / d if inverse else v[sl] * d
        for sl, (Wm, Winv) in zip(self.b.soc, self.soc):
            out[sl] = (Winv if inverse else Wm) @ v[sl]
        for (sl, side), (R, Rinv, _) in zip(self.b.psd, self.psd):
            V = _smat_batch(v[sl], side)
            if not inverse and not transpose:
                M = R.T @ V @ R
            elif not inverse:
                M = R @ V @ R.T
            elif not transpose:
                M = Rinv.T @ V @ Rinv
            else:
                M = Rinv @ V @ Rinv.T
            out[sl] = _svec_batch(M, side)
        return out

    def normal_matrix(self, plan) -> np.ndarray:
        """``G^T (W^T W)^-1 G`` as a dense matrix."""
        H = np.zeros((plan.n, plan.n))
        for parts, d in zip(plan.lp, self.lp):
            for rows, cols, Gd in parts:
                H[np.ix_(cols, cols)] += (Gd.T / d[rows] ** 2) @ Gd
        for (cols, Gd), (_, Winv) in zip(plan.soc, self.soc):
            WG = Winv @ Gd
            H[np.ix_(cols, cols)] += WG.T @ WG
        for (cols, Gd, mats, side), (_, Rinv, _) in zip(plan.psd, self.psd):
            if not len(cols):
                continue
            T = Rinv.T @ Rinv
            TGT = _svec_batch(T @ mats @ T, side)
            H[np.ix_(cols, cols)] += Gd.T @ TGT.T
        return H

    # Jordan algebra in the scaled coordinates

    def product(self, u, v):
        out = np.empty_like(u)
        for sl in self.b.lp:
            out[sl] = u[sl] * v[sl]
        for sl in self.b.soc:
            a, c = u[sl], v[sl]
            out[sl.start] = a @ c
            out[sl.start + 1:sl.stop] = a[0] * c[1:] + c[0] * a[1:]
        for sl, side in self.b.psd:
            U = _smat_batch(u[sl], side)
            V = _smat_batch(v[sl], side)
            out[sl] = _svec_batch((U @ V + V @ U) / 2, side)
        return out

    def lam_divide(self, v):
        """Solve ``lambda o x = v`` for ``x``."""
        out = np.empty_like(v)
        lam = self.lam
        for sl in self.b.lp:
            out[sl] = v[sl] / lam[sl]
        for sl in self.b.soc:
            l, c = lam[sl], v[sl]
            det = _jnorm2(l)
            x0 = (l[0] * c[0] - l[1:] @ c[1:]) / det
            out[sl.start] = x0
            out[sl.start + 1:sl.stop] = (c[1:] - x0 * l[1:]) / l[0]
        for (sl, side), (_, _, lam_d) in zip(self.b.psd, self.psd):
            V = _smat_batch(v[sl], side)
            out[sl] = _svec_batch(2 * V / np.add.outer(lam_d, lam_d), side)
        return out

    def max_step(self, d):
        """Largest ``a`` with ``lambda + a d`` in the cone (capped at 1e10)."""
        amax = 1e10
        lam = self.lam
        for sl in self.b.lp:
            neg = d[sl] < 0
            if neg.any():
                amax = min(amax, np.min(-lam[sl][neg] / d[sl][neg]))
        for sl in self.b.soc:
            l, v = lam[sl], d[sl]
            # J-normalized: lambda has J-norm det, solve quadratic in a
            a = v[0] ** 2 - v[1:] @ v[1:]
            b = l[0] * v[0] - l[1:] @ v[1:]
            c = _jnorm2(l)
            roots = []
            if abs(a) > 1e-300:
                disc = b * b - a * c
                if disc >= 0:
                    r = np.sqrt(disc)
                    roots = [(-b - r) / a, (-b + r) / a]
            elif b < 0:
                roots = [-c / (2 * b)]
            pos = [r for r in roots if r > 0]
            if pos:
                amax = min(amax, min(pos))
            if v[0] < 0:
                amax = min(amax, -l[0] / v[0])
        for (sl, side), (_, _, lam_d) in zip(self.b.psd, self.psd):
            D = _smat_batch(d[sl], side)
            isq = 1 / np.sqrt(lam_d)
            ev = np.linalg.eigvalsh(isq[:, None] * D * isq[None, :])[0]
            if ev < 0:
                amax = min(amax, -1.0 / ev)
        return amax


def solve_ipm(prog: ConicProgram, tol: float = 1e-8, max_iter: int = 100,
              scale: bool = True) -> ConicSolution:
    """Solve ``min c'x s.t. Ax + s = b, s in K`` by an interior-point method.

    Zero-cone rows must precede all others (as :class:`ProgramBuilder`
    emits them). Residuals use the same normalization as :func:`solve`.
    """
    if not isinstance(prog, ConicProgram):
        raise ValidationError("solve_ipm expects a ConicProgram")
    blocks = _Blocks(prog.cones)
    orig = prog
    if scale and prog.A.shape[0] and prog.A.shape[1]:
        from .admm import _ConeProjector, _equilibrate
        As, Dc, Er = _equilibrate(prog.A, _ConeProjector(prog.cones))
        prog = ConicProgram(Dc * prog.c, sp.csr_matrix(As), Er * prog.b, prog.cones)
    else:
        Dc, Er = np.ones(prog.A.shape[1]), np.ones(prog.A.shape[0])
    A = sp.csr_matrix(prog.A)
    m_all, n = A.shape
    p = blocks.num_eq
    AE, G = A[:p], A[p:]
    bE, h = prog.b[:p], prog.b[p:]
    c = prog.c
    AEd = AE.toarray()
    GT = sp.csr_matrix(G.T)
    e = blocks.identity()
    plan = _NormalPlan(blocks, G)
    scale_c = 1.0 + np.max(np.abs(c), initial=0)

    def kkt(H):
        reg = 1e-11 * (1 + np.max(np.abs(np.diag(H)), initial=0))
        Hr = H.copy()
        Hr[np.diag_indices(n)] += reg
        try:
            cf = la.cho_factor(Hr, lower=True, check_finite=False)
            HiA = la.cho_solve(cf, AEd.T, check_finite=False) if p else np.zeros((n, 0))
            sf = la.cho_factor(AEd @ HiA + reg * np.eye(p), lower=True, check_finite=False) if p else None

            def base(rhs):
                u = la.cho_solve(cf, rhs[:n], check_finite=False)
                if not p:
                    return u
                dy = la.cho_solve(sf, AEd @ u - rhs[n:], check_finite=False)
                return np.concatenate([u - HiA @ dy, dy])
        except la.LinAlgError:
            K = np.zeros((n + p, n + p))
            K[:n, :n] = Hr
            K[:n, n:] = AEd.T
            K[n:, :n] = AEd
            K[np.arange(n, n + p), np.arange(n, n + p)] -= reg
            lu = la.lu_factor(K, check_finite=False)

            def base(rhs):
                return la.lu_solve(lu, rhs, check_finite=False)

        def solve(rhs):
            sol = base(rhs)
            # one step of iterative refinement against the unregularized system
            res = rhs.copy()
            res[:n] -= H @ sol[:n] + AEd.T @ sol[n:]
            res[n:] -= AEd @ sol[:n]
            return sol + base(res)
        return solve

    # initial point from two least-squares problems (W = I)
    solve0 = kkt((GT @ G).toarray())
    xy = solve0(np.concatenate([GT @ h, bE]))
    x, y = xy[:n], xy[n:]
    s = h - G @ x
    uy = solve0(np.concatenate([-c, np.zeros(p)]))
    z = G @ uy[:n]
    y = uy[n:]
    for v in (s, z):
        shift = -blocks.min_eig(v)
        if shift >= -1e-8:
            v += (1 + max(shift, 0.0)) * e

    status = MAX_ITER
    rp = rd = rg = np.inf
    best = (np.inf, x, y, s, z, rp, rd, rg, 0)
    it = 0
    for it in range(max_iter + 1):
        rx = c + AE.T @ y + GT @ z
        ry = AE @ x - bE
        rz = G @ x + s - h
        Ax = A @ x
        ATz = AE.T @ y + GT @ z
        s_full = np.concatenate([np.zeros(p), s])
        rp = max(np.max(np.abs(ry), initial=0), np.max(np.abs(rz), initial=0)) / (
            1 + max(np.max(np.abs(Ax), initial=0), np.max(np.abs(s_full), initial=0),
                    np.max(np.abs(prog.b), initial=0)))
        rd = np.max(np.abs(rx), initial=0) / (
            1 + max(np.max(np.abs(c), initial=0), np.max(np.abs(ATz), initial=0)))
        cx = c @ x
        bz = bE @ y + h @ z
        rg = max(abs(cx + bz), abs(s @ z)) / (1 + max(abs(cx), abs(bz)))
        merit = max(rp, rd, rg)
        if np.isfinite(merit) and merit < best[0]:
            best = (merit, x.copy(), y.copy(), s.copy(), z.copy(), rp, rd, rg, it)
        if rp <= tol and rd <= tol and rg <= tol:
            status = OPTIMAL
            break
        if it == max_iter or not np.isfinite(merit) or it - best[8] >= STALL_ITERS:
            break
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))) or np.max(np.abs(x)) > 1e15 * scale_c:
            break

        try:
            W = _Scaling(blocks, s, z)
        except np.linalg.LinAlgError:
            break
        mu = (s @ z) / blocks.degree
        solve_k = kkt(W.normal_matrix(plan))
        lam = W.lam

        def wtw_inv(v):
            return W.apply(W.apply(v, inverse=True, transpose=True), inverse=True)

        def wtw(v):
            return W.apply(W.apply(v), transpose=True)

        def reduced(bx, by, bz):
            sol = solve_k(np.concatenate([bx + GT @ wtw_inv(bz), by]))
            dx, dy = sol[:n], sol[n:]
            return dx, dy, wtw_inv(G @ dx - bz)

        def newton(d):
            bx, by, bz = -rx, -ry, -rz - W.apply(d, transpose=True)
            dx, dy, dz = reduced(bx, by, bz)
            for _ in range(REFINE_STEPS):
                ex = bx - (GT @ dz + AE.T @ dy)
                ey = by - AE @ dx
                ez = bz - (G @ dx - wtw(dz))
                cx_, cy_, cz_ = reduced(ex, ey, ez)
                dx, dy, dz = dx + cx_, dy + cy_, dz + cz_
            ds = W.apply(d - W.apply(dz), transpose=True)
            return dx, dy, ds, dz

        # predictor
        lsq = W.product(lam, lam)
        dx, dy, ds, dz = newton(W.lam_divide(-lsq))
        ds_t = W.apply(ds, inverse=True, transpose=True)
        dz_t = W.apply(dz)
        a_aff = min(1.0, W.max_step(ds_t), W.max_step(dz_t))
        sig = ((lam + a_aff * ds_t) @ (lam + a_aff * dz_t) / (lam @ lam)) ** 3
        sig = min(max(sig, 0.0), 1.0)
        # corrector
        d = W.lam_divide(sig * mu * e - lsq - W.product(ds_t, dz_t))
        dx, dy, ds, dz = newton(d)
        ds_t = W.apply(ds, inverse=True, transpose=True)
        dz_t = W.apply(dz)
        a = min(1.0, STEP_FRACTION * min(W.max_step(ds_t), W.max_step(dz_t)))
        x = x + a * dx
        y = y + a * dy
        s = s + a * ds
        z = z + a * dz

    _, x, y, s, z, rp, rd, rg, _ = best
    x = Dc * x
    zf = Er * np.concatenate([y, z])
    sf = np.concatenate([np.zeros(p), s]) / Er
    if scale:
        rp, rd, rg = _residuals(orig, x, sf, zf)
        if status == OPTIMAL and max(rp, rd, rg) > tol:
            status = MAX_ITER
    return ConicSolution(
        primal=x, dual=zf, slack=sf, status=status,
        primal_residual=float(rp), dual_residual=float(rd), gap=float(rg),
        objective=float(orig.c @ x), iterations=it, info={"method": "ipm"},
    )


def _residuals(prog, x, s, z):
    A, b, c = prog.A, prog.b, prog.c
    Ax = A @ x
    ATz = A.T @ z
    rp = np.max(np.abs(Ax + s - b), initial=0.0) / (
        1 + max(np.max(np.abs(Ax), initial=0), np.max(np.abs(s), initial=0),
                np.max(np.abs(b), initial=0)))
    rd = np.max(np.abs(c + ATz), initial=0.0) / (
        1 + max(np.max(np.abs(c), initial=0), np.max(np.abs(ATz), initial=0)))
    cx, bz = c @ x, b @ z
    rg = abs(cx + bz) / (1 + max(abs(cx), abs(bz)))
    return rp, rd, rg
