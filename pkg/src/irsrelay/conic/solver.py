"""Primal-dual interior-point solver for small dense conic programs.

Infeasible-start path following with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step, specialized to dense problems with a handful of
small PSD blocks, nonnegative scalars, and free scalars. Inequalities are
converted to equalities with nonnegative slacks; free variables are carried
directly in the (indefinite) Schur system rather than split.

PSD blocks of equal dimension are stacked and processed with batched
linear-algebra calls; the per-block loop overhead would otherwise dominate
on the many 2x2/3x3 constraint fragments these problems carry.

Infeasibility is declared either by the divergence heuristic (dual objective
beyond 1e8 with non-decreasing primal residual for 10 iterations) or earlier
by an approximate Farkas certificate carried by the dual iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .problem import ConicProblem, ConicSolution, SolveStatus, validate

__all__ = ["SolverOptions", "solve"]

DIVERGENCE_LIMIT = 1e8
DIVERGENCE_ITERS = 10

_STALL_STEP = 1e-8
_STALL_ITERS = 3
_CERT_TOL = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-7
    feas_tol: float = 1e-7
    max_iter: int = 100
    step_fraction: float = 0.98


class _Numerics(RuntimeError):
    pass


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def _chol_batch(m: np.ndarray) -> np.ndarray:
    """Batched Cholesky with an eigenvalue-clipped fallback per entry."""
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        out = np.empty_like(m)
        for i in range(m.shape[0]):
            try:
                out[i] = np.linalg.cholesky(m[i])
            except np.linalg.LinAlgError:
                w, v = np.linalg.eigh(_sym(m[i]))
                floor = max(w[-1], 1.0) * 1e-14
                if not np.isfinite(floor):
                    raise _Numerics("non-finite matrix in factorization")
                out[i] = v * np.sqrt(np.clip(w, floor, None))
        return out


class _Group:
    """All PSD blocks of one dimension, stacked along the leading axis."""

    def __init__(self, dim: int, block_indices: list[int], m: int):
        self.dim = dim
        self.indices = block_indices
        self.A = np.zeros((len(block_indices), m, dim, dim))
        self.C = np.zeros((len(block_indices), dim, dim))


class _Compiled:
    """ConicProblem flattened to min-form arrays with slacks and row scaling."""

    def __init__(self, problem: ConicProblem):
        spec = problem.spec
        dims = list(spec.psd_block_dims)
        self.n_blocks = len(dims)
        self.n_orig_nn = spec.nonneg_count
        self.n_eq = len(problem.eq_constraints)
        self.n_ineq = len(problem.ineq_constraints)
        self.n_nn = spec.nonneg_count + self.n_ineq
        self.n_free = spec.free_count
        m = self.n_eq + self.n_ineq
        self.m_orig = m
        self.nu = sum(dims) + self.n_nn

        by_dim: dict[int, list[int]] = {}
        for b, d in enumerate(dims):
            by_dim.setdefault(d, []).append(b)
        self.groups = [_Group(d, idxs, m) for d, idxs in sorted(by_dim.items())]
        # block index -> (group, position inside group)
        self.block_pos = {}
        for gi, grp in enumerate(self.groups):
            for pos, b in enumerate(grp.indices):
                self.block_pos[b] = (gi, pos)

        self.A_nn = np.zeros((m, self.n_nn))
        self.A_free = np.zeros((m, self.n_free))
        self.b = np.zeros(m)
        rows = list(problem.eq_constraints) + list(problem.ineq_constraints)
        for r, con in enumerate(rows):
            for bidx, mat in con.expr.psd.items():
                gi, pos = self.block_pos[bidx]
                self.groups[gi].A[pos, r] = 0.5 * (mat + mat.T)
            for i, coef in con.expr.nonneg.items():
                self.A_nn[r, i] = coef
            for i, coef in con.expr.free.items():
                self.A_free[r, i] = coef
            self.b[r] = con.rhs
        for j in range(self.n_ineq):
            self.A_nn[self.n_eq + j, spec.nonneg_count + j] = 1.0

        # Internal objective is minimized: negate the maximize functional.
        self.c_nn = np.zeros(self.n_nn)
        self.c_free = np.zeros(self.n_free)
        for bidx, mat in problem.objective.psd.items():
            gi, pos = self.block_pos[bidx]
            self.groups[gi].C[pos] = -0.5 * (mat + mat.T)
        for i, coef in problem.objective.nonneg.items():
            self.c_nn[i] = -coef
        for i, coef in problem.objective.free.items():
            self.c_free[i] = -coef
        self.obj_const = problem.objective.const

        # Row equilibration; a zero row with nonzero rhs is infeasible outright,
        # and consistent zero rows are dropped (dual re-expanded on extraction).
        row_max = np.zeros(m)
        for grp in self.groups:
            if grp.A.size:
                row_max = np.maximum(row_max, np.abs(grp.A).reshape(len(grp.indices), m, -1).max(axis=2).max(axis=0))
        if self.n_nn:
            row_max = np.maximum(row_max, np.abs(self.A_nn).max(axis=1))
        if self.n_free:
            row_max = np.maximum(row_max, np.abs(self.A_free).max(axis=1))
        self.trivially_infeasible = bool(np.any((row_max == 0.0) & (np.abs(self.b) > 1e-12)))
        self.row_keep = np.flatnonzero(row_max > 0.0)
        for grp in self.groups:
            grp.A = grp.A[:, self.row_keep]
        self.A_nn = self.A_nn[self.row_keep]
        self.A_free = self.A_free[self.row_keep]
        self.b = self.b[self.row_keep]
        self.m = m = len(self.row_keep)
        self.row_scale = row_max[self.row_keep]
        for grp in self.groups:
            grp.A /= self.row_scale[None, :, None, None]
        if self.n_nn:
            self.A_nn /= self.row_scale[:, None]
        if self.n_free:
            self.A_free /= self.row_scale[:, None]
        self.b /= self.row_scale

        self.obj_scale = max(
            max((np.max(np.abs(g.C)) if g.C.size else 0.0 for g in self.groups), default=0.0),
            np.max(np.abs(self.c_nn)) if self.n_nn else 0.0,
            np.max(np.abs(self.c_free)) if self.n_free else 0.0,
        )
        if self.obj_scale == 0.0:
            self.obj_scale = 1.0
        for grp in self.groups:
            grp.C /= self.obj_scale
        self.c_nn /= self.obj_scale
        self.c_free /= self.obj_scale
        for grp in self.groups:
            grp.A2 = grp.A.reshape(len(grp.indices), self.m, grp.dim * grp.dim)
            grp.A2T = np.ascontiguousarray(grp.A2.transpose(0, 2, 1))

    # -- linear operators --------------------------------------------------
    def apply_A(self, X, x_nn, x_free):
        out = np.zeros(self.m)
        for grp, Xg in zip(self.groups, X):
            b = Xg.shape[0]
            out += np.matmul(grp.A2, Xg.reshape(b, -1, 1))[:, :, 0].sum(axis=0)
        if self.n_nn:
            out += self.A_nn @ x_nn
        if self.n_free:
            out += self.A_free @ x_free
        return out

    def apply_AT(self, y):
        return [np.tensordot(grp.A, y, axes=(1, 0)) for grp in self.groups]


def _max_step_group(L, delta):
    """Largest alpha with X + alpha*delta PSD for each block; X = L L^T."""
    y = np.linalg.solve(L, delta)
    z = _sym(np.linalg.solve(L, np.swapaxes(y, -1, -2)))
    lam_min = np.linalg.eigvalsh(z)[..., 0]
    steps = np.where(lam_min >= 0.0, np.inf, 1.0 / np.maximum(-lam_min, 1e-300))
    return float(steps.min()) if steps.size else np.inf


def _max_step_nn(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _solve_free_only(comp: _Compiled, opts: SolverOptions) -> ConicSolution:
    # No cone variables: the KKT system is linear.
    x, *_ = np.linalg.lstsq(comp.A_free, comp.b, rcond=None)
    y, *_ = np.linalg.lstsq(comp.A_free.T, comp.c_free, rcond=None)
    rp = comp.b - comp.A_free @ x
    rd = comp.c_free - comp.A_free.T @ y
    pin = np.linalg.norm(rp) / (1.0 + np.linalg.norm(comp.b))
    din = np.linalg.norm(rd) / (1.0 + np.linalg.norm(comp.c_free))
    if pin > opts.feas_tol:
        status = SolveStatus.INFEASIBLE
    elif din > opts.feas_tol:
        status = SolveStatus.NUMERICAL_FAILURE  # objective unbounded over the affine set
    else:
        status = SolveStatus.OPTIMAL
    return _extract(comp, status, [], np.zeros(0), x, y, 0.0, pin, din, 0)


def _extract(comp, status, X, x_nn, x_free, y, gap, pin, din, iters) -> ConicSolution:
    y_full = np.zeros(comp.m_orig)
    if comp.m:
        y_full[comp.row_keep] = y * comp.obj_scale / comp.row_scale
    psd_values = [np.zeros((0, 0))] * comp.n_blocks
    obj = 0.0
    for grp, Xg in zip(comp.groups, X):
        obj += float(np.sum(grp.C * Xg))
        for pos, b in enumerate(grp.indices):
            psd_values[b] = Xg[pos].copy()
    obj += float(comp.c_nn @ x_nn) if comp.n_nn else 0.0
    obj += float(comp.c_free @ x_free) if comp.n_free else 0.0
    return ConicSolution(
        status=status,
        psd_values=psd_values,
        nonneg_values=x_nn[: comp.n_orig_nn].copy(),
        free_values=x_free.copy(),
        eq_duals=y_full[: comp.n_eq].copy(),
        ineq_duals=y_full[comp.n_eq :].copy(),
        objective_value=-obj * comp.obj_scale + comp.obj_const,
        duality_gap=gap,
        primal_residual=pin,
        dual_residual=din,
        iterations=iters,
    )


def _farkas_certificate(comp: _Compiled, y: np.ndarray) -> bool:
    """Approximate primal-infeasibility certificate carried by y.

    Normalized y with b^T y > 0, A_free^T y ~ 0, and -A^* y in the dual cone
    proves that no feasible point exists.
    """
    norm = np.linalg.norm(y)
    if norm == 0.0 or not np.isfinite(norm):
        return False
    yh = y / norm
    if comp.b @ yh <= 1e-6:
        return False
    if comp.n_free and np.max(np.abs(comp.A_free.T @ yh)) > 1e-7:
        return False
    if comp.n_nn:
        s_nn = -(comp.A_nn.T @ yh)
        if np.min(s_nn) < -1e-7:
            return False
    for grp in comp.groups:
        Sg = np.tensordot(grp.A, -yh, axes=(1, 0))
        if Sg.size:
            lam = np.linalg.eigvalsh(_sym(Sg))[..., 0]
            scale = max(1.0, float(np.max(np.abs(Sg))))
            if float(lam.min()) < -1e-7 * scale:
                return False
    return True


def _factorize(K, m, trace11):
    """LU-factorize the saddle system, regularizing if exactly singular."""
    import warnings

    jitter = 1e-12 * (1.0 + abs(trace11) / max(m, 1))
    for attempt in range(3):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                factor = sla.lu_factor(K)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise _Numerics(str(exc)) from exc
        diag = np.abs(np.diag(factor[0]))
        if diag.size == 0 or (np.all(diag > 0.0) and np.all(np.isfinite(diag))):
            return factor
        K = K.copy()
        K[np.diag_indices(m)] += jitter
        if K.shape[0] > m:
            K[range(m, K.shape[0]), range(m, K.shape[0])] -= jitter
        jitter *= 1e3
    raise _Numerics("singular Newton system")


def solve(problem: ConicProblem, opts: SolverOptions | None = None, **kwargs) -> ConicSolution:
    """Solve a ConicProblem (maximization). Requires validate(problem) == []."""
    if opts is None:
        opts = SolverOptions(**kwargs)
    issues = validate(problem)
    if issues:
        raise ValueError("invalid problem: " + "; ".join(issues))
    comp = _Compiled(problem)

    if comp.trivially_infeasible:
        X0 = [np.eye(g.dim)[None].repeat(len(g.indices), axis=0) for g in comp.groups]
        return _extract(comp, SolveStatus.INFEASIBLE, X0, np.ones(comp.n_nn),
                        np.zeros(comp.n_free), np.zeros(comp.m), np.inf, np.inf, np.inf, 0)
    if comp.nu == 0:
        return _solve_free_only(comp, opts)

    # Overflow on diverging iterates is detected via finiteness checks, not
    # floating-point warnings.
    old_err = np.seterr(over="ignore", invalid="ignore", divide="ignore")
    try:
        return _iterate(comp, opts)
    finally:
        np.seterr(**old_err)


def _iterate(comp: _Compiled, opts: SolverOptions) -> ConicSolution:
    eta_p = max(1.0, float(np.max(np.abs(comp.b))) if comp.m else 1.0)
    eta_d = max(
        1.0,
        max((float(np.linalg.norm(g.C, axis=(1, 2)).max()) if g.C.size else 0.0 for g in comp.groups), default=0.0),
        float(np.max(np.abs(comp.c_nn))) if comp.n_nn else 0.0,
    )
    eyes = [np.eye(g.dim)[None].repeat(len(g.indices), axis=0) for g in comp.groups]
    X = [eta_p * e.copy() for e in eyes]
    S = [eta_d * e.copy() for e in eyes]
    x_nn = np.full(comp.n_nn, eta_p)
    s_nn = np.full(comp.n_nn, eta_d)
    x_free = np.zeros(comp.n_free)
    y = np.zeros(comp.m)

    b_norm = 1.0 + np.linalg.norm(comp.b)
    c_norm = 1.0 + np.sqrt(
        sum(float(np.sum(g.C**2)) for g in comp.groups)
        + np.linalg.norm(comp.c_nn) ** 2
        + np.linalg.norm(comp.c_free) ** 2
    )

    diverge_count = 0
    stall_count = 0
    prev_pin = np.inf
    status = SolveStatus.MAX_ITER
    pin = din = relgap = np.inf
    last_dobj = 0.0
    it = 0

    for it in range(1, opts.max_iter + 1):
        rp = comp.b - comp.apply_A(X, x_nn, x_free)
        ATy = comp.apply_AT(y)
        rd_psd = [grp.C - a - Sg for grp, a, Sg in zip(comp.groups, ATy, S)]
        rd_nn = comp.c_nn - comp.A_nn.T @ y - s_nn if comp.n_nn else np.zeros(0)
        rd_free = comp.c_free - comp.A_free.T @ y if comp.n_free else np.zeros(0)

        gap = sum(float(np.sum(Xg * Sg)) for Xg, Sg in zip(X, S)) + float(x_nn @ s_nn)
        mu = gap / comp.nu
        pobj = (
            sum(float(np.sum(g.C * Xg)) for g, Xg in zip(comp.groups, X))
            + float(comp.c_nn @ x_nn)
            + (float(comp.c_free @ x_free) if comp.n_free else 0.0)
        )
        dobj = float(comp.b @ y)
        pin = np.linalg.norm(rp) / b_norm
        din = np.sqrt(
            sum(float(np.sum(r**2)) for r in rd_psd)
            + np.linalg.norm(rd_nn) ** 2
            + np.linalg.norm(rd_free) ** 2
        ) / c_norm
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))

        if not np.isfinite(pin + din + relgap + gap):
            status = SolveStatus.NUMERICAL_FAILURE
            break
        last_dobj = dobj
        if pin <= opts.feas_tol and din <= opts.feas_tol and relgap <= opts.gap_tol:
            status = SolveStatus.OPTIMAL
            break
        if abs(dobj) > DIVERGENCE_LIMIT and pin >= prev_pin - 1e-14:
            diverge_count += 1
            if diverge_count >= DIVERGENCE_ITERS:
                status = SolveStatus.INFEASIBLE
                break
        else:
            diverge_count = 0
        prev_pin = pin
        # Early certificate check once divergence indicators appear.
        if dobj > 1e2 and pin > 10 * opts.feas_tol and it % 3 == 0:
            if _farkas_certificate(comp, y):
                status = SolveStatus.INFEASIBLE
                break

        try:
            # Nesterov-Todd scaling per block: W S W = X, scaled point
            # V = Q diag(lam) Q^T shared by primal and dual.
            Ws, Whs, Wihs, Qs, lams, Lxs, Lss = [], [], [], [], [], [], []
            for gi, grp in enumerate(comp.groups):
                Lx, Ls = _chol_batch(X[gi]), _chol_batch(S[gi])
                U, sig, Vt = np.linalg.svd(np.swapaxes(Ls, -1, -2) @ Lx)
                if np.any(sig <= 0.0) or not np.all(np.isfinite(sig)):
                    raise _Numerics("degenerate NT scaling")
                G = Lx @ (np.swapaxes(Vt, -1, -2) / np.sqrt(sig)[:, None, :])
                W = _sym(G @ np.swapaxes(G, -1, -2))
                ew, EV = np.linalg.eigh(W)
                if np.any(ew <= 0.0):
                    raise _Numerics("NT scaling lost positive definiteness")
                Wh = (EV * np.sqrt(ew)[:, None, :]) @ np.swapaxes(EV, -1, -2)
                Wih = (EV / np.sqrt(ew)[:, None, :]) @ np.swapaxes(EV, -1, -2)
                Ws.append(W)
                Whs.append(Wh)
                Wihs.append(Wih)
                Qs.append(Wih @ G)
                lams.append(sig)
                Lxs.append(Lx)
                Lss.append(Ls)
            w_nn = np.sqrt(x_nn / s_nn) if comp.n_nn else np.zeros(0)
            w_nn2 = w_nn**2

            # Schur complement; one factorization serves predictor and corrector.
            m = comp.m
            nf = comp.n_free
            M11 = np.zeros((m, m))
            for gi, grp in enumerate(comp.groups):
                T = np.matmul(Ws[gi][:, None], np.matmul(grp.A, Ws[gi][:, None]))
                b = T.shape[0]
                M11 += np.matmul(T.reshape(b, m, -1), grp.A2T).sum(axis=0)
            if comp.n_nn:
                M11 += (comp.A_nn * w_nn2[None, :]) @ comp.A_nn.T
            K = np.zeros((m + nf, m + nf))
            K[:m, :m] = 0.5 * (M11 + M11.T)
            if nf:
                K[:m, m:] = comp.A_free
                K[m:, :m] = comp.A_free.T
            factor = _factorize(K, m, float(np.trace(M11)))

            def newton(Rc_psd, rc_nn):
                rhs1 = rp.copy()
                for gi, grp in enumerate(comp.groups):
                    WrdW = np.matmul(Ws[gi], np.matmul(rd_psd[gi], Ws[gi]))
                    diff = (WrdW - Rc_psd[gi]).reshape(WrdW.shape[0], -1, 1)
                    rhs1 += np.matmul(grp.A2, diff)[:, :, 0].sum(axis=0)
                if comp.n_nn:
                    rhs1 += comp.A_nn @ (w_nn2 * rd_nn - rc_nn)
                sol = sla.lu_solve(factor, np.concatenate([rhs1, rd_free]))
                dy = sol[:m]
                dx_free = sol[m:]
                ATdy = comp.apply_AT(dy)
                dS = [rd_psd[gi] - ATdy[gi] for gi in range(len(comp.groups))]
                dX = [_sym(Rc_psd[gi] - np.matmul(Ws[gi], np.matmul(dS[gi], Ws[gi]))) for gi in range(len(comp.groups))]
                ds_nn = rd_nn - comp.A_nn.T @ dy if comp.n_nn else np.zeros(0)
                dx_nn = rc_nn - w_nn2 * ds_nn if comp.n_nn else np.zeros(0)
                return dX, dx_nn, dx_free, dy, dS, ds_nn

            # Predictor aims straight at complementarity zero.
            dXa, dxna, dxfa, dya, dSa, dsna = newton([-Xg for Xg in X], -x_nn)

            ap = min(min((_max_step_group(Lxs[gi], dXa[gi]) for gi in range(len(comp.groups))), default=np.inf),
                     _max_step_nn(x_nn, dxna))
            ad = min(min((_max_step_group(Lss[gi], dSa[gi]) for gi in range(len(comp.groups))), default=np.inf),
                     _max_step_nn(s_nn, dsna))
            ap, ad = min(1.0, ap), min(1.0, ad)
            gap_aff = sum(
                float(np.sum((X[gi] + ap * dXa[gi]) * (S[gi] + ad * dSa[gi])))
                for gi in range(len(comp.groups))
            ) + float((x_nn + ap * dxna) @ (s_nn + ad * dsna))
            mu_aff = max(gap_aff, 0.0) / comp.nu
            sigma = float(np.clip((mu_aff / mu) ** 3, 1e-10, 1.0))

            # Mehrotra corrector in the scaled (V) eigenbasis.
            Rc = []
            for gi in range(len(comp.groups)):
                lam = lams[gi]
                Q = Qs[gi]
                Qt = np.swapaxes(Q, -1, -2)
                Dxa = Qt @ (Wihs[gi] @ dXa[gi] @ Wihs[gi]) @ Q
                Dsa = Qt @ (Whs[gi] @ dSa[gi] @ Whs[gi]) @ Q
                cross = 0.5 * (Dxa @ Dsa + Dsa @ Dxa)
                Rt = sigma * mu * eyes[gi] - (lam**2)[:, None, :] * eyes[gi] - cross
                Rp = 2.0 * Rt / (lam[:, :, None] + lam[:, None, :])
                Rc.append(_sym(Whs[gi] @ (Q @ Rp @ Qt) @ Whs[gi]))
            rc_nn = (sigma * mu - x_nn * s_nn - dxna * dsna) / s_nn if comp.n_nn else np.zeros(0)

            dX, dx_nn, dx_free, dy, dS, ds_nn = newton(Rc, rc_nn)

            ap = min(min((_max_step_group(Lxs[gi], dX[gi]) for gi in range(len(comp.groups))), default=np.inf),
                     _max_step_nn(x_nn, dx_nn))
            ad = min(min((_max_step_group(Lss[gi], dS[gi]) for gi in range(len(comp.groups))), default=np.inf),
                     _max_step_nn(s_nn, ds_nn))
            ap = min(1.0, opts.step_fraction * ap)
            ad = min(1.0, opts.step_fraction * ad)
        except (_Numerics, np.linalg.LinAlgError, ValueError):
            status = SolveStatus.NUMERICAL_FAILURE
            break

        if ap < _STALL_STEP and ad < _STALL_STEP:
            stall_count += 1
            if stall_count >= _STALL_ITERS:
                status = SolveStatus.MAX_ITER
                break
        else:
            stall_count = 0

        for gi in range(len(comp.groups)):
            X[gi] = _sym(X[gi] + ap * dX[gi])
            S[gi] = _sym(S[gi] + ad * dS[gi])
        x_nn = x_nn + ap * dx_nn
        s_nn = s_nn + ad * ds_nn
        x_free = x_free + ap * dx_free
        y = y + ad * dy

    # A numerical breakdown or iteration cap reached while the dual objective
    # has already diverged and the primal residual is far from feasible is the
    # practical signature of an infeasible instance.
    if status in (SolveStatus.NUMERICAL_FAILURE, SolveStatus.MAX_ITER):
        if abs(last_dobj) > DIVERGENCE_LIMIT and (not np.isfinite(pin) or pin > 10 * opts.feas_tol):
            status = SolveStatus.INFEASIBLE

    return _extract(comp, status, X, x_nn, x_free, y, relgap, pin, din, it)
