"""Dense bounded-variable primal simplex.

Solves ``min/max c @ x`` subject to ``A_eq x = b_eq``, ``A_ub x <= b_ub`` and
``lb <= x <= ub`` (``lb`` finite, ``ub`` may be ``inf``). Nonbasic variables
sit at either bound, so box constraints never become rows. Phase 1 starts
from an all-artificial basis. Pricing is Dantzig's rule until a run of
degenerate pivots exceeds ``stall_limit``; from then on Bland's smallest
index rule is used for both the entering and leaving choice, which rules
out cycling.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from leocompress.errors import SolverError

PIVOT_TOL = 1e-9
REFACTOR_EVERY = 40


class LPStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LPResult:
    status: LPStatus
    value: float | None = None
    x: np.ndarray | None = None
    basis: tuple[int, ...] | None = None
    iterations: int = 0


class _Simplex:
    def __init__(self, A: np.ndarray, b: np.ndarray, lb: np.ndarray, ub: np.ndarray, stall_limit: int):
        m, n = A.shape
        self.n = n
        self.stall_limit = stall_limit
        self.iterations = 0
        x0 = lb.copy()
        r = b - A @ x0
        sign = np.where(r < 0, -1.0, 1.0)
        self.A = np.hstack([A, np.diag(sign)])
        self.b = b.astype(np.float64).copy()
        self.lb = np.concatenate([lb, np.zeros(m)])
        self.ub = np.concatenate([ub, np.full(m, np.inf)])
        self.x = np.concatenate([x0, np.abs(r)])
        self.at_upper = np.zeros(n + m, dtype=bool)
        self.basis = np.arange(n, n + m)
        self.is_basic = np.zeros(n + m, dtype=bool)
        self.is_basic[self.basis] = True
        self.T = sign[:, None] * self.A
        self.since_refactor = 0

    def refactor(self) -> None:
        B = self.A[:, self.basis]
        nonbasic = ~self.is_basic
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        try:
            self.T = np.linalg.solve(B, self.A)
            self.x[self.basis] = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular basis during refactorization: {exc}") from None
        self.since_refactor = 0

    def _pivot(self, r: int, q: int) -> None:
        T = self.T
        piv = T[r, q]
        T[r] /= piv
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        leaving = self.basis[r]
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.basis[r] = q
        self.since_refactor += 1

    def run(self, cost: np.ndarray, allowed: np.ndarray, max_iter: int, opt_tol: float) -> LPStatus:
        bland = False
        stall = 0
        movable = self.ub > self.lb
        while True:
            self.iterations += 1
            if self.iterations > max_iter:
                raise SolverError("simplex iteration limit reached")
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
            d = cost - cost[self.basis] @ self.T
            free = allowed & ~self.is_basic & movable
            up = free & ~self.at_upper & (d < -opt_tol)
            down = free & self.at_upper & (d > opt_tol)
            elig = up | down
            if not elig.any():
                return LPStatus.OPTIMAL
            if bland:
                q = int(np.flatnonzero(elig)[0])
            else:
                q = int(np.argmax(np.where(elig, np.abs(d), -1.0)))
            s = 1.0 if up[q] else -1.0
            col = s * self.T[:, q]
            xB = self.x[self.basis]
            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]
            ratios = np.full(col.shape, np.inf)
            dec = col > PIVOT_TOL
            inc = col < -PIVOT_TOL
            ratios[dec] = (xB[dec] - lbB[dec]) / col[dec]
            ratios[inc] = (ubB[inc] - xB[inc]) / -col[inc]
            np.maximum(ratios, 0.0, out=ratios)
            t_min = ratios.min() if ratios.size else np.inf
            t_flip = self.ub[q] - self.lb[q]
            if t_flip <= t_min:
                if not np.isfinite(t_flip):
                    return LPStatus.UNBOUNDED
                self.x[self.basis] = xB - t_flip * col
                self.at_upper[q] = not self.at_upper[q]
                self.x[q] = self.ub[q] if self.at_upper[q] else self.lb[q]
                stall = 0
                continue
            cand = np.flatnonzero(ratios <= t_min * (1.0 + 1e-9) + 1e-12)
            if bland:
                r = int(cand[np.argmin(self.basis[cand])])
            else:
                r = int(cand[np.argmax(np.abs(col[cand]))])
            t = ratios[r]
            leaving = int(self.basis[r])
            self.x[self.basis] = xB - t * col
            self.x[q] += s * t
            if col[r] > 0:
                self.x[leaving] = self.lb[leaving]
                self.at_upper[leaving] = False
            else:
                self.x[leaving] = self.ub[leaving]
                self.at_upper[leaving] = True
            self._pivot(r, q)
            self.at_upper[q] = False
            if t <= 1e-12:
                stall += 1
                if stall > self.stall_limit:
                    bland = True
            else:
                stall = 0

    def drop_artificials(self) -> None:
        n = self.n
        keep_pos = []
        drop_rows = []
        for r in range(len(self.basis)):
            if self.basis[r] < n:
                keep_pos.append(r)
                continue
            cand = np.flatnonzero(~self.is_basic[:n] & (np.abs(self.T[r, :n]) > 1e-7))
            if cand.size:
                q = int(cand[np.argmax(np.abs(self.T[r, cand]))])
                self._pivot(r, q)
                self.at_upper[q] = False
                keep_pos.append(r)
            else:
                # constraint row owning this artificial is redundant
                drop_rows.append(int(self.basis[r]) - n)
        rows = np.setdiff1d(np.arange(self.A.shape[0]), drop_rows)
        pos = np.array(keep_pos, dtype=int)
        self.A = self.A[rows][:, :n]
        self.b = self.b[rows]
        self.T = self.T[pos][:, :n]
        self.basis = self.basis[pos]
        self.lb = self.lb[:n]
        self.ub = self.ub[:n]
        self.x = self.x[:n]
        self.at_upper = self.at_upper[:n]
        self.is_basic = self.is_basic[:n]
        if len(self.basis):
            self.refactor()


def solve_bounded_lp(
    c,
    A_eq=None,
    b_eq=None,
    A_ub=None,
    b_ub=None,
    lb=None,
    ub=None,
    *,
    maximize: bool = False,
    feas_tol: float = 1e-7,
    opt_tol: float = 1e-9,
    stall_limit: int = 30,
    max_iter: int | None = None,
) -> LPResult:
    """Solve a small dense LP exactly (up to floating point) by primal simplex."""
    c = np.asarray(c, dtype=np.float64)
    n = c.shape[0]
    if n == 0:
        raise ValueError("LP must have at least one variable")
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=np.float64)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=np.float64)
    if not np.all(np.isfinite(lb)):
        raise ValueError("lower bounds must be finite")
    if np.any(lb > ub + feas_tol):
        return LPResult(LPStatus.INFEASIBLE)
    ub = np.maximum(ub, lb)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=np.float64).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=np.float64).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64)
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]

    # slacks turn A_ub rows into equalities
    A = np.zeros((m_eq + m_ub, n + m_ub))
    A[:m_eq, :n] = A_eq
    A[m_eq:, :n] = A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    full_lb = np.concatenate([lb, np.zeros(m_ub)])
    full_ub = np.concatenate([ub, np.full(m_ub, np.inf)])
    cost = np.concatenate([-c if maximize else c, np.zeros(m_ub)])

    if A.shape[0] == 0:
        if np.any((cost < 0) & ~np.isfinite(full_ub)):
            return LPResult(LPStatus.UNBOUNDED)
        x = np.where(cost < 0, full_ub, full_lb)[:n]
        return LPResult(LPStatus.OPTIMAL, float(c @ x), x, (), 0)

    m, ntot = A.shape
    if max_iter is None:
        max_iter = 50 * (m + ntot) + 1000
    sx = _Simplex(A, b, full_lb, full_ub, stall_limit)

    phase1 = np.concatenate([np.zeros(ntot), np.ones(m)])
    sx.run(phase1, np.ones(ntot + m, dtype=bool), max_iter, opt_tol)
    sx.refactor()
    infeas = float(np.sum(sx.x[ntot:]))
    if infeas > feas_tol * (1.0 + np.max(np.abs(b), initial=0.0)):
        return LPResult(LPStatus.INFEASIBLE, iterations=sx.iterations)
    sx.drop_artificials()

    status = sx.run(cost, np.ones(ntot, dtype=bool), max_iter, opt_tol)
    if status is LPStatus.UNBOUNDED:
        return LPResult(LPStatus.UNBOUNDED, iterations=sx.iterations)
    if len(sx.basis):
        sx.refactor()
    x = np.clip(sx.x, full_lb, full_ub)[:n]
    value = float(c @ x)
    return LPResult(LPStatus.OPTIMAL, value, x, tuple(int(j) for j in sx.basis), sx.iterations)
