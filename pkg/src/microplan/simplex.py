"""Bounded-variable primal simplex on a sparse equality form.

Rows are converted to equalities with one slack each; a crash basis uses
slacks where the initial residual fits their bounds and signed artificial
columns elsewhere, so phase 1 minimizes total artificial mass.  Below a
size threshold the engine works dense, carrying an explicit basis inverse
updated in product form and refactored periodically; above it, a sparse
LU is refactored every iteration (slower, but hard to destabilize).
Pricing is Dantzig with an automatic switch to Bland's rule after a
stall, making every solve deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

AT_LB, AT_UB, BASIC, FREE = 0, 1, 2, 3

_FEAS_TOL = 1e-7
_DENSE_MAX_ROWS = 1200
_REFACTOR_EVERY = 64


class SimplexError(RuntimeError):
    """Numerical failure (singular basis, iteration runaway) with context."""


@dataclass
class LpResult:
    status: str                 # optimal | infeasible | unbounded
    x: Optional[np.ndarray]     # structural values
    objective: Optional[float]
    iterations: int


class BoundedSimplex:
    """Reusable LP engine for one constraint matrix under varying bounds."""

    def __init__(self, A, senses, rhs, c):
        A = sp.csc_matrix(A)
        m, n = A.shape
        eye = sp.identity(m, format="csc")
        self.M = sp.hstack([A, eye, eye, -eye], format="csc")
        self.m, self.n = m, n
        self.b = np.asarray(rhs, dtype=float)
        self.c_struct = np.asarray(c, dtype=float)
        senses = np.asarray(senses)
        self.slack_lb = np.where(senses == "G", -np.inf, 0.0)
        self.slack_ub = np.where(senses == "L", np.inf, 0.0)
        self.dense = m <= _DENSE_MAX_ROWS
        if self.dense:
            self.Md = self.M.toarray()
        else:
            self.MT = self.M.T.tocsr()

    def solve(self, lb, ub, c: Optional[np.ndarray] = None, *,
              pivot_tol: float = 1e-9, maxiter: Optional[int] = None) -> LpResult:
        m, n = self.m, self.n
        N = n + 3 * m
        if maxiter is None:
            maxiter = max(5000, 50 * (m + n))
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        if np.any(lb > ub + 1e-12):
            return LpResult("infeasible", None, None, 0)
        c_struct = self.c_struct if c is None else np.asarray(c, dtype=float)

        full_lb = np.concatenate([lb, self.slack_lb, np.zeros(2 * m)])
        full_ub = np.concatenate([ub, self.slack_ub, np.full(2 * m, np.inf)])

        x = np.zeros(N)
        status = np.full(N, AT_LB, dtype=np.int8)
        has_lb = np.isfinite(full_lb)
        has_ub = np.isfinite(full_ub)
        prefer_lb = has_lb & (~has_ub | (np.abs(full_lb) <= np.abs(full_ub)))
        at_ub = has_ub & ~prefer_lb
        free = ~has_lb & ~has_ub
        status[prefer_lb] = AT_LB
        status[at_ub] = AT_UB
        status[free] = FREE
        x[prefer_lb] = full_lb[prefer_lb]
        x[at_ub] = full_ub[at_ub]

        # Crash basis: slacks where the residual fits, artificials elsewhere.
        r = self.b - self.M[:, :n] @ x[:n]
        basis = np.empty(m, dtype=np.int64)
        need_phase1 = False
        for i in range(m):
            j = n + i
            if self.slack_lb[i] - _FEAS_TOL <= r[i] <= self.slack_ub[i] + _FEAS_TOL:
                basis[i] = j
                status[j] = BASIC
                x[j] = r[i]
            else:
                sbar = min(max(r[i], self.slack_lb[i]), self.slack_ub[i])
                status[j] = AT_UB if sbar == self.slack_ub[i] else AT_LB
                x[j] = sbar
                resid = r[i] - sbar
                art = n + m + i if resid > 0 else n + 2 * m + i
                basis[i] = art
                status[art] = BASIC
                x[art] = abs(resid)
                need_phase1 = True

        if need_phase1:
            c1 = np.zeros(N)
            c1[n + m:] = 1.0
            outcome, iters1 = self._iterate(x, status, basis, full_lb, full_ub, c1,
                                            pivot_tol, maxiter, phase1=True)
            if outcome == "iterlimit":
                raise SimplexError(f"phase 1 exceeded {maxiter} iterations")
            if outcome == "unbounded":
                raise SimplexError("phase 1 reported an unbounded direction")
            infeas = float(np.sum(np.clip(x[n + m:], 0.0, None)))
            if infeas > _FEAS_TOL * max(1.0, float(np.max(np.abs(self.b), initial=0.0))):
                return LpResult("infeasible", None, None, iters1)
        else:
            iters1 = 0
        full_ub[n + m:] = 0.0  # artificials frozen for phase 2

        c2 = np.concatenate([c_struct, np.zeros(3 * m)])
        outcome, iters2 = self._iterate(x, status, basis, full_lb, full_ub, c2,
                                        pivot_tol, maxiter, phase1=False)
        if outcome == "iterlimit":
            raise SimplexError(f"phase 2 exceeded {maxiter} iterations")
        if outcome == "unbounded":
            return LpResult("unbounded", None, None, iters1 + iters2)
        xs = x[:n].copy()
        return LpResult("optimal", xs, float(c_struct @ xs), iters1 + iters2)

    # ------------------------------------------------------------------
    def _refactor_dense(self, basis):
        B = self.Md[:, basis]
        try:
            binv = sla.inv(B, check_finite=False)
        except (sla.LinAlgError, ValueError) as exc:
            raise SimplexError(f"singular basis: {exc}") from None
        if not np.all(np.isfinite(binv)):
            raise SimplexError("singular basis (non-finite inverse)")
        return binv

    def _recompute_basics(self, x, basis, binv=None, lu=None):
        x_masked = x.copy()
        x_masked[basis] = 0.0
        rhs_eff = self.b - (self.Md @ x_masked if self.dense else self.M @ x_masked)
        xb = binv @ rhs_eff if binv is not None else lu.solve(rhs_eff)
        if not np.all(np.isfinite(xb)):
            raise SimplexError("non-finite basic solution")
        x[basis] = xb

    def _iterate(self, x, status, basis, lb, ub, c, pivot_tol, maxiter, phase1):
        m = self.m
        bland = False
        stall = 0
        nonbasic_mask = np.ones(len(x), dtype=bool)
        binv = None
        lu = None
        since_refactor = 0

        for it in range(1, maxiter + 1):
            if self.dense:
                if binv is None or since_refactor >= _REFACTOR_EVERY:
                    binv = self._refactor_dense(basis)
                    since_refactor = 0
                    self._recompute_basics(x, basis, binv=binv)
            else:
                try:
                    lu = splu(self.M[:, basis].tocsc())
                except RuntimeError as exc:
                    raise SimplexError(f"singular basis: {exc}") from None
                self._recompute_basics(x, basis, lu=lu)

            cb = c[basis]
            if self.dense:
                y = cb @ binv
                d = c - y @ self.Md
            else:
                y = lu.solve(cb, trans="T")
                d = c - self.MT @ y

            nonbasic_mask[:] = True
            nonbasic_mask[basis] = False
            cand_up = nonbasic_mask & (
                ((status == AT_LB) & (d < -pivot_tol))
                | ((status == FREE) & (d < -pivot_tol)))
            cand_dn = nonbasic_mask & (
                ((status == AT_UB) & (d > pivot_tol))
                | ((status == FREE) & (d > pivot_tol)))
            eligible = np.flatnonzero(cand_up | cand_dn)
            if eligible.size == 0:
                return "optimal", it
            if bland:
                q = int(eligible[0])
            else:
                scores = np.abs(d[eligible])
                q = int(eligible[int(np.argmax(scores))])
            sigma = 1.0 if cand_up[q] else -1.0

            if self.dense:
                w = binv @ self.Md[:, q]
            else:
                w = lu.solve(self.M[:, q].toarray().ravel())
            delta = -sigma * w

            # Ratio test over basic variables, plus the entering bound flip.
            xb_cur = x[basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_up = np.where(delta > pivot_tol, (ub[basis] - xb_cur) / delta, np.inf)
                t_dn = np.where(delta < -pivot_tol, (lb[basis] - xb_cur) / delta, np.inf)
            t_rows = np.minimum(t_up, t_dn)
            t_rows = np.clip(t_rows, 0.0, None)
            t_block = float(np.min(t_rows)) if t_rows.size else np.inf
            if status[q] == FREE or not (np.isfinite(lb[q]) and np.isfinite(ub[q])):
                t_flip = np.inf
            else:
                t_flip = ub[q] - lb[q]
            t_star = min(t_block, t_flip)

            if not np.isfinite(t_star):
                if phase1:
                    raise SimplexError("unbounded phase-1 direction")
                return "unbounded", it

            if t_flip <= t_block:
                # Bound-to-bound move, basis unchanged.
                x[basis] += delta * t_star
                x[q] = ub[q] if status[q] == AT_LB else lb[q]
                status[q] = AT_UB if status[q] == AT_LB else AT_LB
            else:
                ties = np.flatnonzero(t_rows <= t_star + 1e-12)
                rpos = int(ties[int(np.argmin(basis[ties]))])
                leave = int(basis[rpos])
                x[q] = x[q] + sigma * t_star
                x[basis] += delta * t_star
                if delta[rpos] > 0:
                    status[leave] = AT_UB
                    x[leave] = ub[leave]
                else:
                    status[leave] = AT_LB
                    x[leave] = lb[leave]
                basis[rpos] = q
                status[q] = BASIC
                if self.dense:
                    wr = w[rpos]
                    if abs(wr) < pivot_tol:
                        binv = None  # force refactor next iteration
                    else:
                        coef = w / wr
                        coef[rpos] = (wr - 1.0) / wr
                        binv -= np.outer(coef, binv[rpos])
                        since_refactor += 1
                else:
                    lu = None

            gain = abs(d[q]) * t_star
            if gain > 1e-12:
                stall = 0
            else:
                stall += 1
                if stall > m + 200:
                    bland = True
        return "iterlimit", maxiter


def solve_lp(A, senses, rhs, c, lb, ub, **kwargs) -> LpResult:
    """One-shot convenience wrapper around BoundedSimplex."""
    return BoundedSimplex(A, senses, rhs, c).solve(np.asarray(lb, dtype=float),
                                                   np.asarray(ub, dtype=float), **kwargs)
