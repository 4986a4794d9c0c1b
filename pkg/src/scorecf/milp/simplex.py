"""Dense two-phase primal simplex over bounded variables, with a dual restart.

The tableau form keeps the full B^-1 A matrix up to date after every pivot, so
pricing and ratio tests are plain vector operations.  Variable bounds are
handled implicitly (never as extra rows): nonbasic variables sit at a finite
bound (or at zero when free), and entering steps may stop at the entering
variable's own opposite bound, which flips it without a basis change.

The dual loop exists for restarts: after only variable bounds change (the one
thing branch and bound does), reduced costs stay dual feasible, so a handful
of dual pivots re-optimize far faster than solving from scratch.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import NumericalError

# Variable states.
BASIC = 0
AT_LOWER = 1
AT_UPPER = 2
FREE = 3

# Reduced-cost significance.
DUAL_TOL = 1e-9
# Preferred minimum pivot magnitude; 1e-11 is the hard floor.
PIVOT_TOL = 1e-9
PIVOT_FLOOR = 1e-11
# Dual entering steps scale with 1/|pivot|, so accepting a noise-sized
# entry multiplies rounding error into the whole tableau.  Candidates
# below this threshold are refused; the restart falls back to a fresh
# factorization rather than trust them.
DUAL_PIVOT_TOL = 1e-6
# Steps at most this long count as degenerate.
DEGENERATE_STEP = 1e-12
# Consecutive degenerate pivots before switching to Bland's rule.
BLAND_TRIGGER = 1000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
# Internal to the dual loop: the warm tableau cannot support a conclusion.
STALE = "stale"


class DeadlineReached(Exception):
    """Raised out of the pivot loops when the caller's deadline passes."""


class BoundedSimplex:
    """LP state shared across a branch-and-bound tree.

    Parameters describe min c.x subject to A x (sense) b and box bounds.
    Slack columns are appended internally; artificial columns are appended
    once and recycled by every from-scratch solve.
    """

    def __init__(
        self,
        A: np.ndarray,
        b: np.ndarray,
        senses: list[str],
        c: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
        feas_tol: float = 1e-7,
    ):
        self.m, self.n_struct = A.shape
        self.feas_tol = feas_tol
        self.deadline: float | None = None
        self._clock = None

        n_slack = sum(1 for s in senses if s != "=")
        self.n_slack = n_slack
        n = self.n_struct + n_slack + self.m  # artificials come last
        self.n_total = n
        self.art_start = self.n_struct + n_slack

        self.A = np.zeros((self.m, n))
        self.A[:, : self.n_struct] = A
        self.b = np.asarray(b, dtype=float).copy()
        self.lb = np.full(n, -math.inf)
        self.ub = np.full(n, math.inf)
        self.lb[: self.n_struct] = lower
        self.ub[: self.n_struct] = upper

        k = self.n_struct
        for i, sense in enumerate(senses):
            if sense == "=":
                continue
            self.A[i, k] = 1.0
            if sense == "<=":
                self.lb[k], self.ub[k] = 0.0, math.inf
            else:  # ">=": a.x + s = b with s <= 0
                self.lb[k], self.ub[k] = -math.inf, 0.0
            k += 1
        for i in range(self.m):
            self.A[i, self.art_start + i] = 1.0
            self.lb[self.art_start + i] = 0.0
            self.ub[self.art_start + i] = 0.0

        self.c = np.zeros(n)
        self.c[: self.n_struct] = c

        # Columns that touch exactly one row can serve as that row's starting
        # basic variable, which keeps most definitional rows artificial-free.
        touch = (self.A[:, : self.art_start] != 0.0).sum(axis=0)
        self._singletons: list[list[int]] = [[] for _ in range(self.m)]
        for j in np.flatnonzero(touch == 1):
            row = int(np.flatnonzero(self.A[:, j])[0])
            self._singletons[row].append(int(j))

        self.T = np.zeros((self.m, n))
        self._rank1 = np.zeros((self.m, self.art_start))  # pivot update scratch
        self.d1 = np.zeros(n)  # phase-1 reduced costs
        self.d2 = np.zeros(n)  # phase-2 reduced costs
        self.xB = np.zeros(self.m)
        self.basis = np.zeros(self.m, dtype=np.int64)
        self.vstat = np.full(n, AT_LOWER, dtype=np.int8)
        self.pivots = 0
        self._phase = 2
        self._bland = 0  # consecutive degenerate pivots

    # -- bookkeeping ------------------------------------------------------

    def set_deadline(self, clock, deadline: float | None) -> None:
        self._clock = clock
        self.deadline = deadline

    def _check_deadline(self) -> None:
        if self.deadline is not None and self._clock() > self.deadline:
            raise DeadlineReached()

    def nonbasic_value(self, j: int) -> float:
        s = self.vstat[j]
        if s == AT_LOWER:
            return self.lb[j]
        if s == AT_UPPER:
            return self.ub[j]
        return 0.0

    def values(self) -> np.ndarray:
        v = np.where(self.vstat == AT_UPPER, self.ub, np.where(self.vstat == AT_LOWER, self.lb, 0.0))
        v[self.basis] = self.xB
        return v

    def objective(self) -> float:
        return float(self.c @ self.values())

    def set_bounds(self, j: int, lower: float, upper: float) -> None:
        """Change one structural variable's bounds, keeping the basis valid."""
        if self.vstat[j] == BASIC:
            self.lb[j], self.ub[j] = lower, upper
            return
        old = self.nonbasic_value(j)
        self.lb[j], self.ub[j] = lower, upper
        if old < lower:
            target, state = lower, AT_LOWER
        elif old > upper:
            target, state = upper, AT_UPPER
        elif self.vstat[j] == FREE and math.isinf(lower) and math.isinf(upper):
            return
        elif old == lower:
            target, state = lower, AT_LOWER
        elif old == upper:
            target, state = upper, AT_UPPER
        elif old - lower <= upper - old:
            target, state = lower, AT_LOWER
        else:
            target, state = upper, AT_UPPER
        if math.isinf(target):
            state = FREE
            target = 0.0
        if target != old:
            self.xB -= self.T[:, j] * (target - old)
        self.vstat[j] = state

    # -- pivoting ----------------------------------------------------------

    def _pivot(self, r: int, j: int, enter_val: float, leave_state: int) -> None:
        piv = self.T[r, j]
        if abs(piv) < PIVOT_FLOOR:
            raise NumericalError(f"pivot magnitude {abs(piv):.3e} below the 1e-11 floor")
        leaving = self.basis[r]
        # Artificial columns are rebuilt fresh by every scratch solve and
        # never read in between, so updates stop at art_start.  Zero factors
        # add exactly zero, so restricting the rank-1 update to the pivot
        # column's nonzero rows and the pivot row's nonzero columns is
        # bit-identical to the full update; whichever of the three shapes
        # (sparse block, contiguous row slices, whole live region) touches
        # the least memory wins, and the kept buffer stops the larger two
        # from allocating tableau-sized temporaries.
        live = self.art_start
        Trow = self.T[r, :live] / piv
        colv = self.T[:, j].copy()
        colv[r] = 0.0
        rows = np.flatnonzero(colv)
        if rows.size:
            cols = np.flatnonzero(Trow)
            if 3 * cols.size <= 2 * live:
                block = self.T[np.ix_(rows, cols)]
                block -= colv[rows, None] * Trow[cols]
                self.T[np.ix_(rows, cols)] = block
            elif rows.size * 2 >= self.m:
                np.multiply(colv[:, None], Trow, out=self._rank1)
                np.subtract(self.T[:, :live], self._rank1, out=self.T[:, :live])
            else:
                buf = self._rank1[: rows.size]
                np.multiply(colv[rows, None], Trow, out=buf)
                self.T[rows, :live] -= buf
        self.T[r, :live] = Trow
        self.d1[:live] -= self.d1[j] * Trow
        self.d2[:live] -= self.d2[j] * Trow
        self.d1[j] = 0.0
        self.d2[j] = 0.0
        self.basis[r] = j
        self.vstat[j] = BASIC
        self.vstat[leaving] = leave_state
        if leaving >= self.art_start:
            # An artificial that leaves is never allowed back.
            self.lb[leaving] = 0.0
            self.ub[leaving] = 0.0
            self.vstat[leaving] = AT_LOWER
        self.xB[r] = enter_val
        self.pivots += 1

    # -- primal loop --------------------------------------------------------

    def _price_primal(self, d: np.ndarray, bland: bool) -> int:
        open_col = self.ub > self.lb
        stat = self.vstat
        eligible = open_col & (
            ((stat == AT_LOWER) & (d < -DUAL_TOL))
            | ((stat == AT_UPPER) & (d > DUAL_TOL))
            | ((stat == FREE) & (np.abs(d) > DUAL_TOL))
        )
        idx = np.flatnonzero(eligible)
        if idx.size == 0:
            return -1
        if bland:
            return int(idx[0])
        return int(idx[np.argmax(np.abs(d[idx]))])

    def _primal_step(self, d: np.ndarray, bland: bool) -> str | None:
        j = self._price_primal(d, bland)
        if j < 0:
            return OPTIMAL
        if self.vstat[j] == AT_UPPER or (self.vstat[j] == FREE and d[j] > 0):
            direction = -1.0
        else:
            direction = 1.0
        col = self.T[:, j]

        if self.vstat[j] == FREE:
            t_own = self.ub[j] if direction > 0 else -self.lb[j]
        else:
            t_own = self.ub[j] - self.lb[j]

        rate = col * direction  # basic i decreases at this rate per unit step
        lbB = self.lb[self.basis]
        ubB = self.ub[self.basis]
        ratios = np.full(self.m, math.inf)
        pos = rate > PIVOT_TOL
        neg = rate < -PIVOT_TOL
        if pos.any():
            ratios[pos] = np.maximum((self.xB[pos] - lbB[pos]) / rate[pos], 0.0)
        if neg.any():
            ratios[neg] = np.maximum((ubB[neg] - self.xB[neg]) / (-rate[neg]), 0.0)

        t_block = float(ratios.min()) if self.m else math.inf
        t = min(t_own, t_block)
        if math.isinf(t):
            return UNBOUNDED
        if t <= DEGENERATE_STEP:
            self._bland += 1
        else:
            self._bland = 0

        if t_own <= t_block:
            # Bound flip: the entering variable crosses to its other bound.
            self.xB -= col * (direction * t_own)
            self.vstat[j] = AT_UPPER if direction > 0 else AT_LOWER
            self.pivots += 1
            return None

        cand = np.flatnonzero(ratios <= t_block + 1e-12)
        if bland:
            r = int(cand[np.argmin(self.basis[cand])])
        else:
            r = int(cand[np.argmax(np.abs(col[cand]))])
        if abs(col[r]) < PIVOT_FLOOR:
            raise NumericalError("no acceptable pivot in ratio test")
        enter_val = self.nonbasic_value(j) + direction * t
        leave_state = AT_LOWER if rate[r] > 0 else AT_UPPER
        self.xB -= col * (direction * t)
        self._pivot(r, j, enter_val, leave_state)
        return None

    def _run_primal(self, d: np.ndarray) -> str:
        self._bland = 0
        max_pivots = 50 * (self.m + self.n_total) + 20000
        start = self.pivots
        while True:
            if (self.pivots - start) % 64 == 0:
                self._check_deadline()
            bland = self._bland >= BLAND_TRIGGER
            try:
                outcome = self._primal_step(d, bland)
            except NumericalError:
                if bland:
                    raise
                self._bland = BLAND_TRIGGER
                continue
            if outcome is not None:
                return outcome
            if self.pivots - start > max_pivots:
                raise NumericalError("primal simplex exceeded its pivot budget")

    # -- phase 1 / phase 2 ---------------------------------------------------

    def _initial_point(self) -> None:
        """Put every column at a deterministic nonbasic position."""
        for j in range(self.n_total):
            if not math.isinf(self.lb[j]):
                self.vstat[j] = AT_LOWER
            elif not math.isinf(self.ub[j]):
                self.vstat[j] = AT_UPPER
            else:
                self.vstat[j] = FREE

    def solve_from_scratch(self) -> str:
        """Two-phase primal solve honoring the current bounds."""
        self._initial_point()
        # Residuals at the nonbasic point decide each row's starting basic.
        xN = np.where(self.vstat == AT_UPPER, self.ub, np.where(self.vstat == AT_LOWER, self.lb, 0.0))
        xN[self.art_start :] = 0.0
        resid = self.b - self.A[:, : self.art_start] @ xN[: self.art_start]

        art_cost = np.zeros(self.n_total)
        diag = np.ones(self.m)
        self.basis = np.arange(self.art_start, self.art_start + self.m, dtype=np.int64)
        for i in range(self.m):
            chosen = -1
            for j in self._singletons[i]:
                if self.ub[j] <= self.lb[j]:
                    continue
                coef = self.A[i, j]
                val = xN[j] + resid[i] / coef
                if self.lb[j] - 1e-12 <= val <= self.ub[j] + 1e-12:
                    chosen = j
                    self.xB[i] = min(max(val, self.lb[j]), self.ub[j])
                    diag[i] = coef
                    break
            if chosen >= 0:
                self.basis[i] = chosen
                self.vstat[chosen] = BASIC
                continue
            aj = self.art_start + i
            self.basis[i] = aj
            self.vstat[aj] = BASIC
            self.xB[i] = resid[i]
            if resid[i] >= 0.0:
                self.lb[aj], self.ub[aj] = 0.0, math.inf
                art_cost[aj] = 1.0
            else:
                self.lb[aj], self.ub[aj] = -math.inf, 0.0
                art_cost[aj] = -1.0

        self.T = self.A / diag[:, None]
        self.d1 = art_cost.copy()
        self.d2 = self.c.copy()
        for i in range(self.m):
            bi = self.basis[i]
            if art_cost[bi] != 0.0:
                self.d1 -= art_cost[bi] * self.T[i]
            if self.c[bi] != 0.0:
                self.d2 -= self.c[bi] * self.T[i]
        self.d1[self.basis] = 0.0
        self.d2[self.basis] = 0.0

        needs_phase1 = bool((art_cost != 0.0).any())
        if needs_phase1:
            self._phase = 1
            status = self._run_primal(self.d1)
            if status == UNBOUNDED:
                raise NumericalError("phase-1 objective unbounded; inconsistent state")
            infeas = 0.0
            for i in range(self.m):
                if self.basis[i] >= self.art_start:
                    infeas += abs(self.xB[i])
            scale = max(1.0, float(np.abs(self.b).max()) if self.m else 1.0)
            if infeas > self.feas_tol * scale:
                return INFEASIBLE
            self._evict_artificials()
        self._phase = 2
        return self._run_primal(self.d2)

    def _evict_artificials(self) -> None:
        """Pivot leftover zero-valued artificials out wherever possible."""
        for i in range(self.m):
            bi = self.basis[i]
            if bi < self.art_start:
                continue
            row = self.T[i, : self.art_start]
            open_cols = np.flatnonzero((np.abs(row) > PIVOT_TOL) & (self.vstat[: self.art_start] != BASIC))
            if open_cols.size == 0:
                # Redundant row: freeze the artificial at zero in the basis.
                self.lb[bi] = 0.0
                self.ub[bi] = 0.0
                self.xB[i] = 0.0
                continue
            j = int(open_cols[np.argmax(np.abs(row[open_cols]))])
            self._pivot(i, j, self.nonbasic_value(j), AT_LOWER)
        # No artificial may move again.
        self.lb[self.art_start :] = 0.0
        self.ub[self.art_start :] = 0.0

    # -- dual loop -----------------------------------------------------------

    def _dual_feasibility_flips(self) -> bool:
        """Flip nonbasic variables whose reduced-cost sign broke on a bound relax.

        Relaxing a fixed variable can leave it at a bound its reduced cost no
        longer supports; moving it to the opposite (finite) bound restores
        dual feasibility at the price of primal infeasibility, which the dual
        loop then repairs.  Returns False when no finite flip exists.
        """
        d = self.d2
        stat = self.vstat
        wrong = (self.ub > self.lb) & (
            ((stat == AT_LOWER) & (d < -DUAL_TOL))
            | ((stat == AT_UPPER) & (d > DUAL_TOL))
            | ((stat == FREE) & (np.abs(d) > DUAL_TOL))
        )
        for j in np.flatnonzero(wrong):
            if stat[j] == AT_LOWER:
                if math.isinf(self.ub[j]):
                    return False
                self.xB -= self.T[:, j] * (self.ub[j] - self.lb[j])
                self.vstat[j] = AT_UPPER
            elif stat[j] == AT_UPPER:
                if math.isinf(self.lb[j]):
                    return False
                self.xB -= self.T[:, j] * (self.lb[j] - self.ub[j])
                self.vstat[j] = AT_LOWER
            else:
                return False
        return True

    def dual_restore(self) -> str:
        """Re-optimize after bound changes, starting from the previous basis."""
        if not self._dual_feasibility_flips():
            return self.solve_from_scratch()
        self._bland = 0
        max_pivots = 50 * (self.m + self.n_total) + 20000
        start = self.pivots
        while True:
            if (self.pivots - start) % 64 == 0:
                self._check_deadline()
            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]
            low_v = lbB - self.xB
            up_v = self.xB - ubB
            viol = np.maximum(low_v, up_v)
            r = int(np.argmax(viol)) if self.m else -1
            if r < 0 or viol[r] <= self.feas_tol:
                return OPTIMAL
            if self._bland >= BLAND_TRIGGER:
                rows = np.flatnonzero(viol > self.feas_tol)
                r = int(rows[np.argmin(self.basis[rows])])
            below = low_v[r] >= up_v[r]
            row = self.T[r]
            outcome = self._dual_step(r, below, row)
            if outcome == STALE:
                return self.solve_from_scratch()
            if outcome is not None:
                return outcome
            if self.pivots - start > max_pivots:
                raise NumericalError("dual simplex exceeded its pivot budget")

    def _dual_step(self, r: int, below: bool, row: np.ndarray) -> str | None:
        stat = self.vstat

        def helpful(tol: float) -> np.ndarray:
            open_col = self.ub > self.lb
            if below:
                return open_col & (
                    ((stat == AT_LOWER) & (row < -tol))
                    | ((stat == AT_UPPER) & (row > tol))
                    | ((stat == FREE) & (np.abs(row) > tol))
                )
            return open_col & (
                ((stat == AT_LOWER) & (row > tol))
                | ((stat == AT_UPPER) & (row < -tol))
                | ((stat == FREE) & (np.abs(row) > tol))
            )

        idx = np.flatnonzero(helpful(DUAL_PIVOT_TOL))
        if idx.size == 0:
            # Entries between the floor and the dual threshold are too small
            # to pivot on and too large to call zero: no verdict either way.
            if helpful(PIVOT_FLOOR).any():
                return STALE
            return INFEASIBLE
        ratios = np.abs(self.d2[idx]) / np.abs(row[idx])
        target = self.lb[self.basis[r]] if below else self.ub[self.basis[r]]
        if self._bland >= BLAND_TRIGGER:
            best = ratios.min()
            cand = idx[np.flatnonzero(ratios <= best + 1e-12)]
            j = int(cand[0])
        else:
            # Walk the breakpoints in ratio order.  A boxed column whose full
            # flip cannot absorb the remaining infeasibility is flipped to its
            # other bound and walked past; the basis only changes where the
            # capacity runs out.  Passing a breakpoint keeps dual feasibility
            # because every flipped column's ratio is below the entering one,
            # and it sweeps the near-degenerate breakpoints that would
            # otherwise each cost their own pivot.  Box width is capped so a
            # huge but finite bound never masquerades as usable capacity.
            absrow = np.abs(row[idx])
            infeas = abs(self.xB[r] - target)
            width = self.ub[idx] - self.lb[idx]
            cap = np.where(np.isfinite(width), absrow * width, np.inf)
            order = np.lexsort((absrow, ratios))
            remaining = infeas
            picked = -1
            n_flip = 0
            flip_buf = np.empty(idx.size, dtype=np.int64)
            for k in order:
                if cap[k] < remaining:
                    flip_buf[n_flip] = k
                    n_flip += 1
                    remaining -= cap[k]
                else:
                    picked = int(k)
                    break
            if picked < 0:
                # Even flipping every helpful column cannot reach the bound:
                # the dual ray is unbounded, so the primal side is empty.
                return INFEASIBLE
            if n_flip:
                fl = idx[flip_buf[:n_flip]]
                steps = np.where(
                    stat[fl] == AT_LOWER, self.ub[fl] - self.lb[fl], self.lb[fl] - self.ub[fl]
                )
                self.xB -= self.T[:, fl] @ steps
                self.vstat[fl] = np.where(stat[fl] == AT_LOWER, AT_UPPER, AT_LOWER)
            j = int(idx[picked])
        delta = (self.xB[r] - target) / row[j]
        if abs(delta) <= DEGENERATE_STEP:
            self._bland += 1
        else:
            self._bland = 0
        enter_val = self.nonbasic_value(j) + delta
        self.xB -= self.T[:, j] * delta
        self._pivot(r, j, enter_val, AT_LOWER if below else AT_UPPER)
        return None

    # -- verification ----------------------------------------------------------

    def primal_violation(self) -> float:
        v = self.values()
        worst = float(np.abs(self.A @ v - self.b).max()) if self.m else 0.0
        bound = np.maximum(self.lb - v, v - self.ub)
        if bound.size:
            worst = max(worst, float(bound.max()))
        return worst
