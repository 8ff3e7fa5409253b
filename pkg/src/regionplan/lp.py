"""Dense two-phase primal simplex for the small LPs of the domination test.

The LPs here have at most a region's worth of variables but are often badly
degenerate (many near-parallel domination constraints), so the solver leans
on the standard countermeasures: row equilibration, a Harris-style ratio
test that prefers large pivot elements, refactorization of the tableau from
the original data once pivoting settles, and a full restart under Bland's
rule when the fast pass cannot produce a clean optimum. Feasibility
tolerance is two-tier: 1e-9 while pivoting, 1e-7 for the final checks.
"""

from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-9
CHECK_TOL = 1e-7


class LpNumericalError(RuntimeError):
    """Pivoting could not certify optimal/infeasible/unbounded."""


@dataclass
class LinearProgram:
    """maximize objective . x  subject to  A_i x (rel_i) b_i.

    Each entry of constraints is (coefficients, rel, rhs) with rel one of
    "<=", "=", ">=". lower_bounds[i] is 0.0 (default) or -inf for a free
    variable.
    """
    objective: np.ndarray
    constraints: list
    lower_bounds: np.ndarray = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        n = self.objective.shape[0]
        if self.lower_bounds is None:
            self.lower_bounds = np.zeros(n)
        else:
            self.lower_bounds = np.asarray(self.lower_bounds, dtype=np.float64)
        for coeffs, rel, rhs in self.constraints:
            if len(coeffs) != n:
                raise ValueError(f"constraint arity {len(coeffs)} != {n}")
            if rel not in ("<=", "=", ">="):
                raise ValueError(f"unknown relation {rel!r}")


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    optimum: float = 0.0
    assignment: np.ndarray = field(default_factory=lambda: np.zeros(0))


def solve_lp(lp):
    """Two-phase simplex; retries under Bland's rule before giving up."""
    try:
        return _solve(lp, bland_from_start=False)
    except LpNumericalError:
        return _solve(lp, bland_from_start=True)


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    colvals = tab[:, col].copy()
    colvals[row] = 0.0
    tab -= np.outer(colvals, tab[row])


class _Tableau:
    """Standard-form problem plus the working simplex tableau."""

    def __init__(self, A, b, c, bland):
        self.A = A              # (m, ncols) original standard-form matrix
        self.b = b              # (m,) non-negative right-hand side
        self.c = c              # (ncols,) maximize objective
        m, ncols = A.shape
        self.m = m
        self.ncols = ncols
        self.tab = np.zeros((m + 1, ncols + 1))
        self.tab[:m, :ncols] = A
        self.tab[:m, -1] = b
        self.basis = [0] * m
        self.bland_after = 0 if bland else 10 * (m + ncols)
        self.budget = 50 * (m + ncols) + 1000
        self.pivots = 0

    def set_objective(self, c):
        self.c = c
        obj = np.zeros(self.ncols + 1)
        obj[:self.ncols] = -c
        for i in range(self.m):
            cb = self.c[self.basis[i]]
            if cb != 0.0:
                obj += cb * self.tab[i]
        self.tab[-1] = obj

    def refactorize(self):
        """Rebuild the tableau for the current basis from the original data.

        Returns False when the basis matrix is singular or the fresh basic
        solution is clearly infeasible (pivoting went astray).
        """
        B = self.A[:, self.basis]
        try:
            fresh = np.linalg.solve(B, np.hstack([self.A, self.b[:, None]]))
        except np.linalg.LinAlgError:
            return False
        if fresh[:, -1].min() < -CHECK_TOL:
            return False
        self.tab[:self.m, :self.ncols] = fresh[:, :-1]
        self.tab[:self.m, -1] = np.maximum(fresh[:, -1], 0.0)
        self.set_objective(self.c)
        return True

    def run(self):
        """Pivot to optimality. Returns "optimal" or "unbounded"."""
        m, ncols, tab = self.m, self.ncols, self.tab
        skipped = np.zeros(ncols, dtype=bool)
        moved = 0
        while self.pivots < self.budget:
            bland = self.pivots >= self.bland_after
            red = tab[-1, :ncols].copy()
            red[skipped] = 0.0
            if not bland:
                col = int(np.argmin(red))
                if red[col] >= -PIVOT_TOL:
                    return "optimal"
            else:
                neg = np.flatnonzero(red < -PIVOT_TOL)
                if neg.size == 0:
                    return "optimal"
                col = int(neg[0])
            colvals = tab[:m, col]
            pos = colvals > PIVOT_TOL
            if not pos.any():
                if red[col] < -CHECK_TOL:
                    return "unbounded"
                # marginal reduced cost with no pivot row: not a real ray
                skipped[col] = True
                continue
            rhs = np.maximum(tab[:m, -1], 0.0)
            ratios = np.full(m, np.inf)
            ratios[pos] = rhs[pos] / colvals[pos]
            if bland:
                ties = np.flatnonzero(ratios <= ratios.min() + PIVOT_TOL)
                row = int(ties[np.argmin([self.basis[t] for t in ties])])
            else:
                # Harris-style second pass: relax the bound by the pivot
                # tolerance, then take the largest eligible element
                relaxed = np.full(m, np.inf)
                relaxed[pos] = (rhs[pos] + PIVOT_TOL) / colvals[pos]
                eligible = np.flatnonzero(ratios <= relaxed.min())
                row = int(eligible[np.argmax(colvals[eligible])])
            _pivot(tab, row, col)
            self.basis[row] = col
            skipped[:] = False
            self.pivots += 1
            moved += 1
            if moved % 60 == 0:
                self.refactorize()
        raise LpNumericalError("pivot budget exhausted without certificate")

    def run_refined(self, rounds=4):
        """Alternate pivoting and refactorization until a fresh tableau is
        already optimal."""
        status = self.run()
        if status != "optimal":
            return status
        for _ in range(rounds):
            before = self.pivots
            if not self.refactorize():
                break
            status = self.run()
            if status != "optimal":
                return status
            if self.pivots == before:
                break
        return "optimal"


def _solve(lp, bland_from_start):
    nvars = lp.objective.shape[0]
    free = np.isneginf(lp.lower_bounds)
    nfree = int(free.sum())
    nstd = nvars + nfree
    split_col = {}
    j = nvars
    for i in np.flatnonzero(free):
        split_col[int(i)] = j
        j += 1

    def widen(coeffs):
        row = np.zeros(nstd)
        row[:nvars] = coeffs
        for i, jc in split_col.items():
            row[jc] = -coeffs[i]
        return row

    m = len(lp.constraints)
    A0 = np.zeros((m, nstd))
    b0 = np.zeros(m)
    rels = []
    for i, (coeffs, rel, rhs) in enumerate(lp.constraints):
        row = widen(np.asarray(coeffs, dtype=np.float64))
        # row equilibration keeps wildly scaled constraints comparable
        scale = np.abs(row).max()
        if scale > 0.0:
            row = row / scale
            rhs = rhs / scale
        if rhs < 0.0:
            row = -row
            rhs = -rhs
            rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
        A0[i] = row
        b0[i] = rhs
        rels.append(rel)

    nslack = sum(1 for r in rels if r in ("<=", ">="))
    nart = sum(1 for r in rels if r in ("=", ">="))
    ncols = nstd + nslack + nart
    A = np.zeros((m, ncols))
    A[:, :nstd] = A0
    sj, aj = nstd, nstd + nslack
    basis = [0] * m
    art_cols = []
    for i, rel in enumerate(rels):
        if rel == "<=":
            A[i, sj] = 1.0
            basis[i] = sj
            sj += 1
        elif rel == ">=":
            A[i, sj] = -1.0
            sj += 1
            A[i, aj] = 1.0
            basis[i] = aj
            art_cols.append(aj)
            aj += 1
        else:
            A[i, aj] = 1.0
            basis[i] = aj
            art_cols.append(aj)
            aj += 1

    work = _Tableau(A, b0, np.zeros(ncols), bland_from_start)
    work.basis = basis

    if art_cols:
        c1 = np.zeros(ncols)
        c1[art_cols] = -1.0
        work.set_objective(c1)
        status = work.run_refined()
        if status != "optimal":
            raise LpNumericalError("phase 1 did not reach an optimum")
        if work.tab[-1, -1] < -CHECK_TOL:
            return LpSolution(status="infeasible")
        # drive leftover artificials out of the basis where possible, then
        # forbid them from re-entering
        for i in range(work.m):
            if work.basis[i] in art_cols:
                row = work.tab[i, :nstd + nslack]
                cand = np.flatnonzero(np.abs(row) > CHECK_TOL)
                if cand.size:
                    _pivot(work.tab, i, int(cand[0]))
                    work.basis[i] = int(cand[0])
        work.A = work.A.copy()
        for c in art_cols:
            if c not in work.basis:
                work.A[:, c] = 0.0
                work.tab[:, c] = 0.0

    cvec = np.zeros(ncols)
    cvec[:nstd] = widen(lp.objective)
    work.set_objective(cvec)
    status = work.run_refined()
    if status == "unbounded":
        return LpSolution(status="unbounded")

    xstd = np.zeros(ncols)
    for i, cidx in enumerate(work.basis):
        xstd[cidx] = work.tab[i, -1]
    x = xstd[:nvars].copy()
    for i, jc in split_col.items():
        x[i] -= xstd[jc]
    sol = LpSolution(status="optimal",
                     optimum=float(np.dot(lp.objective, x)),
                     assignment=x)
    _check(lp, sol)
    return sol


def _check(lp, sol):
    x = sol.assignment
    for coeffs, rel, rhs in lp.constraints:
        v = float(np.dot(coeffs, x))
        if rel == "<=" and v > rhs + CHECK_TOL:
            raise LpNumericalError(f"solution violates <= constraint by {v - rhs:.3e}")
        if rel == ">=" and v < rhs - CHECK_TOL:
            raise LpNumericalError(f"solution violates >= constraint by {rhs - v:.3e}")
        if rel == "=" and abs(v - rhs) > CHECK_TOL:
            raise LpNumericalError(f"solution violates = constraint by {abs(v - rhs):.3e}")
    lo = lp.lower_bounds
    bounded = ~np.isneginf(lo)
    if np.any(x[bounded] < lo[bounded] - CHECK_TOL):
        raise LpNumericalError("solution violates a variable bound")
