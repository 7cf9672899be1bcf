"""Small dense simplex for ``max c.z  s.t.  A z <= b, z >= 0`` with ``b >= 0``.

The origin is always feasible for the problems we build, so a single phase
suffices. The tableau is kept in condensed (Tucker) form: one row per
constraint, one column per nonbasic variable. A pivot costs O(m n) and the
slack identity block is never materialized, which matters when there are
many more constraints than variables (the usual shape of a dominance LP).

Dominance LPs are highly degenerate (almost every constraint is tight at the
origin), so a few safeguards matter in practice:

* the entering variable follows Bland's rule; among rows tied in the ratio
  test the largest pivot is taken, and after ``strict_after`` iterations the
  leaving row switches to Bland's rule too, which cannot cycle;
* the tableau is rebuilt from the current basis and the original data every
  ``REFACTOR_EVERY`` pivots, and again before optimality is declared whenever
  a relatively small pivot was taken since the last rebuild, so rounding
  errors do not accumulate into a wrong answer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
COST_TOL = 1e-12
RATIO_TIE = 1e-12
REFACTOR_EVERY = 50
STABLE_PIVOT = 1e-3     # relative pivot size below which the result is re-derived


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    status: str          # "optimal" | "unbounded"
    objective: float
    z: np.ndarray
    iterations: int


def maximize(c: np.ndarray, A: np.ndarray, b: np.ndarray, max_iter: int = 10_000,
             strict_after: int | None = None) -> LPResult:
    """Solve the LP from the all-slack basis.

    >>> r = maximize(np.array([1.0, 1.0]), np.array([[1.0, 2.0], [3.0, 1.0]]), np.array([4.0, 6.0]))
    >>> round(r.objective, 9), np.round(r.z, 9).tolist()
    (2.8, [1.6, 1.2])
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if np.any(b < 0):
        raise LPError("right-hand side must be nonnegative")
    if strict_after is None:
        strict_after = 20 * (m + n)

    # variable labels: 0..n-1 structural, n..n+m-1 slack
    nonbasic = np.arange(n)
    basic = np.arange(n, n + m)
    # rows: basic_i = T[i,0] + sum_j T[i,j] * nonbasic_j ; last row is the objective
    T = np.empty((m + 1, n + 1))
    T[:m, 0] = b
    T[:m, 1:] = -A
    T[m, 0] = 0.0
    T[m, 1:] = c

    it = since_refactor = 0
    shaky = False           # a small relative pivot since the last rebuild
    while True:
        cost = T[m, 1:]
        candidates = np.flatnonzero(cost > COST_TOL)
        if candidates.size == 0:
            if not shaky:
                break
            # confirm on a freshly computed tableau
            T = _tableau(A, b, c, basic, nonbasic)
            since_refactor, shaky = 0, False
            continue
        if it >= max_iter:
            raise LPError(f"simplex did not converge in {max_iter} iterations")
        # Bland: entering variable with the smallest label
        j = candidates[np.argmin(nonbasic[candidates])] + 1
        col = T[:m, j]
        rows = np.flatnonzero(col < -PIVOT_TOL)
        if rows.size == 0:
            return LPResult("unbounded", np.inf, np.zeros(n), it)
        ratios = np.maximum(T[rows, 0], 0.0) / -col[rows]
        tied = rows[ratios <= ratios.min() + RATIO_TIE]
        if it < strict_after:
            r = tied[np.argmax(-col[tied])]
        else:
            r = tied[np.argmin(basic[tied])]
        shaky = shaky or -col[r] < STABLE_PIVOT * np.abs(col).max()
        _pivot(T, r, j)
        basic[r], nonbasic[j - 1] = nonbasic[j - 1], basic[r]
        it += 1
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            T = _tableau(A, b, c, basic, nonbasic)
            since_refactor, shaky = 0, False

    z = np.zeros(n + m)
    z[basic] = np.maximum(T[:m, 0], 0.0)
    return LPResult("optimal", float(c @ z[:n]), z[:n], it)


def _basis_solve(A: np.ndarray, basic: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Solve ``B X = V`` for the basis matrix ``B = [A I][:, basic]``.

    Only the ``p <= n`` structural columns need a dense solve: they are
    determined by the rows whose slack is nonbasic, and the basic slacks then
    follow by substitution.
    """
    m, n = A.shape
    structural = basic < n
    P = basic[structural]
    slack_rows = basic[~structural] - n
    tight = np.ones(m, dtype=bool)
    tight[slack_rows] = False
    X = np.empty((m,) + V.shape[1:])
    if P.size:
        try:
            zP = np.linalg.solve(A[np.ix_(tight, P)], V[tight])
        except np.linalg.LinAlgError:
            raise LPError("basis became singular") from None
        X[structural] = zP
        X[~structural] = V[slack_rows] - A[np.ix_(slack_rows, P)] @ zP
    else:
        X[~structural] = V[slack_rows]
    return X


def _tableau(A, b, c, basic, nonbasic) -> np.ndarray:
    """Condensed tableau of the basis ``basic`` computed from the original data."""
    m, n = A.shape
    N = np.zeros((m, n))
    structural = nonbasic < n
    N[:, structural] = A[:, nonbasic[structural]]
    N[nonbasic[~structural] - n, np.flatnonzero(~structural)] = 1.0
    X = _basis_solve(A, basic, np.column_stack([b, N]))
    cost_b = np.where(basic < n, c[np.minimum(basic, n - 1)], 0.0)
    cost_n = np.where(nonbasic < n, c[np.minimum(nonbasic, n - 1)], 0.0)
    T = np.empty((m + 1, n + 1))
    T[:m, 0] = X[:, 0]
    T[:m, 1:] = -X[:, 1:]
    T[m, 0] = cost_b @ X[:, 0]
    T[m, 1:] = cost_n - cost_b @ X[:, 1:]
    return T


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    """Exchange the basic variable of row ``r`` with the nonbasic one of column ``j``."""
    p = T[r, j]
    newrow = -T[r] / p
    newrow[j] = 1.0 / p
    col = T[:, j].copy()
    T += np.outer(col, newrow)
    T[:, j] = col / p
    T[r] = newrow
