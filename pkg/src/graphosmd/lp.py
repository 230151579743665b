"""Dense tableau simplex for the fractional weak-domination covering LP.

The covering problem ``min 1'x  s.t.  A x >= 1, x >= 0`` is solved through its
packing dual ``max 1'y  s.t.  A'y <= 1, y >= 0``, whose slack basis at the
origin is feasible, so no phase one is needed.  Primal weights are read off
the reduced costs of the dual slacks.  Entering and leaving variables follow
Bland's rule, so degenerate pivots cannot cycle.

The upper bounds ``x <= 1`` of the original program never bind at an optimum
(every coefficient is 0/1 and every right-hand side is 1), so they are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9


class LPError(RuntimeError):
    pass


@dataclass(frozen=True)
class CoveringSolution:
    value: float
    x: np.ndarray
    dual: np.ndarray
    pivots: int


def solve_covering_lp(
    a: np.ndarray, cost: np.ndarray | None = None, max_pivots: int | None = None
) -> CoveringSolution:
    """Minimise ``cost @ x`` subject to ``a @ x >= 1`` and ``x >= 0``.

    ``a`` is a 0/1 matrix with no all-zero row (otherwise the program is
    infeasible and :class:`LPError` is raised).  ``cost`` defaults to all
    ones and must be strictly positive.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("constraint matrix must be 2-d")
    n_rows, n_cols = a.shape
    c = np.ones(n_cols) if cost is None else np.asarray(cost, dtype=float)
    if c.shape != (n_cols,) or np.any(c <= 0):
        raise ValueError("cost must be a strictly positive vector, one entry per column")
    if np.any(a.sum(axis=1) <= 0):
        raise LPError("infeasible: some constraint row has no positive coefficient")

    # dual: variables y (n_rows) and slacks s (n_cols); constraints a.T @ y + s = cost
    m = n_cols
    width = n_rows + n_cols
    tab = np.zeros((m + 1, width + 1))
    tab[:m, :n_rows] = a.T
    tab[:m, n_rows:width] = np.eye(m)
    tab[:m, -1] = c
    # objective row holds reduced costs r_j = c_j - c_B B^-1 a_j, negated value in the corner
    tab[m, :n_rows] = 1.0
    basis = list(range(n_rows, width))

    limit = max_pivots if max_pivots is not None else 50 * (width + 1) ** 2
    pivots = 0
    while True:
        reduced = tab[m, :width]
        candidates = np.nonzero(reduced > FEAS_TOL)[0]
        if candidates.size == 0:
            break
        entering = int(candidates[0])
        col = tab[:m, entering]
        rows = np.nonzero(col > FEAS_TOL)[0]
        if rows.size == 0:
            raise LPError("dual unbounded; primal infeasible")
        ratios = tab[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + FEAS_TOL]
        leave_row = int(min(ties, key=lambda r: basis[r]))

        tab[leave_row] /= tab[leave_row, entering]
        pivot_row = tab[leave_row]
        factors = tab[:, entering].copy()
        factors[leave_row] = 0.0
        tab -= np.outer(factors, pivot_row)
        basis[leave_row] = entering
        pivots += 1
        if pivots > limit:
            raise LPError(f"simplex did not terminate within {limit} pivots")

    x = -tab[m, n_rows:width]
    x[np.abs(x) < 1e-12] = 0.0
    x = np.clip(x, 0.0, None)
    y = np.zeros(n_rows)
    for r, j in enumerate(basis):
        if j < n_rows:
            y[j] = tab[r, -1]
    value = float(c @ x)
    slack = a @ x - 1.0
    if slack.min() < -1e-7:
        raise LPError(f"primal certificate infeasible (min slack {slack.min():.3e})")
    if abs(value - float(y.sum())) > 1e-7 * max(1.0, value):
        raise LPError("duality gap after termination")
    return CoveringSolution(value=value, x=x, dual=y, pivots=pivots)
