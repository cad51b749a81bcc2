"""Optimal rectangular assignment with forbidden entries and a total tie-break.

Semantics of :func:`linear_assignment`:

* entries that are ``+inf`` or above ``max_cost`` are forbidden;
* among matchings that use only allowed entries, the result has the largest
  possible number of pairs and, among those, the smallest total cost;
* among all optimal matchings, the one returned is lexicographically
  smallest when read as the per-row column vector with "unmatched" ranked
  after every column.

The allowed graph is split into connected components. Single-edge components
are resolved directly; the rest are gathered into one block and padded to a square problem with per-row and
per-column "unmatched" dummies and solved by the shortest augmenting path
kernel. The kernel's dual potentials identify every optimal matching (the
perfect matchings of the tight-edge graph), which makes the lexicographic
tie-break exact: rows are fixed in order, each moved to its smallest tight
column that still admits an alternating cycle.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from .errors import InvalidInputError
from .kernels import bipartite_components, solve_square


@dataclass
class AssignmentResult:
    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: list[int] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)
    total_cost: float = 0.0


def linear_assignment(cost, max_cost: float = np.inf) -> AssignmentResult:
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise InvalidInputError(f"cost must be a 2-D matrix, got shape {cost.shape}")
    if np.isnan(cost).any() or np.isneginf(cost).any():
        raise InvalidInputError("cost matrix contains NaN or -inf")
    n_rows, n_cols = cost.shape
    allowed = np.isfinite(cost) & (cost <= max_cost)
    col4row = np.full(n_rows, -1, dtype=np.int64)

    if n_rows and n_cols and allowed.any():
        _solve_components(cost, allowed, col4row)

    matches = [(int(r), int(c)) for r, c in enumerate(col4row) if c >= 0]
    used_cols = np.zeros(n_cols, dtype=bool)
    total = 0.0
    for r, c in matches:
        used_cols[c] = True
        total += float(cost[r, c])
    return AssignmentResult(
        matches=matches,
        unmatched_tracks=[int(r) for r in np.flatnonzero(col4row < 0)],
        unmatched_detections=[int(c) for c in np.flatnonzero(~used_cols)],
        total_cost=total,
    )


def _solve_components(cost: np.ndarray, allowed: np.ndarray, col4row: np.ndarray) -> None:
    n_rows, n_cols = cost.shape
    ri, ci = np.nonzero(allowed)
    n_comp, labels = bipartite_components(n_rows, n_cols, ri.astype(np.int64), ci.astype(np.int64))
    row_lab = labels[:n_rows]
    col_lab = labels[n_rows:]
    rows_per = np.bincount(row_lab, minlength=n_comp)
    cols_per = np.bincount(col_lab, minlength=n_comp)

    # single-edge components: one row, one column
    single = (rows_per == 1) & (cols_per == 1)
    col_of_label = np.full(n_comp, -1, dtype=np.int64)
    single_cols = np.flatnonzero(single[col_lab])
    col_of_label[col_lab[single_cols]] = single_cols
    single_rows = np.flatnonzero(single[row_lab])
    col4row[single_rows] = col_of_label[row_lab[single_rows]]

    # everything else goes into one padded block: the padded problem is exact
    # for any union of components, and one kernel call beats many small ones
    rest = ~single & (rows_per > 0) & (cols_per > 0)
    rows = np.flatnonzero(rest[row_lab])
    if rows.size == 0:
        return
    cols = np.flatnonzero(rest[col_lab])
    sub = np.where(allowed[np.ix_(rows, cols)], cost[np.ix_(rows, cols)], np.inf)
    local = solve_dense(sub)
    hit = local >= 0
    col4row[rows[hit]] = cols[local[hit]]


def solve_dense(sub: np.ndarray) -> np.ndarray:
    """Column index per row (``-1`` when unmatched) for one connected block.

    ``sub`` uses ``+inf`` for forbidden entries and has at least one finite
    entry.
    """
    r, c = sub.shape
    finite = np.isfinite(sub)
    shifted = np.where(finite, sub - sub[finite].min(), np.inf)
    spread = float(shifted[finite].max())
    # one more pair always outweighs any cost rearrangement among the rest
    unmatched = min(r, c) * spread + 1.0
    n = r + c
    big = np.full((n, n), np.inf)
    big[:r, :c] = shifted
    big[np.arange(r), c + np.arange(r)] = unmatched / 2.0
    big[r + np.arange(c), np.arange(c)] = unmatched / 2.0
    big[r:, c:] = 0.0

    col4row, u, v, ok = solve_square(big)
    if not ok:  # pragma: no cover - dummies make the padded problem feasible
        raise RuntimeError("padded assignment problem reported infeasible")
    col4row = np.array(col4row, dtype=np.int64)
    tol = 16.0 * n * np.finfo(np.float64).eps * (1.0 + unmatched)
    _lexicographic(big, col4row, np.asarray(u), np.asarray(v), r, c, tol)
    out = col4row[:r].copy()
    out[out >= c] = -1
    return out


def _lexicographic(big, col4row, u, v, r, c, tol) -> None:
    """Rotate ``col4row`` in place to the lexicographically smallest optimum."""
    n = big.shape[0]
    red = big[:r, :c] - u[:r, None] - v[None, :c]
    tight_real = np.isfinite(big[:r, :c]) & (np.abs(red) <= tol)
    has_tight = tight_real.any(axis=1)
    first_tight = np.where(has_tight, tight_real.argmax(axis=1), c)
    if not np.any(first_tight < np.minimum(col4row[:r], c)):
        return

    row4col = np.empty(n, dtype=np.int64)
    row4col[col4row] = np.arange(n)
    fixed = np.zeros(n, dtype=bool)

    def tight_cols(x: int) -> np.ndarray:
        red_x = big[x] - u[x] - v
        return np.flatnonzero(np.isfinite(big[x]) & (np.abs(red_x) <= tol))

    def rotate(i: int, j: int) -> bool:
        cur = int(col4row[i])
        x0 = int(row4col[j])
        if fixed[x0]:
            return False
        parent = {x0: None}
        queue = deque([x0])
        while queue:
            x = queue.popleft()
            for y in tight_cols(x):
                y = int(y)
                if y == col4row[x]:
                    continue
                if y == cur:
                    # x takes cur, each predecessor takes its successor's column
                    moves = [(x, cur)]
                    p = x
                    while parent[p] is not None:
                        prev, via = parent[p]
                        moves.append((prev, via))
                        p = prev
                    moves.append((i, j))
                    for row, col in moves:
                        col4row[row] = col
                        row4col[col] = row
                    return True
                nxt = int(row4col[y])
                if nxt == i or fixed[nxt] or nxt in parent:
                    continue
                parent[nxt] = (x, y)
                queue.append(nxt)
        return False

    for i in range(r):
        limit = min(int(col4row[i]), c)
        if first_tight[i] < limit:
            for j in np.flatnonzero(tight_real[i, :limit]):
                if rotate(i, int(j)):
                    break
        fixed[i] = True
