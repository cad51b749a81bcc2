"""Pure-numpy kernels.

Each function mirrors the loop kernel of the same name in ``_numba`` with the
same floating-point operation order, so both backends agree bit for bit on
``iou_matrix`` and ``solve_square``.
"""
from __future__ import annotations

import numpy as np


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of ``(N, 4)`` and ``(M, 4)`` top-left/width/height boxes."""
    ax1 = a[:, 0][:, None]
    ay1 = a[:, 1][:, None]
    ax2 = (a[:, 0] + a[:, 2])[:, None]
    ay2 = (a[:, 1] + a[:, 3])[:, None]
    bx1 = b[:, 0][None, :]
    by1 = b[:, 1][None, :]
    bx2 = (b[:, 0] + b[:, 2])[None, :]
    by2 = (b[:, 1] + b[:, 3])[None, :]
    # areas from the same corner arithmetic as the overlap, so iou(a, a) == 1
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    iw = np.where(iw > 0.0, iw, 0.0)
    ih = np.where(ih > 0.0, ih, 0.0)
    inter = iw * ih
    union = area_a + area_b - inter
    return inter / union


def solve_square(cost: np.ndarray):
    """Shortest augmenting path assignment on a square matrix.

    ``+inf`` entries are unusable. Returns ``(col4row, u, v, ok)`` where the
    duals satisfy ``cost[i, j] - u[i] - v[j] >= 0`` with equality on the
    assignment. ``ok`` is False when no perfect assignment exists.
    """
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)
    path = np.full(n, -1, dtype=np.int64)
    spc = np.empty(n)
    sr = np.zeros(n, dtype=np.bool_)
    sc = np.zeros(n, dtype=np.bool_)
    remaining = np.empty(n, dtype=np.int64)

    for cur in range(n):
        spc.fill(np.inf)
        sr.fill(False)
        sc.fill(False)
        remaining[:] = np.arange(n - 1, -1, -1)
        num_rem = n
        min_val = 0.0
        i = cur
        sink = -1
        while sink == -1:
            sr[i] = True
            rem = remaining[:num_rem]
            r = min_val + cost[i, rem] - u[i] - v[rem]
            better = r < spc[rem]
            upd = rem[better]
            path[upd] = i
            spc[upd] = r[better]
            vals = spc[rem]
            lowest = vals.min()
            if lowest == np.inf:
                return col4row, u, v, False
            ties = np.flatnonzero(vals == lowest)
            free = ties[row4col[rem[ties]] == -1]
            index = int(free[-1]) if free.size else int(ties[0])
            min_val = lowest
            j = int(rem[index])
            if row4col[j] == -1:
                sink = j
            else:
                i = int(row4col[j])
            sc[j] = True
            num_rem -= 1
            remaining[index] = remaining[num_rem]

        u[cur] += min_val
        rows = np.flatnonzero(sr)
        rows = rows[rows != cur]
        u[rows] += min_val - spc[col4row[rows]]
        cols = np.flatnonzero(sc)
        v[cols] -= min_val - spc[cols]

        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            nxt = int(col4row[i])
            col4row[i] = j
            j = nxt
            if i == cur:
                break
    return col4row, u, v, True


def cosine_rows(z: np.ndarray, f: np.ndarray):
    """Cosine of every template row of ``z`` against every row of ``f``.

    Returns ``(out, degenerate)``; rows of ``f`` with zero norm respond 0 and
    are flagged. Each template row is computed on its own, so splitting the
    templates across calls cannot change any output bit.
    """
    k = z.shape[0]
    n = f.shape[0]
    zn = np.sqrt(np.sum(z * z, axis=1))
    fn = np.sqrt(np.sum(f * f, axis=1))
    degenerate = fn == 0.0
    safe = np.where(degenerate, 1.0, fn)
    out = np.empty((k, n))
    for t in range(k):
        row = (f @ z[t]) / (zn[t] * safe)
        row = np.clip(row, -1.0, 1.0)
        row[degenerate] = 0.0
        out[t] = row
    return out, degenerate


def ema_rows(templates: np.ndarray, rows: np.ndarray, new: np.ndarray, gamma: float) -> np.ndarray:
    blended = (1.0 - gamma) * templates[rows] + gamma * new
    norm = np.sqrt(np.einsum("ij,ij->i", blended, blended))
    bad = norm == 0.0
    ok = ~bad
    templates[rows[ok]] = blended[ok] / norm[ok, None]
    return bad


def bipartite_components(n_rows: int, n_cols: int, ri: np.ndarray, ci: np.ndarray):
    """Component label per node; rows are nodes ``0..R-1``, columns follow.

    Labels are ``0..n_comp-1`` in order of each component's first node.
    """
    n = n_rows + n_cols
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for r, c in zip(ri.tolist(), ci.tolist()):
        a, b = find(r), find(n_rows + c)
        if a != b:
            parent[max(a, b)] = min(a, b)
    labels = np.empty(n, dtype=np.int64)
    remap: dict[int, int] = {}
    for x in range(n):
        labels[x] = remap.setdefault(find(x), len(remap))
    return len(remap), labels
