"""Numba loop kernels. Same contracts as ``_numpy``."""
from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True)
def iou_matrix(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        ax1 = a[i, 0]
        ay1 = a[i, 1]
        ax2 = a[i, 0] + a[i, 2]
        ay2 = a[i, 1] + a[i, 3]
        area_a = (ax2 - ax1) * (ay2 - ay1)
        for j in range(m):
            bx1 = b[j, 0]
            by1 = b[j, 1]
            bx2 = b[j, 0] + b[j, 2]
            by2 = b[j, 1] + b[j, 3]
            area_b = (bx2 - bx1) * (by2 - by1)
            iw = min(ax2, bx2) - max(ax1, bx1)
            ih = min(ay2, by2) - max(ay1, by1)
            if iw <= 0.0:
                iw = 0.0
            if ih <= 0.0:
                ih = 0.0
            inter = iw * ih
            union = area_a + area_b - inter
            out[i, j] = inter / union
    return out


@njit(cache=True)
def solve_square(cost):
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
        for j in range(n):
            spc[j] = np.inf
            sr[j] = False
            sc[j] = False
            remaining[j] = n - j - 1
        num_rem = n
        min_val = 0.0
        i = cur
        sink = -1
        while sink == -1:
            sr[i] = True
            index = -1
            lowest = np.inf
            for it in range(num_rem):
                j = remaining[it]
                r = min_val + cost[i, j] - u[i] - v[j]
                if r < spc[j]:
                    path[j] = i
                    spc[j] = r
                if spc[j] < lowest or (spc[j] == lowest and row4col[j] == -1):
                    lowest = spc[j]
                    index = it
            if lowest == np.inf:
                return col4row, u, v, False
            min_val = lowest
            j = remaining[index]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
            sc[j] = True
            num_rem -= 1
            remaining[index] = remaining[num_rem]

        u[cur] += min_val
        for r_ in range(n):
            if sr[r_] and r_ != cur:
                u[r_] += min_val - spc[col4row[r_]]
        for c_ in range(n):
            if sc[c_]:
                v[c_] -= min_val - spc[c_]

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            nxt = col4row[i]
            col4row[i] = j
            j = nxt
            if i == cur:
                break
    return col4row, u, v, True


@njit(cache=True)
def _row_norms(x):
    n = x.shape[0]
    d = x.shape[1]
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for c in range(d):
            acc += x[i, c] * x[i, c]
        out[i] = np.sqrt(acc)
    return out


# reassociation lets the dot products vectorise; each template row still runs
# the same compiled code, so splitting templates across calls is bit-stable
@njit(cache=True, parallel=True, fastmath={"reassoc", "contract"})
def _cosine_rows(z, f):
    k = z.shape[0]
    n = f.shape[0]
    d = z.shape[1]
    zn = _row_norms(z)
    fn = _row_norms(f)
    out = np.empty((k, n))
    for t in prange(k):
        for p in range(n):
            if fn[p] == 0.0:
                out[t, p] = 0.0
                continue
            acc = 0.0
            for c in range(d):
                acc += z[t, c] * f[p, c]
            val = acc / (zn[t] * fn[p])
            if val > 1.0:
                val = 1.0
            elif val < -1.0:
                val = -1.0
            out[t, p] = val
    return out, fn == 0.0


def cosine_rows(z, f):
    return _cosine_rows(np.ascontiguousarray(z, dtype=np.float64),
                        np.ascontiguousarray(f, dtype=np.float64))


@njit(cache=True)
def ema_rows(templates, rows, new, gamma):
    """In place: ``templates[rows[k]]`` <- unit-norm blend with ``new[k]``.

    Rows whose blend is exactly zero are left untouched and flagged.
    """
    k = rows.shape[0]
    d = templates.shape[1]
    bad = np.zeros(k, dtype=np.bool_)
    buf = np.empty(d)
    keep = 1.0 - gamma
    for t in range(k):
        r = rows[t]
        acc = 0.0
        for j in range(d):
            x = keep * templates[r, j] + gamma * new[t, j]
            buf[j] = x
            acc += x * x
        if acc == 0.0:
            bad[t] = True
            continue
        nrm = np.sqrt(acc)
        for j in range(d):
            templates[r, j] = buf[j] / nrm
    return bad


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def bipartite_components(n_rows, n_cols, ri, ci):
    """Component label per node; rows are nodes ``0..R-1``, columns follow.

    Labels are ``0..n_comp-1`` in order of each component's first node.
    """
    n = n_rows + n_cols
    parent = np.arange(n)
    for e in range(ri.shape[0]):
        a = _find(parent, ri[e])
        b = _find(parent, n_rows + ci[e])
        if a != b:
            if a < b:
                parent[b] = a
            else:
                parent[a] = b
    labels = np.empty(n, dtype=np.int64)
    remap = np.full(n, -1, dtype=np.int64)
    count = 0
    for x in range(n):
        root = _find(parent, x)
        if remap[root] < 0:
            remap[root] = count
            count += 1
        labels[x] = remap[root]
    return count, labels
