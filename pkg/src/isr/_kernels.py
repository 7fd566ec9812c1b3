"""Numba kernels for DTW and its windowed variants.

Series are (frames x channels) float64 arrays; the per-frame residual is the
Euclidean distance across channels.  Windowed DP operates on per-row column
intervals [lo[i], hi[i]] (inclusive), stored as a ragged flat array.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _frame_dist(a, b, i, j):
    acc = 0.0
    for c in range(a.shape[1]):
        d = a[i, c] - b[j, c]
        acc += d * d
    return np.sqrt(acc)


@njit(cache=True)
def dtw_cost(a, b):
    """Full O(N*M) DTW with steps (down, right, diagonal), rolling rows."""
    n, m = a.shape[0], b.shape[0]
    prev = np.empty(m, dtype=np.float64)
    cur = np.empty(m, dtype=np.float64)
    prev[0] = _frame_dist(a, b, 0, 0)
    for j in range(1, m):
        prev[j] = prev[j - 1] + _frame_dist(a, b, 0, j)
    for i in range(1, n):
        cur[0] = prev[0] + _frame_dist(a, b, i, 0)
        for j in range(1, m):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = best + _frame_dist(a, b, i, j)
        prev, cur = cur, prev
    return prev[m - 1]


@njit(cache=True)
def banded_cost(a, b, lo, hi):
    """DTW restricted to columns [lo[i], hi[i]] per row; cost only.

    The window must contain (0, 0) and (n-1, m-1) and admit at least one
    monotone path (callers guarantee this by construction)."""
    n = a.shape[0]
    m = b.shape[0]
    offsets = np.empty(n + 1, dtype=np.int64)
    offsets[0] = 0
    for i in range(n):
        offsets[i + 1] = offsets[i] + (hi[i] - lo[i] + 1)
    vals = np.full(offsets[n], np.inf, dtype=np.float64)
    for i in range(n):
        base = offsets[i]
        li = lo[i]
        for j in range(li, hi[i] + 1):
            d = _frame_dist(a, b, i, j)
            if i == 0 and j == 0:
                vals[base] = d
                continue
            best = np.inf
            if j > li:
                left = vals[base + (j - 1 - li)]
                if left < best:
                    best = left
            if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
                up = vals[offsets[i - 1] + (j - lo[i - 1])]
                if up < best:
                    best = up
            if i > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
                diag = vals[offsets[i - 1] + (j - 1 - lo[i - 1])]
                if diag < best:
                    best = diag
            vals[base + (j - li)] = d + best
    return vals[offsets[n] - 1]


@njit(cache=True)
def banded_cost_path(a, b, lo, hi):
    """As banded_cost, but also backtracks the optimal warping path.

    Returns (cost, path_i, path_j) with the path ordered from (0,0) to
    (n-1, m-1); ties prefer the diagonal step."""
    n = a.shape[0]
    m = b.shape[0]
    offsets = np.empty(n + 1, dtype=np.int64)
    offsets[0] = 0
    for i in range(n):
        offsets[i + 1] = offsets[i] + (hi[i] - lo[i] + 1)
    vals = np.full(offsets[n], np.inf, dtype=np.float64)
    for i in range(n):
        base = offsets[i]
        li = lo[i]
        for j in range(li, hi[i] + 1):
            d = _frame_dist(a, b, i, j)
            if i == 0 and j == 0:
                vals[base] = d
                continue
            best = np.inf
            if j > li:
                left = vals[base + (j - 1 - li)]
                if left < best:
                    best = left
            if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
                up = vals[offsets[i - 1] + (j - lo[i - 1])]
                if up < best:
                    best = up
            if i > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
                diag = vals[offsets[i - 1] + (j - 1 - lo[i - 1])]
                if diag < best:
                    best = diag
            vals[base + (j - li)] = d + best
    # Backtrack.
    max_len = n + m
    path_i = np.empty(max_len, dtype=np.int64)
    path_j = np.empty(max_len, dtype=np.int64)
    i = n - 1
    j = m - 1
    pos = max_len
    while True:
        pos -= 1
        path_i[pos] = i
        path_j[pos] = j
        if i == 0 and j == 0:
            break
        best = np.inf
        step = 0  # 1=diag, 2=up, 3=left
        if i > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
            v = vals[offsets[i - 1] + (j - 1 - lo[i - 1])]
            if v < best:
                best = v
                step = 1
        if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
            v = vals[offsets[i - 1] + (j - lo[i - 1])]
            if v < best:
                best = v
                step = 2
        if j - 1 >= lo[i]:
            v = vals[offsets[i] + (j - 1 - lo[i])]
            if v < best:
                best = v
                step = 3
        if step == 1:
            i -= 1
            j -= 1
        elif step == 2:
            i -= 1
        else:
            j -= 1
    return vals[offsets[n] - 1], path_i[pos:], path_j[pos:]


@njit(cache=True)
def halve(values):
    """PAA by factor 2; odd tail frame kept as its own (unaveraged) block."""
    n = values.shape[0]
    n_out = (n + 1) // 2
    out = np.empty((n_out, values.shape[1]), dtype=np.float64)
    for k in range(n // 2):
        for c in range(values.shape[1]):
            out[k, c] = 0.5 * (values[2 * k, c] + values[2 * k + 1, c])
    if n % 2 == 1:
        for c in range(values.shape[1]):
            out[n_out - 1, c] = values[n - 1, c]
    return out


@njit(cache=True)
def sakoe_chiba_window(n, m, radius):
    """Slope-scaled diagonal band, symmetrized over both axes and closed under
    the DP step pattern so the corners always connect."""
    lo = np.full(n, m, dtype=np.int64)
    hi = np.full(n, -1, dtype=np.int64)
    # Cells with |i - round(j * n / m)| <= radius.
    for j in range(m):
        c = int(np.rint(j * n / m))
        i0 = c - radius
        if i0 < 0:
            i0 = 0
        i1 = c + radius
        if i1 > n - 1:
            i1 = n - 1
        for i in range(i0, i1 + 1):
            if j < lo[i]:
                lo[i] = j
            if j > hi[i]:
                hi[i] = j
    # Cells with |j - round(i * m / n)| <= radius.
    for i in range(n):
        c = int(np.rint(i * m / n))
        j0 = c - radius
        if j0 < 0:
            j0 = 0
        j1 = c + radius
        if j1 > m - 1:
            j1 = m - 1
        if j0 < lo[i]:
            lo[i] = j0
        if j1 > hi[i]:
            hi[i] = j1
    _close_window(lo, hi, m)
    return lo, hi


@njit(cache=True)
def _close_window(lo, hi, m):
    """Patch per-row intervals so some monotone path can traverse them."""
    n = lo.shape[0]
    lo[0] = 0
    hi[n - 1] = m - 1
    for i in range(1, n):
        if hi[i] < hi[i - 1]:
            hi[i] = hi[i - 1]
        if lo[i] > hi[i - 1] + 1:
            lo[i] = hi[i - 1] + 1
        if lo[i] > hi[i]:
            lo[i] = hi[i]


@njit(cache=True)
def expand_path_window(path_i, path_j, n2, m2, n, m, radius):
    """Project a half-resolution warping path to full resolution and widen it by
    ``radius`` cells along both axes."""
    lo0 = np.full(n2, m2, dtype=np.int64)
    hi0 = np.full(n2, -1, dtype=np.int64)
    for p in range(path_i.shape[0]):
        i = path_i[p]
        j = path_j[p]
        if j < lo0[i]:
            lo0[i] = j
        if j > hi0[i]:
            hi0[i] = j
    # Widen at half resolution.
    loE = np.empty(n2, dtype=np.int64)
    hiE = np.empty(n2, dtype=np.int64)
    for i in range(n2):
        a = i - radius
        if a < 0:
            a = 0
        b = i + radius
        if b > n2 - 1:
            b = n2 - 1
        mn = m2
        mx = -1
        for k in range(a, b + 1):
            if lo0[k] < mn:
                mn = lo0[k]
            if hi0[k] > mx:
                mx = hi0[k]
        mn -= radius
        mx += radius
        if mn < 0:
            mn = 0
        if mx > m2 - 1:
            mx = m2 - 1
        loE[i] = mn
        hiE[i] = mx
    # Project to full resolution (each coarse cell covers a 2x2 block).
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    for i in range(n):
        k = i // 2
        if k > n2 - 1:
            k = n2 - 1
        a = 2 * loE[k]
        b = 2 * hiE[k] + 1
        if b > m - 1:
            b = m - 1
        if a > m - 1:
            a = m - 1
        lo[i] = a
        hi[i] = b
    _close_window(lo, hi, m)
    return lo, hi
