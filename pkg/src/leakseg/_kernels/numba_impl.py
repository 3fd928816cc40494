"""Numba-JIT implementations of the hot kernels (bit-identical to numpy_impl).

No fastmath anywhere: associativity rewrites would break cross-backend
bit-parity. cache=True keeps recompiles off the common path.
"""

import math

import numpy as np
from numba import njit

_OPTS = {"nogil": True, "cache": True}


@njit(**_OPTS)
def erode(mask, kh, kw, ay, ax):
    h, w = mask.shape
    tmp = np.zeros((h, w), dtype=np.bool_)
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            ok = True
            for c in range(-ax, kw - ax):
                xc = x + c
                if xc < 0 or xc >= w or not mask[y, xc]:
                    ok = False
                    break
            tmp[y, x] = ok
    for y in range(h):
        for x in range(w):
            ok = True
            for r in range(-ay, kh - ay):
                yr = y + r
                if yr < 0 or yr >= h or not tmp[yr, x]:
                    ok = False
                    break
            out[y, x] = ok
    return out


@njit(**_OPTS)
def dilate(mask, kh, kw, ay, ax):
    h, w = mask.shape
    tmp = np.zeros((h, w), dtype=np.bool_)
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            hit = False
            for c in range(-ax, kw - ax):
                xc = x - c
                if 0 <= xc < w and mask[y, xc]:
                    hit = True
                    break
            tmp[y, x] = hit
    for y in range(h):
        for x in range(w):
            hit = False
            for r in range(-ay, kh - ay):
                yr = y - r
                if 0 <= yr < h and tmp[yr, x]:
                    hit = True
                    break
            out[y, x] = hit
    return out


@njit(**_OPTS)
def mog2_update(weights, means, variances, frame, lr, var_init, var_min,
                var_max, match_threshold, bg_ratio):
    k, h, w = weights.shape
    bg = np.empty((h, w), dtype=np.float64)
    order = np.empty(k, dtype=np.int64)
    for y in range(h):
        for x in range(w):
            px = frame[y, x]

            best = -1
            best_nd = np.inf
            for c in range(k):
                if weights[c, y, x] > 0.0:
                    d = px - means[c, y, x]
                    nd = d * d / variances[c, y, x]
                    if nd < best_nd:
                        best_nd = nd
                        best = c

            for c in range(k):
                weights[c, y, x] *= 1.0 - lr

            if best_nd < match_threshold:
                d = px - means[best, y, x]
                weights[best, y, x] += lr
                rho = lr / weights[best, y, x]
                means[best, y, x] += rho * d
                v = variances[best, y, x] + rho * (d * d - variances[best, y, x])
                variances[best, y, x] = min(max(v, var_min), var_max)
            else:
                slot = -1
                for c in range(k):
                    if weights[c, y, x] == 0.0:
                        slot = c
                        break
                if slot < 0:
                    slot = 0
                    wmin = weights[0, y, x]
                    for c in range(1, k):
                        if weights[c, y, x] < wmin:
                            wmin = weights[c, y, x]
                            slot = c
                weights[slot, y, x] = lr
                means[slot, y, x] = px
                variances[slot, y, x] = var_init

            total = 0.0
            for c in range(k):
                total += weights[c, y, x]
            for c in range(k):
                weights[c, y, x] /= total

            # Stable insertion sort of component indices by descending weight.
            n_ord = 0
            for c in range(k):
                pos = n_ord
                while pos > 0 and weights[order[pos - 1], y, x] < weights[c, y, x]:
                    order[pos] = order[pos - 1]
                    pos -= 1
                order[pos] = c
                n_ord += 1

            cum = 0.0
            num = 0.0
            den = 0.0
            for i in range(k):
                c = order[i]
                wc = weights[c, y, x]
                cum += wc
                if i == 0 or cum <= bg_ratio:
                    num += wc * means[c, y, x]
                    den += wc
            bg[y, x] = num / den
    return bg


@njit(**_OPTS)
def knn_background(samples, counts, frame, slots, radius2, kmin):
    cap, h, w = samples.shape
    bg = np.empty((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            if counts[y, x] >= cap:
                samples[slots[y, x], y, x] = frame[y, x]
            else:
                samples[counts[y, x], y, x] = frame[y, x]
                counts[y, x] += 1
            n = counts[y, x]

            q_sum = 0
            q_cnt = 0
            a_sum = 0
            for i in range(n):
                si = np.int32(samples[i, y, x])
                a_sum += si
                neigh = 0
                for j in range(n):
                    if j != i:
                        d = si - np.int32(samples[j, y, x])
                        if d * d <= radius2:
                            neigh += 1
                if neigh >= kmin:
                    q_sum += si
                    q_cnt += 1
            if q_cnt > 0:
                bg[y, x] = q_sum / q_cnt
            else:
                bg[y, x] = a_sum / n
    return bg


@njit(**_OPTS)
def render_puffs(out, cx, cy, sigma, amp, ucut, table, table_scale):
    h, w = out.shape
    tmax = table.shape[0] - 2
    for p in range(cx.shape[0]):
        inv2s2 = 1.0 / (2.0 * sigma[p] * sigma[p])
        rmax = math.sqrt(ucut[p] / inv2s2)
        x0 = max(0, int(math.floor(cx[p] - rmax)))
        x1 = min(w - 1, int(math.ceil(cx[p] + rmax)))
        y0 = max(0, int(math.floor(cy[p] - rmax)))
        y1 = min(h - 1, int(math.ceil(cy[p] + rmax)))
        for y in range(y0, y1 + 1):
            dy = y - cy[p]
            for x in range(x0, x1 + 1):
                dx = x - cx[p]
                u = (dx * dx + dy * dy) * inv2s2
                if u < ucut[p]:
                    ui = u * table_scale
                    ii = min(np.int64(ui), tmax)
                    frac = ui - ii
                    val = table[ii] + (table[ii + 1] - table[ii]) * frac
                    out[y, x] += amp[p] * val
