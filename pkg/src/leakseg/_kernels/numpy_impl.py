"""Pure-numpy fallback implementations of the hot kernels.

Every function here must produce results bit-identical to the numba twin in
``numba_impl``; the parity suite in tests/test_kernels.py enforces that.
"""

import numpy as np


def _shift(mask, dy, dx):
    """mask translated so out[y, x] = mask[y + dy, x + dx], False outside."""
    h, w = mask.shape
    out = np.zeros_like(mask)
    ys = max(0, -dy), min(h, h - dy)
    xs = max(0, -dx), min(w, w - dx)
    if ys[0] >= ys[1] or xs[0] >= xs[1]:
        return out
    out[ys[0]:ys[1], xs[0]:xs[1]] = mask[
        ys[0] + dy:ys[1] + dy, xs[0] + dx:xs[1] + dx
    ]
    return out


def erode(mask, kh, kw, ay, ax):
    """Rectangular erosion, border padded with background (False).

    Offsets span [-ay, kh-1-ay] x [-ax, kw-1-ax]; separable two-pass AND.
    """
    tmp = np.ones_like(mask)
    for c in range(-ax, kw - ax):
        tmp &= _shift(mask, 0, c)
    out = np.ones_like(mask)
    for r in range(-ay, kh - ay):
        out &= _shift(tmp, r, 0)
    return out


def dilate(mask, kh, kw, ay, ax):
    """Rectangular dilation adjoint to `erode` (reflected offsets)."""
    tmp = np.zeros_like(mask)
    for c in range(-ax, kw - ax):
        tmp |= _shift(mask, 0, -c)
    out = np.zeros_like(mask)
    for r in range(-ay, kh - ay):
        out |= _shift(tmp, -r, 0)
    return out


def mog2_update(weights, means, variances, frame, lr, var_init, var_min,
                var_max, match_threshold, bg_ratio):
    """One adaptive-Gaussian-mixture update step; returns the background image.

    State arrays are (K, H, W) float64 and are modified in place. A component
    with zero weight is inactive. Pixels must already be seeded (every pixel
    has at least one active component).
    """
    k = weights.shape[0]
    active = weights > 0.0
    delta = frame[None, :, :] - means
    safe_var = np.where(active, variances, 1.0)
    ndist = np.where(active, delta * delta / safe_var, np.inf)
    best = np.argmin(ndist, axis=0)
    best_nd = np.take_along_axis(ndist, best[None], axis=0)[0]
    matched = best_nd < match_threshold
    onehot_best = np.arange(k)[:, None, None] == best[None]

    # Decay every weight; matched pixels then boost the matched component and
    # blend its mean/variance at rate lr / new_weight (deltas use the
    # pre-update mean).
    upd = onehot_best & matched[None]
    weights *= 1.0 - lr
    weights += np.where(upd, lr, 0.0)
    safe_w = np.where(weights > 0.0, weights, 1.0)
    rho = lr / safe_w
    means += np.where(upd, rho * delta, 0.0)
    variances += np.where(upd, rho * (delta * delta - variances), 0.0)
    variances[:] = np.where(
        upd, np.minimum(np.maximum(variances, var_min), var_max), variances
    )

    # Unmatched pixels: replace the first free slot, else the weakest
    # component, with a fresh component at the observed value.
    unmatched = ~matched
    if np.any(unmatched):
        free = weights == 0.0
        has_free = free.any(axis=0)
        first_free = np.argmax(free, axis=0)
        weakest = np.argmin(weights, axis=0)
        slot = np.where(has_free, first_free, weakest)
        repl = (np.arange(k)[:, None, None] == slot[None]) & unmatched[None]
        weights[repl] = lr
        means[repl] = np.broadcast_to(frame[None], means.shape)[repl]
        variances[repl] = var_init

    total = np.sum(weights, axis=0)
    weights /= total[None]

    # Background: strongest component always, then greedily extend while the
    # inclusive cumulative weight stays within bg_ratio.
    order = np.argsort(-weights, axis=0, kind="stable")
    w_sorted = np.take_along_axis(weights, order, axis=0)
    m_sorted = np.take_along_axis(means, order, axis=0)
    cum = np.cumsum(w_sorted, axis=0)
    include = cum <= bg_ratio
    include[0] = True
    inc = include.astype(np.float64)
    num = np.sum(w_sorted * m_sorted * inc, axis=0)
    den = np.sum(w_sorted * inc, axis=0)
    return num / den


def knn_background(samples, counts, frame, slots, radius2, kmin):
    """Insert the frame into the per-pixel sample buffers and estimate the
    background as the mean of density-supported samples.

    samples: (N, H, W) uint8, counts: (H, W) int32 valid-sample counts,
    slots: (H, W) int32 replacement indices (used only where the buffer is
    full). A sample is background-classified when at least `kmin` other
    samples lie within squared intensity distance `radius2`.
    """
    cap = samples.shape[0]
    full = counts >= cap
    write_idx = np.where(full, slots, counts).astype(np.int64)
    np.put_along_axis(samples, write_idx[None], frame[None], axis=0)
    counts[:] = np.minimum(counts + 1, cap)

    idx = np.arange(cap)[:, None, None]
    valid = idx < counts[None]
    s32 = samples.astype(np.int32)

    neighbors = np.zeros(samples.shape, dtype=np.int32)
    for i in range(cap):
        d = s32 - s32[i][None]
        within = (d * d <= radius2) & valid
        neighbors[i] = within.sum(axis=0) - 1  # exclude self
    qualified = (neighbors >= kmin) & valid

    q_cnt = qualified.sum(axis=0)
    q_sum = np.where(qualified, samples, 0).sum(axis=0, dtype=np.int64)
    a_cnt = valid.sum(axis=0)
    a_sum = np.where(valid, samples, 0).sum(axis=0, dtype=np.int64)
    use_q = q_cnt > 0
    num = np.where(use_q, q_sum, a_sum).astype(np.float64)
    den = np.where(use_q, q_cnt, a_cnt).astype(np.float64)
    return num / den


def render_puffs(out, cx, cy, sigma, amp, ucut, table, table_scale):
    """Accumulate Gaussian puff opacity into `out` (H, W float64, in place).

    Contribution of puff p at pixel (x, y): amp[p] * exp(-r^2 / (2 sigma^2)),
    evaluated by linear interpolation of `table` over u = r^2 / (2 sigma^2)
    and skipped entirely once u >= ucut[p].
    """
    h, w = out.shape
    for p in range(cx.shape[0]):
        inv2s2 = 1.0 / (2.0 * sigma[p] * sigma[p])
        rmax = np.sqrt(ucut[p] / inv2s2)
        x0 = max(0, int(np.floor(cx[p] - rmax)))
        x1 = min(w - 1, int(np.ceil(cx[p] + rmax)))
        y0 = max(0, int(np.floor(cy[p] - rmax)))
        y1 = min(h - 1, int(np.ceil(cy[p] + rmax)))
        if x0 > x1 or y0 > y1:
            continue
        xs = np.arange(x0, x1 + 1, dtype=np.float64) - cx[p]
        ys = np.arange(y0, y1 + 1, dtype=np.float64) - cy[p]
        u = ((xs * xs)[None, :] + (ys * ys)[:, None]) * inv2s2
        inside = u < ucut[p]
        ui = u * table_scale
        ii = np.minimum(ui.astype(np.int64), table.shape[0] - 2)
        frac = ui - ii
        val = table[ii] + (table[ii + 1] - table[ii]) * frac
        out[y0:y1 + 1, x0:x1 + 1] += np.where(inside, amp[p] * val, 0.0)
