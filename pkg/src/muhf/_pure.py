"""Pure-Python/numpy implementations of the hot kernels.

Used when the compiled ``_core`` extension is unavailable (or when
``MUHF_PURE=1`` is set). Signatures and results match ``_core`` up to
floating-point summation order.
"""
import numpy as np

KERNEL_RBF = 0
KERNEL_LINEAR = 1

N_FACTORS = 8


def window_means(values, n):
    """Means of every full length-``n`` window, summed left to right."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    m = values.shape[0] - n + 1
    acc = values[0:m].copy()
    for j in range(1, n):
        acc += values[j:j + m]
    return acc / n


def kernel_matrix(A, B, gamma, kind):
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    if kind == KERNEL_LINEAR:
        return A @ B.T
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        diff = B - A[i]
        out[i] = np.exp(-gamma * np.einsum("ij,ij->i", diff, diff))
    return out


def decision_values(X, sv, coef, bias, gamma, kind):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if sv.shape[0] == 0:
        return np.full(X.shape[0], float(bias))
    out = np.empty(X.shape[0])
    step = 256
    for s in range(0, X.shape[0], step):
        K = kernel_matrix(X[s:s + step], sv, gamma, kind)
        out[s:s + step] = K @ coef + bias
    return out


def smo_solve(X, y, C, gamma, kind, tol, max_iter, cache_rows):
    """Solve the C-SVC dual with second-order working-set selection.

    Returns ``(alpha, bias, n_iter, converged)``. ``cache_rows`` is accepted
    for signature parity; this implementation keeps every row it computes.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = X.shape[0]
    tau = 1e-12
    alpha = np.zeros(n)
    G = -np.ones(n)
    if kind == KERNEL_LINEAR:
        QD = np.einsum("ij,ij->i", X, X)
    else:
        QD = np.ones(n)
    rows = {}

    def row(i):
        r = rows.get(i)
        if r is None:
            if kind == KERNEL_LINEAR:
                r = X @ X[i]
            else:
                diff = X - X[i]
                r = np.exp(-gamma * np.einsum("ij,ij->i", diff, diff))
            rows[i] = r
        return r

    n_iter = 0
    converged = False
    while n_iter < max_iter:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        minus_yg = -y * G
        if not up.any() or not low.any():
            converged = True
            break
        cand = np.where(up, minus_yg, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        gmin = np.min(np.where(low, minus_yg, np.inf))
        if gmax - gmin < tol:
            converged = True
            break
        Ki = row(i)
        b = gmax - minus_yg
        a = QD[i] + QD - 2.0 * Ki
        a = np.where(a > 0, a, tau)
        score = np.where(low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        if not np.isfinite(score[j]):
            converged = True
            break
        Kj = row(j)
        yi, yj = y[i], y[j]
        old_i, old_j = alpha[i], alpha[j]
        ai, aj = _pair_update(old_i, old_j, yi, yj, G[i], G[j],
                              QD[i], QD[j], Ki[j], C, tau)
        alpha[i], alpha[j] = ai, aj
        di, dj = ai - old_i, aj - old_j
        G += y * (yi * Ki * di + yj * Kj * dj)
        n_iter += 1

    return alpha, _bias(alpha, G, y, C), n_iter, converged


def _pair_update(ai, aj, yi, yj, Gi, Gj, QDi, QDj, Kij, C, tau):
    if yi != yj:
        quad = QDi + QDj + 2.0 * (-Kij)
        if quad <= 0:
            quad = tau
        delta = (-Gi - Gj) / quad
        diff = ai - aj
        ai += delta
        aj += delta
        if diff > 0:
            if aj < 0:
                aj = 0.0
                ai = diff
        else:
            if ai < 0:
                ai = 0.0
                aj = -diff
        if diff > 0:
            if ai > C:
                ai = C
                aj = C - diff
        else:
            if aj > C:
                aj = C
                ai = C + diff
    else:
        quad = QDi + QDj - 2.0 * Kij
        if quad <= 0:
            quad = tau
        delta = (Gi - Gj) / quad
        total = ai + aj
        ai -= delta
        aj += delta
        if total > C:
            if ai > C:
                ai = C
                aj = total - C
        else:
            if aj < 0:
                aj = 0.0
                ai = total
        if total > C:
            if aj > C:
                aj = C
                ai = total - C
        else:
            if ai < 0:
                ai = 0.0
                aj = total
    return ai, aj


def _bias(alpha, G, y, C):
    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = yG[free].sum() / free.sum()
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2.0
    return -float(rho)


def feature_block(t, vol, mid, trade_px, ask_sz, bid_sz, rel_spread, sign,
                  oi, anchors, d1, d2):
    """Compute the 8 factors over every (anchor, window) pair.

    All time arguments are integer milliseconds. Returns ``(values, counts)``
    where ``values`` has shape ``(len(anchors), 8 * len(d1))`` in
    factor-major order and ``counts`` holds records per window.
    """
    n_w = len(d1)
    n_a = len(anchors)
    values = np.zeros((n_a, N_FACTORS * n_w))
    counts = np.zeros((n_a, n_w), dtype=np.int64)
    depth = ask_sz + bid_sz
    for a in range(n_a):
        T = anchors[a]
        k = np.searchsorted(t, T, side="right") - 1
        oi_T = oi[k] if k >= 0 else np.nan
        for w in range(n_w):
            lo = np.searchsorted(t, T - d2[w], side="right")
            hi = np.searchsorted(t, T - d1[w], side="right")
            counts[a, w] = hi - lo
            if hi <= lo:
                continue
            v = vol[lo:hi]
            vol_all = v.sum()
            trades = np.nonzero(v > 0)[0] + lo
            vol_max = v.max() if trades.size else 0.0
            lam = txn = past = 0.0
            if trades.size:
                last = trades[-1]
                past = 1.0 - trade_px[trades].mean() / mid[last]
                if vol_all > 0:
                    lam = (mid[last] - mid[trades[0]]) / vol_all
                    txn = (vol[trades] * sign[trades]).sum() / vol_all
            dep = depth[lo:hi]
            ok = dep > 0
            lob = ((ask_sz[lo:hi][ok] - bid_sz[lo:hi][ok]) / dep[ok]).mean() \
                if ok.any() else 0.0
            spread = rel_spread[lo:hi].mean()
            turnover = vol_all / oi_T
            row = (vol_all, vol_max, lam, lob, txn, past, turnover, spread)
            for f in range(N_FACTORS):
                values[a, f * n_w + w] = row[f]
    return values, counts
