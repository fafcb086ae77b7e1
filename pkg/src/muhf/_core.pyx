# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: sliding-window means, SMO, kernel expansion, factors."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY, NAN

cnp.import_array()

cdef enum:
    N_FACTORS = 8

KERNEL_RBF = 0
KERNEL_LINEAR = 1


def window_means(values, Py_ssize_t n):
    cdef double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t m = v.shape[0] - n + 1
    out = np.empty(m)
    cdef double[::1] o = out
    cdef Py_ssize_t k, j
    cdef double s
    for k in range(m):
        s = v[k]
        for j in range(1, n):
            s += v[k + j]
        o[k] = s / n
    return out


cdef inline double _kern(const double[:, ::1] A, Py_ssize_t i,
                         const double[:, ::1] B, Py_ssize_t j,
                         double gamma, int kind) nogil:
    cdef Py_ssize_t d = A.shape[1], c
    cdef double acc = 0.0, diff
    if kind == 1:
        for c in range(d):
            acc += A[i, c] * B[j, c]
        return acc
    for c in range(d):
        diff = A[i, c] - B[j, c]
        acc += diff * diff
    return exp(-gamma * acc)


def kernel_matrix(A, B, double gamma, int kind):
    cdef const double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    out = np.empty((a.shape[0], b.shape[0]))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(a.shape[0]):
            for j in range(b.shape[0]):
                o[i, j] = _kern(a, i, b, j, gamma, kind)
    return out


def decision_values(X, sv, coef, double bias, double gamma, int kind):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] s = np.ascontiguousarray(sv, dtype=np.float64)
    cdef const double[::1] c = np.ascontiguousarray(coef, dtype=np.float64)
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef double acc
    with nogil:
        for i in range(x.shape[0]):
            acc = 0.0
            for j in range(s.shape[0]):
                acc += c[j] * _kern(x, i, s, j, gamma, kind)
            o[i] = acc + bias
    return out


cdef class _RowCache:
    """LRU cache of kernel rows K[i, :]."""
    cdef const double[:, ::1] X
    cdef double gamma
    cdef int kind
    cdef Py_ssize_t n, n_slots, n_used
    cdef long clock
    cdef double[:, ::1] rows
    cdef Py_ssize_t[::1] slot_of
    cdef Py_ssize_t[::1] owner
    cdef long[::1] last_used

    def __init__(self, X, double gamma, int kind, Py_ssize_t n_slots):
        self.X = X
        self.gamma = gamma
        self.kind = kind
        self.n = X.shape[0]
        self.n_slots = max(2, min(n_slots, self.n))
        self.n_used = 0
        self.clock = 0
        self.rows = np.empty((self.n_slots, self.n))
        self.slot_of = np.full(self.n, -1, dtype=np.intp)
        self.owner = np.full(self.n_slots, -1, dtype=np.intp)
        self.last_used = np.zeros(self.n_slots, dtype=np.int_)

    cdef double* get(self, Py_ssize_t i) nogil:
        cdef Py_ssize_t s = self.slot_of[i], k, t
        cdef long best
        self.clock += 1
        if s >= 0:
            self.last_used[s] = self.clock
            return &self.rows[s, 0]
        if self.n_used < self.n_slots:
            s = self.n_used
            self.n_used += 1
        else:
            s = 0
            best = self.last_used[0]
            for k in range(1, self.n_slots):
                if self.last_used[k] < best:
                    best = self.last_used[k]
                    s = k
            self.slot_of[self.owner[s]] = -1
        self.owner[s] = i
        self.slot_of[i] = s
        self.last_used[s] = self.clock
        for t in range(self.n):
            self.rows[s, t] = _kern(self.X, i, self.X, t, self.gamma, self.kind)
        return &self.rows[s, 0]


def smo_solve(X, y, double C, double gamma, int kind, double tol,
              long max_iter, Py_ssize_t cache_rows):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], t, i, j
    cdef double tau = 1e-12
    alpha_arr = np.zeros(n)
    G_arr = -np.ones(n)
    QD_arr = np.empty(n)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = G_arr
    cdef double[::1] QD = QD_arr
    for t in range(n):
        QD[t] = _kern(x, t, x, t, gamma, kind)
    cdef _RowCache cache = _RowCache(x, gamma, kind, cache_rows)
    cdef double* Ki
    cdef double* Kj
    cdef double gmax, gmin, myg, b, a, score, best
    cdef double yi, yj, ai, aj, old_i, old_j, quad, delta, diff, total, di, dj
    cdef bint up, low
    cdef long n_iter = 0
    cdef bint converged = False

    with nogil:
        while n_iter < max_iter:
            gmax = -INFINITY
            gmin = INFINITY
            i = -1
            for t in range(n):
                myg = -yy[t] * G[t]
                if yy[t] > 0:
                    up = alpha[t] < C
                    low = alpha[t] > 0
                else:
                    up = alpha[t] > 0
                    low = alpha[t] < C
                if up and myg > gmax:
                    gmax = myg
                    i = t
                if low and myg < gmin:
                    gmin = myg
            if i < 0 or gmin == INFINITY or gmax - gmin < tol:
                converged = True
                break
            Ki = cache.get(i)
            j = -1
            best = INFINITY
            for t in range(n):
                if yy[t] > 0:
                    low = alpha[t] > 0
                else:
                    low = alpha[t] < C
                if not low:
                    continue
                b = gmax + yy[t] * G[t]
                if b > 0:
                    a = QD[i] + QD[t] - 2.0 * Ki[t]
                    if a <= 0:
                        a = tau
                    score = -(b * b) / a
                    if score < best:
                        best = score
                        j = t
            if j < 0:
                converged = True
                break
            Kj = cache.get(j)
            Ki = cache.get(i)
            yi = yy[i]
            yj = yy[j]
            old_i = alpha[i]
            old_j = alpha[j]
            ai = old_i
            aj = old_j
            if yi != yj:
                quad = QD[i] + QD[j] - 2.0 * Ki[j]
                if quad <= 0:
                    quad = tau
                delta = (-G[i] - G[j]) / quad
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
                quad = QD[i] + QD[j] - 2.0 * Ki[j]
                if quad <= 0:
                    quad = tau
                delta = (G[i] - G[j]) / quad
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
            alpha[i] = ai
            alpha[j] = aj
            di = ai - old_i
            dj = aj - old_j
            for t in range(n):
                G[t] += yy[t] * (yi * Ki[t] * di + yj * Kj[t] * dj)
            n_iter += 1

    return alpha_arr, _bias(alpha, G, yy, C), n_iter, bool(converged)


cdef double _bias(double[::1] alpha, double[::1] G, const double[::1] y,
                  double C):
    cdef Py_ssize_t t, n = alpha.shape[0], n_free = 0
    cdef double yG, s = 0.0, ub = INFINITY, lb = -INFINITY
    for t in range(n):
        yG = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            n_free += 1
            s += yG
    if n_free > 0:
        return -(s / n_free)
    return -((ub + lb) / 2.0)


def feature_block(t_ms, vol, mid, trade_px, ask_sz, bid_sz, rel_spread, sign,
                  oi, anchors, d1, d2):
    cdef const long long[::1] t = np.ascontiguousarray(t_ms, dtype=np.int64)
    cdef const double[::1] v = np.ascontiguousarray(vol, dtype=np.float64)
    cdef const double[::1] m = np.ascontiguousarray(mid, dtype=np.float64)
    cdef const double[::1] px = np.ascontiguousarray(trade_px, dtype=np.float64)
    cdef const double[::1] sa = np.ascontiguousarray(ask_sz, dtype=np.float64)
    cdef const double[::1] sb = np.ascontiguousarray(bid_sz, dtype=np.float64)
    cdef const double[::1] rs = np.ascontiguousarray(rel_spread, dtype=np.float64)
    cdef const double[::1] sg = np.ascontiguousarray(sign, dtype=np.float64)
    cdef const double[::1] o = np.ascontiguousarray(oi, dtype=np.float64)
    cdef const long long[::1] anc = np.ascontiguousarray(anchors, dtype=np.int64)
    cdef const long long[::1] w1 = np.ascontiguousarray(d1, dtype=np.int64)
    cdef const long long[::1] w2 = np.ascontiguousarray(d2, dtype=np.int64)
    cdef Py_ssize_t n = t.shape[0], n_a = anc.shape[0], n_w = w1.shape[0]
    values = np.zeros((n_a, N_FACTORS * n_w))
    counts = np.zeros((n_a, n_w), dtype=np.int64)
    cdef double[:, ::1] val = values
    cdef long long[:, ::1] cnt = counts
    cdef Py_ssize_t a, w, r, lo, hi, k, first, last, n_tr, n_dep
    cdef long long T
    cdef double vol_all, vol_max, signed, px_sum, lob_sum, spread_sum, dep
    cdef double oi_T, lam, txn, past, lob

    with nogil:
        for a in range(n_a):
            T = anc[a]
            k = _upper(t, n, T) - 1
            oi_T = o[k] if k >= 0 else NAN
            for w in range(n_w):
                lo = _upper(t, n, T - w2[w])
                hi = _upper(t, n, T - w1[w])
                cnt[a, w] = hi - lo
                if hi <= lo:
                    continue
                vol_all = 0.0
                vol_max = 0.0
                signed = 0.0
                px_sum = 0.0
                lob_sum = 0.0
                spread_sum = 0.0
                n_tr = 0
                n_dep = 0
                first = -1
                last = -1
                for r in range(lo, hi):
                    vol_all = vol_all + v[r]
                    if v[r] > 0:
                        if first < 0:
                            first = r
                        last = r
                        n_tr += 1
                        if v[r] > vol_max:
                            vol_max = v[r]
                        signed = signed + v[r] * sg[r]
                        px_sum = px_sum + px[r]
                    dep = sa[r] + sb[r]
                    if dep > 0:
                        lob_sum = lob_sum + (sa[r] - sb[r]) / dep
                        n_dep += 1
                    spread_sum = spread_sum + rs[r]
                lam = 0.0
                txn = 0.0
                past = 0.0
                if n_tr > 0:
                    past = 1.0 - (px_sum / n_tr) / m[last]
                    if vol_all > 0:
                        lam = (m[last] - m[first]) / vol_all
                        txn = signed / vol_all
                lob = lob_sum / n_dep if n_dep > 0 else 0.0
                val[a, 0 * n_w + w] = vol_all
                val[a, 1 * n_w + w] = vol_max
                val[a, 2 * n_w + w] = lam
                val[a, 3 * n_w + w] = lob
                val[a, 4 * n_w + w] = txn
                val[a, 5 * n_w + w] = past
                val[a, 6 * n_w + w] = vol_all / oi_T
                val[a, 7 * n_w + w] = spread_sum / (hi - lo)
    return values, counts


cdef inline Py_ssize_t _upper(const long long[::1] t, Py_ssize_t n,
                              long long x) nogil:
    """First index with t[idx] > x."""
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if t[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo
