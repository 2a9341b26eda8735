# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of ``_pykernels.propagate``.

Same state layout and step control as the numpy reference; explicit loops
over the small matrix blocks instead of vectorized array ops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cosh, exp, fabs, sinh, sqrt

cnp.import_array()

BACKEND = "compiled"

cdef int POT_ZERO = 0, POT_GRID = 1, POT_DIAG_EXP = 2, POT_BARGMANN = 3

cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 5.0

# Dormand-Prince 5(4): stage nodes, coupling rows, 5th-order weights,
# embedded-error weights (same constants as the Python twin).
cdef double[7] C_NODES = [0.0, 1.0/5, 3.0/10, 4.0/5, 8.0/9, 1.0, 1.0]
cdef double[6][6] A_TAB = [
    [1.0/5, 0, 0, 0, 0, 0],
    [3.0/40, 9.0/40, 0, 0, 0, 0],
    [44.0/45, -56.0/15, 32.0/9, 0, 0, 0],
    [19372.0/6561, -25360.0/2187, 64448.0/6561, -212.0/729, 0, 0],
    [9017.0/3168, -355.0/33, 46732.0/5247, 49.0/176, -5103.0/18656, 0],
    [35.0/384, 0.0, 500.0/1113, 125.0/192, -2187.0/6784, 11.0/84],
]
cdef double[7] B5 = [35.0/384, 0.0, 500.0/1113, 125.0/192, -2187.0/6784, 11.0/84, 0.0]
cdef double[7] E_W = [71.0/57600, 0.0, -71.0/16695, 71.0/1920,
                      -17253.0/339200, 22.0/525, -1.0/40]


cdef void _eval_pot(double x, int pot_kind, double[::1] pot_xs,
                    double complex[:, :, ::1] pot_vals, double pot_xmax,
                    double[::1] pot_params, int m,
                    double complex[:, ::1] q) noexcept:
    cdef int i, j, lo, hi, mid, n
    cdef double t, w, wp, wpp, kappa, alpha
    for i in range(m):
        for j in range(m):
            q[i, j] = 0
    if pot_kind == POT_ZERO or x > pot_xmax:
        return
    if pot_kind == POT_GRID:
        n = pot_xs.shape[0]
        if n == 1 or x >= pot_xs[n - 1]:
            for i in range(m):
                for j in range(m):
                    q[i, j] = pot_vals[n - 1, i, j]
            return
        lo = 0
        hi = n - 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if pot_xs[mid] <= x:
                lo = mid
            else:
                hi = mid
        t = (x - pot_xs[lo]) / (pot_xs[lo + 1] - pot_xs[lo])
        for i in range(m):
            for j in range(m):
                q[i, j] = (1 - t) * pot_vals[lo, i, j] + t * pot_vals[lo + 1, i, j]
        return
    if pot_kind == POT_DIAG_EXP:
        for i in range(m):
            q[i, i] = pot_params[i] * exp(-pot_params[m + i] * x)
        return
    if pot_kind == POT_BARGMANN:
        kappa = pot_params[0]
        alpha = pot_params[1]
        w = 1.0 + alpha * (x / 2.0 + sinh(2 * kappa * x) / (4 * kappa))
        wp = alpha * cosh(kappa * x) ** 2
        wpp = alpha * kappa * sinh(2 * kappa * x)
        q[0, 0] = -2.0 * (wpp * w - wp * wp) / (w * w)


cdef void _rhs(double x, double complex[::1] y, double complex[::1] dy,
               int m, int pot_kind, double[::1] pot_xs,
               double complex[:, :, ::1] pot_vals, double pot_xmax,
               double[::1] pot_params,
               double complex[::1] lam_rc, int k_rc,
               double complex[::1] lam_ac, int k_ac,
               double complex[::1] rho_rj, double complex[::1] rho_aj,
               long long[:, ::1] acc_pairs,
               double complex[:, ::1] q) noexcept:
    cdef int n_rc = lam_rc.shape[0], n_ac = lam_ac.shape[0]
    cdef int n_rj = rho_rj.shape[0], n_aj = rho_aj.shape[0]
    cdef int n_acc = acc_pairs.shape[0]
    cdef int mm = m * m
    cdef Py_ssize_t o1 = n_rc * k_rc * 2 * mm
    cdef Py_ssize_t o2 = o1 + n_ac * k_ac * 2 * mm
    cdef Py_ssize_t o3 = o2 + n_rj * 2 * mm
    cdef Py_ssize_t o4 = o3 + n_aj * 2 * mm
    cdef Py_ssize_t s, base, prev, za, yb
    cdef int n, k, i, j, l
    cdef double complex acc, lam, tworho

    _eval_pot(x, pot_kind, pot_xs, pot_vals, pot_xmax, pot_params, m, q)

    # regular chains: Y' = P, P' = (Q - lam) Y_k - Y_{k-1}
    for n in range(n_rc):
        lam = lam_rc[n]
        for k in range(k_rc):
            base = (n * k_rc + k) * 2 * mm
            for i in range(m):
                for j in range(m):
                    dy[base + i * m + j] = y[base + mm + i * m + j]
            for i in range(m):
                for j in range(m):
                    acc = -lam * y[base + i * m + j]
                    for l in range(m):
                        acc = acc + q[i, l] * y[base + l * m + j]
                    if k > 0:
                        prev = (n * k_rc + (k - 1)) * 2 * mm
                        acc = acc - y[prev + i * m + j]
                    dy[base + mm + i * m + j] = acc

    # adjoint chains: Z' = P, P' = Z_k (Q - lam) - Z_{k-1}
    for n in range(n_ac):
        lam = lam_ac[n]
        for k in range(k_ac):
            base = o1 + (n * k_ac + k) * 2 * mm
            for i in range(m):
                for j in range(m):
                    dy[base + i * m + j] = y[base + mm + i * m + j]
            for i in range(m):
                for j in range(m):
                    acc = -lam * y[base + i * m + j]
                    for l in range(m):
                        acc = acc + y[base + i * m + l] * q[l, j]
                    if k > 0:
                        prev = o1 + (n * k_ac + (k - 1)) * 2 * mm
                        acc = acc - y[prev + i * m + j]
                    dy[base + mm + i * m + j] = acc

    # rescaled Jost: w' = p, p' = Q w - 2 i rho p
    for n in range(n_rj):
        tworho = 2j * rho_rj[n]
        base = o2 + n * 2 * mm
        for i in range(m):
            for j in range(m):
                dy[base + i * m + j] = y[base + mm + i * m + j]
        for i in range(m):
            for j in range(m):
                acc = -tworho * y[base + mm + i * m + j]
                for l in range(m):
                    acc = acc + q[i, l] * y[base + l * m + j]
                dy[base + mm + i * m + j] = acc

    # adjoint rescaled Jost: z' = p, p' = z Q - 2 i rho p
    for n in range(n_aj):
        tworho = 2j * rho_aj[n]
        base = o3 + n * 2 * mm
        for i in range(m):
            for j in range(m):
                dy[base + i * m + j] = y[base + mm + i * m + j]
        for i in range(m):
            for j in range(m):
                acc = -tworho * y[base + mm + i * m + j]
                for l in range(m):
                    acc = acc + y[base + i * m + l] * q[l, j]
                dy[base + mm + i * m + j] = acc

    # accumulators: A' = Z_{(ai,aj)}(x) * Y_{(bi,bj)}(x)
    for n in range(n_acc):
        za = o1 + (acc_pairs[n, 0] * k_ac + acc_pairs[n, 1]) * 2 * mm
        yb = (acc_pairs[n, 2] * k_rc + acc_pairs[n, 3]) * 2 * mm
        base = o4 + n * mm
        for i in range(m):
            for j in range(m):
                acc = 0
                for l in range(m):
                    acc = acc + y[za + i * m + l] * y[yb + l * m + j]
                dy[base + i * m + j] = acc


def propagate(int m, int pot_kind, double[::1] pot_xs,
              double complex[:, :, ::1] pot_vals, double pot_xmax,
              double[::1] pot_params,
              cnp.ndarray lam_rc_a, int k_rc, cnp.ndarray y0_rc,
              cnp.ndarray lam_ac_a, int k_ac, cnp.ndarray y0_ac,
              cnp.ndarray rho_rj_a, cnp.ndarray y0_rj,
              cnp.ndarray rho_aj_a, cnp.ndarray y0_aj,
              cnp.ndarray acc_pairs_a, cnp.ndarray acc0,
              double x0, cnp.ndarray nodes_a, double rtol, double atol,
              long max_steps):
    from ..errors import IntegratorFailure

    cdef double complex[::1] lam_rc = np.ascontiguousarray(lam_rc_a, dtype=complex)
    cdef double complex[::1] lam_ac = np.ascontiguousarray(lam_ac_a, dtype=complex)
    cdef double complex[::1] rho_rj = np.ascontiguousarray(rho_rj_a, dtype=complex)
    cdef double complex[::1] rho_aj = np.ascontiguousarray(rho_aj_a, dtype=complex)
    cdef long long[:, ::1] acc_pairs = np.ascontiguousarray(
        acc_pairs_a, dtype=np.int64).reshape(-1, 4)
    cdef int n_rc = lam_rc.shape[0], n_ac = lam_ac.shape[0]
    cdef int n_rj = rho_rj.shape[0], n_aj = rho_aj.shape[0]
    cdef int n_acc = acc_pairs.shape[0]
    cdef int mm = m * m
    cdef Py_ssize_t s_rc = n_rc * k_rc * 2 * mm
    cdef Py_ssize_t s_ac = n_ac * k_ac * 2 * mm
    cdef Py_ssize_t s_rj = n_rj * 2 * mm
    cdef Py_ssize_t s_aj = n_aj * 2 * mm
    cdef Py_ssize_t size = s_rc + s_ac + s_rj + s_aj + n_acc * mm
    cdef Py_ssize_t o1 = s_rc, o2 = s_rc + s_ac, o3 = o2 + s_rj, o4 = o3 + s_aj

    y_np = np.concatenate([
        np.ascontiguousarray(y0_rc, dtype=complex).reshape(-1),
        np.ascontiguousarray(y0_ac, dtype=complex).reshape(-1),
        np.ascontiguousarray(y0_rj, dtype=complex).reshape(-1),
        np.ascontiguousarray(y0_aj, dtype=complex).reshape(-1),
        np.ascontiguousarray(acc0, dtype=complex).reshape(-1),
    ]) if size else np.zeros(0, dtype=complex)

    nodes_np = np.ascontiguousarray(nodes_a, dtype=float)
    cdef double[::1] nodes = nodes_np
    cdef Py_ssize_t n_nodes = nodes.shape[0]
    out_np = np.empty((n_nodes, size), dtype=complex)
    cdef double complex[:, ::1] out = out_np
    cdef Py_ssize_t i_node = 0, i, j

    cdef double complex[::1] y = y_np
    q_np = np.zeros((m, m), dtype=complex)
    cdef double complex[:, ::1] q = q_np
    k_np = np.zeros((7, size if size else 1), dtype=complex)
    cdef double complex[:, ::1] kst = k_np
    yw_np = np.zeros(size if size else 1, dtype=complex)
    cdef double complex[::1] yw = yw_np
    yn_np = np.zeros(size if size else 1, dtype=complex)
    cdef double complex[::1] yn = yn_np

    cdef double x = x0, direction, span, h, h_min, h_use, h_base
    cdef double target, enorm, fac, d0, d1, freq, sc, aerr, stop, eps
    cdef long n_steps = 0, n_rejected = 0
    cdef bint clipped
    cdef int st
    cdef double complex acc
    cdef Py_ssize_t ib, n_breaks

    # potential breakpoints (grid kinks, support edge): steps land on them
    # exactly so every RK step sees a smooth right-hand side
    if pot_kind == 1:  # grid
        breaks_np = np.unique(np.concatenate([np.asarray(pot_xs), [pot_xmax]]))
    elif pot_kind == 0:
        breaks_np = np.zeros(0)
    else:
        breaks_np = np.array([pot_xmax])
    cdef double[::1] breaks = breaks_np
    n_breaks = breaks.shape[0]

    if size == 0 or n_nodes == 0:
        for i_node in range(n_nodes):
            for i in range(size):
                out[i_node, i] = y[i]
        return _split(out_np, n_nodes, n_rc, k_rc, n_ac, k_ac, n_rj, n_aj,
                      n_acc, m, o1, o2, o3, o4) + (0, 0)

    direction = 1.0 if nodes[n_nodes - 1] >= x0 else -1.0
    span = fabs(nodes[n_nodes - 1] - x0)

    # directional nudge: Q evaluated on the ahead side of value jumps (x_max)
    _rhs(x + direction * 1e-13 * max(fabs(x), 1.0), y, kst[0], m, pot_kind,
         pot_xs, pot_vals, pot_xmax, pot_params,
         lam_rc, k_rc, lam_ac, k_ac, rho_rj, rho_aj, acc_pairs, q)

    # running pointer to the next breakpoint ahead of x (x moves monotonically)
    eps = 1e-13 * max(fabs(x), 1.0)
    if direction > 0:
        ib = np.searchsorted(breaks_np, x + eps, side="right")
    else:
        ib = np.searchsorted(breaks_np, x - eps, side="left") - 1

    d0 = 0.0
    d1 = 0.0
    for i in range(size):
        sc = atol + rtol * abs(y[i])
        d0 += (abs(y[i]) / sc) ** 2
        d1 += (abs(kst[0, i]) / sc) ** 2
    d0 = sqrt(d0 / size)
    d1 = sqrt(d1 / size)
    h = 0.01 * d0 / d1 if (d1 > 0 and d0 > 0) else 1e-3
    freq = 0.0
    for i in range(n_rc):
        freq = max(freq, sqrt(abs(lam_rc[i])))
    for i in range(n_ac):
        freq = max(freq, sqrt(abs(lam_ac[i])))
    for i in range(n_rj):
        freq = max(freq, 2 * abs(rho_rj[i]))
    for i in range(n_aj):
        freq = max(freq, 2 * abs(rho_aj[i]))
    h = min(h, 0.2 / (1.0 + freq))
    if span > 0:
        h = min(h, span)
    h = max(h, 1e-12) * direction
    h_min = 1e-14 * max(span, 1.0)

    while i_node < n_nodes:
        target = nodes[i_node]
        if x == target or fabs(target - x) <= 1e-14 * max(max(fabs(x), fabs(target)), 1.0):
            for i in range(size):
                out[i_node, i] = y[i]
            i_node += 1
            continue
        if (target - x) * direction < 0:
            raise ValueError("output nodes must be monotone in the direction of integration")
        stop = target
        if n_breaks:
            eps = 1e-13 * max(fabs(x), 1.0)
            if direction > 0:
                while ib < n_breaks and breaks[ib] <= x + eps:
                    ib += 1
                if ib < n_breaks and breaks[ib] < stop:
                    stop = breaks[ib]
            else:
                if ib >= n_breaks:
                    ib = n_breaks - 1
                while ib >= 0 and breaks[ib] >= x - eps:
                    ib -= 1
                if ib >= 0 and breaks[ib] > stop:
                    stop = breaks[ib]
        clipped = fabs(h) >= fabs(stop - x)
        h_use = (stop - x) if clipped else h

        # stages 2..6
        for st in range(5):
            for i in range(size):
                acc = 0
                for j in range(st + 1):
                    acc = acc + A_TAB[st][j] * kst[j, i]
                yw[i] = y[i] + h_use * acc
            _rhs(x + C_NODES[st + 1] * h_use, yw, kst[st + 1], m, pot_kind,
                 pot_xs, pot_vals, pot_xmax, pot_params, lam_rc, k_rc,
                 lam_ac, k_ac, rho_rj, rho_aj, acc_pairs, q)
        for i in range(size):
            acc = 0
            for j in range(6):
                if B5[j] != 0.0:
                    acc = acc + B5[j] * kst[j, i]
            yn[i] = y[i] + h_use * acc
        _rhs(x + h_use, yn, kst[6], m, pot_kind, pot_xs, pot_vals, pot_xmax,
             pot_params, lam_rc, k_rc, lam_ac, k_ac, rho_rj, rho_aj,
             acc_pairs, q)

        enorm = 0.0
        for i in range(size):
            acc = 0
            for j in range(7):
                if E_W[j] != 0.0:
                    acc = acc + E_W[j] * kst[j, i]
            sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
            aerr = abs(h_use * acc) / sc
            enorm += aerr * aerr
        enorm = sqrt(enorm / size)
        if enorm != enorm:  # NaN
            enorm = 10.0

        n_steps += 1
        if n_steps > max_steps:
            raise IntegratorFailure(f"step control failed near x = {x:.6g}")

        if enorm <= 1.0:
            x = stop if clipped else x + h_use
            for i in range(size):
                y[i] = yn[i]
                kst[0, i] = kst[6, i]
            if pot_kind != 0 and fabs(x - pot_xmax) <= 1e-13 * max(fabs(x), 1.0):
                # refresh FSAL across the support edge (Q value jumps there)
                _rhs(x + direction * 1e-13 * max(fabs(x), 1.0), y, kst[0], m,
                     pot_kind, pot_xs, pot_vals, pot_xmax, pot_params,
                     lam_rc, k_rc, lam_ac, k_ac, rho_rj, rho_aj, acc_pairs, q)
            fac = SAFETY * enorm ** -0.2 if enorm > 0 else FAC_MAX
            h_base = h if clipped else h_use
            h = h_base * min(FAC_MAX, max(FAC_MIN, fac))
        else:
            n_rejected += 1
            fac = SAFETY * enorm ** -0.2
            h = h_use * min(1.0, max(FAC_MIN, fac))
            if fabs(h) < h_min:
                raise IntegratorFailure(f"step control failed near x = {x:.6g}")

    return _split(out_np, n_nodes, n_rc, k_rc, n_ac, k_ac, n_rj, n_aj, n_acc,
                  m, o1, o2, o3, o4) + (n_steps, n_rejected)


def _split(out, n_nodes, n_rc, k_rc, n_ac, k_ac, n_rj, n_aj, n_acc, m,
           o1, o2, o3, o4):
    return (
        out[:, :o1].reshape(n_nodes, n_rc, k_rc, 2, m, m),
        out[:, o1:o2].reshape(n_nodes, n_ac, k_ac, 2, m, m),
        out[:, o2:o3].reshape(n_nodes, n_rj, 2, m, m),
        out[:, o3:o4].reshape(n_nodes, n_aj, 2, m, m),
        out[:, o4:].reshape(n_nodes, n_acc, m, m),
    )
