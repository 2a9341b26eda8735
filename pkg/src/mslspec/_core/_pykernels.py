"""Pure-numpy twin of the compiled integrator core.

Advances a batch of complex matrix ODE systems attached to one potential
Q(x) with a Dormand-Prince 5(4) pair (FSAL), stepping exactly onto the
requested output nodes.  Sub-batches:

* regular chains:  Y_k'' = (Q - lam) Y_k - Y_{k-1}   (Taylor-scaled
  lambda-derivative chain, Y_{-1} = 0)
* adjoint chains:  Z_k'' = Z_k (Q - lam) - Z_{k-1}
* rescaled Jost:   w'' + 2 i rho w' = Q w            (e = w exp(i rho x))
* adjoint Jost:    z'' + 2 i rho z' = z Q
* accumulators:    A' = Z_{aj}(x) Y_{bj}(x)          (running kernel
  quadratures between an adjoint-chain level and a regular-chain level)

The compiled twin in ``_ckernels.pyx`` implements the same contract.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

POT_ZERO, POT_GRID, POT_DIAG_EXP, POT_BARGMANN = 0, 1, 2, 3

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0


def eval_potential_scalar(x, pot_kind, pot_xs, pot_vals, pot_xmax, pot_params, m):
    """Q(x) at one point from the raw descriptor; (m, m) complex."""
    if pot_kind == POT_ZERO or x > pot_xmax:
        return np.zeros((m, m), dtype=complex)
    if pot_kind == POT_GRID:
        n = pot_xs.shape[0]
        if n == 1 or x >= pot_xs[-1]:
            return pot_vals[-1].copy()
        i = int(np.searchsorted(pot_xs, x, side="right") - 1)
        i = min(max(i, 0), n - 2)
        t = (x - pot_xs[i]) / (pot_xs[i + 1] - pot_xs[i])
        return (1 - t) * pot_vals[i] + t * pot_vals[i + 1]
    if pot_kind == POT_DIAG_EXP:
        c = np.asarray(pot_params[:m]) + 0j
        a = np.asarray(pot_params[m : 2 * m])
        return np.diag(c * np.exp(-a * x))
    if pot_kind == POT_BARGMANN:
        kappa, alpha = pot_params[0], pot_params[1]
        w = 1.0 + alpha * (x / 2.0 + np.sinh(2 * kappa * x) / (4 * kappa))
        wp = alpha * np.cosh(kappa * x) ** 2
        wpp = alpha * kappa * np.sinh(2 * kappa * x)
        return np.array([[-2.0 * (wpp * w - wp * wp) / (w * w)]], dtype=complex)
    raise ValueError(f"unknown potential kind {pot_kind}")


def propagate(m, pot_kind, pot_xs, pot_vals, pot_xmax, pot_params,
              lam_rc, k_rc, y0_rc, lam_ac, k_ac, y0_ac,
              rho_rj, y0_rj, rho_aj, y0_aj,
              acc_pairs, acc0, x0, nodes, rtol, atol, max_steps):
    """Integrate from x0 through the monotone ``nodes``; returns
    (out_rc, out_ac, out_rj, out_aj, out_acc, n_steps, n_rejected)
    with a leading node axis on every output array."""
    n_rc, n_ac = lam_rc.shape[0], lam_ac.shape[0]
    n_rj, n_aj = rho_rj.shape[0], rho_aj.shape[0]
    n_acc = acc_pairs.shape[0]
    mm = m * m
    s_rc = n_rc * k_rc * 2 * mm
    s_ac = n_ac * k_ac * 2 * mm
    s_rj = n_rj * 2 * mm
    s_aj = n_aj * 2 * mm
    s_acc = n_acc * mm
    size = s_rc + s_ac + s_rj + s_aj + s_acc
    o1, o2, o3, o4 = s_rc, s_rc + s_ac, s_rc + s_ac + s_rj, s_rc + s_ac + s_rj + s_aj

    lam_rc_b = lam_rc[:, None, None, None]
    lam_ac_b = lam_ac[:, None, None, None]
    rho_rj_b = rho_rj[:, None, None]
    rho_aj_b = rho_aj[:, None, None]
    ai = acc_pairs[:, 0] if n_acc else None
    aj = acc_pairs[:, 1] if n_acc else None
    bi = acc_pairs[:, 2] if n_acc else None
    bj = acc_pairs[:, 3] if n_acc else None

    def rhs(x, y):
        q = eval_potential_scalar(x, pot_kind, pot_xs, pot_vals, pot_xmax, pot_params, m)
        dy = np.empty_like(y)
        if n_rc:
            rc = y[:o1].reshape(n_rc, k_rc, 2, m, m)
            d = dy[:o1].reshape(n_rc, k_rc, 2, m, m)
            d[:, :, 0] = rc[:, :, 1]
            d[:, :, 1] = q @ rc[:, :, 0] - lam_rc_b * rc[:, :, 0]
            if k_rc > 1:
                d[:, 1:, 1] -= rc[:, :-1, 0]
        if n_ac:
            ac = y[o1:o2].reshape(n_ac, k_ac, 2, m, m)
            d = dy[o1:o2].reshape(n_ac, k_ac, 2, m, m)
            d[:, :, 0] = ac[:, :, 1]
            d[:, :, 1] = ac[:, :, 0] @ q - lam_ac_b * ac[:, :, 0]
            if k_ac > 1:
                d[:, 1:, 1] -= ac[:, :-1, 0]
        if n_rj:
            rj = y[o2:o3].reshape(n_rj, 2, m, m)
            d = dy[o2:o3].reshape(n_rj, 2, m, m)
            d[:, 0] = rj[:, 1]
            d[:, 1] = q @ rj[:, 0] - 2j * rho_rj_b * rj[:, 1]
        if n_aj:
            ajv = y[o3:o4].reshape(n_aj, 2, m, m)
            d = dy[o3:o4].reshape(n_aj, 2, m, m)
            d[:, 0] = ajv[:, 1]
            d[:, 1] = ajv[:, 0] @ q - 2j * rho_aj_b * ajv[:, 1]
        if n_acc:
            ac = y[o1:o2].reshape(n_ac, k_ac, 2, m, m)
            rc = y[:o1].reshape(n_rc, k_rc, 2, m, m)
            d = dy[o4:].reshape(n_acc, m, m)
            d[:] = ac[ai, aj, 0] @ rc[bi, bj, 0]
        return dy

    y = np.concatenate([
        np.ascontiguousarray(y0_rc, dtype=complex).reshape(-1),
        np.ascontiguousarray(y0_ac, dtype=complex).reshape(-1),
        np.ascontiguousarray(y0_rj, dtype=complex).reshape(-1),
        np.ascontiguousarray(y0_aj, dtype=complex).reshape(-1),
        np.ascontiguousarray(acc0, dtype=complex).reshape(-1),
    ]) if size else np.zeros(0, dtype=complex)

    # potential breakpoints (grid kinks, support edge): steps land on them
    # exactly so every RK step sees a smooth right-hand side
    if pot_kind == POT_GRID:
        breaks = np.unique(np.concatenate([pot_xs, [pot_xmax]]))
    elif pot_kind == POT_ZERO:
        breaks = np.zeros(0)
    else:
        breaks = np.array([pot_xmax])

    nodes = np.asarray(nodes, dtype=float)
    n_nodes = nodes.shape[0]
    out = np.empty((n_nodes, size), dtype=complex)

    x = float(x0)
    n_steps = n_rejected = 0
    if size == 0 or n_nodes == 0:
        for i in range(n_nodes):
            out[i] = y
        return _split(out, n_nodes, n_rc, k_rc, n_ac, k_ac, n_rj, n_aj, n_acc, m,
                      o1, o2, o3, o4) + (0, 0)

    direction = 1.0 if nodes[-1] >= x0 else -1.0
    span = abs(nodes[-1] - x0)
    # directional nudge: Q evaluated on the ahead side of value jumps (x_max)
    nudge = lambda xx: xx + direction * 1e-13 * max(abs(xx), 1.0)
    k1 = rhs(nudge(x), y)

    # initial step: curvature-free heuristic bounded by the oscillation scale
    scale = atol + rtol * np.abs(y)
    d0 = _rms(y / scale)
    d1 = _rms(k1 / scale)
    h = 0.01 * d0 / d1 if d1 > 0 and d0 > 0 else 1e-3
    freq = max(
        np.max(np.abs(lam_rc)) ** 0.5 if n_rc else 0.0,
        np.max(np.abs(lam_ac)) ** 0.5 if n_ac else 0.0,
        2 * np.max(np.abs(rho_rj)) if n_rj else 0.0,
        2 * np.max(np.abs(rho_aj)) if n_aj else 0.0,
    )
    h = min(h, 0.2 / (1.0 + freq), span if span > 0 else 1e-3)
    h = max(h, 1e-12)
    h *= direction
    h_min = 1e-14 * max(span, 1.0)

    i_node = 0
    while i_node < n_nodes:
        target = nodes[i_node]
        if x == target or abs(target - x) <= 1e-14 * max(abs(x), abs(target), 1.0):
            out[i_node] = y
            i_node += 1
            continue
        if (target - x) * direction < 0:
            raise ValueError("output nodes must be monotone in the direction of integration")
        stop = target
        if breaks.size:
            eps = 1e-13 * max(abs(x), 1.0)
            if direction > 0:
                i = int(np.searchsorted(breaks, x + eps, side="right"))
                if i < breaks.size and breaks[i] < stop:
                    stop = breaks[i]
            else:
                i = int(np.searchsorted(breaks, x - eps, side="left")) - 1
                if i >= 0 and breaks[i] > stop:
                    stop = breaks[i]
        clipped = False
        if abs(h) >= abs(stop - x):
            h_use = stop - x
            clipped = True
        else:
            h_use = h
        ynew, err, k7 = _step(rhs, x, y, h_use, k1)
        n_steps += 1
        if n_steps > max_steps:
            raise _fail(x)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        enorm = _rms(err / sc)
        if not np.isfinite(enorm):
            enorm = 10.0
        if enorm <= 1.0:
            x = stop if clipped else x + h_use
            y = ynew
            k1 = k7
            if pot_kind != POT_ZERO and abs(x - pot_xmax) <= 1e-13 * max(abs(x), 1.0):
                k1 = rhs(nudge(x), y)  # refresh FSAL across the support edge
            fac = _SAFETY * enorm ** -0.2 if enorm > 0 else _FAC_MAX
            # grow from the unclipped step so node spacing never throttles h
            h_base = h if clipped else h_use
            h = h_base * min(_FAC_MAX, max(_FAC_MIN, fac))
        else:
            n_rejected += 1
            fac = _SAFETY * enorm ** -0.2
            h = h_use * min(1.0, max(_FAC_MIN, fac))
            if abs(h) < h_min:
                raise _fail(x)

    return _split(out, n_nodes, n_rc, k_rc, n_ac, k_ac, n_rj, n_aj, n_acc, m,
                  o1, o2, o3, o4) + (n_steps, n_rejected)


def _step(rhs, x, y, h, k1):
    k = [k1]
    for i in range(5):
        yi = y + h * sum(a * kk for a, kk in zip(_A[i], k))
        k.append(rhs(x + _C[i + 1] * h, yi))
    ynew = y + h * sum(b * kk for b, kk in zip(_B5[:6], k))
    k.append(rhs(x + h, ynew))  # FSAL stage
    err = h * sum(e * kk for e, kk in zip(_E, k) if e != 0.0)
    return ynew, err, k[6]


def _rms(v):
    if v.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(np.abs(v) ** 2)))


def _fail(x):
    from ..errors import IntegratorFailure
    return IntegratorFailure(f"step control failed near x = {x:.6g}")


def _split(out, n_nodes, n_rc, k_rc, n_ac, k_ac, n_rj, n_aj, n_acc, m, o1, o2, o3, o4):
    return (
        out[:, :o1].reshape(n_nodes, n_rc, k_rc, 2, m, m),
        out[:, o1:o2].reshape(n_nodes, n_ac, k_ac, 2, m, m),
        out[:, o2:o3].reshape(n_nodes, n_rj, 2, m, m),
        out[:, o3:o4].reshape(n_nodes, n_aj, 2, m, m),
        out[:, o4:].reshape(n_nodes, n_acc, m, m),
    )
