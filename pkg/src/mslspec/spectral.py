"""Spectral data of self-adjoint problems: eigenvalues (zeros of det u on
the positive imaginary rho-axis), residue matrices, the continuous density
V(lambda), class-Sp validation, and the reconstruction of the Weyl matrix
from spectral data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, RunConfig
from .errors import NearSingularU, NotSimplePole, ScanTooCoarse, TailTooHeavy
from .forward import jost_many, u_from_jost
from .model import Problem, is_hermitian, lambda_to_rho, mat_norm


@dataclass(frozen=True)
class SpectralData:
    """Continuous density samples on a Gauss-Legendre rho-grid plus the
    finite pole list (lambda_k < 0 with residue matrices alpha_k)."""

    m: int
    poles: tuple            # ((lambda_k, alpha_k), ...) sorted by lambda_k
    rho_nodes: np.ndarray   # (n,)
    rho_weights: np.ndarray  # (n,) plain GL weights in rho
    density: np.ndarray     # (n, m, m) V at lambda_j = rho_j^2
    rho_max: float
    meta: dict = field(default_factory=dict)

    @property
    def lambda_max(self) -> float:
        return float(self.rho_max**2)

    @property
    def mu_nodes(self) -> np.ndarray:
        return self.rho_nodes**2

    @property
    def mu_weights(self) -> np.ndarray:
        # d mu = 2 rho d rho
        return 2.0 * self.rho_nodes * self.rho_weights


def gauss_rho_grid(n_quad: int, rho_max: float):
    """Gauss-Legendre nodes/weights on (0, rho_max)."""
    xi, w = np.polynomial.legendre.leggauss(n_quad)
    nodes = 0.5 * rho_max * (xi + 1.0)
    weights = 0.5 * rho_max * w
    return nodes, weights


def _u_batch(problem: Problem, rhos, adjoint=False, cfg: RunConfig = DEFAULT):
    e, ep = jost_many(problem, rhos, adjoint=adjoint, cfg=cfg)
    if adjoint:
        return ep[:, 0] - e[:, 0] @ problem.h, e[:, 0]
    return ep[:, 0] - problem.h @ e[:, 0], e[:, 0]


def find_eigenvalues(problem: Problem, tau_range=None, scan_steps=None,
                     cfg: RunConfig = DEFAULT):
    """Negative eigenvalues lambda_k = -tau_k^2 from a scan of u(i tau).

    Sign changes of the (real) determinant are refined by bisection; local
    minima of the smallest singular value catch even-multiplicity zeros and
    are refined by ternary search.
    """
    if not problem.selfadjoint:
        raise ValueError("eigenvalue search on the imaginary axis requires a "
                         "self-adjoint problem")
    tau_min, tau_max = tau_range if tau_range is not None else (cfg.tau_min, cfg.tau_max)
    steps = scan_steps if scan_steps is not None else cfg.scan_steps
    taus = np.linspace(tau_min, tau_max, steps + 1)
    u, _ = _u_batch(problem, 1j * taus, cfg=cfg)
    dets = np.linalg.det(u)
    if np.max(np.abs(dets.imag)) > 1e-6 * (1.0 + np.max(np.abs(dets.real))):
        warnings.warn("determinant has a sizable imaginary part on the "
                      "imaginary axis; problem may not be self-adjoint",
                      ScanTooCoarse)
    d = dets.real
    smin = np.linalg.svd(u, compute_uv=False)[:, -1]

    roots = []

    # odd-order roots: bisection on sign changes, all brackets in parallel
    idx = np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]
    los, his = taus[idx].copy(), taus[idx + 1].copy()
    dlo = d[idx].copy()
    while los.size and np.max(his - los) > cfg.tau_tol:
        mids = 0.5 * (los + his)
        um, _ = _u_batch(problem, 1j * mids, cfg=cfg)
        dm = np.linalg.det(um).real
        take_left = np.sign(dm) * np.sign(dlo) > 0
        los = np.where(take_left, mids, los)
        dlo = np.where(take_left, dm, dlo)
        his = np.where(take_left, his, mids)
    roots.extend(0.5 * (los + his))

    # even-order roots: interior smin minima well below the scan scale
    floor = max(1e-8, 1e-4 * float(np.median(smin)))
    cand = [i for i in range(1, steps) if smin[i] < smin[i - 1] and smin[i] <= smin[i + 1]
            and smin[i] < floor * 1e2 and np.sign(d[i - 1]) * np.sign(d[i + 1]) > 0]
    if cand:
        los = taus[np.array(cand) - 1]
        his = taus[np.array(cand) + 1]
        for _ in range(200):
            if np.max(his - los) <= cfg.tau_tol:
                break
            m1 = los + (his - los) / 3
            m2 = his - (his - los) / 3
            u1, _ = _u_batch(problem, 1j * m1, cfg=cfg)
            u2, _ = _u_batch(problem, 1j * m2, cfg=cfg)
            s1 = np.linalg.svd(u1, compute_uv=False)[:, -1]
            s2 = np.linalg.svd(u2, compute_uv=False)[:, -1]
            left = s1 < s2
            his = np.where(left, m2, his)
            los = np.where(left, los, m1)
        mins = 0.5 * (los + his)
        um, _ = _u_batch(problem, 1j * mins, cfg=cfg)
        sm = np.linalg.svd(um, compute_uv=False)[:, -1]
        for tau, s in zip(mins, sm):
            if s < 1e-5 * max(1.0, float(np.median(smin))):
                roots.append(float(tau))

    roots = sorted(roots)
    merged = []
    cell = (tau_max - tau_min) / steps
    for t in roots:
        if merged and abs(t - merged[-1]) < max(10 * cfg.tau_tol, 1e-12):
            warnings.warn(f"two eigenvalue candidates merged near tau = {t:.6g}; "
                          "scan grid may be too coarse", ScanTooCoarse)
            continue
        merged.append(t)
    for a, b in zip(merged, merged[1:]):
        if b - a < cell:
            warnings.warn(f"eigenvalues at tau = {a:.6g}, {b:.6g} fall within one "
                          "scan cell; consider more scan_steps", ScanTooCoarse)
    return sorted(-np.array(merged) ** 2)


def residue(problem: Problem, lam_k: float, neighbors=(), n_res=None,
            cfg: RunConfig = DEFAULT) -> np.ndarray:
    """Residue of M at the pole lambda_k by trapezoid contour integration.

    The circle radius is half the distance to the nearest other pole and to
    the origin.  Raises NotSimplePole when the second contour moment is not
    negligible (self-adjoint poles must be simple).
    """
    n = n_res if n_res is not None else cfg.n_res
    gap = abs(lam_k)
    for other in neighbors:
        if abs(other - lam_k) > 1e-12:
            gap = min(gap, abs(other - lam_k))
    r = 0.5 * gap
    theta = 2 * np.pi * np.arange(n) / n
    lams = lam_k + r * np.exp(1j * theta)
    rhos = np.array([lambda_to_rho(l).rho for l in lams])
    u, e0 = _u_batch(problem, rhos, cfg=cfg)
    conds = np.linalg.cond(u)
    if np.max(conds) > cfg.cond_max:
        raise NearSingularU("residue contour crosses a near-singular u; "
                            "radius selection failed")
    mm = e0 @ np.linalg.inv(u)
    ph = np.exp(1j * theta)
    alpha = (r / n) * np.einsum("j,jab->ab", ph, mm)
    second = (r * r / n) * np.einsum("j,jab->ab", ph * ph, mm)
    if mat_norm(second) > 1e-6 * max(1.0, mat_norm(alpha)) * max(1.0, abs(lam_k)):
        raise NotSimplePole(f"second contour moment {mat_norm(second):.3e} at "
                            f"lambda = {lam_k:.6g}")
    if problem.selfadjoint:
        herm = 0.5 * (alpha + alpha.conj().T)
        eigs = np.linalg.eigvalsh(herm)
        if eigs.min() < -cfg.psd_tol * max(1.0, eigs.max()):
            warnings.warn(f"residue at lambda = {lam_k:.6g} has negative part "
                          f"{eigs.min():.3e}", ScanTooCoarse)
        return herm
    return alpha


def continuous_density_many(problem: Problem, lams, cfg: RunConfig = DEFAULT,
                            cross_check: bool = False):
    """V(lambda) on lambda > 0 by the jump formula; optionally also the
    self-adjoint product formula for cross-checking.

    Returns V (n, m, m) or (V, V_product, max_disagreement).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams <= 0):
        raise ValueError("continuous density lives on lambda > 0")
    rhos = np.sqrt(lams)
    u_p, e0_p = _u_batch(problem, rhos, cfg=cfg)
    u_m, e0_m = _u_batch(problem, -rhos, cfg=cfg)
    conds = np.maximum(np.linalg.cond(u_p), np.linalg.cond(u_m))
    if np.max(conds) > cfg.cond_max:
        j = int(np.argmax(conds))
        raise NearSingularU(f"u is near-singular at lambda = {lams[j]:.6g} "
                            "(spectral singularity?)")
    m_plus = e0_p @ np.linalg.inv(u_p)
    m_minus = e0_m @ np.linalg.inv(u_m)
    v = (m_minus - m_plus) / (2j * np.pi)
    if not cross_check:
        return v
    us_m, _ = _u_batch(problem, -rhos, adjoint=True, cfg=cfg)
    v2 = (rhos / np.pi)[:, None, None] * (np.linalg.inv(us_m) @ np.linalg.inv(u_p))
    dis = float(np.max(np.abs(v - v2)))
    return v, v2, dis


def continuous_density(problem: Problem, lam: float, cfg: RunConfig = DEFAULT) -> np.ndarray:
    return continuous_density_many(problem, [lam], cfg=cfg)[0]


def extract_spectral_data(problem: Problem, cfg: RunConfig = DEFAULT,
                          tau_range=None) -> SpectralData:
    """Full spectral data of a self-adjoint problem: eigenvalues, residues,
    and V on the Gauss-Legendre rho-grid."""
    lam_ks = find_eigenvalues(problem, tau_range=tau_range, cfg=cfg)
    poles = []
    for lam_k in lam_ks:
        alpha = residue(problem, lam_k, neighbors=[l for l in lam_ks if l != lam_k], cfg=cfg)
        poles.append((float(lam_k), alpha))
    nodes, weights = gauss_rho_grid(cfg.n_quad, cfg.rho_max)
    v, v2, dis = continuous_density_many(problem, nodes**2, cfg=cfg, cross_check=True)
    meta = {
        "jump_vs_product": dis,
        "n_quad": cfg.n_quad,
        "rho_max": cfg.rho_max,
    }
    return SpectralData(problem.m, tuple(poles), nodes, weights, v, cfg.rho_max, meta)


def _tail_term(a_mat: np.ndarray, b_mat: np.ndarray, lam: complex,
               rho_lam: complex, rho_max: float) -> np.ndarray:
    """Closed-form integral over (rho_max, inf) of the fitted tail density
    V ~ A/(pi rho) + B/(pi rho^3) against 2 rho / (lambda - rho^2)."""
    log_term = np.log((rho_max - rho_lam) / (rho_max + rho_lam))
    t_a = a_mat * (log_term / (np.pi * rho_lam))
    t_b = b_mat * (2.0 / np.pi) * (1.0 / rho_max + log_term / (2.0 * rho_lam)) / lam
    return t_a + t_b


def _fit_tail(data: SpectralData, window: int):
    """Least-squares fit of pi*rho*V ~ A + B/rho^2 on the last nodes."""
    rho = data.rho_nodes[-window:]
    rv = np.pi * rho[:, None, None] * data.density[-window:]
    design = np.stack([np.ones_like(rho), 1.0 / rho**2], axis=1)
    coef, *_ = np.linalg.lstsq(design, rv.reshape(window, -1), rcond=None)
    a_mat = coef[0].reshape(data.m, data.m)
    b_mat = coef[1].reshape(data.m, data.m)
    return a_mat, b_mat


def weyl_from_spectral_data(data: SpectralData, lam: complex,
                            cfg: RunConfig = DEFAULT,
                            return_report: bool = False):
    """M(lambda) from spectral data: quadrature of the density integral plus
    the pole sum, with a fitted 1/(pi rho) tail beyond rho_max.

    The tail-model uncertainty is gauged by refitting on half the window;
    TailTooHeavy is raised when it exceeds quad_tol.
    """
    lam = complex(lam)
    if lam.imag == 0 and lam.real >= 0:
        raise ValueError("lambda must avoid the closed positive half-line")
    mu = data.mu_nodes
    wmu = data.mu_weights
    main = np.einsum("j,jab->ab", wmu / (lam - mu), data.density)
    pole_sum = np.zeros((data.m, data.m), dtype=complex)
    for lam_k, alpha in data.poles:
        if abs(lam - lam_k) < 1e-12:
            raise ValueError(f"lambda coincides with the pole at {lam_k}")
        pole_sum = pole_sum + alpha / (lam - lam_k)
    rho_lam = lambda_to_rho(lam).rho
    window = max(6, data.rho_nodes.size // 5)
    a_full, b_full = _fit_tail(data, window)
    a_half, b_half = _fit_tail(data, max(4, window // 2))
    tail = _tail_term(a_full, b_full, lam, rho_lam, data.rho_max)
    tail_alt = _tail_term(a_half, b_half, lam, rho_lam, data.rho_max)
    unc = mat_norm(tail - tail_alt)
    if unc > cfg.quad_tol:
        raise TailTooHeavy(f"tail model uncertainty {unc:.3e} exceeds "
                           f"quad_tol = {cfg.quad_tol:.1e}")
    m_val = main + tail + pole_sum
    if return_report:
        return m_val, {"tail": tail, "tail_uncertainty": unc,
                       "tail_coefficient": a_full}
    return m_val


@dataclass(frozen=True)
class SpReport:
    """Outcome of the class-Sp admissibility checks."""

    distinct_negative_poles: bool
    psd_residues: bool
    density_positive: bool
    rho_v_bounded: bool
    m_bounded_at_origin: bool
    offenders: tuple
    details: dict

    @property
    def ok(self) -> bool:
        return (self.distinct_negative_poles and self.psd_residues and
                self.density_positive and self.rho_v_bounded and
                self.m_bounded_at_origin)


def validate_class_sp(data: SpectralData, cfg: RunConfig = DEFAULT) -> SpReport:
    """Check the admissibility conditions on spectral data: distinct
    negative poles, PSD nonzero residues, positive bounded density, and
    boundedness of rho*M(lambda) near the origin."""
    offenders = []

    lam_ks = [complex(lk) for lk, _ in data.poles]
    cond1 = all(lk.imag == 0 and lk.real < 0 for lk in lam_ks)
    if not cond1:
        offenders.extend(("pole not negative real", lk) for lk in lam_ks
                         if not (lk.imag == 0 and lk.real < 0))
    for i, a in enumerate(lam_ks):
        for b in lam_ks[i + 1:]:
            if abs(a - b) < 1e-12:
                cond1 = False
                offenders.append(("duplicate pole", a))
    lam_ks = [lk.real for lk in lam_ks]

    cond2 = True
    for lk, alpha in data.poles:
        if not is_hermitian(alpha, cfg.tol_herm * max(1.0, mat_norm(alpha))):
            cond2 = False
            offenders.append(("non-hermitian residue", lk))
            continue
        eigs = np.linalg.eigvalsh(0.5 * (alpha + alpha.conj().T))
        if eigs.min() < -cfg.psd_tol * max(1.0, eigs.max()) or mat_norm(alpha) == 0:
            cond2 = False
            offenders.append(("indefinite or zero residue", lk))

    herm_ok = all(is_hermitian(v, 1e-7 * max(1.0, mat_norm(v))) for v in data.density)
    mins = np.array([np.linalg.eigvalsh(0.5 * (v + v.conj().T)).min() for v in data.density])
    cond3a = bool(herm_ok and np.all(mins > 0))
    if not cond3a:
        bad = np.nonzero(mins <= 0)[0]
        offenders.extend(("non-positive density", float(data.rho_nodes[j] ** 2))
                         for j in bad[:5])

    rho_v = np.array([mat_norm(data.rho_nodes[j] * data.density[j])
                      for j in range(data.rho_nodes.size)])
    cond3b = bool(np.all(np.isfinite(rho_v)))
    details = {"max_rho_v": float(rho_v.max()), "min_density_eig": float(mins.min())}

    # ||rho M|| sampled along rays rho = eps e^{i theta} approaching 0
    eps_cap = 0.3
    if lam_ks:
        eps_cap = min(eps_cap, 0.4 * np.sqrt(min(abs(lk) for lk in lam_ks)))
    eps_set = eps_cap * np.array([1.0, 0.5, 0.25, 0.125])
    samples = []
    for theta in (np.pi / 2, 2 * np.pi / 3, 5 * np.pi / 6):
        for eps in eps_set:
            rho = eps * np.exp(1j * theta)
            lam = rho * rho
            try:
                mv = weyl_from_spectral_data(data, lam, cfg=cfg)
            except TailTooHeavy:
                continue
            samples.append(abs(rho) * mat_norm(mv))
    samples = np.array(samples).reshape(3, -1) if samples else np.zeros((3, 0))
    growth = 1.0
    if samples.size:
        ratios = samples[:, -1] / np.maximum(samples[:, 0], 1e-300)
        growth = float(np.max(ratios))
    cond3c = bool(growth < cfg.sp_growth_max)
    if not cond3c:
        offenders.append(("rho*M grows toward the origin", growth))
    details["rho_m_growth"] = growth

    return SpReport(cond1, cond2, cond3a, cond3b, cond3c,
                    tuple(offenders), details)
