"""Cross-cutting verification: unitarity witnesses, round-trip harnesses,
and the seeded random-problem generator used by the property tests."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, RunConfig
from .errors import SingularMainSystem
from .forward import jost_many, u_from_jost, weyl_matrix
from .inverse_finite import PolePrescription, reconstruct
from .inverse_selfadjoint import build_data, reconstruct_sd
from .model import PotentialSpec, Problem, mat_norm, zero_potential
from .spectral import (continuous_density_many, extract_spectral_data,
                       find_eigenvalues, residue, validate_class_sp)


def random_hermitian_problem(rng, m: int = 2, x_max: float = 4.0,
                             n_nodes: int = 201, scale: float = 1.0,
                             with_well: bool = False,
                             h_scale: float = 0.0) -> Problem:
    """Seeded compact Hermitian potential: a few Gaussian bumps with random
    Hermitian coefficients, sampled on a uniform grid.

    ``with_well`` subtracts a definite well so the problem carries at least
    one bound state; ``h_scale`` adds a random Hermitian boundary term.
    """
    xs = np.linspace(0.0, x_max, n_nodes)
    vals = np.zeros((n_nodes, m, m), dtype=complex)
    for _ in range(3):
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        herm = 0.5 * (a + a.conj().T) * scale
        c = rng.uniform(0.2 * x_max, 0.7 * x_max)
        s = rng.uniform(0.3, 0.8)
        vals += np.exp(-((xs - c) / s) ** 2)[:, None, None] * herm
    if with_well:
        depth = rng.uniform(1.5, 3.0) * scale
        vals -= depth * np.exp(-((xs - 0.3 * x_max) / (0.35 * x_max)) ** 2)[:, None, None] \
            * np.eye(m)
    h = np.zeros((m, m), dtype=complex)
    if h_scale:
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        h = 0.5 * (a + a.conj().T) * h_scale
    pot = PotentialSpec(m=m, kind="grid", x_max=x_max, x=xs, values=vals)
    return Problem(m=m, q=pot, h=h, selfadjoint=True)


def check_xi_unitarity(problem: Problem, rho_grid, cfg: RunConfig = DEFAULT) -> dict:
    """Unitarity of xi(rho) = u*(-rho) u*(rho)^{-1} on real rho, plus the
    agreement with the equivalent form u(rho)^{-1} u(-rho)."""
    rhos = np.atleast_1d(np.asarray(rho_grid, dtype=float))
    if np.any(rhos == 0):
        raise ValueError("rho = 0 is excluded")
    both = np.concatenate([rhos, -rhos]).astype(complex)
    (e, ep), (es, esp) = jost_many(problem, both, with_adjoint=True, cfg=cfg)
    n = rhos.size
    u_p = ep[:n, 0] - problem.h @ e[:n, 0]
    u_m = ep[n:, 0] - problem.h @ e[n:, 0]
    us_p = esp[:n, 0] - es[:n, 0] @ problem.h
    us_m = esp[n:, 0] - es[n:, 0] @ problem.h
    xi1 = us_m @ np.linalg.inv(us_p)
    xi2 = np.linalg.inv(u_p) @ u_m
    eye = np.eye(problem.m)
    dev_unit = float(np.max(np.abs(xi1 @ xi1.conj().transpose(0, 2, 1) - eye)))
    dev_unit2 = float(np.max(np.abs(xi2 @ xi2.conj().transpose(0, 2, 1) - eye)))
    dev_forms = float(np.max(np.abs(xi1 - xi2)))
    return {"max_unitarity_dev": max(dev_unit, dev_unit2),
            "form_mismatch": dev_forms}


def _pole_contour(lams, n_pts: int):
    """Circle |lambda - c| = r enclosing the poles, clear of [0, inf)."""
    lams = np.asarray(lams, dtype=complex)
    c = lams.mean()
    r0 = float(np.max(np.abs(lams - c))) if lams.size else 0.0
    r = 1.3 * r0 + 0.2 * abs(c) + 0.1
    # distance from the center to the positive real axis
    d = abs(c.imag) if c.real >= 0 else abs(c)
    if r > 0.9 * d:
        r = 0.9 * d
    if r <= 1.02 * r0:
        raise ValueError("poles too close to the positive half-line for a "
                         "separating contour")
    theta = 2 * np.pi * (np.arange(n_pts) + 0.5) / n_pts
    return c + r * np.exp(1j * theta)


@dataclass
class RoundTripReport:
    ok: bool
    max_weyl_mismatch: float
    eigenvalue_mismatch: float
    residue_mismatch: float
    q_l1_error: float | None
    h_error: float | None
    cond_extrema: dict
    witnesses: dict              # one numeric witness per solvability condition
    timings: dict
    errors: tuple = ()
    config: dict = field(default_factory=dict)
    seed: int | None = None


def roundtrip_finite(model: Problem, prescription: PolePrescription,
                     contour_points: int = 16, x_grid=None,
                     tol_weyl: float = 1e-4, tol_spec: float = 1e-6,
                     cfg: RunConfig = DEFAULT) -> RoundTripReport:
    """Reconstruct from a finite prescription, forward-solve the result and
    compare the Weyl matrix against the target on a separating contour.
    For real simple prescriptions the eigenvalues/residues are compared too.
    """
    t0 = time.perf_counter()
    if x_grid is None:
        taus = [abs(np.sqrt(complex(p.lam)).imag) for p in prescription.poles] or [1.0]
        x_end = min(20.0, 10.0 / max(min(taus), 0.3))
        x_grid = _two_zone_grid(2.5e-4, 1e-2, min(8.0, x_end), x_end)
    errors = []
    try:
        rec = reconstruct(model, prescription, x_grid, cfg=cfg)
    except SingularMainSystem as exc:
        return RoundTripReport(False, np.inf, np.inf, np.inf, None, None, {},
                               {}, {"reconstruct": time.perf_counter() - t0},
                               errors=(str(exc),), config=cfg.as_dict())
    t1 = time.perf_counter()

    selfadj = prescription.poles and all(
        abs(p.lam.imag) < 1e-12 and p.multiplicity == 1 and
        np.max(np.abs(p.alphas[0] - p.alphas[0].conj().T)) < 1e-10
        for p in prescription.poles)
    prob = rec.problem(selfadjoint=bool(selfadj))

    if prescription.poles:
        pts = _pole_contour([p.lam for p in prescription.poles], contour_points)
    else:
        pts = -1.0 + 1j * np.linspace(0.5, 4.0, contour_points)
    mism = 0.0
    for lam in pts:
        m_rec = weyl_matrix(prob, lam, cfg=cfg)
        m_tgt = weyl_matrix(model, lam, cfg=cfg)
        if prescription.poles:
            m_tgt = m_tgt + prescription.weyl_correction(lam)
        mism = max(mism, mat_norm(m_rec - m_tgt) / max(mat_norm(m_tgt), 1e-30))
    t2 = time.perf_counter()

    eig_mism = res_mism = 0.0
    if selfadj:
        taus = sorted(np.sqrt(-np.array([p.lam.real for p in prescription.poles])))
        lo, hi = 0.3 * taus[0], 3.0 * taus[-1] + 1.0
        eigs = find_eigenvalues(prob, tau_range=(lo, hi), scan_steps=max(60, cfg.scan_steps // 4), cfg=cfg)
        want = sorted(p.lam.real for p in prescription.poles)
        if len(eigs) != len(want):
            errors.append(f"expected {len(want)} eigenvalues, found {len(eigs)}")
            eig_mism = np.inf
        else:
            eig_mism = float(np.max(np.abs(np.array(eigs) - np.array(want))))
            for lam_k, p in zip(eigs, sorted(prescription.poles, key=lambda p: p.lam.real)):
                alpha = residue(prob, lam_k, neighbors=[l for l in eigs if l != lam_k], cfg=cfg)
                res_mism = max(res_mism, float(np.max(np.abs(alpha - p.alphas[0]))))
    t3 = time.perf_counter()

    witnesses = {
        "restv_estimate": 0.0,        # finite perturbation: density difference vanishes
        "main_system_min_abs_det": rec.report.det_min_abs,
        "eps_l1": rec.report.l1,
    }
    ok = (mism <= tol_weyl and eig_mism <= tol_spec and res_mism <= tol_spec
          and not errors)
    return RoundTripReport(
        ok, mism, eig_mism, res_mism, None,
        float(np.max(np.abs(rec.h - model.h))) if not prescription.poles else None,
        {"main_system_cond_max": rec.report.cond_max},
        witnesses,
        {"reconstruct": t1 - t0, "weyl_compare": t2 - t1, "spectral_compare": t3 - t2},
        errors=tuple(errors), config=cfg.as_dict(), seed=cfg.seed)


def roundtrip_selfadjoint(true_problem: Problem, model: Problem | None = None,
                          x_grid=None, m_test_points=None,
                          cfg: RunConfig = DEFAULT) -> RoundTripReport:
    """Forward -> spectral data -> class-Sp check -> inverse -> forward,
    comparing the potential, the spectral data and the Weyl matrix."""
    t0 = time.perf_counter()
    model = model or Problem(m=true_problem.m, q=zero_potential(true_problem.m),
                             h=np.zeros((true_problem.m,) * 2), selfadjoint=True)
    data = extract_spectral_data(true_problem, cfg=cfg)
    sp = validate_class_sp(data, cfg=cfg)
    t1 = time.perf_counter()
    errors = () if sp.ok else (f"class-Sp violation: {sp.offenders}",)

    if x_grid is None:
        x_end = max(true_problem.x_max + 2.0, 6.0)
        x_grid = np.linspace(0.0, x_end, int(40 * x_end) + 1)
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    try:
        rec, diags = reconstruct_sd(data, model, xs, cfg=cfg)
    except SingularMainSystem as exc:
        return RoundTripReport(False, np.inf, np.inf, np.inf, None, None, {}, {},
                               {"extract": t1 - t0}, errors=errors + (str(exc),),
                               config=cfg.as_dict())
    t2 = time.perf_counter()

    from .model import evaluate_potential_many
    q_true = evaluate_potential_many(true_problem.q, rec.x)
    err = np.array([mat_norm(a - b) for a, b in zip(rec.q_values, q_true)])
    q_l1 = float(np.trapezoid(err, rec.x))
    h_err = float(np.max(np.abs(rec.h - np.array(true_problem.h))))

    # spectral comparison on the reconstructed problem
    herm_q = 0.5 * (rec.q_values + rec.q_values.conj().transpose(0, 2, 1))
    herm_prob = Problem(
        m=model.m,
        q=PotentialSpec(m=model.m, kind="grid", x_max=float(rec.x[-1]),
                        x=rec.x, values=herm_q),
        h=0.5 * (rec.h + rec.h.conj().T), selfadjoint=True)
    eig_mism = res_mism = 0.0
    want = [lk for lk, _ in data.poles]
    eigs = find_eigenvalues(herm_prob, cfg=cfg) if want else []
    if len(eigs) != len(want):
        if want:
            errors = errors + (f"expected {len(want)} eigenvalues, found {len(eigs)}",)
            eig_mism = np.inf
    else:
        for got, (lk, alpha_t) in zip(sorted(eigs), sorted(data.poles)):
            eig_mism = max(eig_mism, abs(got - lk))
            alpha_r = residue(herm_prob, got, neighbors=[l for l in eigs if l != got], cfg=cfg)
            res_mism = max(res_mism, float(np.max(np.abs(alpha_r - alpha_t))))

    if m_test_points is None:
        m_test_points = [-2.0 + 1.5j, -5.0 + 2j, -1.0 - 3j]
    m_mism = 0.0
    for lam in m_test_points:
        m_rec = weyl_matrix(herm_prob, lam, cfg=cfg)
        m_true = weyl_matrix(true_problem, lam, cfg=cfg)
        m_mism = max(m_mism, mat_norm(m_rec - m_true) / max(mat_norm(m_true), 1e-30))
    # density comparison at a few interior nodes
    idx = np.linspace(5, data.rho_nodes.size - 5, 7, dtype=int)
    v_rec = continuous_density_many(herm_prob, data.rho_nodes[idx] ** 2, cfg=cfg)
    v_mism = float(np.max(np.abs(v_rec - data.density[idx])))
    t3 = time.perf_counter()

    witnesses = {
        "restv_estimate": diags["restv_estimate"],
        "main_system_min_rcond": diags["rcond_min"],
        "eps_l1_weighted": diags["eps_l1_weighted"],
    }
    ok = sp.ok and q_l1 <= 5e-2 and not errors
    return RoundTripReport(
        ok, m_mism, eig_mism, res_mism, q_l1, h_err,
        {"rcond_min": diags["rcond_min"]},
        witnesses,
        {"extract+validate": t1 - t0, "invert": t2 - t1, "verify": t3 - t2},
        errors=errors + ((f"density mismatch {v_mism:.2e}",) if v_mism > 0.05 else ()),
        config=cfg.as_dict(), seed=cfg.seed)


def _two_zone_grid(h0: float, h1: float, x_mid: float, x_end: float) -> np.ndarray:
    g1 = np.arange(0.0, x_mid, h0)
    g2 = np.arange(x_mid, x_end + 0.5 * h1, h1)
    return np.unique(np.concatenate([g1, g2]))
