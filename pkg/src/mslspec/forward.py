"""Forward spectral problem: fundamental solutions, Jost solutions, the
characteristic matrix u(rho), its determinant, the Weyl solution and the
Weyl matrix.

Conventions
-----------
* regular equation:  -Y'' + Q(x) Y = lambda Y,   boundary form U(Y) = Y'(0) - h Y(0)
* adjoint equation:  -Z'' + Z Q(x) = lambda Z,   U*(Z) = Z'(0) - Z(0) h
* "cosine" solution: Y(0) = I, Y'(0) = h   (entire in lambda)
* "sine" solution:   Y(0) = 0, Y'(0) = I
* Jost solution:     e(x, rho) ~ exp(i rho x) I at infinity; computed via the
  rescaled variable w = e * exp(-i rho x), integrated backward from x_max,
  which keeps every quantity O(1) regardless of Im(rho) * x_max.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import factorial

import numpy as np

from .config import DEFAULT, RunConfig
from .errors import NearSingularU, UnstableDirection, ZeroLambda
from .integrate import BatchSystem, chain_initial_values
from .model import Problem, SpectralPoint, lambda_to_rho

_UNDERFLOW_TAU_X = 700.0  # exp(-tau*x) underflows past this


@dataclass(frozen=True)
class SolutionSample:
    x: float
    value: np.ndarray
    derivative: np.ndarray


@dataclass(frozen=True)
class RegularSolution:
    """A fundamental solution and its lambda-derivatives on a grid.

    ``values``/``derivatives`` have shape (order+1, n_x, m, m) and hold the
    plain derivatives d^j/d lambda^j (not Taylor-scaled).
    """

    lam: complex
    variant: str
    adjoint: bool
    xs: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray

    def order(self, j: int = 0):
        return self.values[j], self.derivatives[j]

    def samples(self, j: int = 0):
        return [SolutionSample(x, self.values[j, i], self.derivatives[j, i])
                for i, x in enumerate(self.xs)]


@dataclass(frozen=True)
class JostFamily:
    """Jost solution samples e(x, rho), e'(x, rho) (and the adjoint pair)."""

    rho: complex
    xs: np.ndarray
    e: np.ndarray
    e_prime: np.ndarray
    estar: np.ndarray | None = None
    estar_prime: np.ndarray | None = None


def _ic(variant: str, m: int, h: np.ndarray):
    if variant == "cosine":
        return np.eye(m, dtype=complex), np.array(h, dtype=complex)
    if variant == "sine":
        return np.zeros((m, m), dtype=complex), np.eye(m, dtype=complex)
    raise ValueError(f"variant must be 'cosine' or 'sine', got {variant!r}")


def solve_regular(problem: Problem, lam: complex, x_grid, order: int = 0,
                  variant: str = "cosine", adjoint: bool = False,
                  cfg: RunConfig = DEFAULT) -> RegularSolution:
    """Integrate a fundamental solution with its lambda-derivative chain.

    The chain is the variational system (l - lambda) dY_j = j * Y_{j-1};
    derivatives are exact, never finite differences.
    """
    m = problem.m
    v0, d0 = _ic(variant, m, problem.h)
    k = order + 1
    y0 = chain_initial_values(1, k, m, v0, d0)
    lam_arr = np.array([complex(lam)])
    if adjoint:
        bs = BatchSystem(pot=problem.q, m=m, lam_ac=lam_arr, k_ac=k, y0_ac=y0)
    else:
        bs = BatchSystem(pot=problem.q, m=m, lam_rc=lam_arr, k_rc=k, y0_rc=y0)
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    res = bs.run(0.0, xs, cfg)
    raw = (res.ac if adjoint else res.rc)[:, 0]          # (n_x, k, 2, m, m)
    scale = np.array([factorial(j) for j in range(k)], dtype=float)
    vals = np.transpose(raw[:, :, 0], (1, 0, 2, 3)) * scale[:, None, None, None]
    ders = np.transpose(raw[:, :, 1], (1, 0, 2, 3)) * scale[:, None, None, None]
    return RegularSolution(complex(lam), variant, adjoint, xs, vals, ders)


def _check_rho(rho) -> complex:
    r = complex(rho.rho if isinstance(rho, SpectralPoint) else rho)
    if r == 0:
        raise ZeroLambda("rho = 0 is excluded from the Jost domain")
    if r.imag < -1e-14:
        raise ValueError(f"rho must satisfy Im rho >= 0, got {r}")
    return complex(r.real, max(r.imag, 0.0))


def jost_many(problem: Problem, rhos, x_nodes=None, adjoint: bool = False,
              with_adjoint: bool = False, cfg: RunConfig = DEFAULT):
    """Batched Jost solutions at many rho.

    Returns (e, e_prime) arrays of shape (n_rho, n_x, m, m); when
    ``with_adjoint`` both the regular and adjoint families are returned as
    ((e, e'), (e*, e*')).  x_nodes defaults to [0].
    """
    m = problem.m
    rhos = np.array([_check_rho(r) for r in np.atleast_1d(rhos)], dtype=complex)
    xs = np.array([0.0]) if x_nodes is None else np.atleast_1d(np.asarray(x_nodes, dtype=float))
    x_from = problem.x_max
    inner = np.unique(xs[xs < x_from])
    nodes_desc = inner[::-1].copy() if inner.size else np.array([x_from])

    n = len(rhos)
    eye = np.broadcast_to(np.eye(m, dtype=complex), (n, m, m))
    zero = np.zeros((n, m, m), dtype=complex)
    y0 = np.stack([eye, zero], axis=1)  # w(x_max) = I, w'(x_max) = 0

    kw = {}
    if adjoint or with_adjoint:
        kw.update(rho_aj=rhos, y0_aj=y0.copy())
    if not adjoint:
        kw.update(rho_rj=rhos, y0_rj=y0.copy())
    bs = BatchSystem(pot=problem.q, m=m, **kw)
    res = bs.run(x_from, nodes_desc, cfg)

    def unpack(block):
        # block: (n_desc, n, 2, m, m) at descending inner nodes
        w = np.empty((n, xs.size, m, m), dtype=complex)
        p = np.empty_like(w)
        for i, x in enumerate(xs):
            if x >= x_from:
                w[:, i] = np.eye(m)
                p[:, i] = 0.0
            else:
                j = int(np.where(nodes_desc == x)[0][0])
                w[:, i] = block[j, :, 0]
                p[:, i] = block[j, :, 1]
        phase = np.exp(1j * rhos[:, None] * xs[None, :])
        if np.any(np.abs(rhos.imag[:, None] * xs[None, :]) > _UNDERFLOW_TAU_X):
            warnings.warn("Jost samples underflow for Im(rho)*x beyond ~700; "
                          "values at those nodes are 0 to double precision",
                          UnstableDirection)
        e = w * phase[:, :, None, None]
        ep = (p + 1j * rhos[:, None, None, None] * w) * phase[:, :, None, None]
        return e, ep

    if inner.size == 0:
        # all nodes beyond the support: exact free values
        block = None

        def unpack_free(_):
            w = np.broadcast_to(np.eye(m, dtype=complex), (n, xs.size, m, m)).copy()
            p = np.zeros_like(w)
            phase = np.exp(1j * rhos[:, None] * xs[None, :])
            e = w * phase[:, :, None, None]
            ep = (p + 1j * rhos[:, None, None, None] * w) * phase[:, :, None, None]
            return e, ep

        unpack = unpack_free  # noqa: F811

    if adjoint:
        return unpack(res.aj)
    if with_adjoint:
        return unpack(res.rj), unpack(res.aj)
    return unpack(res.rj)


def jost(problem: Problem, rho, x_grid=None, with_adjoint: bool = False,
         cfg: RunConfig = DEFAULT) -> JostFamily:
    """Jost family at a single rho (see ``jost_many``)."""
    r = _check_rho(rho)
    xs = np.array([0.0]) if x_grid is None else np.atleast_1d(np.asarray(x_grid, dtype=float))
    if with_adjoint:
        (e, ep), (es, esp) = jost_many(problem, [r], xs, with_adjoint=True, cfg=cfg)
        return JostFamily(r, xs, e[0], ep[0], es[0], esp[0])
    e, ep = jost_many(problem, [r], xs, cfg=cfg)
    return JostFamily(r, xs, e[0], ep[0])


def characteristic_matrix(problem: Problem, rho, adjoint: bool = False,
                          cfg: RunConfig = DEFAULT) -> np.ndarray:
    """u(rho) = e'(0) - h e(0); the adjoint variant is u*(rho) = e*'(0) - e*(0) h."""
    e, ep = jost_many(problem, [rho], adjoint=adjoint, cfg=cfg)
    if adjoint:
        return ep[0, 0] - e[0, 0] @ problem.h
    return ep[0, 0] - problem.h @ e[0, 0]


def u_from_jost(problem: Problem, e0: np.ndarray, ep0: np.ndarray,
                adjoint: bool = False) -> np.ndarray:
    if adjoint:
        return ep0 - e0 @ problem.h
    return ep0 - problem.h @ e0


def delta(problem: Problem, rho, cfg: RunConfig = DEFAULT) -> complex:
    """Characteristic determinant Delta(rho) = det u(rho)."""
    return complex(np.linalg.det(characteristic_matrix(problem, rho, cfg=cfg)))


def _invert_u(u: np.ndarray, rho: complex, cond_max: float):
    # u scales like i rho for large |rho|, so the singular-value floor is
    # taken relative to (1 + |rho|); cond alone is blind for m = 1
    sv = np.linalg.svd(u, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    floor = (1.0 + abs(rho)) / cond_max
    if not np.isfinite(cond) or cond > cond_max or sv[-1] < floor:
        raise NearSingularU(
            f"u(rho) is numerically singular (cond {cond:.3e}, smallest "
            f"singular value {sv[-1]:.3e}); lambda is too close to an "
            "eigenvalue or spectral singularity")
    return np.linalg.inv(u), cond


def weyl_matrix(problem: Problem, lam: complex, side: str = "auto",
                cfg: RunConfig = DEFAULT) -> np.ndarray:
    """M(lambda) = e(0, rho) u(rho)^{-1} on the branch selected by ``side``."""
    pt = lambda_to_rho(lam, side)
    e, ep = jost_many(problem, [pt.rho], cfg=cfg)
    u = u_from_jost(problem, e[0, 0], ep[0, 0])
    uinv, _ = _invert_u(u, pt.rho, cfg.cond_max)
    return e[0, 0] @ uinv


def weyl_matrix_adjoint(problem: Problem, lam: complex, side: str = "auto",
                        cfg: RunConfig = DEFAULT) -> np.ndarray:
    """M*(lambda) = u*(rho)^{-1} e*(0, rho); identical to M by the symmetry
    of the Weyl matrix (checked in tests)."""
    pt = lambda_to_rho(lam, side)
    e, ep = jost_many(problem, [pt.rho], adjoint=True, cfg=cfg)
    u = u_from_jost(problem, e[0, 0], ep[0, 0], adjoint=True)
    uinv, _ = _invert_u(u, pt.rho, cfg.cond_max)
    return uinv @ e[0, 0]


def weyl_solution(problem: Problem, lam: complex, x_grid, side: str = "auto",
                  cfg: RunConfig = DEFAULT):
    """Weyl solution Phi on a grid, from the Jost representation; returns
    (samples, diagnostics) where diagnostics carries the boundary-form
    residual and the mismatch against the sine/cosine representation."""
    pt = lambda_to_rho(lam, side)
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    e, ep = jost_many(problem, [pt.rho], xs, cfg=cfg)
    e0, ep0 = jost_many(problem, [pt.rho], cfg=cfg)
    u = u_from_jost(problem, e0[0, 0], ep0[0, 0])
    uinv, cond = _invert_u(u, pt.rho, cfg.cond_max)
    phi = e[0] @ uinv
    phi_p = ep[0] @ uinv

    m_mat = e0[0, 0] @ uinv
    cos = solve_regular(problem, lam, xs, cfg=cfg)
    sin = solve_regular(problem, lam, xs, variant="sine", cfg=cfg)
    alt = sin.values[0] + cos.values[0] @ m_mat
    i0 = int(np.argmin(np.abs(xs)))
    bc_residual = float(np.max(np.abs(
        (phi_p[i0] - problem.h @ phi[i0]) - np.eye(problem.m)))) if np.isclose(xs[i0], 0.0) else None
    diagnostics = {
        "u_cond": cond,
        "bc_residual": bc_residual,
        "representation_mismatch": float(np.max(np.abs(phi - alt))),
    }
    samples = [SolutionSample(x, phi[i], phi_p[i]) for i, x in enumerate(xs)]
    return samples, diagnostics


def wronskian_bracket(z_val, z_der, y_val, y_der) -> np.ndarray:
    """<Z, Y> = Z' Y - Z Y' for an adjoint-solution row Z and a solution Y."""
    return z_der @ y_val - z_val @ y_der
