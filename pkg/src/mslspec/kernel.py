"""The kernel D(x, lambda, mu) of the main equation and its lambda/mu
derivatives, computed against a model problem.

D(x, lambda, mu) = integral_0^x phi*(t, mu) phi(t, lambda) dt, where phi /
phi* are the cosine-type solutions of the model problem and its adjoint.
The integral form is primary (it is regular at lambda = mu); the exact
quotient identity <phi*(x, mu), phi(x, lambda)> / (lambda - mu) serves as a
cross-check and as the fast path for well-separated point pairs inside the
inverse solvers.

Derivative bookkeeping is Taylor-scaled throughout: level s of a chain is
(1/s!) d^s/d lambda^s, and scaled kernels obey
D^[s,j] = (1/s! j!) d^{s+j} D / d lambda^s d mu^j.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .config import DEFAULT, RunConfig
from .errors import IntegratorFailure, KernelFailure
from .integrate import BatchSystem, chain_initial_values
from .model import Problem


@dataclass(frozen=True)
class KernelEvaluation:
    x: float
    lam: complex
    mu: complex
    i: int
    j: int
    value: np.ndarray


class ModelFamily:
    """Cosine-type model solutions (regular and adjoint) with derivative
    chains at a set of spectral points, plus kernel accumulators for the
    point pairs that need the integral form.

    ``orders[c]`` is the chain length at point c (1 = no derivatives).
    ``acc_spec`` lists (c_mu, j, d_lam, s) accumulator tuples; "auto" selects
    every pair closer than cfg.delta_quot at level (0, 0) plus all
    derivative levels for pairs of points with orders > 1.
    """

    def __init__(self, model: Problem, lams, orders=None, acc_spec="auto",
                 cfg: RunConfig = DEFAULT):
        self.model = model
        self.cfg = cfg
        self.m = model.m
        self.lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        n = self.lams.size
        self.orders = np.ones(n, dtype=int) if orders is None \
            else np.asarray(orders, dtype=int)
        if np.any(self.orders < 1) or np.any(self.orders > cfg.max_order + 1):
            raise ValueError(f"chain orders must lie in 1..{cfg.max_order + 1}")
        self.k = int(self.orders.max())

        if acc_spec == "auto":
            acc_spec = []
            for c in range(n):
                for d in range(n):
                    if self.orders[c] > 1 or self.orders[d] > 1:
                        for j in range(self.orders[c]):
                            for s in range(self.orders[d]):
                                acc_spec.append((c, j, d, s))
                    elif abs(self.lams[d] - self.lams[c]) < cfg.delta_quot:
                        acc_spec.append((c, 0, d, 0))
        self.acc_spec = list(acc_spec)
        self._acc_index = {t: i for i, t in enumerate(self.acc_spec)}

        m = self.m
        eye = np.eye(m, dtype=complex)
        y0 = chain_initial_values(n, self.k, m, eye, np.array(model.h, dtype=complex))
        pairs = np.array([(c, j, d, s) for (c, j, d, s) in self.acc_spec],
                         dtype=np.int64).reshape(-1, 4)
        self._bs = BatchSystem(
            pot=model.q, m=m,
            lam_rc=self.lams, k_rc=self.k, y0_rc=y0,
            lam_ac=self.lams, k_ac=self.k, y0_ac=y0.copy(),
            acc_pairs=pairs,
        )

    def run(self, x_nodes) -> "FamilyChunk":
        """Integrate from 0 through ascending x_nodes; one chunk of samples."""
        nodes = np.atleast_1d(np.asarray(x_nodes, dtype=float))
        try:
            res = self._bs.run(0.0, nodes, self.cfg)
        except IntegratorFailure as exc:
            raise KernelFailure(str(exc)) from exc
        return FamilyChunk(self, nodes, res.rc, res.ac, res.acc)

    def iter_chunks(self, x_nodes, chunk: int = 48):
        """Stream FamilyChunk objects over a long grid with bounded memory."""
        nodes = np.atleast_1d(np.asarray(x_nodes, dtype=float))
        start = 0
        state = None
        while start < nodes.size:
            part = nodes[start:start + chunk]
            if state is None:
                res = self._bs.run(0.0, part, self.cfg)
            else:
                res = _run_resumed(self._bs, state, part, self.cfg)
            state = (res.rc[-1], res.ac[-1], res.acc[-1], part[-1])
            yield FamilyChunk(self, part, res.rc, res.ac, res.acc)
            start += chunk


def _run_resumed(bs: BatchSystem, state, nodes, cfg):
    rc0, ac0, acc0, x0 = state
    kw = dict(pot=bs.pot, m=bs.m, lam_rc=bs.lam_rc, k_rc=bs.k_rc, y0_rc=rc0,
              lam_ac=bs.lam_ac, k_ac=bs.k_ac, y0_ac=ac0, acc_pairs=bs.acc_pairs)
    res = BatchSystem(**kw).run(x0, nodes, cfg)
    res.acc += acc0[None]
    return res


class FamilyChunk:
    """Family samples on a slice of the x grid.

    Raw arrays: rc/ac have shape (n_x, n_points, k, 2, m, m); acc has shape
    (n_x, n_acc, m, m) and holds scaled kernels D^[s,j].
    """

    def __init__(self, family: ModelFamily, nodes, rc, ac, acc):
        self.family = family
        self.nodes = nodes
        self.rc = rc
        self.ac = ac
        self.acc = acc

    def phi(self, c: int, s: int = 0) -> np.ndarray:
        return self.rc[:, c, s, 0]

    def phi_prime(self, c: int, s: int = 0) -> np.ndarray:
        return self.rc[:, c, s, 1]

    def phi_star(self, c: int, j: int = 0) -> np.ndarray:
        return self.ac[:, c, j, 0]

    def phi_star_prime(self, c: int, j: int = 0) -> np.ndarray:
        return self.ac[:, c, j, 1]

    def kernel(self, d: int, c: int, s: int = 0, j: int = 0) -> np.ndarray:
        """Scaled kernel D^[s,j](x, lam_d, lam_c) on the chunk nodes.

        Accumulated pairs come from the running quadrature; separated
        order-(0,0) pairs use the exact quotient identity.
        """
        key = (c, j, d, s)
        idx = self.family._acc_index.get(key)
        if idx is not None:
            return self.acc[:, idx]
        if s or j:
            raise KernelFailure(f"derivative kernel ({s},{j}) for pair {key} "
                                "was not accumulated")
        lam_d = self.family.lams[d]
        lam_c = self.family.lams[c]
        if abs(lam_d - lam_c) < self.family.cfg.delta_quot:
            raise KernelFailure(f"pair {key} too close for the quotient form "
                                "and not accumulated")
        num = self.phi_star_prime(c) @ self.phi(d) - self.phi_star(c) @ self.phi_prime(d)
        return num / (lam_d - lam_c)

    def kernel_matrix(self, ix: int) -> np.ndarray:
        """Full (n, n, m, m) kernel matrix D[d, c] = D(x, lam_d, lam_c) at
        chunk node ix, quotient-based with accumulator overrides."""
        lams = self.family.lams
        n = lams.size
        ps = self.ac[ix, :, 0, 0]       # phi*(x, lam_c)
        psp = self.ac[ix, :, 0, 1]
        ph = self.rc[ix, :, 0, 0]       # phi(x, lam_d)
        php = self.rc[ix, :, 0, 1]
        num = np.einsum("cab,dbg->dcag", psp, ph) - np.einsum("cab,dbg->dcag", ps, php)
        denom = lams[:, None] - lams[None, :]
        small = np.abs(denom) < self.family.cfg.delta_quot
        denom = np.where(small, 1.0, denom)
        out = num / denom[:, :, None, None]
        for (c, j, d, s), idx in self.family._acc_index.items():
            if j == 0 and s == 0:
                out[d, c] = self.acc[ix, idx]
                small[d, c] = False
        if np.any(small):
            d_bad, c_bad = np.nonzero(small)
            raise KernelFailure(f"pairs {list(zip(d_bad[:4], c_bad[:4]))} too "
                                "close for the quotient form and not accumulated")
        return out


def kernel(model: Problem, x_grid, lam: complex, mu: complex, i: int = 0,
           j: int = 0, cfg: RunConfig = DEFAULT):
    """Kernel values D<i,j>(x, lambda, mu) on x_grid by augmented quadrature.

    Returns a list of KernelEvaluation carrying the plain (unscaled)
    derivative d^{i+j} D / d lambda^i d mu^j.
    """
    if i > cfg.max_order or j > cfg.max_order:
        raise ValueError(f"derivative order capped at max_order = {cfg.max_order}")
    lam, mu = complex(lam), complex(mu)
    same = lam == mu
    lams = [lam] if same else [lam, mu]
    orders = [max(i, j) + 1] if same else [i + 1, j + 1]
    c_mu = 0 if same else 1
    fam = ModelFamily(model, lams, orders, acc_spec=[(c_mu, j, 0, i)], cfg=cfg)
    chunk = fam.run(np.atleast_1d(np.asarray(x_grid, dtype=float)))
    vals = chunk.acc[:, 0] * (factorial(i) * factorial(j))
    return [KernelEvaluation(float(x), lam, mu, i, j, vals[ix])
            for ix, x in enumerate(chunk.nodes)]


def kernel_quotient(model: Problem, x_grid, lam: complex, mu: complex,
                    cfg: RunConfig = DEFAULT) -> np.ndarray:
    """Cross-check oracle: D(x, lambda, mu) via the exact quotient identity;
    requires |lambda - mu| >= 0.1 to stay well-conditioned."""
    lam, mu = complex(lam), complex(mu)
    if abs(lam - mu) < 0.1:
        raise ValueError("quotient form needs |lambda - mu| >= 0.1")
    fam = ModelFamily(model, [lam, mu], [1, 1], acc_spec=[], cfg=cfg)
    chunk = fam.run(np.atleast_1d(np.asarray(x_grid, dtype=float)))
    num = chunk.phi_star_prime(1) @ chunk.phi(0) - chunk.phi_star(1) @ chunk.phi_prime(0)
    return num / (lam - mu)
