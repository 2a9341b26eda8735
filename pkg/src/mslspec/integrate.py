"""High-level driver for the integrator core.

Builds the flat system description consumed by the backend ``propagate``
(regular/adjoint lambda-derivative chains, rescaled Jost systems, kernel
quadrature accumulators) and unpacks the per-node outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _core
from .config import DEFAULT, RunConfig
from .model import PotentialSpec

_POT_CODE = {
    "zero": _core.POT_ZERO,
    "grid": _core.POT_GRID,
    "diagonal-exponential": _core.POT_DIAG_EXP,
    "bargmann": _core.POT_BARGMANN,
}

_EMPTY_C = np.zeros(0, dtype=complex)
_EMPTY_PAIRS = np.zeros((0, 4), dtype=np.int64)


def _c(a, dtype):
    # writable C-contiguous copy (model arrays are read-only by design)
    return np.array(a, dtype=dtype, order="C", copy=True)


def _pot_arrays(spec: PotentialSpec):
    kind = _POT_CODE[spec.kind]
    if spec.kind == "grid":
        xs = _c(spec.x, float)
        vals = _c(spec.values, complex)
    else:
        xs = np.zeros(1, dtype=float)
        vals = np.zeros((1, spec.m, spec.m), dtype=complex)
    params = _c(spec.params, float) if spec.params else np.zeros(1, dtype=float)
    return kind, xs, vals, spec.x_max, params


@dataclass
class BatchSystem:
    """One batched integration attached to a single potential.

    Chains hold Taylor-scaled lambda-derivative levels: level k carries
    (1/k!) d^k/d lambda^k of the base solution.
    """

    pot: PotentialSpec
    m: int
    lam_rc: np.ndarray = field(default_factory=lambda: _EMPTY_C)
    k_rc: int = 1
    y0_rc: np.ndarray | None = None
    lam_ac: np.ndarray = field(default_factory=lambda: _EMPTY_C)
    k_ac: int = 1
    y0_ac: np.ndarray | None = None
    rho_rj: np.ndarray = field(default_factory=lambda: _EMPTY_C)
    y0_rj: np.ndarray | None = None
    rho_aj: np.ndarray = field(default_factory=lambda: _EMPTY_C)
    y0_aj: np.ndarray | None = None
    acc_pairs: np.ndarray = field(default_factory=lambda: _EMPTY_PAIRS)

    def run(self, x0: float, nodes, cfg: RunConfig = DEFAULT):
        """Integrate from x0 through the monotone nodes; returns a Result."""
        m = self.m
        nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
        kind, xs, vals, xmax, params = _pot_arrays(self.pot)

        def shaped(y0, n, k):
            if y0 is None:
                return np.zeros((n, k, 2, m, m), dtype=complex)
            return _c(y0, complex).reshape(n, k, 2, m, m)

        y0_rc = shaped(self.y0_rc, len(self.lam_rc), self.k_rc)
        y0_ac = shaped(self.y0_ac, len(self.lam_ac), self.k_ac)
        y0_rj = np.zeros((len(self.rho_rj), 2, m, m), dtype=complex) \
            if self.y0_rj is None else _c(self.y0_rj, complex)
        y0_aj = np.zeros((len(self.rho_aj), 2, m, m), dtype=complex) \
            if self.y0_aj is None else _c(self.y0_aj, complex)
        acc0 = np.zeros((len(self.acc_pairs), m, m), dtype=complex)

        out = _core.propagate(
            m, kind, xs, vals, float(xmax), params,
            _c(self.lam_rc, complex), self.k_rc, y0_rc,
            _c(self.lam_ac, complex), self.k_ac, y0_ac,
            _c(self.rho_rj, complex), y0_rj,
            _c(self.rho_aj, complex), y0_aj,
            _c(self.acc_pairs, np.int64), acc0,
            float(x0), nodes, cfg.ode_tol, cfg.ode_tol, cfg.max_steps,
        )
        rc, ac, rj, aj, acc, n_steps, n_rej = out
        return Result(nodes, rc, ac, rj, aj, acc, n_steps, n_rej)


@dataclass
class Result:
    nodes: np.ndarray
    rc: np.ndarray    # (n_nodes, n_rc, k_rc, 2, m, m)
    ac: np.ndarray
    rj: np.ndarray    # (n_nodes, n_rj, 2, m, m)
    aj: np.ndarray
    acc: np.ndarray   # (n_nodes, n_acc, m, m)
    n_steps: int
    n_rejected: int


def chain_initial_values(n: int, k: int, m: int, value0, deriv0) -> np.ndarray:
    """Initial data for a lambda-derivative chain: the base level starts at
    (value0, deriv0), all derivative levels start at zero."""
    y0 = np.zeros((n, k, 2, m, m), dtype=complex)
    y0[:, 0, 0] = value0
    y0[:, 0, 1] = deriv0
    return y0


def backend() -> str:
    return _core.BACKEND
