"""Integrator core: closed-form checks, convergence, and parity between the
compiled and pure-python twins."""

import numpy as np
import pytest

from mslspec._core import _pykernels
from mslspec.config import RunConfig
from mslspec.errors import IntegratorFailure
from mslspec.integrate import BatchSystem, backend, chain_initial_values
from mslspec.model import PotentialSpec, zero_potential

try:
    from mslspec._core import _ckernels
except ImportError:
    _ckernels = None


def _free_chain(lam_values, order, nodes, cfg=RunConfig()):
    m = 1
    n = len(lam_values)
    y0 = chain_initial_values(n, order + 1, m, np.eye(m), np.zeros((m, m)))
    bs = BatchSystem(pot=zero_potential(m), m=m,
                     lam_rc=np.asarray(lam_values, dtype=complex),
                     k_rc=order + 1, y0_rc=y0)
    return bs.run(0.0, nodes, cfg)


def test_free_cosine_and_derivative():
    lams = np.array([4.0, -1.0, 2j, -3.0 + 1j])
    res = _free_chain(lams, 1, [0.7, 1.9])
    rho = np.array([np.sqrt(complex(l)) for l in lams])
    for i, x in enumerate(res.nodes):
        got = res.rc[i, :, 0, 0, 0, 0]
        assert np.max(np.abs(got - np.cos(rho * x))) < 1e-9
        dgot = res.rc[i, :, 1, 0, 0, 0]
        dexact = -x * np.sin(rho * x) / (2 * rho)   # d/d lambda cos(rho x)
        assert np.max(np.abs(dgot - dexact) / (1 + np.abs(dexact))) < 1e-9


def test_jost_rescaled_free_is_exact():
    m = 2
    eye = np.broadcast_to(np.eye(m, dtype=complex), (2, m, m))
    y0 = np.stack([eye, np.zeros((2, m, m), dtype=complex)], axis=1)
    bs = BatchSystem(pot=zero_potential(m), m=m,
                     rho_rj=np.array([1.5 + 0j, 3j]), y0_rj=y0)
    res = bs.run(6.0, [3.0, 0.0])
    assert np.max(np.abs(res.rj[:, :, 0] - np.eye(m))) == 0.0
    assert np.max(np.abs(res.rj[:, :, 1])) == 0.0


def test_accumulator_free_product():
    # integral of cos(2t) cos(t) over (0, x)
    m = 1
    y0 = chain_initial_values(1, 1, m, np.eye(m), np.zeros((m, m)))
    bs = BatchSystem(pot=zero_potential(m), m=m,
                     lam_rc=np.array([4.0 + 0j]), k_rc=1, y0_rc=y0,
                     lam_ac=np.array([1.0 + 0j]), k_ac=1, y0_ac=y0.copy(),
                     acc_pairs=np.array([[0, 0, 0, 0]], dtype=np.int64))
    res = bs.run(0.0, [1.0, 2.4])
    for i, x in enumerate(res.nodes):
        exact = (2 * np.sin(2 * x) * np.cos(x) - np.cos(2 * x) * np.sin(x)) / 3.0
        assert abs(res.acc[i, 0, 0, 0] - exact) < 2e-10


def test_tolerance_convergence(rng):
    xs = np.linspace(0, 3, 61)
    vals = (np.exp(-xs)[:, None, None] *
            np.array([[1.0, 0.3], [0.3, -0.5]])).astype(complex)
    pot = PotentialSpec(m=2, kind="grid", x_max=3.0, x=xs, values=vals)
    y0 = chain_initial_values(1, 1, 2, np.eye(2), np.zeros((2, 2)))

    def run(tol):
        bs = BatchSystem(pot=pot, m=2, lam_rc=np.array([-1.5 + 0.3j]),
                         k_rc=1, y0_rc=y0)
        return bs.run(0.0, [2.5], RunConfig(ode_tol=tol)).rc[0, 0, 0, 0]

    ref = run(1e-13)
    err8 = np.max(np.abs(run(1e-8) - ref))
    err11 = np.max(np.abs(run(1e-11) - ref))
    assert err11 < err8 / 30
    assert err11 < 1e-9


def test_max_steps_enforced():
    y0 = chain_initial_values(1, 1, 1, np.eye(1), np.zeros((1, 1)))
    bs = BatchSystem(pot=zero_potential(1), m=1,
                     lam_rc=np.array([4.0 + 0j]), k_rc=1, y0_rc=y0)
    with pytest.raises(IntegratorFailure):
        bs.run(0.0, [50.0], RunConfig(ode_tol=1e-12, max_steps=10))


def test_potential_eval_matches_model(rng):
    from mslspec.model import evaluate_potential
    xs = np.sort(np.concatenate([[0.0], rng.uniform(0.1, 3.9, 30)]))
    vals = rng.standard_normal((31, 2, 2)) + 1j * rng.standard_normal((31, 2, 2))
    pot = PotentialSpec(m=2, kind="grid", x_max=4.5, x=xs, values=vals)
    kind, pxs, pvals, xmax, params = 1, np.asarray(xs), np.asarray(vals), 4.5, np.zeros(1)
    for x in rng.uniform(0, 5.0, 60):
        a = evaluate_potential(pot, x)
        b = _pykernels.eval_potential_scalar(x, kind, pxs, pvals, xmax, params, 2)
        assert np.max(np.abs(a - b)) < 1e-14


@pytest.mark.skipif(_ckernels is None, reason="compiled core not built")
def test_twin_parity():
    """Both backends integrate the same mixed batch to matching results."""
    m = 2
    xs = np.linspace(0, 3, 61)
    vals = (np.exp(-xs)[:, None, None] *
            np.array([[1.0, 0.3], [0.3, -0.5]])).astype(complex)
    pot = PotentialSpec(m=m, kind="grid", x_max=3.0, x=xs, values=vals)
    lam = np.array([2.0 + 0j, -1.5 + 0.3j])
    y0 = chain_initial_values(2, 3, m, np.eye(m), 0.1 * np.ones((m, m)))
    eye = np.broadcast_to(np.eye(m, dtype=complex), (1, m, m))
    yj = np.stack([eye, np.zeros((1, m, m), dtype=complex)], axis=1)
    kw = dict(pot=pot, m=m, lam_rc=lam, k_rc=3, y0_rc=y0,
              lam_ac=lam[::-1].copy(), k_ac=3, y0_ac=y0.copy(),
              rho_rj=np.array([1.0 + 0j]), y0_rj=yj,
              rho_aj=np.array([2j]), y0_aj=yj.copy(),
              acc_pairs=np.array([[0, 0, 0, 0], [1, 2, 0, 1]], dtype=np.int64))
    cfg = RunConfig()
    kind, pxs, pvals, xmax, params = 1, np.asarray(xs), np.ascontiguousarray(vals), 3.0, np.zeros(1)

    def call(impl):
        return impl.propagate(
            m, kind, pxs.copy(), pvals.copy(), xmax, params.copy(),
            lam, 3, y0.copy(), lam[::-1].copy(), 3, y0.copy(),
            kw["rho_rj"].copy(), yj.copy(), kw["rho_aj"].copy(), yj.copy(),
            kw["acc_pairs"].copy(), np.zeros((2, m, m), dtype=complex),
            0.0, np.array([1.0, 2.5]), cfg.ode_tol, cfg.ode_tol, cfg.max_steps)

    out_c = call(_ckernels)
    out_p = call(_pykernels)
    assert out_c[5] == out_p[5]  # identical step counts
    for a, b in zip(out_c[:5], out_p[:5]):
        if a.size:
            scale = np.maximum(np.abs(b), 1.0)
            assert np.max(np.abs(a - b) / scale) < 1e-11


def test_backend_reports_name():
    assert backend() in ("compiled", "python")
