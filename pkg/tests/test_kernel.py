"""Kernel D(x, lambda, mu): closed forms, quotient consistency, derivative
checks and symmetry."""

import numpy as np
import pytest

from mslspec.config import RunConfig
from mslspec.errors import KernelFailure
from mslspec.kernel import ModelFamily, kernel, kernel_quotient
from mslspec.model import Problem, zero_potential

from conftest import gaussian_grid_problem


def _free_kernel(x, lam, mu):
    """Oracle: integral of cos(rho_mu t) cos(rho_lam t) over (0, x)."""
    rl = np.sqrt(complex(lam))
    rm = np.sqrt(complex(mu))
    if abs(lam - mu) < 1e-12:
        if abs(rl) < 1e-12:
            return x
        return x / 2 + np.sin(rl * x) * np.cos(rl * x) / (2 * rl)
    return (rl * np.sin(rl * x) * np.cos(rm * x)
            - rm * np.cos(rl * x) * np.sin(rm * x)) / (lam - mu)


@pytest.fixture(scope="module")
def zero_model():
    return Problem(m=1, q=zero_potential(1), h=[[0.0]])


def test_kernel_free_coincident(zero_model):
    # D(x, -1, -1) = (x + sinh x cosh x) / 2
    for ev in kernel(zero_model, [0.0, 0.5, 1.0, 2.0], -1.0, -1.0):
        want = (ev.x + np.sinh(ev.x) * np.cosh(ev.x)) / 2
        assert abs(ev.value[0, 0] - want) < 1e-9 * (1 + abs(want))


def test_kernel_vanishes_at_origin(zero_model):
    prob = gaussian_grid_problem(2, seed=3)
    for model, lam, mu in ((zero_model, 2.0, -1.0), (prob, 1.5 + 1j, 0.3)):
        ev = kernel(model, [0.0], lam, mu)[0]
        assert np.max(np.abs(ev.value)) == 0.0


def test_kernel_free_separated(zero_model):
    for x in (0.7, 1.9):
        for lam, mu in ((4.0, 1.0), (9.0, 2.0), (-1.0, 4.0)):
            got = kernel(zero_model, [x], lam, mu)[0].value[0, 0]
            assert abs(got - _free_kernel(x, lam, mu)) < 1e-9


def test_quotient_consistency(zero_model):
    prob = gaussian_grid_problem(2, seed=61)
    for model in (zero_model, prob):
        for lam, mu in ((4.0, 1.0), (-2.0, 0.5), (3.0 + 1j, -1.0)):
            xs = np.array([0.5, 1.5, 3.0])
            integral = np.array([ev.value for ev in kernel(model, xs, lam, mu)])
            quotient = kernel_quotient(model, xs, lam, mu)
            scale = 1 + np.max(np.abs(integral))
            assert np.max(np.abs(integral - quotient)) <= 1e-8 * scale


def test_kernel_derivative_matches_finite_difference(zero_model):
    prob = gaussian_grid_problem(2, seed=67)
    lam, mu, d = -2.0, -1.0, 1e-4
    for model in (zero_model, prob):
        val = kernel(model, [1.3], lam, mu, i=1, j=0)[0].value
        plus = kernel(model, [1.3], lam + d, mu)[0].value
        minus = kernel(model, [1.3], lam - d, mu)[0].value
        fd = (plus - minus) / (2 * d)
        assert np.max(np.abs(val - fd)) <= 1e-5 * (1 + np.max(np.abs(fd)))
        # mixed derivative, mu side
        val01 = kernel(model, [1.3], lam, mu, i=0, j=1)[0].value
        plus_m = kernel(model, [1.3], lam, mu + d)[0].value
        minus_m = kernel(model, [1.3], lam, mu - d)[0].value
        fd_m = (plus_m - minus_m) / (2 * d)
        assert np.max(np.abs(val01 - fd_m)) <= 1e-5 * (1 + np.max(np.abs(fd_m)))


def test_kernel_selfadjoint_symmetry():
    """D(x, lambda, mu)^dagger = D(x, mu, lambda) for Hermitian models and
    real spectral arguments."""
    prob = gaussian_grid_problem(2, seed=71)
    lam, mu = 2.0, -1.5
    a = kernel(prob, [2.0], lam, mu)[0].value
    b = kernel(prob, [2.0], mu, lam)[0].value
    assert np.max(np.abs(a.conj().T - b)) < 1e-9


def test_kernel_order_cap(zero_model):
    with pytest.raises(ValueError):
        kernel(zero_model, [1.0], -1.0, -1.0, i=5, j=0)


def test_family_chunk_matches_single_run(zero_model):
    fam = ModelFamily(zero_model, [-1.0, 4.0, 1.0], [2, 1, 1])
    nodes = np.linspace(0, 3, 13)
    whole = fam.run(nodes)
    parts = list(fam.iter_chunks(nodes, chunk=4))
    acc = np.concatenate([p.acc for p in parts], axis=0)
    rc = np.concatenate([p.rc for p in parts], axis=0)
    assert np.max(np.abs(acc - whole.acc)) < 5e-10
    assert np.max(np.abs(rc - whole.rc)) < 5e-10


def test_kernel_matrix_quotient_and_overrides(zero_model):
    fam = ModelFamily(zero_model, [4.0, 1.0, -1.0], [1, 1, 1])
    chunk = fam.run([1.7])
    dmat = chunk.kernel_matrix(0)
    for d in range(3):
        for c in range(3):
            want = _free_kernel(1.7, fam.lams[d], fam.lams[c])
            assert abs(dmat[d, c, 0, 0] - want) < 1e-9


def test_unaccumulated_close_pair_raises(zero_model):
    fam = ModelFamily(zero_model, [1.0, 1.0 + 1e-3], [1, 1], acc_spec=[])
    chunk = fam.run([1.0])
    with pytest.raises(KernelFailure):
        chunk.kernel(0, 1)
