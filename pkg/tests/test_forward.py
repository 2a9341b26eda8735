"""Forward solver: closed-form oracles for the free field, Wronskian
identities, Weyl-matrix symmetry and asymptotics."""

import numpy as np
import pytest

from mslspec.config import RunConfig
from mslspec.errors import NearSingularU, ZeroLambda
from mslspec.forward import (delta, jost, jost_many, solve_regular,
                             weyl_matrix, weyl_matrix_adjoint, weyl_solution,
                             wronskian_bracket)
from mslspec.model import Problem, lambda_to_rho, zero_potential

from conftest import gaussian_grid_problem


def test_free_regular_solutions(free_neumann):
    xs = np.array([0.0, 0.5, 1.3, 2.0])
    for lam in (4.0, -1.0, 2.0 + 1j):
        rho = lambda_to_rho(lam).rho
        cos = solve_regular(free_neumann, lam, xs)
        sin = solve_regular(free_neumann, lam, xs, variant="sine")
        assert np.max(np.abs(cos.values[0][:, 0, 0] - np.cos(rho * xs))) < 1e-9
        assert np.max(np.abs(sin.values[0][:, 0, 0] - np.sin(rho * xs) / rho)) < 1e-9


def test_regular_solution_at_zero_lambda_with_h():
    h = np.array([[0.3, 0.1], [0.1, -0.2]])
    prob = Problem(m=2, q=zero_potential(2), h=h, selfadjoint=True)
    xs = np.array([0.0, 1.0, 2.5])
    sol = solve_regular(prob, 0.0, xs)
    for i, x in enumerate(xs):
        assert np.max(np.abs(sol.values[0][i] - (np.eye(2) + x * h))) < 1e-9


def test_lambda_derivative_matches_finite_difference():
    prob = gaussian_grid_problem(2, seed=5)
    lam = -2.0
    xs = np.array([1.0, 2.5])
    sol = solve_regular(prob, lam, xs, order=2)
    d = 1e-4
    plus = solve_regular(prob, lam + d, xs)
    minus = solve_regular(prob, lam - d, xs)
    fd1 = (plus.values[0] - minus.values[0]) / (2 * d)
    rel = np.max(np.abs(sol.values[1] - fd1)) / np.max(np.abs(fd1))
    assert rel < 1e-5
    # second difference needs a larger step: solver noise scales like tol/d^2
    d = 2e-3
    plus = solve_regular(prob, lam + d, xs)
    minus = solve_regular(prob, lam - d, xs)
    fd2 = (plus.values[0] - 2 * sol.values[0] + minus.values[0]) / d**2
    rel2 = np.max(np.abs(sol.values[2] - fd2)) / max(np.max(np.abs(fd2)), 1.0)
    assert rel2 < 1e-4


def test_free_jost_exact(free_neumann):
    xs = np.array([0.0, 1.0, 3.0])
    for rho in (2.0, -1.5, 1j, 1 + 1j):
        fam = jost(free_neumann, rho, xs)
        exact = np.exp(1j * np.asarray(rho) * xs)
        assert np.max(np.abs(fam.e[:, 0, 0] - exact)) < 1e-12
        assert np.max(np.abs(fam.e_prime[:, 0, 0] - 1j * rho * exact)) < 1e-12


def test_jost_rejects_bad_rho(free_neumann):
    with pytest.raises(ZeroLambda):
        jost(free_neumann, 0.0)
    with pytest.raises(ValueError):
        jost(free_neumann, -1j)


def test_jost_hermitian_conjugation_identities():
    """e*(x, rho) = e(x, rho)^dagger for purely imaginary rho and
    e*(x, -rho) = e(x, rho)^dagger for real rho (Hermitian problems)."""
    prob = gaussian_grid_problem(2, seed=11)
    xs = np.linspace(0.0, 4.0, 5)
    (e, _), (es, _) = jost_many(prob, [1.7j], xs, with_adjoint=True)
    assert np.max(np.abs(es[0] - e[0].conj().transpose(0, 2, 1))) < 1e-9

    e2, _ = jost_many(prob, [2.3], xs)
    es2, _ = jost_many(prob, [-2.3], xs, adjoint=True)
    assert np.max(np.abs(es2[0] - e2[0].conj().transpose(0, 2, 1))) < 1e-9


def test_jost_normalization_at_support_edge():
    prob = gaussian_grid_problem(2, seed=3)
    xm = prob.x_max
    for rho in (1.0, 0.5j, 2 + 0.5j):
        fam = jost(prob, rho, [xm])
        w = fam.e[0] * np.exp(-1j * complex(rho) * xm)
        assert np.max(np.abs(w - np.eye(2))) < 1e-8


def test_wronskian_constancy():
    prob = gaussian_grid_problem(2, seed=7)
    xs = np.linspace(0, 4, 9)
    for lam in (2.3 + 0.7j, -1.5, 5.0):
        y = solve_regular(prob, lam, xs)
        z = solve_regular(prob, lam, xs, variant="sine", adjoint=True)
        w = np.array([wronskian_bracket(z.values[0][i], z.derivatives[0][i],
                                        y.values[0][i], y.derivatives[0][i])
                      for i in range(xs.size)])
        dev = np.max(np.abs(w - w[0]))
        assert dev <= 1e-8 * (1 + np.max(np.abs(w[0])))


def test_jost_pairing_identity():
    prob = gaussian_grid_problem(2, seed=9)
    xs = np.linspace(0, 4, 9)
    for rho in (0.5, 1.7, 4.0, 10.0):
        (e, ep), _ = jost_many(prob, [rho], xs, with_adjoint=True)
        es, esp = jost_many(prob, [-rho], xs, adjoint=True)
        for i in range(xs.size):
            w = wronskian_bracket(es[0][i], esp[0][i], e[0][i], ep[0][i])
            assert np.max(np.abs(w + 2j * rho * np.eye(2))) < 1e-7


def test_free_u_and_delta(free_attractive):
    # u(rho) = i rho - h; with h = -1 the determinant vanishes at rho = i
    assert delta(free_attractive, 1j * 0.5) == pytest.approx(0.5)
    assert delta(free_attractive, 1j * 2.0) == pytest.approx(-1.0)
    free0 = Problem(m=3, q=zero_potential(3), h=np.zeros((3, 3)))
    for rho in (1.0, 2j, 1 + 1j):
        assert delta(free0, rho) == pytest.approx(complex(1j * rho) ** 3)


def test_weyl_matrix_free_closed_form(rng):
    for m in (1, 2, 3):
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        h = 0.5 * (a + a.conj().T)
        prob = Problem(m=m, q=zero_potential(m), h=h, selfadjoint=True)
        for _ in range(5):
            lam = complex(rng.uniform(-15, 15), rng.uniform(-8, 8))
            if abs(lam) < 0.5:
                continue
            rho = lambda_to_rho(lam).rho
            got = weyl_matrix(prob, lam)
            want = np.linalg.inv(1j * rho * np.eye(m) - h)
            assert np.max(np.abs(got - want)) <= 1e-8 * np.max(np.abs(want))


def test_weyl_matrix_sides(free_neumann):
    m_plus = weyl_matrix(free_neumann, 4.0, side="+")
    m_minus = weyl_matrix(free_neumann, 4.0, side="-")
    assert m_plus[0, 0] == pytest.approx(1 / 2j)
    assert m_minus[0, 0] == pytest.approx(-1 / 2j)


def test_weyl_near_eigenvalue_raises(free_attractive):
    with pytest.raises(NearSingularU):
        weyl_matrix(free_attractive, -1.0 + 1e-14j)


def test_weyl_symmetry_m_equals_m_star():
    prob = gaussian_grid_problem(2, seed=13)
    for lam in (-3.0 + 1.5j, -0.7 - 2j, 6.0 + 0.3j):
        m1 = weyl_matrix(prob, lam)
        m2 = weyl_matrix_adjoint(prob, lam)
        assert np.max(np.abs(m1 - m2)) < 1e-8


def test_weyl_solution_representations(free_neumann):
    xs = np.linspace(0, 3, 7)
    samples, diag = weyl_solution(free_neumann, -2.0 + 1j, xs)
    rho = lambda_to_rho(-2.0 + 1j).rho
    for s in samples:
        assert abs(s.value[0, 0] - np.exp(1j * rho * s.x) / (1j * rho)) < 1e-9
    assert diag["bc_residual"] < 1e-9
    assert diag["representation_mismatch"] < 1e-8

    prob = gaussian_grid_problem(2, seed=17)
    _, diag2 = weyl_solution(prob, -1.0 + 0.8j, xs)
    assert diag2["bc_residual"] < 1e-8
    assert diag2["representation_mismatch"] < 1e-8


def test_no_spectral_singularities_selfadjoint():
    prob = gaussian_grid_problem(2, seed=19)
    rhos = np.linspace(0.3, 8.0, 40)
    e, ep = jost_many(prob, rhos.astype(complex))
    u = ep[:, 0] - prob.h @ e[:, 0]
    smin = np.linalg.svd(u, compute_uv=False)[:, -1]
    assert smin.min() > 1e-3


def test_weyl_asymptotics_lemma():
    prob = gaussian_grid_problem(2, seed=23, scale=1.5)
    h = np.array(prob.h)
    ts = np.geomspace(20, 200, 10)
    devs = []
    for t in ts:
        m_val = weyl_matrix(prob, -(t**2))
        dev = 1j * (1j * t) * m_val - np.eye(2) - h / (1j * t)
        devs.append(np.max(np.abs(dev)))
    slope = np.polyfit(np.log(ts), np.log(devs), 1)[0]
    assert slope <= -1.8
