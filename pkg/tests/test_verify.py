"""Verification harness: unitarity witness and round-trip reports."""

import numpy as np
import pytest

from mslspec.config import RunConfig
from mslspec.inverse_finite import PolePrescription, PrescribedPole
from mslspec.model import Problem, zero_potential
from mslspec.verify import (check_xi_unitarity, random_hermitian_problem,
                            roundtrip_finite, roundtrip_selfadjoint)


def test_xi_unitarity_free_scalar(free_neumann):
    out = check_xi_unitarity(free_neumann, [0.5, 1.0, 3.0])
    # u = i rho: xi = (-i rho)/(i rho) = -1, exactly unitary
    assert out["max_unitarity_dev"] < 1e-12
    assert out["form_mismatch"] < 1e-12


def test_xi_unitarity_random(rng):
    prob = random_hermitian_problem(rng, m=2, h_scale=0.4)
    out = check_xi_unitarity(prob, np.linspace(0.5, 10.0, 8))
    assert out["max_unitarity_dev"] < 1e-6
    assert out["form_mismatch"] < 1e-8


def test_roundtrip_finite_empty():
    model = Problem(m=1, q=zero_potential(1), h=[[0.0]])
    report = roundtrip_finite(model, PolePrescription(()),
                              x_grid=np.linspace(0, 4, 11))
    assert report.ok
    assert report.max_weyl_mismatch < 1e-9


def test_roundtrip_finite_bargmann():
    model = Problem(m=1, q=zero_potential(1), h=[[0.0]])
    presc = PolePrescription((PrescribedPole(-1.0, (np.array([[2.0]]),)),))
    report = roundtrip_finite(model, presc)
    assert report.ok, report.errors
    assert report.max_weyl_mismatch < 1e-4
    assert report.eigenvalue_mismatch < 1e-6
    assert report.residue_mismatch < 1e-6
    assert set(report.witnesses) == {"restv_estimate", "main_system_min_abs_det",
                                     "eps_l1"}


def test_roundtrip_finite_sign_flip_reports_failure():
    model = Problem(m=1, q=zero_potential(1), h=[[0.0]])
    bad = PolePrescription((PrescribedPole(-1.0, (np.array([[-2.0]]),)),))
    report = roundtrip_finite(model, bad, x_grid=np.linspace(0, 6, 241))
    assert not report.ok
    assert report.errors and "determinant" in report.errors[0]


def test_roundtrip_selfadjoint_identity(cfg):
    prob = random_hermitian_problem(np.random.default_rng(5), m=1)
    report = roundtrip_selfadjoint(prob, prob, cfg=cfg)
    assert report.ok, report.errors
    assert report.q_l1_error < 1e-6
    assert set(report.witnesses) == {"restv_estimate", "main_system_min_rcond",
                                     "eps_l1_weighted"}


def test_roundtrip_report_is_reproducible(cfg):
    model = Problem(m=1, q=zero_potential(1), h=[[0.0]])
    presc = PolePrescription((PrescribedPole(-1.0, (np.array([[2.0]]),)),))
    grid = np.linspace(0, 10, 2001)
    r1 = roundtrip_finite(model, presc, x_grid=grid, cfg=cfg)
    r2 = roundtrip_finite(model, presc, x_grid=grid, cfg=cfg)
    assert r1.max_weyl_mismatch == r2.max_weyl_mismatch
    assert r1.eigenvalue_mismatch == r2.eigenvalue_mismatch
    assert r1.config == r2.config
