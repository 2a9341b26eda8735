import numpy as np
import pytest

from mslspec.config import RunConfig
from mslspec.model import PotentialSpec, Problem, zero_potential


@pytest.fixture(scope="session")
def cfg():
    return RunConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def free_neumann():
    """Q = 0, h = 0: everything has a closed form."""
    return Problem(m=1, q=zero_potential(1), h=[[0.0]], selfadjoint=True)


@pytest.fixture(scope="session")
def free_attractive():
    """Q = 0, h = -1: one eigenvalue at -1 with residue 2."""
    return Problem(m=1, q=zero_potential(1), h=[[-1.0]], selfadjoint=True)


def gaussian_grid_problem(m, seed, x_max=4.0, n=201, scale=1.0, well=0.0,
                          h=None):
    """Deterministic compact Hermitian grid potential for oracle tests."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(0.0, x_max, n)
    vals = np.zeros((n, m, m), dtype=complex)
    for _ in range(2):
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        herm = 0.5 * (a + a.conj().T) * scale
        c = rng.uniform(0.2 * x_max, 0.6 * x_max)
        s = rng.uniform(0.4, 0.9)
        vals += np.exp(-((xs - c) / s) ** 2)[:, None, None] * herm
    if well:
        vals -= well * np.exp(-(xs / (0.4 * x_max)) ** 2)[:, None, None] * np.eye(m)
    pot = PotentialSpec(m=m, kind="grid", x_max=x_max, x=xs, values=vals)
    hm = np.zeros((m, m)) if h is None else np.asarray(h)
    return Problem(m=m, q=pot, h=hm, selfadjoint=True)
