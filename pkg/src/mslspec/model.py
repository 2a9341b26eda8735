"""Domain types: potentials, problems, spectral points, branch conventions.

All values are plain complex numpy arrays made read-only on construction, so
instances can be shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .errors import ZeroLambda

BUILTIN_KINDS = ("zero", "diagonal-exponential", "bargmann")


def square_matrix(entries, dim: int | None = None) -> np.ndarray:
    """Validate *entries* as an m x m complex matrix; returns a read-only array.

    Rejects non-square shapes and non-finite entries.
    """
    a = np.array(entries, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    a.flags.writeable = False
    return a


def is_hermitian(a: np.ndarray, tol: float = DEFAULT.tol_herm) -> bool:
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def mat_norm(a: np.ndarray) -> float:
    """Induced max-row-sum norm (the norm used for all reported estimates)."""
    return float(np.max(np.sum(np.abs(a), axis=-1)))


@dataclass(frozen=True)
class PotentialSpec:
    """Matrix potential on [0, x_max], treated as exactly zero past x_max.

    kind "grid": piecewise-linear interpolation of ``values`` over strictly
    increasing ``x`` nodes starting at 0.  Builtin kinds evaluate a closed
    form; see ``BUILTIN_KINDS``.
    """

    m: int
    kind: str
    x_max: float
    x: np.ndarray | None = None            # (k,) grid nodes
    values: np.ndarray | None = None       # (k, m, m) node values
    params: tuple = field(default=())      # builtin parameters

    def __post_init__(self):
        if self.kind == "grid":
            # copy before freezing: never make the caller's arrays read-only
            xs = np.array(self.x, dtype=float)
            vals = np.array(self.values, dtype=complex)
            if xs.ndim != 1 or xs.size < 1 or xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
                raise ValueError("grid nodes must be strictly increasing and start at 0")
            if vals.shape != (xs.size, self.m, self.m):
                raise ValueError(f"values shape {vals.shape} != {(xs.size, self.m, self.m)}")
            if not np.all(np.isfinite(vals)):
                raise ValueError("potential values must be finite")
            xs.flags.writeable = False
            vals.flags.writeable = False
            object.__setattr__(self, "x", xs)
            object.__setattr__(self, "values", vals)
        elif self.kind in BUILTIN_KINDS:
            object.__setattr__(self, "params", tuple(float(p) for p in self.params))
            if self.kind == "bargmann" and self.m != 1:
                raise ValueError("bargmann builtin is scalar (m = 1)")
            if self.kind == "diagonal-exponential" and len(self.params) != 2 * self.m:
                # params: (c_1..c_m, a_1..a_m) for Q_jj(x) = c_j * exp(-a_j x)
                raise ValueError("diagonal-exponential needs 2*m parameters")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.x_max < 0:
            raise ValueError("x_max must be >= 0")

    def l1_norm(self, n: int = 4001) -> float:
        """Trapezoid estimate of the integral of ||Q|| over the support."""
        if self.x_max == 0:
            return 0.0
        xs = np.linspace(0.0, self.x_max, n)
        vals = evaluate_potential_many(self, xs)
        norms = np.max(np.sum(np.abs(vals), axis=-1), axis=-1)
        return float(np.trapezoid(norms, xs))

    def first_moment(self, n: int = 4001) -> float:
        """Trapezoid estimate of the integral of x*||Q(x)||."""
        if self.x_max == 0:
            return 0.0
        xs = np.linspace(0.0, self.x_max, n)
        vals = evaluate_potential_many(self, xs)
        norms = np.max(np.sum(np.abs(vals), axis=-1), axis=-1)
        return float(np.trapezoid(xs * norms, xs))


def zero_potential(m: int) -> PotentialSpec:
    return PotentialSpec(m=m, kind="zero", x_max=0.0)


def _bargmann_q(x, kappa: float, alpha: float):
    """Scalar potential produced by adding one bound state -kappa^2 with
    weight alpha to the zero problem: Q = -2 (log W)'' with
    W = 1 + alpha*(x/2 + sinh(2 kappa x)/(4 kappa))."""
    x = np.asarray(x, dtype=float)
    w = 1.0 + alpha * (x / 2.0 + np.sinh(2.0 * kappa * x) / (4.0 * kappa))
    wp = alpha * np.cosh(kappa * x) ** 2
    wpp = alpha * kappa * np.sinh(2.0 * kappa * x)
    return -2.0 * (wpp * w - wp**2) / w**2


def evaluate_potential(spec: PotentialSpec, x: float) -> np.ndarray:
    """Q(x) for a single x >= 0."""
    return evaluate_potential_many(spec, np.array([float(x)]))[0]


def evaluate_potential_many(spec: PotentialSpec, xs: np.ndarray) -> np.ndarray:
    """Q at an array of points; returns (len(xs), m, m)."""
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0):
        raise ValueError("potential evaluation requires x >= 0")
    m = spec.m
    out = np.zeros((xs.size, m, m), dtype=complex)
    inside = xs <= spec.x_max
    if spec.kind == "zero" or not np.any(inside):
        return out
    xi = xs[inside]
    if spec.kind == "grid":
        grid = spec.x
        vals = spec.values
        idx = np.clip(np.searchsorted(grid, xi, side="right") - 1, 0, grid.size - 2) \
            if grid.size > 1 else np.zeros(xi.size, dtype=int)
        if grid.size == 1:
            out[inside] = vals[0]
        else:
            x0 = grid[idx]
            x1 = grid[idx + 1]
            t = np.clip((xi - x0) / (x1 - x0), 0.0, 1.0)
            # hold the last node value between grid[-1] and x_max
            t[xi >= grid[-1]] = 1.0
            out[inside] = (1 - t)[:, None, None] * vals[idx] + t[:, None, None] * vals[idx + 1]
    elif spec.kind == "diagonal-exponential":
        c = np.array(spec.params[:m])
        a = np.array(spec.params[m:])
        diag = c[None, :] * np.exp(-a[None, :] * xi[:, None])
        out[inside] = np.eye(m)[None] * diag[:, :, None]
    elif spec.kind == "bargmann":
        kappa, alpha = spec.params
        out[inside, 0, 0] = _bargmann_q(xi, kappa, alpha)
    return out


@dataclass(frozen=True)
class Problem:
    """Boundary value problem: -Y'' + Q(x) Y = lambda Y with Y'(0) = h Y(0)."""

    m: int
    q: PotentialSpec
    h: np.ndarray
    selfadjoint: bool = False

    def __post_init__(self):
        object.__setattr__(self, "h", square_matrix(self.h, self.m))
        if self.q.m != self.m:
            raise ValueError("potential dimension mismatch")
        if self.selfadjoint:
            if not is_hermitian(self.h):
                raise ValueError("self-adjoint problem needs Hermitian h")
            if self.q.kind == "grid":
                for k, v in enumerate(self.q.values):
                    if not is_hermitian(v):
                        raise ValueError(f"self-adjoint problem needs Hermitian Q (node {k})")
            elif self.q.kind == "diagonal-exponential":
                if any(abs(complex(c).imag) > DEFAULT.tol_herm for c in self.q.params[: self.m]):
                    raise ValueError("self-adjoint diagonal-exponential needs real amplitudes")

    @property
    def x_max(self) -> float:
        return self.q.x_max


@dataclass(frozen=True)
class SpectralPoint:
    """lambda together with rho = sqrt(lambda), Im rho >= 0.

    For lambda > 0 the two-sided cut is resolved by ``side``:
    "+" means rho = +sqrt(lambda), "-" means rho = -sqrt(lambda).
    """

    lam: complex
    rho: complex
    side: str = "auto"


def lambda_to_rho(lam: complex, side: str = "auto", allow_zero: bool = False) -> SpectralPoint:
    """Map lambda to rho on the closed upper half-plane.

    The branch cut sits on the positive real axis; ``side`` picks the limit
    from above ("+") or below ("-") for real lambda > 0.
    """
    lam = complex(lam)
    if lam == 0:
        if not allow_zero:
            raise ZeroLambda("lambda = 0 is the excluded branch point")
        return SpectralPoint(0j, 0j, side)
    if side not in ("+", "-", "auto"):
        raise ValueError(f"side must be '+', '-' or 'auto', got {side!r}")
    r = abs(lam)
    theta = np.angle(lam)  # (-pi, pi]
    if theta < 0:
        theta += 2 * np.pi  # cut along lambda > 0, rho in upper half-plane
    rho = np.sqrt(r) * np.exp(0.5j * theta)
    if lam.imag == 0 and lam.real > 0:
        rho = complex(np.sqrt(lam.real))
        if side == "-":
            rho = -rho
    rho = complex(rho)
    if rho.imag < 0:  # roundoff guard: rho must stay in the closed upper half-plane
        rho = complex(rho.real, 0.0)
    return SpectralPoint(lam, rho, side)


def rho_to_lambda(rho: complex) -> complex:
    return complex(rho) ** 2
