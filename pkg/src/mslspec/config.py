"""Numeric knobs shared by the solvers.

Every knob can be overridden by an environment variable ``MSLSPEC_<NAME>``
(upper-cased field name); CLI flags take precedence over the environment.
Reports embed the config so runs are reproducible.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields


@dataclass(frozen=True)
class RunConfig:
    # ODE integration
    ode_tol: float = 1e-10          # rtol = atol of the embedded RK pair
    max_steps: int = 2_000_000

    # Hermitian / PSD tests
    tol_herm: float = 1e-10
    psd_tol: float = 1e-9

    # u-inversion and main-system solvability
    cond_max: float = 1e12

    # eigenvalue search (rho = i*tau)
    tau_min: float = 1e-2
    tau_max: float = 10.0
    scan_steps: int = 400
    tau_tol: float = 1e-10

    # residue extraction
    n_res: int = 64

    # spectral density quadrature (Gauss-Legendre in rho)
    n_quad: int = 200
    rho_max: float = 20.0
    quad_tol: float = 1e-5

    # kernel evaluation
    delta_quot: float = 0.05        # |lambda-mu| below which the quotient form is avoided
    max_order: int = 4              # cap on lambda/mu derivative order

    # inverse solvers
    coincide_tol: float = 1e-9      # target/model poles closer than this are merged
    restv_ratio_max: float = 2.0
    sp_growth_max: float = 3.0      # allowed growth of ||rho*M|| between rho->0 samples

    # misc
    jost_tol: float = 1e-8
    parallel: int = 1
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "seed":
                if v < 0:
                    raise ValueError("seed must be >= 0")
            elif isinstance(v, (int, float)) and v <= 0:
                raise ValueError(f"config knob {f.name!r} must be positive, got {v!r}")

    def as_dict(self) -> dict:
        return asdict(self)

    def replace(self, **kw) -> "RunConfig":
        d = self.as_dict()
        d.update(kw)
        return RunConfig(**d)


ENV_PREFIX = "MSLSPEC_"


def config_from_env(base: RunConfig | None = None) -> RunConfig:
    """Apply MSLSPEC_* environment overrides on top of *base*."""
    cfg = base or RunConfig()
    overrides = {}
    for f in fields(RunConfig):
        raw = os.environ.get(ENV_PREFIX + f.name.upper())
        if raw is None:
            continue
        caster = int if f.type in ("int",) or isinstance(getattr(cfg, f.name), int) else float
        overrides[f.name] = caster(raw)
    return cfg.replace(**overrides) if overrides else cfg


DEFAULT = RunConfig()
