"""Exception and warning types shared across the package."""


class MslspecError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


class ZeroLambda(MslspecError):
    """lambda = 0 requested where the branch point is excluded."""


class IntegratorFailure(MslspecError):
    """Adaptive step control could not meet the requested tolerance."""


class NearSingularU(MslspecError):
    """u(rho) is numerically singular (lambda too close to an eigenvalue
    or spectral singularity)."""


class NotSimplePole(MslspecError):
    """Contour moments indicate a pole of order >= 2 where a simple pole
    is required."""


class TailTooHeavy(MslspecError):
    """Estimated uncertainty of the density tail model exceeds quad_tol."""


class RestVDiverging(MslspecError):
    """Discrete weighted-density integral keeps growing with rho_max."""


class SingularMainSystem(MslspecError):
    """The assembled main system is singular: the prescribed Weyl matrix is
    not the Weyl matrix of any problem (or the discretization is too
    coarse)."""


class KernelFailure(MslspecError):
    """Kernel evaluation failed (propagated integrator error)."""


class MslspecWarning(UserWarning):
    """Base class for diagnostic warnings."""


class UnstableDirection(MslspecWarning):
    """Requested Jost samples underflow for large Im(rho)*x."""


class ScanTooCoarse(MslspecWarning):
    """Eigenvalue scan grid may have merged nearby roots."""


class NonIntegrableEps(MslspecWarning):
    """Reconstructed correction shows no decay; integrability condition of
    the reconstruction theorem is in doubt."""
