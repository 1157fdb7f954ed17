"""Numerical laboratory for L^p-Legendre transforms, L^p-Mahler integrals and L^p-Santaló points.

Submodules
----------
functions   convex test functions, wrappers and grid-sampled data
integrate   log-domain quadrature of ``∫ e^{p⟨x,y⟩ − c f(x)} dx`` and moments
specfun     modified Bessel functions, ball Mahler integrals, simplex support
transform   the L^p-Legendre transform and tilted measures
mahler      Mahler integrals, closed values, the Laplace-norm identity, scans
santalo     Santaló points by damped Newton
flow        the Ornstein–Uhlenbeck flow and its evolution diagnostics
cli         the ``lpsantalo`` command
"""

__version__ = "0.1.0"

from . import errors, functions, integrate, specfun, transform  # noqa: E402
from . import mahler, santalo, flow  # noqa: E402
from .errors import (  # noqa: E402
    ConvergenceError,
    DegenerateError,
    DimensionError,
    DivergenceError,
    DomainError,
    LpSantaloError,
    UnsupportedError,
)
from .functions import (  # noqa: E402
    FunctionalSimplex,
    GridSampled,
    GridSpec,
    IndicatorBall,
    IndicatorCube,
    IndicatorSimplex,
    L1Norm,
    Quadratic,
    scale,
    tensor,
    translate,
)
from .integrate import QuadratureSpec, volume  # noqa: E402
from .mahler import mahler as mahler_integral  # noqa: E402
from .santalo import santalo_point  # noqa: E402
from .transform import lp_transform  # noqa: E402
from .flow import ou_evolve  # noqa: E402

__all__ = [
    "ConvergenceError",
    "DegenerateError",
    "DimensionError",
    "DivergenceError",
    "DomainError",
    "FunctionalSimplex",
    "GridSampled",
    "GridSpec",
    "IndicatorBall",
    "IndicatorCube",
    "IndicatorSimplex",
    "L1Norm",
    "LpSantaloError",
    "Quadratic",
    "QuadratureSpec",
    "UnsupportedError",
    "errors",
    "flow",
    "functions",
    "integrate",
    "lp_transform",
    "mahler",
    "mahler_integral",
    "ou_evolve",
    "santalo",
    "santalo_point",
    "scale",
    "specfun",
    "tensor",
    "translate",
    "transform",
    "volume",
]
