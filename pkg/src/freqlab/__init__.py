"""freqlab: numerical laboratory for frequency functions of rough
divergence-form elliptic equations -div(A grad u) = 0.

Modules
-------
modulus       moduli of continuity, Osgood classification, transform checks
growth        h-transform, continuous growth bounds, discrete cascades
coefficients  coefficient fields: generation, mollification, projections
grids         polar finite-element grids on disks and annuli
solver        Dirichlet solves and the quadratic functionals D, H
frequency     Almgren-type frequency profiles and monotonicity checks
experiments   scenario runners comparing measured margins to the estimates
cli           command line front end (``freqlab``)
"""

__version__ = "0.1.0"

from .modulus import Modulus, OsgoodClass, classify_osgood, select_exponents

__all__ = [
    "Modulus",
    "OsgoodClass",
    "classify_osgood",
    "select_exponents",
    "__version__",
]
