"""looplab: a desk-scale numerical laboratory for loops in C^d.

The package represents loops through truncated Fourier series, equips them
with fractional Sobolev norms and a spectral polarization, and builds on top
of that: a radial Hamiltonian class with its action functional, explicit
inverses for the APS boundary value problem on short cylinders, a Picard
solver for the perturbed Cauchy-Riemann equation, an upward gradient-flow
integrator, and the cycle geometry (sphere and box families) whose
intersection theory detects periodic orbits.
"""

from .loops import Loop, SpectralConvention, CONVENTION
from .hamiltonian import HamiltonianModel, Splitting
from .cylinder import CylinderMap, BoundaryData
from .solver import SolveResult, FlowTrace
from .cycles import OrbitResult

__version__ = "0.1.0"

__all__ = [
    "Loop",
    "SpectralConvention",
    "CONVENTION",
    "HamiltonianModel",
    "Splitting",
    "CylinderMap",
    "BoundaryData",
    "SolveResult",
    "FlowTrace",
    "OrbitResult",
    "__version__",
]
