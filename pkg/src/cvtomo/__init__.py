"""Continuous-variable quantum-state tomography from homodyne data.

Modules
-------
fock     Fock-basis wavefunctions, density matrices, marginals, Wigner functions, loss.
states   Reference states (coherent, squeezed, cats, photon-added/subtracted, ...).
sampler  Monte Carlo homodyne data.
radon    Filtered back-projection to a Wigner grid.
pattern  Pattern-function density-matrix sampling.
maxlik   Iterative maximum-likelihood reconstruction and bootstrap errors.
spatial  Parity-based Wigner scans of transverse spatial modes.
"""

from .errors import (
    ClippingError,
    DomainError,
    GridError,
    IllConditionedError,
    InputFormatError,
    SingularDataError,
    TomographyError,
    TruncationError,
    UnsupportedOrderError,
)
from .fock import (
    DensityMatrix,
    GridSpec,
    QuadratureData,
    QuadratureSample,
    WignerGrid,
    bernoulli_loss,
    fidelity,
    fock_wavefunction,
    marginal,
    quadrature_overlap,
    wigner,
    wigner_convolve_loss,
)
from .sampler import AcquisitionPlan, effective_efficiency, sample
from .states import StateSpec, build, kitten_fidelity_check

__version__ = "0.1.0"

__all__ = [
    "AcquisitionPlan",
    "ClippingError",
    "DensityMatrix",
    "DomainError",
    "GridError",
    "GridSpec",
    "IllConditionedError",
    "InputFormatError",
    "QuadratureData",
    "QuadratureSample",
    "SingularDataError",
    "StateSpec",
    "TomographyError",
    "TruncationError",
    "UnsupportedOrderError",
    "WignerGrid",
    "bernoulli_loss",
    "build",
    "effective_efficiency",
    "fidelity",
    "fock_wavefunction",
    "kitten_fidelity_check",
    "marginal",
    "quadrature_overlap",
    "sample",
    "wigner",
    "wigner_convolve_loss",
]
