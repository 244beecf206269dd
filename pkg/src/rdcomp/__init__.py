"""Finite element simulation of N-species reaction-diffusion competition
with harvesting or stocking: decoupled first- and second-order time
steppers, manufactured-solution verification, and stability diagnostics.
"""

from .model import SpeciesParams, SystemSpec, stability_report
from .schemes import average_density, run
from .verify import convergence_study, make_case

__version__ = "0.1.0"

__all__ = [
    "SpeciesParams",
    "SystemSpec",
    "average_density",
    "convergence_study",
    "make_case",
    "run",
    "stability_report",
    "__version__",
]
