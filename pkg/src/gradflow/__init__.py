"""Energy-stable spectral time integrators for gradient flows."""

__version__ = "0.1.0"

from .factors import AffineFactor, FactorSpec, QuadraticCoeffs
from .models import ModelSpec, NonlinearTerm, build_model, energy_original
from .relaxation import RelaxationInputs, choose_relaxation_bdf2, choose_relaxation_cn, relax_R
from .schemes import (
    EnergyLawError,
    SchemeError,
    SchemeState,
    StepReport,
    advance,
    initial_state,
)
from .spectral import (
    Field,
    FourierMultiplier,
    GridSpec,
    apply_multiplier,
    inner_product,
    make_field,
    make_grid,
    solve_diagonal,
)

__all__ = [
    "__version__",
    "AffineFactor", "FactorSpec", "QuadraticCoeffs",
    "ModelSpec", "NonlinearTerm", "build_model", "energy_original",
    "RelaxationInputs", "choose_relaxation_bdf2", "choose_relaxation_cn", "relax_R",
    "EnergyLawError", "SchemeError", "SchemeState", "StepReport",
    "advance", "initial_state",
    "Field", "FourierMultiplier", "GridSpec",
    "apply_multiplier", "inner_product", "make_field", "make_grid", "solve_diagonal",
]
