"""Conservative finite-volume framework for 1-d hyperbolic conservation laws
with classical WENO5 reconstruction, hypernetwork-predicted reconstruction
weights, and an optional learned interface flux, plus the differentiable
training pipeline behind the learned variants."""

from .grid import BoundaryCondition, Grid, State, make_grid, pad_ghost
from .physics import (
    NonPhysicalState,
    SystemSpec,
    burgers,
    euler,
    shallow_water,
)
from .schemes import (
    ClassicalScheme,
    HyperWeightScheme,
    LearnedFluxScheme,
    LinearWeightScheme,
    make_scheme,
)
from .stepper import (
    RolloutRecord,
    StepDiverged,
    conservation_remainder,
    mse_and_order,
    plan_steps,
    refinement_orders,
    rollout,
    ssp_rk3_step,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition",
    "Grid",
    "State",
    "make_grid",
    "pad_ghost",
    "SystemSpec",
    "burgers",
    "shallow_water",
    "euler",
    "NonPhysicalState",
    "ClassicalScheme",
    "LinearWeightScheme",
    "HyperWeightScheme",
    "LearnedFluxScheme",
    "make_scheme",
    "rollout",
    "ssp_rk3_step",
    "plan_steps",
    "RolloutRecord",
    "StepDiverged",
    "conservation_remainder",
    "mse_and_order",
    "refinement_orders",
    "__version__",
]
