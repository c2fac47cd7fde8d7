"""Electromigration stress evolution in interconnect trees.

Mesh-based reference solver, closed-form oracles, and a mesh-free
space-time physics-informed neural network for the void-nucleation phase
of electromigration degradation.
"""

from .analytic import (
    integrate_time_transform,
    nucleation_time,
    series_solution_single_wire,
    steady_state,
    stress_integral,
    tree_max_stress,
)
from .fdm import FdmSolution, StabilityError, fdm_solve
from .geometry import (
    InterconnectTree,
    LocateError,
    Segment,
    TreeError,
    build_tree,
    locate,
    unfold,
)
from .physics import (
    MaterialParams,
    ThermalModel,
    arrhenius_diffusion,
    em_driving_force,
    kappa,
    temperature,
)
from .stpinn import (
    CollocationSet,
    ScalingConfig,
    StpinnField,
    StpinnModel,
    load_checkpoint,
    make_model,
    rescale_diffusivity,
    sample_collocation,
    save_checkpoint,
    train,
)
from .optim import TrainingConfig

__version__ = "1.0.0"
