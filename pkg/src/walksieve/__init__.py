"""Random-walk sieve on abelian groups of labelings.

Labelings of a finite site set with values in Z/c form the group (Z/c)^X.
Random walks on it, driven by Alon-Roichman generator sets sampled per
block, are compared against exact character-sum oracles and against the
large-sieve upper bounds for "no target structure" events.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .blocks import (
    BlockSystem,
    GeneratorSystem,
    build_generator_system,
    custom_block_system,
    kappa,
    verify_all,
    verify_linear_disjointness,
    verify_nice_image,
    verify_nice_lifting,
)
from .bounds import BoundReport, SieveParams, compute_eta, sieve_bound
from .errors import (
    CapacityError,
    InvariantViolation,
    NiceImageFailure,
    ParameterError,
    StructuralError,
    WalkSieveError,
)
from .instances import (
    build_instance,
    make_ap_instance,
    make_coloring_instance,
    make_grid_box_instance,
    make_grid_instance,
    theta_density,
)
from .kernels import BACKEND
from .labeling import Block, GroundSet, Labeling
from .spectral import AbelianGroup, Character, cayley_spectrum, is_delta_expander
from .walk import WalkConfig, exact_block_distribution, exact_survival_probability, simulate, walk

__all__ = [name for name in dir() if not name.startswith("_")]
