"""Finite-N character expansion toolkit for cut-off Hermitian matrix models.

Submodules
----------
tableaux      Young shapes, l-sequences, Casimir values, shape enumeration
symfun        Schur polynomials, dimensions, Cauchy sums with tail bounds
sampling      reproducible random streams, Haar unitaries, GUE matrices
spherical     spherical (HCIZ) integrals: exact, Monte Carlo, bounds
partition     the cut-off matrix model: Monte Carlo and character expansion
ratefun       bounded-Lipschitz distance, log energy and shape rate functionals
equilibrium   density-capped equilibrium problem and quantile discretization
shape_gibbs   Metropolis sampler on Young shapes
yangmills     Yang-Mills heat kernel on the cylinder at real arguments
cli           command-line front end
"""

__version__ = "0.1.0"

from .errors import CharexpError, ComputationError  # noqa: E402
from .measures import DiscreteMeasure, GridMeasure  # noqa: E402
from .sampling import MCEstimate, RngStream  # noqa: E402
from .tableaux import YoungShape, casimir_c2, enumerate_shapes, l_sequence  # noqa: E402
from .symfun import cauchy_truncated, dim_shape, schur_bialternant, schur_branching  # noqa: E402
from .spherical import SpectrumSet, hciz_exact, hciz_mc, schur_via_hciz  # noqa: E402
from .partition import ModelSpec, partition_character_ratio, partition_mc_ratio  # noqa: E402
from .ratefun import EnsembleSpec, bl_distance, log_energy, rate_H  # noqa: E402
from .equilibrium import Grid, minimize_over_L, quantile_discretize  # noqa: E402
from .shape_gibbs import metropolis_sample  # noqa: E402
from .yangmills import ym_free_energy_trend, ym_partition  # noqa: E402

__all__ = [
    "CharexpError",
    "ComputationError",
    "DiscreteMeasure",
    "EnsembleSpec",
    "Grid",
    "GridMeasure",
    "MCEstimate",
    "ModelSpec",
    "RngStream",
    "SpectrumSet",
    "YoungShape",
    "bl_distance",
    "casimir_c2",
    "cauchy_truncated",
    "dim_shape",
    "enumerate_shapes",
    "hciz_exact",
    "hciz_mc",
    "l_sequence",
    "log_energy",
    "metropolis_sample",
    "minimize_over_L",
    "partition_character_ratio",
    "partition_mc_ratio",
    "quantile_discretize",
    "rate_H",
    "schur_bialternant",
    "schur_branching",
    "schur_via_hciz",
    "ym_free_energy_trend",
    "ym_partition",
]
