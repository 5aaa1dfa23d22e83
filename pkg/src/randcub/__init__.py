"""Randomized cubature formulae exact on polynomial spaces.

Nodes are drawn from the measure induced by the Christoffel function of the
chosen space, and the weights come from a weighted least-squares fit.
"""

from .basis import PolynomialFamily, TensorBasis, family_from_config
from .cubature import (
    CubatureRule,
    EstimateRecord,
    cubature_weights,
    epsilon_m,
    epsilon_mn,
    integrate_conditioned,
    integrate_control_variate,
    integrate_ls,
    importance_sampling,
    min_samples,
    min_samples_positive,
    monte_carlo,
    xi,
)
from .index_sets import (
    MultiIndexSet,
    hyperbolic_cross_set,
    index_set_from_config,
    is_downward_closed,
    total_degree_set,
)
from .least_squares import DesignSystem, LeastSquaresFit, build_design, gram_deviation, solve_fit
from .sampling import NodeSample, build_induced_sampler, sample_mu, sample_sigma

__version__ = "0.1.0"
