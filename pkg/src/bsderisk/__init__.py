"""Dynamic risk measures driven by BSDEs on a Brownian filtration, with
statistical verification of concentration, transport-type and deviation
inequalities."""

from .bsde import (BsdeSolution, PicardDivergenceError, RiskMeasureHandle,
                   check_kappa_domination, evaluate_risk, solve_entropic,
                   solve_regression)
from .concentration import (deviation_check, dimension_free_check, pde_check,
                            profile)
from .duality import TiltSpec, constant_tilt, dual_gap, penalty, tilt
from .generators import (BoundFunction, GeneratorSpec, PowerFunction,
                         bound_function, cap_generator, conjugate_of_bound,
                         entropic, lipschitz, quadratic, superquadratic)
from .stochastics import (BrownianBatch, PathFunctional, TimeGrid,
                          discretize_path_functional, log_contract, simulate)
from .transport import (DiscreteMeasure, check_t1, kantorovich_rubinstein_gap,
                        kl_divergence, transport_inequality_check,
                        wasserstein1)

__version__ = "0.1.0"
