"""Minimum-cardinality sensor selection under estimation-accuracy constraints."""
from .constraints import (AccuracySpec, Constraint, ConstraintEval, Kind, chi2_quantile, eval_constraint,
                          is_feasible, min_eig, point_margins, power_min_eig, thresholds)
from .duality import (DualCertificate, certificate_from_barrier, check_dual_feasible, dual_bound,
                      trace_products)
from .errors import (ConfigError, ConvergenceError, GeometryError, InfeasibleError, NumericalError,
                     OracleRefusal, RoundingError, SelectionError, SingularityError, StallError)
from .rounding import RoundingParams, brute_force_min_card, randomized_round, simple_round
from .scenario import (BearingModel, DomainGrid, EnergyModel, LinearModel, RangeModel, RssModel, Scenario,
                       assemble_atoms, build_grid, fim_block, reference_layout, weighted_fim)
from .solvers import (BarrierParams, ReweightParams, SolverTrace, SubgradientParams, barrier_newton,
                      box_project, projected_subgradient, reweighted_solve)

__version__ = "0.1.0"
