"""BSDEs on a binomial Wiener lattice and their representation as stochastic games."""
from .affine_rep import (FenchelDual, GridConfig, big_F, fenchel_dual, fenchel_transform,
                         inf_representation_eval, maxmin_scan, minmax_eval)
from .bsde import (ControlPolicy, GammaField, SolutionField, dual_expectation,
                   dual_expectation_paths, gamma_path, phi_expectation, solve_bsde,
                   solve_linear_bsde)
from .errors import (BudgetExceeded, ComparisonWarning, GridError, LatticeError,
                     ObstacleViolation, PositivityViolation)
from .evaluations import (EvaluationOperator, check_axioms, check_domination,
                          dual_representation, evaluate)
from .game import (ConcaveValue, GameResult, concave_inf_value, game_dpp_value,
                   open_loop_bruteforce, saddle_violation)
from .generators import (BSDEProblem, GeneratorSpec, catalog, estimate_lipschitz,
                         obstacle_fields, terminal_field)
from .lattice import Lattice, build
from .reflected import (linear_optimal_stopping, mixed_game_dpp, skorokhod_sum,
                        solve_rbsde, stopped_payoff)

__version__ = "0.1.0"
