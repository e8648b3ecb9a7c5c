"""Order-N asymptotic factorization of perturbed matrix functions on the line
whose base matrix has an unstable set of partial indices."""

from .errors import (ArgumentJump, NearSingular, NearZero, NoLimit, NotSolvable,
                     NoUnstablePair, OrderExceeded, PolicyConflict,
                     QuadratureNotConverged, TooCloseToAxis, WHFactorError)
from .funcspace import (BoundaryFunction, GridSpec, MatrixFunction, combine,
                        constant, eval, eval_matrix, invert_at,
                        limit_at_infinity, sup_norm, DEFAULT_GRID, PROBE_GRID)
from .cauchy import (HalfPlaneFunction, QuadratureSpec, DEFAULT_QUAD,
                     boundary_values, clear_caches, decaying_split_anchors,
                     integral, moment, omega, plemelj_split, weighted_integral)
from .indices import (ConditionCounts, PartialIndices, build_lambda,
                      count_conditions, free_entries, is_stable, winding_number)
from .factorizer import (AsymptoticFactorization, BaseFactorization,
                         ConstantPolicy, FactorizationStep, SolvabilityReport,
                         assemble, check_solvability, factorize, next_rhs,
                         reduce_rhs, remainder, remainder_at_infinity,
                         solve_step, MATCH_INFINITY_POLICY, ZERO_POLICY)
from .gallery import (GalleryEntry, GALLERY_NAMES, example_solvable,
                      example_unsolvable, gk_diagonal, gk_singular,
                      oracle_first_step, singular_perturbation, step1_constants,
                      unsolvable_cross_residual)

__version__ = "0.1.0"
