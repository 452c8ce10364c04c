"""Dynamic k-center clustering over a navigating net."""

from .metric import (EuclideanBackend, MatrixBackend, MetricPoint, aspect_ratio,
                     dist_to_set, distance, pairwise_matrix, read_points, write_points)
from .net import CORES, InvariantReport, NavigatingNet, default_core, verify_invariants
from .afn import QueryStats, afn, afn_stepwise
from .kcenter import (BudgetExceeded, CoverSolution, SolverStats, coverage,
                      enumerate_guesses, euclidean_kcenter, greedy_kcenter, guess_count,
                      loop_length, meb)

__version__ = "0.1.0"
