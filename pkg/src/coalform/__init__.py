"""Multi-robot coalition formation: a binary quantum-inspired MOPSO with
NSGA-II / SPEA-II baselines, a locational-constraint CSP, front metrics and
a brute-force oracle."""
from .analysis import CriteriaWeights, Front, brute_force_front, error_ratio, promethee_rank, set_coverage, spacing
from .model import InvalidInputError, Robot, RobotState, Scenario, Task, Thresholds, generate_scenario
from .objectives import Evaluator, Population, constrained_better, dominates, feasibility_degree
from .pipeline import BenchmarkSpec, RunConfig, RunResult, emit_report, run_benchmark, run_pipeline

__version__ = "0.1.0"
