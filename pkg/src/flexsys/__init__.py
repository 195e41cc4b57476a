"""Flexibility measures for adaptive systems, with NAND-circuit evolution as the worked case."""

from .formalism import (INF, AdaptiveSystem, ConfigurationError, CostBudget, Estimate, Task,
                        TaskContext, TaskDistance, TaskHistory, adaptability,
                        average_case_reconfigurability, min_reconfiguration_cost, pareto_dominates,
                        task_diversity, task_richness, total_cost, worst_case_reconfigurability)
from .circuits import (BooleanGoal, CircuitParams, CircuitTopology, GoalFamily, decode, encode,
                       evaluate, fitness, hamming, modular_goal, truth_table)
from .hypercube import HypercubeSystem, hypercube_reference_system
from .evolution import (FG, MVG, CircuitAdaptiveSystem, GAParams, Schedule, run_schedule,
                        run_until_solved, step_generation)
from .config import ExperimentConfig, load_config

__version__ = "0.1.0"
