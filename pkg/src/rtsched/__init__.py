"""Scheduling stochastic real-time multi-task jobs on unreliable workers."""

from .engine import QueueState, Requirement, SimMetrics, is_stable_proxy, simulate, step
from .model import FrameState, JobVector, NetworkModel, generate_frame, make_rng, sample_task_completions
from .region import check_fulfillment, sweep_grid_2d, sweep_symmetric
from .scheduler import Decision, Weight, compute_weights, solve_exact, solve_greedy
from .verify import SetPackingInstance, audit_ratio, reduce_set_packing

__version__ = "0.1.0"
