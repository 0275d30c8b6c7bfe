"""Monte Carlo tree search over prompt sequences for optimization code generation."""

from .benchgen import ProblemSpec, generate_problem, solve_ground_truth
from .gateway import Gateway, LlmRequest, LlmResponse
from .pipeline import Pipeline, SearchOutcome, run_search
from .refine import RefineConfig, refine_loop
from .tree import SearchConfig, SearchTree, uct_value

__version__ = "0.1.0"

__all__ = [
    "Gateway",
    "LlmRequest",
    "LlmResponse",
    "Pipeline",
    "ProblemSpec",
    "RefineConfig",
    "SearchConfig",
    "SearchOutcome",
    "SearchTree",
    "generate_problem",
    "refine_loop",
    "run_search",
    "solve_ground_truth",
    "uct_value",
]
