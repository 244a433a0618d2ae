"""Spectral Koopman attention: streaming sufficient statistics, a whitened
Koopman retrieval operator, synthetic recall tasks and numerical bound checks."""

from .config import SkaConfig
from .engine import (EmbeddingScheme, RecurrentState, evaluate, make_scheme, memory_crossover,
                     run_parallel, run_recurrent, state_bytes)
from .errors import SkaError
from .linalg import BACKEND
from .operator import KoopmanOperator, estimate, retrieve_linear, retrieve_ridge, retrieve_ska
from .stats import (SufficientStats, accumulate_masked, accumulate_prefix, chunk_statistics,
                    merge, prefix_statistics)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "EmbeddingScheme", "KoopmanOperator", "RecurrentState", "SkaConfig", "SkaError",
    "SufficientStats", "accumulate_masked", "accumulate_prefix", "chunk_statistics", "estimate",
    "evaluate", "make_scheme", "memory_crossover", "merge", "prefix_statistics",
    "retrieve_linear", "retrieve_ridge", "retrieve_ska", "run_parallel", "run_recurrent",
    "state_bytes",
]
