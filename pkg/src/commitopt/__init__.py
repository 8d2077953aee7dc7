"""commitopt: search-based optimization of human-written commit messages.

Pipeline: parse the unified diff, extract injectable software contexts from
the post-change tree, then run a best-first search that folds one context
per step into the message through a chat gateway, scored by a combined
LLM-based and retrieval-based evaluator.
"""

from .contexts import CommitType, ContextItem, ContextKind
from .diffs import ChangedRegion, CodeDiff, FileDiff, Hunk, changed_regions, parse_unified_diff
from .evaluate import (
    EvaluatorWeights,
    MetricScores,
    SimScore,
    combine,
    optimization_score,
    pearson,
)
from .optimize import (
    MessageCandidate,
    OptimizationResult,
    OptimizerConfig,
    optimize,
    optimize_no_search,
    threshold_schedule,
)

__all__ = [
    "ChangedRegion",
    "CodeDiff",
    "CommitType",
    "ContextItem",
    "ContextKind",
    "EvaluatorWeights",
    "FileDiff",
    "Hunk",
    "MessageCandidate",
    "MetricScores",
    "OptimizationResult",
    "OptimizerConfig",
    "SimScore",
    "changed_regions",
    "combine",
    "optimization_score",
    "optimize",
    "optimize_no_search",
    "parse_unified_diff",
    "pearson",
    "threshold_schedule",
]

__version__ = "0.1.0"
