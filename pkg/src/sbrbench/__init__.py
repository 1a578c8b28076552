"""Benchmarking toolkit for session-based next-item recommendation.

Instance-based and embedding baselines, prefix-expansion evaluation,
characteristic-driven split generation, random hyperparameter search, a
decision-tree algorithm selector, and a subprocess bridge for external
predictors.
"""

from .baselines import AssociationRules, SequentialRules, SPop, VsKnn
from .dataset import (
    ColumnSchema,
    DatasetStats,
    Event,
    Session,
    SessionDataset,
    compute_stats,
    filter_test_items,
    ingest_events,
    preprocess,
    sessionize,
)
from .embeddings import Item2Vec, SessionMF, bpr_max_loss
from .eval import evaluate, expand_prefixes, measure_resources, score_event
from .kernels import BACKEND as KERNEL_BACKEND
from .ranking import Ranking, rank
from .splits import SplitSpec, generate_split, temporal_holdout

__version__ = "0.1.0"
