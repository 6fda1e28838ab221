"""Survival tree ensembles with greedy sub-ensemble selection.

Grows random-survival-forest-style trees on right-censored data, ranks
them by out-of-bag concordance error, and greedily keeps the top-ranked
trees whose addition strictly lowers the integrated Brier score on a
held-out validation sample.
"""

from .dataset import (
    CATEGORICAL,
    INTEGER,
    NUMERIC,
    DatasetConfig,
    Feature,
    FeatureSchema,
    SplitIndices,
    SurvivalDataset,
    bootstrap,
    parse_csv,
    serialize_csv,
    split,
)
from .errors import (
    ConcordanceUndefinedError,
    ConfigError,
    DegenerateSplitError,
    GrowthError,
    MetricUndefinedError,
    OsteError,
    ParseError,
    SelectionError,
    ValidationError,
)
from .estimators import StepFunction, censoring_km, kaplan_meier, nelson_aalen
from .forest import (
    GrowParams,
    ImportanceReport,
    SurvivalForest,
    ensemble_curve,
    grow_forest,
    load_forest,
    oob_error,
    permutation_importance,
    save_forest,
)
from .harness import (
    ExperimentConfig,
    RunReport,
    SimSpec,
    load_dataset,
    run_experiment,
    simulate_dataset,
    sweep,
)
from .metrics import (
    BrierCurve,
    ConcordanceResult,
    brier_score,
    c_index,
    integrated_brier_score,
)
from .selection import OsteSelection, rank_trees, select
from .tree import SplitRule, SurvivalTree, grow_tree, logrank_statistic

__version__ = "0.1.0"
