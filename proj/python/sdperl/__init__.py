"""Reinforcement-learning feature selection for software defect prediction.

Thin wrapper over the compiled core; everything public re-exports from
``sdperl._core``.
"""

from sdperl._core import (  # noqa: F401
    ConfigError,
    DataError,
    FeatureMatrix,
    PheromoneTable,
    auc_score,
    build_embeddings,
    extract_corpus,
    extract_metrics,
    independent_t_test,
    kmeans,
    load_feature_matrix,
    resplit_until_defective,
    run_experiment,
    save_feature_matrix,
    smote_oversample,
    statistical_vectors,
    train_and_evaluate,
)

__all__ = [
    "ConfigError",
    "DataError",
    "FeatureMatrix",
    "PheromoneTable",
    "auc_score",
    "build_embeddings",
    "extract_corpus",
    "extract_metrics",
    "independent_t_test",
    "kmeans",
    "load_feature_matrix",
    "resplit_until_defective",
    "run_experiment",
    "save_feature_matrix",
    "smote_oversample",
    "statistical_vectors",
    "train_and_evaluate",
]
