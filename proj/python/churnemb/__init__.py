"""Churn prediction with semi-supervised edge embeddings on player-game graphs."""

from ._core import (
    ChurnembError,
    ConfigError,
    ContractViolation,
    Dataset,
    DimensionError,
    DivergenceError,
    EmptyDatasetError,
    FeatureSchema,
    LossWeights,
    Model,
    NotFound,
    ParseError,
    RangeError,
    RunConfig,
    SnapshotSeries,
    SplitError,
    SynthConfig,
    SynthResult,
    TrainConfig,
    UndefinedMetricError,
    VocabularyError,
    WalkConfig,
    auc,
    build_examples,
    evaluate,
    generate,
    load_run_config,
    solve_daily_hazard,
    synth_schema,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
