"""Synthetic time-series anomaly benchmark toolkit.

Generates seasonal/trend/noise series with five families of labeled
anomalies, renders template explanations, builds LLM prompts and datasets,
queries chat endpoints under a bounded retry protocol, runs classic
detectors, and scores everything with point and range metrics.
"""

from .anomalies import (
    ANOMALY_KINDS,
    CATEGORIES,
    AnomalyInsertion,
    AnomalyPlan,
    LabeledSeries,
    apply_plan,
    category_of,
    inject_global_points,
    inject_local_points,
    inject_seasonality_anomaly,
    inject_shape_anomaly,
    inject_trend_anomaly,
    sample_anomaly_plan,
)
from .datasets import (
    DatasetFormatError,
    DatasetManifest,
    build_eval_dataset,
    build_instruction_dataset,
    build_labeled_sample,
    load_benchmark_series,
    median_fft_window,
    segment_series,
    select_top_variable_segments,
)
from .detectors import (
    DETECTOR_KINDS,
    DetectorConfig,
    PeriodEstimate,
    detect_forecast_residual,
    detect_global_zscore,
    detect_local_zscore,
    detect_matrix_profile,
    estimate_period_fft,
    matrix_profile,
    run_detector,
)
from .explain import ExplanationBundle, build_bundle, rewrite_via_llm
from .generator import (
    BaseSeries,
    BaseSeriesSpec,
    NoiseSpec,
    SeasonalitySpec,
    TrendSpec,
    compose_series,
    derive_seed,
    generate_base,
    sample_base_spec,
    sample_seasonality_spec,
    sample_trend_spec,
)
from .llm import (
    ConfigError,
    DetectionResult,
    LlmClient,
    LlmConfig,
    MockLlmServer,
    parse_response,
    query,
)
from .metrics import (
    HallucinationStats,
    MetricsReport,
    filter_in_range,
    hallucination_stats,
    point_prf,
    range_prf,
    score_segment,
    score_segments,
)
from .prompts import (
    DEFAULT_SHOT_LIBRARY,
    InstructionSample,
    PromptBundle,
    ShotExample,
    build_finetune_sample,
    build_instruction,
    build_prompt,
    build_requirements,
    prompt_for_series,
    select_shot_examples,
    serialize_values,
)

__version__ = "0.1.0"

__all__ = [
    "ANOMALY_KINDS",
    "CATEGORIES",
    "DETECTOR_KINDS",
    "AnomalyInsertion",
    "AnomalyPlan",
    "BaseSeries",
    "BaseSeriesSpec",
    "ConfigError",
    "DatasetFormatError",
    "DatasetManifest",
    "DetectionResult",
    "DetectorConfig",
    "ExplanationBundle",
    "HallucinationStats",
    "InstructionSample",
    "LabeledSeries",
    "LlmClient",
    "LlmConfig",
    "MetricsReport",
    "MockLlmServer",
    "NoiseSpec",
    "PeriodEstimate",
    "PromptBundle",
    "SeasonalitySpec",
    "ShotExample",
    "TrendSpec",
    "DEFAULT_SHOT_LIBRARY",
    "apply_plan",
    "build_bundle",
    "build_eval_dataset",
    "build_finetune_sample",
    "build_instruction",
    "build_instruction_dataset",
    "build_labeled_sample",
    "build_prompt",
    "build_requirements",
    "category_of",
    "compose_series",
    "derive_seed",
    "detect_forecast_residual",
    "detect_global_zscore",
    "detect_local_zscore",
    "detect_matrix_profile",
    "estimate_period_fft",
    "filter_in_range",
    "generate_base",
    "hallucination_stats",
    "inject_global_points",
    "inject_local_points",
    "inject_seasonality_anomaly",
    "inject_shape_anomaly",
    "inject_trend_anomaly",
    "load_benchmark_series",
    "matrix_profile",
    "median_fft_window",
    "parse_response",
    "point_prf",
    "prompt_for_series",
    "query",
    "range_prf",
    "rewrite_via_llm",
    "run_detector",
    "sample_anomaly_plan",
    "sample_base_spec",
    "sample_seasonality_spec",
    "sample_trend_spec",
    "score_segment",
    "score_segments",
    "segment_series",
    "select_shot_examples",
    "select_top_variable_segments",
    "serialize_values",
]
