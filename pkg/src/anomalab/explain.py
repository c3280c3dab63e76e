"""Template explanations for labeled series.

Base text covers trend, seasonality, and noise; anomaly text adds one clause
per anomaly (point insertions of one category merge into a single clause).
Index mentions are 0-based and always fall inside the plan's ranges: range
templates quote the last anomalous index, not the exclusive bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .anomalies import AnomalyInsertion, AnomalyPlan, LabeledSeries
from .generator import BaseSeriesSpec, SeasonalitySpec, TrendSpec, trend_gradient
from . import llm as llm_mod

log = logging.getLogger(__name__)

NO_ANOMALY_TEXT = "There is no obvious anomaly in this time series"
NOISE_TEXT = "The time series has normal distributed noises with mean as 0 and variance as 1."
NO_SEASONALITY_TEXT = "No seasonality observed in this time series."

REWRITE_PROMPT = (
    "Rewrite the following description of a time series in fluent natural language. "
    "Keep every index and numeric value exactly as given, and do not add or remove "
    "any facts.\n\nDescription: {text}"
)


def _fmt_num(x: float) -> str:
    """Two-decimal display with trailing zeros trimmed: 2.0 -> '2', 0.45 -> '0.45'."""
    return f"{round(float(x), 2):.2f}".rstrip("0").rstrip(".")


def _fmt_positions(indices) -> str:
    return "[" + ", ".join(str(int(i)) for i in indices) + "]"


def _points_per_period(length: int, frequency: float) -> int:
    return max(1, round(length / frequency))


def describe_trend(spec: TrendSpec, length: int) -> str | None:
    """Trend sentence, or None for kind none (no sentence is emitted)."""
    if spec.kind == "none":
        return None
    if spec.kind == "linear":
        if spec.slope >= 0:
            return "The time series is going with an increasing trend."
        return "The time series is going with a decreasing trend."
    grads = trend_gradient(spec, np.arange(length) / float(length))
    if grads.min() > 0:
        return "This time series shows increasing polynomial trend."
    if grads.max() < 0:
        return "This time series shows decreasing polynomial trend."
    return "This time series shows polynomial trend."


def describe_seasonality(spec: SeasonalitySpec, length: int) -> str:
    if spec.kind == "none":
        return NO_SEASONALITY_TEXT
    if spec.kind == "single_sine":
        return (
            "This time series includes sine-wave like seasonal patterns, which include "
            f"{_fmt_num(spec.frequency)} periods with each last for approximately every "
            f"{_points_per_period(length, spec.frequency)} points."
        )
    if spec.kind == "square_sine":
        clauses = []
        for k in range(spec.harmonics):
            freq = (2 * k + 1) * spec.frequency
            clauses.append(
                f" include {_fmt_num(freq)} periods with each last for approximately "
                f"every {_points_per_period(length, freq)} points"
            )
        return (
            "This time series includes sine-wave like seasonal patterns, which"
            + ",".join(clauses) + "."
        )
    if spec.kind == "ifft":
        freqs = ", ".join(str(b) for b in spec.bins)
        return (
            "The time series appears to contain signals that can be effectively analyzed "
            f"using the Fourier Transform, likely featuring prominent frequencies at {freqs}."
        )
    raise ValueError(f"unknown seasonality kind {spec.kind!r}")


def describe_base(spec: BaseSeriesSpec) -> str:
    parts = []
    trend_text = describe_trend(spec.trend, spec.length)
    if trend_text:
        parts.append(trend_text)
    parts.append(describe_seasonality(spec.seasonality, spec.length))
    parts.append(NOISE_TEXT)
    return " ".join(parts)


def _describe_points(group: list[AnomalyInsertion]) -> str:
    category = group[0].category
    positions = [i.start for i in group]
    spikes = [i.start for i in group if i.direction == "spike"]
    dips = [i.start for i in group if i.direction == "dip"]
    if category == "global_point":
        head = (
            "There are some point-based global anomalies in the time series, "
            f"the positions are {_fmt_positions(positions)}"
        )
        if not dips:
            return head + " with significant spikes compared to the rest of the time series."
        if not spikes:
            return head + " with significant dips compared to the rest of the time series."
        return head + (
            " with significant spikes and dips, where there are spikes in positions "
            f"{_fmt_positions(spikes)} and dips in positions {_fmt_positions(dips)}."
        )
    head = (
        "There are some point-based local anomalies in the time series, with significant "
        "outlier values compared to their surrounding values, the positions are "
        f"{_fmt_positions(positions)}"
    )
    if not dips:
        return head + " with significant spikes."
    if not spikes:
        return head + " with significant dips."
    return head + (
        " with significant spikes and dips, where there are spikes in positions "
        f"{_fmt_positions(spikes)} and dips in positions {_fmt_positions(dips)}."
    )


def _describe_pattern(ins: AnomalyInsertion, length: int) -> str:
    start = ins.start
    last = ins.end - 1  # inclusive last anomalous index
    if ins.kind == "seasonality_amplitude":
        if ins.direction == "larger":
            return (
                "We can observe the amplitude of the time series changes to larger values "
                f"between indexes {start} to {last}, where the values change to about "
                f"{_fmt_num(ins.magnitude)} times about the original values."
            )
        return (
            "We can observe the amplitude of the time series changes to smaller values "
            f"between indexes {start} to {last}, where the values change to about "
            f"{_fmt_num(ins.magnitude)} of the original values."
        )
    if ins.kind == "seasonality_period":
        word = "longer" if ins.direction == "longer" else "shorter"
        return (
            f"We can observe the seasonality period change between indexes {start} and "
            f"{last}, where the period changes to a {word} period."
        )
    if ins.kind == "trend_change":
        verb = "increases" if ins.direction == "increase" else "decreases"
        return (
            f"We can observe a change point at index {start} where the value {verb} by "
            f"{_fmt_num(abs(ins.offset))}."
        )
    if ins.kind == "trend_break":
        if ins.direction == "increase":
            return (
                f"There is a significant value increase since index {start} and the values "
                f"drop back to the original trend since index {last}."
            )
        return (
            f"There is a significant value decrease since index {start} and the values "
            f"increase back to the original trend since index {last}."
        )
    if ins.kind == "shape_change":
        desc = describe_seasonality(ins.replacement, length).removesuffix(".")
        return (
            f"There shows the base pattern of the time series change since the index "
            f"{start}, where the time series changed to {desc}."
        )
    if ins.kind == "shape_break":
        desc = describe_seasonality(ins.replacement, length).removesuffix(".")
        return (
            f"There are base patterns changes between the index {start} and the {last}, "
            f"where during that time, we can observe the time series as {desc}."
        )
    raise ValueError(f"unknown pattern kind {ins.kind!r}")


def describe_anomalies(plan: AnomalyPlan, length: int) -> str:
    if not plan.insertions:
        return NO_ANOMALY_TEXT
    parts = []
    done_point_categories = set()
    for ins in plan.insertions:
        if ins.is_point:
            if ins.category in done_point_categories:
                continue
            group = [i for i in plan.insertions if i.category == ins.category]
            parts.append(_describe_points(group))
            done_point_categories.add(ins.category)
        else:
            parts.append(_describe_pattern(ins, length))
    return " ".join(parts)


@dataclass(frozen=True)
class ExplanationBundle:
    base_text: str
    anomaly_text: str
    combined_text: str
    rewritten_text: str | None = None


def build_bundle(labeled: LabeledSeries) -> ExplanationBundle:
    base_text = describe_base(labeled.spec)
    anomaly_text = describe_anomalies(labeled.plan, labeled.spec.length)
    return ExplanationBundle(
        base_text=base_text,
        anomaly_text=anomaly_text,
        combined_text=base_text + " " + anomaly_text,
    )


def rewrite_via_llm(bundle: ExplanationBundle, config: "llm_mod.LlmConfig",
                    client: "llm_mod.LlmClient | None" = None) -> ExplanationBundle:
    """Ask an LLM endpoint to rephrase the combined text.

    Returns a new bundle with rewritten_text set; on endpoint failure the
    bundle comes back unchanged and a warning is logged.
    """
    if not bundle.combined_text:
        raise ValueError("cannot rewrite an empty explanation")
    if client is None:
        client = llm_mod.LlmClient(config)
    result = client.complete(REWRITE_PROMPT.format(text=bundle.combined_text))
    if result.text is None or not result.text.strip():
        log.warning("explanation rewrite failed after %d attempts", result.attempts)
        return bundle
    return replace(bundle, rewritten_text=result.text.strip())
