"""Prompt assembly: instruction strategies, requirements blocks, shot examples.

Four strategies build the instruction text around a serialized series:
direct, multimodal (adds the visual-reasoning framing, still text-only),
in_context (1-5 worked examples), and chain_of_thought (step scaffold plus
0-5 worked examples). A requirements block (trial or json) is appended to
form the full prompt body.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .anomalies import CATEGORIES, LabeledSeries
from .explain import ExplanationBundle

STRATEGIES = ("direct", "multimodal", "in_context", "chain_of_thought")
REQUIREMENTS_MODES = ("trial", "json")

# legal shot counts per strategy, inclusive
SHOT_RANGES = {
    "direct": (0, 0),
    "multimodal": (0, 0),
    "in_context": (1, 5),
    "chain_of_thought": (0, 5),
}

DEFAULT_PRECISION = 4

GENERAL_INSTRUCTION = (
    "Given a time series with values {values}, consider to identify any "
    "potential anomalies."
)

MULTIMODAL_INSTRUCTION = (
    "Given a time series with values {values}, please think about the visual "
    "representation of this series and evaluate it to identify any anomalies. "
    "This assessment should consider both the numerical data and the visual "
    "information."
)

IN_CONTEXT_PREAMBLE = (
    "Generally, anomalies in time series can be either point-based anomalies "
    "or context-aware anomalies. For example,"
)

COT_KNOWLEDGE = (
    "Here are some basic knowledge about the time series anomalies: "
    "Generally, anomalies in time series can be either point-based anomalies "
    "or context-aware anomalies, where point-based anomalies are points have "
    "significant larger or lower values than other points, context-aware "
    "anomalies could be shifts in trend, or changing in base patterns."
)

COT_STEPS = (
    "Think to solve the problem step by step.",
    "First, try identify whether there are anomalies in the input.",
    "Second, if anomalies are identified, try to get it's index according to "
    "it's position in the list.",
    "Third, explain why those points should be considered as anomalies.",
)

TRIAL_REQUIREMENTS = (
    "If anomalies are present, please indicate: 1) The presence of anomaly "
    "points in this time series. 2) The indices of these anomaly points, and "
    "3) The reasoning behind these points being considered anomalies."
)

JSON_REQUIREMENTS = (
    "Please consider answering the following questions according to your "
    "observation.\n"
    "First, please try to identify the potential anomalies, and provide the "
    "list of the indexes of anomalies, if no anomalies, please return [].\n"
    "Second, if there are anomalies in the time series, please provide a "
    "short explanation of the anomalies.\n"
    "\n"
    "Summarize the answers into two keys:\n"
    "\n"
    "- anomaly: a list of indexes\n"
    "\n"
    "- reason: a string of explanation\n"
    "\n"
    "And format the output as JSON with the two keys.\n"
    "\n"
    "Required: return the JSON only without other information."
)


def serialize_values(values, precision: int = DEFAULT_PRECISION) -> str:
    """Comma-separated fixed-precision decimals, e.g. "1.0, 2.0, 5.0"."""
    if precision < 0:
        raise ValueError("precision must be non-negative")
    out = []
    for v in values:
        f = float(v)
        if not math.isfinite(f):
            raise ValueError(f"non-finite value {v!r} cannot be serialized")
        out.append(f"{f:.{precision}f}")
    if not out:
        raise ValueError("cannot serialize an empty sequence")
    return ", ".join(out)


def parse_values(text: str) -> list[float]:
    """Inverse of serialize_values; tolerates surrounding brackets."""
    body = text.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    parts = [p.strip() for p in body.split(",")]
    if parts == [""]:
        raise ValueError("no values to parse")
    return [float(p) for p in parts]


def format_series_text(values, precision: int = DEFAULT_PRECISION) -> str:
    return "[" + serialize_values(values, precision) + "]"


@dataclass(frozen=True)
class ShotExample:
    """One worked example: a short typed series with its ideal explanation."""

    type_key: str
    anomaly_type: str
    characteristics: str
    series_text: str
    explanation: str
    anomaly_indices: tuple[int, ...] = ()
    values: tuple = ()


DEFAULT_SHOT_LIBRARY: tuple[ShotExample, ...] = (
    ShotExample(
        type_key="global_point",
        anomaly_type="global point anomalies",
        characteristics=(
            "Some points have values far outside the normal range of the "
            "whole series, appearing as sudden spikes or dips."
        ),
        series_text="[1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 5, 1, 2, 1, 2]",
        explanation=(
            "There are some point-based global anomalies in the time series, "
            "the positions are [11] with significant spikes compared to the "
            "rest of the time series."
        ),
        anomaly_indices=(11,),
        values=(1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 5, 1, 2, 1, 2),
    ),
    ShotExample(
        type_key="local_point",
        anomaly_type="local point anomalies",
        characteristics=(
            "Some points clearly deviate from their neighboring values even "
            "though they stay within the normal range of the whole series."
        ),
        series_text="[1, 2, 1, 2, 1, 2, 1, 2, 1, 3, 3, 2, 1, 2, 1, 2]",
        explanation=(
            "There are some point-based local anomalies in the time series, "
            "with significant outlier values compared to their surrounding "
            "values, the positions are [9, 10] with significant spikes."
        ),
        anomaly_indices=(9, 10),
        values=(1, 2, 1, 2, 1, 2, 1, 2, 1, 3, 3, 2, 1, 2, 1, 2),
    ),
    ShotExample(
        type_key="seasonality",
        anomaly_type="seasonality anomalies",
        characteristics=(
            "The repeating pattern temporarily changes its amplitude or its "
            "period over a range of the series."
        ),
        series_text=(
            "[1, 3, 5, 3, 1, 3, 5, 3, 1, 3, 5, 3, 1, 3, 5, 3, 1, 5, 1, 5, "
            "1, 3, 5, 3]"
        ),
        explanation=(
            "We can observe the seasonality period change between indexes 17 "
            "and 19, where the period changes to a shorter period."
        ),
        anomaly_indices=(17, 18, 19),
        values=(1, 3, 5, 3, 1, 3, 5, 3, 1, 3, 5, 3, 1, 3, 5, 3, 1, 5, 1, 5,
                1, 3, 5, 3),
    ),
    ShotExample(
        type_key="trend",
        anomaly_type="trend anomalies",
        characteristics=(
            "The series suddenly shifts to higher or lower values, moving "
            "away from its previous trend."
        ),
        series_text="[1, 2, 1, 2, 1, 2, 1, 2, 1, 6, 7, 8]",
        explanation=(
            "We can observe a change point at index 9 where the value "
            "increases by 5."
        ),
        anomaly_indices=(9, 10, 11),
        values=(1, 2, 1, 2, 1, 2, 1, 2, 1, 6, 7, 8),
    ),
    ShotExample(
        type_key="shape",
        anomaly_type="shape anomalies",
        characteristics=(
            "The repeating base pattern temporarily changes to a different "
            "shape over a range of the series."
        ),
        series_text=(
            "[1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 2, 2, "
            "1, 2, 3, 4]"
        ),
        explanation=(
            "There are base patterns changes between the index 17 and the "
            "19, where during that time, we can observe the time series as "
            "flat constant values."
        ),
        anomaly_indices=(17, 18, 19),
        values=(1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 2, 2,
                1, 2, 3, 4),
    ),
)


def select_shot_examples(target_type: str | None, n: int, rng,
                         library=DEFAULT_SHOT_LIBRARY) -> list[ShotExample]:
    """Pick n examples of mutually distinct types, none matching the target.

    A None target (an anomaly-free series) excludes nothing.
    """
    if target_type is not None and target_type not in CATEGORIES:
        raise ValueError(f"unknown anomaly category {target_type!r}")
    if n < 0:
        raise ValueError("shot count must be non-negative")
    by_type: dict[str, list[ShotExample]] = {}
    for shot in library:
        by_type.setdefault(shot.type_key, []).append(shot)
    extra = sorted(k for k in by_type if k not in CATEGORIES)
    pool = [t for t in (*CATEGORIES, *extra) if t in by_type and t != target_type]
    if n > len(pool):
        raise ValueError(
            f"need {n} distinct non-{target_type} types, library has {len(pool)}"
        )
    if n == 0:
        return []
    picked = rng.choice(len(pool), size=n, replace=False)
    shots = []
    for i in picked:
        entries = by_type[pool[int(i)]]
        shots.append(entries[int(rng.integers(len(entries)))])
    return shots


def _check_shot_count(strategy: str, count: int):
    lo, hi = SHOT_RANGES[strategy]
    if not lo <= count <= hi:
        raise ValueError(
            f"strategy {strategy!r} takes {lo}-{hi} shots, got {count}"
        )


def _in_context_block(i: int, shot: ShotExample) -> str:
    return (
        f"Example {i}: {shot.anomaly_type}\n"
        f"Characteristics: {shot.characteristics}\n"
        f"Time Series: {shot.series_text}\n"
        f"Explanation: {shot.explanation}"
    )


def _chain_of_thought_block(i: int, shot: ShotExample) -> str:
    reason = shot.explanation.rstrip().removesuffix(".")
    indices = list(shot.anomaly_indices)
    return (
        f"Example {i}: For time series {shot.series_text}\n"
        f"First, there are {shot.anomaly_type} in this time series.\n"
        f"Second, the values at positions {indices} are anomalies.\n"
        f"The reason is {reason}."
    )


def build_instruction(strategy: str, series_text: str, shots=()) -> str:
    """Assemble the instruction text for one strategy around a series."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not series_text:
        raise ValueError("series_text must be non-empty")
    shots = list(shots)
    _check_shot_count(strategy, len(shots))
    if strategy == "direct":
        return GENERAL_INSTRUCTION.format(values=series_text)
    if strategy == "multimodal":
        return MULTIMODAL_INSTRUCTION.format(values=series_text)
    base = GENERAL_INSTRUCTION.format(values=series_text)
    if strategy == "in_context":
        parts = [base, IN_CONTEXT_PREAMBLE]
        parts += [_in_context_block(i, s) for i, s in enumerate(shots, 1)]
        return "\n\n".join(parts)
    parts = [base, COT_KNOWLEDGE, *COT_STEPS]
    parts += [_chain_of_thought_block(i, s) for i, s in enumerate(shots, 1)]
    return "\n\n".join(parts)


def build_requirements(mode: str) -> str:
    if mode == "trial":
        return TRIAL_REQUIREMENTS
    if mode == "json":
        return JSON_REQUIREMENTS
    raise ValueError(f"unknown requirements mode {mode!r}")


@dataclass(frozen=True)
class PromptBundle:
    strategy: str
    shots: int
    requirements_mode: str
    body: str


def build_prompt(strategy: str, values_text: str, mode: str = "json",
                 shots=()) -> PromptBundle:
    """Full prompt: instruction plus requirements block.

    The serialized target values must appear exactly once in the body; a
    shot example whose series text collides with the target violates that.
    """
    shots = list(shots)
    instruction = build_instruction(strategy, values_text, shots)
    body = instruction + "\n\n" + build_requirements(mode)
    if body.count(values_text) != 1:
        raise ValueError("target values must appear exactly once in the prompt")
    return PromptBundle(
        strategy=strategy, shots=len(shots), requirements_mode=mode, body=body,
    )


def prompt_for_series(values, strategy: str = "direct", mode: str = "json",
                      shots=(), precision: int = DEFAULT_PRECISION) -> PromptBundle:
    return build_prompt(strategy, format_series_text(values, precision),
                        mode=mode, shots=shots)


@dataclass(frozen=True)
class InstructionSample:
    """One instruction-tuning record; response is the ideal JSON answer."""

    instruction: str
    values_text: str
    requirements: str
    response: str

    @property
    def prompt(self) -> str:
        return self.instruction + "\n\n" + self.requirements

    def to_dict(self) -> dict:
        return {
            "instruction": self.instruction,
            "values_text": self.values_text,
            "requirements": self.requirements,
            "response": self.response,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InstructionSample":
        return cls(
            instruction=d["instruction"],
            values_text=d["values_text"],
            requirements=d["requirements"],
            response=d["response"],
        )


def build_finetune_sample(labeled: LabeledSeries,
                          bundle: ExplanationBundle,
                          precision: int = DEFAULT_PRECISION) -> InstructionSample:
    """Instruction sample from a labeled series and its explanation bundle.

    Uses the general (direct) instruction; the response carries the label
    indices under "anomaly" and the anomaly explanation (rewritten if
    available) under "reason".
    """
    values_text = format_series_text(labeled.values, precision)
    reason = bundle.rewritten_text or bundle.anomaly_text
    indices = [int(i) for i in labeled.anomaly_indices()]
    response = json.dumps({"anomaly": indices, "reason": reason})
    return InstructionSample(
        instruction=build_instruction("direct", values_text),
        values_text=values_text,
        requirements=build_requirements("json"),
        response=response,
    )
