"""Anomaly plans and sigma-calibrated injection.

A plan is a tuple of insertions sampled against a concrete base series; every
random quantity (indices, directions, ratios, resolved offsets) is fixed at
plan time, so apply_plan(base, plan) is deterministic and explanations can
quote exactly what was applied.

Point anomalies are additive: values[t] = base[t] + offset with
offset = +/- lambda * sigma. The planner flips a sampled direction when it
would land inside the detectability floor (3 sigma of the base median for
global points, 2 sigma of the local window for local points); the recorded
direction is always the applied one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .generator import (
    BaseSeries,
    SeasonalitySpec,
    render_seasonality,
    sample_seasonality_spec,
    seasonal_value,
    seasonality_from_dict,
    seasonality_to_dict,
)

log = logging.getLogger(__name__)

CATEGORIES = ("global_point", "local_point", "seasonality", "trend", "shape")

ANOMALY_KINDS = (
    "global_point",
    "local_point",
    "seasonality_amplitude",
    "seasonality_period",
    "trend_change",
    "trend_break",
    "shape_change",
    "shape_break",
)

_KIND_CATEGORY = {
    "global_point": "global_point",
    "local_point": "local_point",
    "seasonality_amplitude": "seasonality",
    "seasonality_period": "seasonality",
    "trend_change": "trend",
    "trend_break": "trend",
    "shape_change": "shape",
    "shape_break": "shape",
}

POINT_COUNT_RANGE = (1, 6)
GLOBAL_LAMBDA_RANGE = (3.0, 20.0)
LOCAL_CONTEXT_RANGE = (10, 50)
LOCAL_LAMBDA_RANGE = (2.0, 5.0)
RATIO_LARGER_RANGE = (1.5, 3.0)
RATIO_SMALLER_RANGE = (0.25, 0.75)
TREND_LAMBDA_RANGE = (1.5, 5.0)
TREND_CHANGE_START = (0.2, 0.8)
TREND_BREAK_SPAN = (0.05, 0.2)
PATTERN_START = (0.2, 0.6)
PATTERN_SPAN = (0.2, 0.4)

GLOBAL_FLOOR_SIGMA = 3.0
LOCAL_FLOOR_SIGMA = 2.0
_WINDOW_SIGMA_EPS = 1e-9


def category_of(kind: str) -> str:
    return _KIND_CATEGORY[kind]


@dataclass(frozen=True)
class AnomalyInsertion:
    """One applied anomaly. Ranges are half-open [start, end).

    Point anomalies are singletons (end == start + 1). `magnitude` holds the
    sampled lambda or ratio; `offset` the resolved signed addend in value
    units for point and trend kinds.
    """

    kind: str
    start: int
    end: int
    direction: str = ""
    magnitude: float = 0.0
    offset: float = 0.0
    context: int = 0
    replacement: SeasonalitySpec | None = None

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.kind!r}")
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad insertion range [{self.start}, {self.end})")

    @property
    def category(self) -> str:
        return _KIND_CATEGORY[self.kind]

    @property
    def is_point(self) -> bool:
        return self.kind in ("global_point", "local_point")


@dataclass(frozen=True)
class AnomalyPlan:
    length: int
    insertions: tuple[AnomalyInsertion, ...] = ()

    def __post_init__(self):
        for ins in self.insertions:
            if ins.end > self.length:
                raise ValueError("insertion range exceeds plan length")

    @property
    def pattern_ranges(self) -> list[tuple[int, int]]:
        return [(i.start, i.end) for i in self.insertions if not i.is_point]

    @property
    def categories(self) -> tuple[str, ...]:
        seen = []
        for ins in self.insertions:
            if ins.category not in seen:
                seen.append(ins.category)
        return tuple(seen)


@dataclass
class LabeledSeries:
    values: np.ndarray
    labels: np.ndarray
    types: list[str]
    spec: object
    plan: AnomalyPlan

    def anomaly_indices(self) -> list[int]:
        return [int(i) for i in np.nonzero(self.labels)[0]]


def _pick_direction(rng: np.random.Generator) -> int:
    return 1 if rng.random() < 0.5 else -1


def _plan_global_points(rng, base: BaseSeries, count: int, lam: float,
                        forbidden: set[int]) -> list[AnomalyInsertion]:
    values = base.values
    sigma = float(np.std(values))
    med = float(np.median(values))
    allowed = np.array([t for t in range(len(values)) if t not in forbidden])
    if allowed.size == 0:
        log.warning("no free indices left for global point anomalies")
        return []
    count = min(count, allowed.size)
    picked = np.sort(rng.choice(allowed, size=count, replace=False))
    out = []
    for t in picked:
        t = int(t)
        sign = _pick_direction(rng)
        offset = sign * lam * sigma
        # keep the sampled direction only if it clears the 3-sigma floor
        if abs(values[t] + offset - med) < GLOBAL_FLOOR_SIGMA * sigma:
            sign, offset = -sign, -offset
        out.append(AnomalyInsertion(
            kind="global_point", start=t, end=t + 1,
            direction="spike" if sign > 0 else "dip",
            magnitude=lam, offset=offset,
        ))
    return out


def _plan_local_points(rng, base: BaseSeries, count: int, context: int, lam: float,
                       forbidden: set[int]) -> list[AnomalyInsertion]:
    values = base.values
    n = len(values)
    sigma_base = float(np.std(values))
    allowed = np.array([t for t in range(n) if t not in forbidden])
    if allowed.size == 0:
        log.warning("no free indices left for local point anomalies")
        return []
    count = min(count, allowed.size)
    picked = np.sort(rng.choice(allowed, size=count, replace=False))
    out = []
    for t in picked:
        t = int(t)
        window = values[max(0, t - context):min(n, t + context + 1)]
        mu_w = float(np.mean(window))
        sigma_w = float(np.std(window))
        if sigma_w < _WINDOW_SIGMA_EPS:
            sigma_w = max(1e-3 * sigma_base, _WINDOW_SIGMA_EPS)
        sign = _pick_direction(rng)
        offset = sign * lam * sigma_w
        if abs(values[t] + offset - mu_w) < LOCAL_FLOOR_SIGMA * sigma_w:
            sign, offset = -sign, -offset
        out.append(AnomalyInsertion(
            kind="local_point", start=t, end=t + 1,
            direction="spike" if sign > 0 else "dip",
            magnitude=lam, offset=offset, context=context,
        ))
    return out


def _sample_span(rng, length: int, start_range, span_range) -> tuple[int, int]:
    start = int(np.floor(rng.uniform(*start_range) * length))
    span = max(2, int(np.floor(rng.uniform(*span_range) * length)))
    end = min(start + span, length)
    if end - start < 2:
        end = min(start + 2, length)
    return start, end


def _plan_seasonality(rng, base: BaseSeries, variant: str | None = None) -> AnomalyInsertion:
    if base.spec.seasonality.kind == "none":
        raise ValueError("seasonality anomalies need a seasonal base")
    if variant is None:
        variant = "amplitude" if rng.random() < 0.5 else "period"
    if variant not in ("amplitude", "period"):
        raise ValueError(f"unknown seasonality variant {variant!r}")
    start, end = _sample_span(rng, base.spec.length, PATTERN_START, PATTERN_SPAN)
    bigger = rng.random() < 0.5
    ratio = float(rng.uniform(*(RATIO_LARGER_RANGE if bigger else RATIO_SMALLER_RANGE)))
    if variant == "amplitude":
        direction = "larger" if bigger else "smaller"
        kind = "seasonality_amplitude"
    else:
        direction = "longer" if bigger else "shorter"
        kind = "seasonality_period"
    return AnomalyInsertion(kind=kind, start=start, end=end,
                            direction=direction, magnitude=ratio)


def _plan_trend(rng, base: BaseSeries, variant: str | None = None) -> AnomalyInsertion:
    if variant is None:
        variant = "change" if rng.random() < 0.5 else "break"
    if variant not in ("change", "break"):
        raise ValueError(f"unknown trend variant {variant!r}")
    length = base.spec.length
    sigma = float(np.std(base.values))
    lam = float(rng.uniform(*TREND_LAMBDA_RANGE))
    sign = _pick_direction(rng)
    start = int(np.floor(rng.uniform(*TREND_CHANGE_START) * length))
    if variant == "change":
        end = length
        kind = "trend_change"
    else:
        span = max(2, int(np.floor(rng.uniform(*TREND_BREAK_SPAN) * length)))
        end = min(start + span, length)
        kind = "trend_break"
    return AnomalyInsertion(
        kind=kind, start=start, end=end,
        direction="increase" if sign > 0 else "decrease",
        magnitude=lam, offset=sign * lam * sigma,
    )


def _plan_shape(rng, base: BaseSeries, variant: str | None = None) -> AnomalyInsertion:
    if variant is None:
        variant = "change" if rng.random() < 0.5 else "break"
    if variant not in ("change", "break"):
        raise ValueError(f"unknown shape variant {variant!r}")
    length = base.spec.length
    base_kind = base.spec.seasonality.kind
    candidates = [k for k in ("single_sine", "square_sine", "ifft") if k != base_kind]
    new_kind = candidates[int(rng.choice(len(candidates)))]
    replacement = sample_seasonality_spec(rng, kind=new_kind)
    if variant == "change":
        start = int(np.floor(rng.uniform(*PATTERN_START) * length))
        return AnomalyInsertion(kind="shape_change", start=start, end=length,
                                replacement=replacement)
    start, end = _sample_span(rng, length, PATTERN_START, PATTERN_SPAN)
    return AnomalyInsertion(kind="shape_break", start=start, end=end,
                            replacement=replacement)


def _overlaps(a: AnomalyInsertion, b: AnomalyInsertion) -> bool:
    return a.start < b.end and b.start < a.end


def sample_anomaly_plan(rng: np.random.Generator, base: BaseSeries,
                        categories=None, max_redraws: int = 100) -> AnomalyPlan:
    """Draw an anomaly plan against a rendered base.

    Default: 1-3 distinct categories of the five. `categories` forces a
    specific set (e.g. a single category for type-pure evaluation data).
    Pattern ranges from different insertions are kept disjoint; a candidate is
    redrawn up to `max_redraws` times and the insertion is dropped if no
    disjoint placement is found. Point anomalies never land inside a pattern
    range.
    """
    length = base.spec.length
    if categories is None:
        k = int(rng.integers(1, 4))
        idx = rng.choice(len(CATEGORIES), size=k, replace=False)
        chosen = [CATEGORIES[i] for i in sorted(int(i) for i in idx)]
    else:
        bad = [c for c in categories if c not in CATEGORIES]
        if bad:
            raise ValueError(f"unknown anomaly categories: {bad}")
        chosen = [c for c in CATEGORIES if c in set(categories)]

    planners = {"seasonality": _plan_seasonality, "trend": _plan_trend, "shape": _plan_shape}
    pattern_ins: list[AnomalyInsertion] = []
    for cat in (c for c in chosen if c in planners):
        accepted = None
        for _ in range(max_redraws):
            cand = planners[cat](rng, base)
            if all(not _overlaps(cand, other) for other in pattern_ins):
                accepted = cand
                break
        if accepted is None:
            log.debug("dropping %s insertion: no disjoint range in %d draws", cat, max_redraws)
            continue
        pattern_ins.append(accepted)

    forbidden: set[int] = set()
    for ins in pattern_ins:
        forbidden.update(range(ins.start, ins.end))

    point_ins: list[AnomalyInsertion] = []
    for cat in (c for c in chosen if c in ("global_point", "local_point")):
        count = int(rng.integers(POINT_COUNT_RANGE[0], POINT_COUNT_RANGE[1] + 1))
        count = min(count, max(1, length // 4))
        if cat == "global_point":
            lam = float(rng.uniform(*GLOBAL_LAMBDA_RANGE))
            new = _plan_global_points(rng, base, count, lam, forbidden)
        else:
            context = int(rng.integers(LOCAL_CONTEXT_RANGE[0], LOCAL_CONTEXT_RANGE[1] + 1))
            lam = float(rng.uniform(*LOCAL_LAMBDA_RANGE))
            new = _plan_local_points(rng, base, count, context, lam, forbidden)
        point_ins.extend(new)
        forbidden.update(i.start for i in new)

    rank = {c: i for i, c in enumerate(CATEGORIES)}
    ordered = sorted(point_ins + pattern_ins, key=lambda i: (rank[i.category], i.start))
    return AnomalyPlan(length=length, insertions=tuple(ordered))


def apply_plan(base: BaseSeries, plan: AnomalyPlan) -> LabeledSeries:
    """Apply a plan to its base. Deterministic: no randomness at apply time."""
    if plan.length != base.spec.length:
        raise ValueError("plan length does not match the base series")
    values = base.values.astype(float).copy()
    labels = np.zeros(plan.length, dtype=np.int8)
    types = ["none"] * plan.length
    seasonal = None

    def _seasonal():
        nonlocal seasonal
        if seasonal is None:
            seasonal = render_seasonality(base.spec.seasonality, plan.length)
        return seasonal

    for ins in plan.insertions:
        s, e = ins.start, ins.end
        if ins.is_point:
            values[s] = base.values[s] + ins.offset
        elif ins.kind == "seasonality_amplitude":
            values[s:e] += (ins.magnitude - 1.0) * _seasonal()[s:e]
        elif ins.kind == "seasonality_period":
            # time warp: period scaled by `magnitude`, value-continuous at s
            warped_t = s + (np.arange(s, e) - s) / ins.magnitude
            warped = seasonal_value(base.spec.seasonality, warped_t, plan.length)
            values[s:e] += warped - _seasonal()[s:e]
        elif ins.kind in ("trend_change", "trend_break"):
            values[s:e] += ins.offset
        elif ins.kind in ("shape_change", "shape_break"):
            repl = seasonal_value(ins.replacement, np.arange(s, e), plan.length)
            values[s:e] += repl - _seasonal()[s:e]
        labels[s:e] = 1
        for t in range(s, e):
            types[t] = ins.kind
    return LabeledSeries(values=values, labels=labels, types=types,
                         spec=base.spec, plan=plan)


def _single_category_plan(base: BaseSeries, insertions) -> AnomalyPlan:
    ordered = tuple(sorted(insertions, key=lambda i: i.start))
    return AnomalyPlan(length=base.spec.length, insertions=ordered)


def inject_global_points(base: BaseSeries, count: int, lam: float,
                         rng: np.random.Generator) -> LabeledSeries:
    """Inject `count` global point anomalies of magnitude lam*sigma(base)."""
    length = base.spec.length
    if not 1 <= count <= POINT_COUNT_RANGE[1]:
        raise ValueError(f"count must be in [1, {POINT_COUNT_RANGE[1]}]")
    if count > length / 4:
        raise ValueError("count must not exceed a quarter of the series length")
    if not GLOBAL_LAMBDA_RANGE[0] <= lam <= GLOBAL_LAMBDA_RANGE[1]:
        raise ValueError(f"lambda must be in {GLOBAL_LAMBDA_RANGE}")
    ins = _plan_global_points(rng, base, count, lam, set())
    return apply_plan(base, _single_category_plan(base, ins))


def inject_local_points(base: BaseSeries, count: int, context: int, lam: float,
                        rng: np.random.Generator) -> LabeledSeries:
    length = base.spec.length
    if not 1 <= count <= POINT_COUNT_RANGE[1]:
        raise ValueError(f"count must be in [1, {POINT_COUNT_RANGE[1]}]")
    if count > length / 4:
        raise ValueError("count must not exceed a quarter of the series length")
    if not LOCAL_CONTEXT_RANGE[0] <= context <= LOCAL_CONTEXT_RANGE[1]:
        raise ValueError(f"context must be in {LOCAL_CONTEXT_RANGE}")
    if not LOCAL_LAMBDA_RANGE[0] <= lam <= LOCAL_LAMBDA_RANGE[1]:
        raise ValueError(f"lambda must be in {LOCAL_LAMBDA_RANGE}")
    ins = _plan_local_points(rng, base, count, context, lam, set())
    return apply_plan(base, _single_category_plan(base, ins))


def inject_seasonality_anomaly(base: BaseSeries, variant: str,
                               rng: np.random.Generator) -> LabeledSeries:
    ins = _plan_seasonality(rng, base, variant)
    return apply_plan(base, _single_category_plan(base, [ins]))


def inject_trend_anomaly(base: BaseSeries, variant: str,
                         rng: np.random.Generator) -> LabeledSeries:
    ins = _plan_trend(rng, base, variant)
    return apply_plan(base, _single_category_plan(base, [ins]))


def inject_shape_anomaly(base: BaseSeries, variant: str,
                         rng: np.random.Generator) -> LabeledSeries:
    ins = _plan_shape(rng, base, variant)
    return apply_plan(base, _single_category_plan(base, [ins]))


def insertion_to_dict(ins: AnomalyInsertion) -> dict:
    d = {
        "kind": ins.kind,
        "start": ins.start,
        "end": ins.end,
        "direction": ins.direction,
        "magnitude": ins.magnitude,
        "offset": ins.offset,
        "context": ins.context,
    }
    if ins.replacement is not None:
        d["replacement"] = seasonality_to_dict(ins.replacement)
    return d


def insertion_from_dict(d: dict) -> AnomalyInsertion:
    repl = d.get("replacement")
    return AnomalyInsertion(
        kind=d["kind"],
        start=int(d["start"]),
        end=int(d["end"]),
        direction=d.get("direction", ""),
        magnitude=float(d.get("magnitude", 0.0)),
        offset=float(d.get("offset", 0.0)),
        context=int(d.get("context", 0)),
        replacement=seasonality_from_dict(repl) if repl else None,
    )


def plan_to_dict(plan: AnomalyPlan) -> dict:
    return {
        "length": plan.length,
        "insertions": [insertion_to_dict(i) for i in plan.insertions],
    }


def plan_from_dict(d: dict) -> AnomalyPlan:
    return AnomalyPlan(
        length=int(d["length"]),
        insertions=tuple(insertion_from_dict(i) for i in d.get("insertions", ())),
    )
