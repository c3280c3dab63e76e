"""Detection scoring: point and windowed precision/recall/F, hallucinations.

Conventions (the empty cases matter for honest averages):
  - pred and truth both empty is a correct "no anomaly" call: P = R = F = 1.
  - pred empty, truth non-empty: (0, 0, 0).
  - pred non-empty, truth empty: precision 0, recall vacuously 1, F 0.
Out-of-range predictions are hallucinations; they are counted per raw
occurrence but dropped (with duplicates) before any P/R/F is computed.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

METRIC_NAMES = (
    "point_precision", "point_recall", "point_f",
    "range_precision", "range_recall", "range_f",
)

DEFAULT_WINDOW = 5


def _f_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def point_prf(pred, truth) -> tuple[float, float, float]:
    pred, truth = set(pred), set(truth)
    if not pred and not truth:
        return 1.0, 1.0, 1.0
    hits = len(pred & truth)
    p = hits / len(pred) if pred else 0.0
    r = hits / len(truth) if truth else 1.0
    return p, r, _f_score(p, r)


def range_prf(pred, truth, window: int) -> tuple[float, float, float]:
    """Existential windowed matching: a hit is any counterpart within window.

    Each side is matched independently (no one-to-one assignment), so
    window=0 reduces exactly to point_prf.
    """
    if window < 0:
        raise ValueError("window must be non-negative")
    pred, truth = set(pred), set(truth)
    if not pred and not truth:
        return 1.0, 1.0, 1.0
    p_hits = sum(1 for p in pred if any(abs(p - g) <= window for g in truth))
    r_hits = sum(1 for g in truth if any(abs(p - g) <= window for p in pred))
    p = p_hits / len(pred) if pred else 0.0
    r = r_hits / len(truth) if truth else 1.0
    return p, r, _f_score(p, r)


def filter_in_range(pred, segment_length: int) -> list[int]:
    """Drop out-of-range indices and duplicates, preserving first-seen order."""
    seen = set()
    out = []
    for p in pred:
        if 0 <= p < segment_length and p not in seen:
            seen.add(p)
            out.append(p)
    return out


@dataclass(frozen=True)
class HallucinationStats:
    """Out-of-range index statistics over the segments that have any."""

    segment_count: int
    counts: tuple[int, ...]
    mean: float | None
    median: float | None

    def to_dict(self) -> dict:
        return {
            "segment_count": self.segment_count,
            "counts": list(self.counts),
            "mean": self.mean,
            "median": self.median,
        }


def _hallucinated_count(pred, segment_length: int) -> int:
    return sum(1 for p in pred if p < 0 or p >= segment_length)


def hallucination_stats(results) -> HallucinationStats:
    """results: iterable of (predicted indices, segment length) pairs.

    Every raw occurrence counts, duplicates included; mean and median are
    over offending segments only and absent when there are none.
    """
    counts = []
    for pred, length in results:
        c = _hallucinated_count(pred, length)
        if c > 0:
            counts.append(c)
    if not counts:
        return HallucinationStats(0, (), None, None)
    return HallucinationStats(
        segment_count=len(counts),
        counts=tuple(counts),
        mean=statistics.fmean(counts),
        median=float(statistics.median(counts)),
    )


@dataclass(frozen=True)
class SegmentScore:
    point_precision: float
    point_recall: float
    point_f: float
    range_precision: float
    range_recall: float
    range_f: float
    hallucinated: int

    def metric(self, name: str) -> float:
        return getattr(self, name)


def score_segment(pred, truth, segment_length: int,
                  window: int = DEFAULT_WINDOW) -> SegmentScore:
    clean = filter_in_range(pred, segment_length)
    truth = set(truth)
    pp, pr, pf = point_prf(clean, truth)
    rp, rr, rf = range_prf(clean, truth, window)
    return SegmentScore(pp, pr, pf, rp, rr, rf,
                        _hallucinated_count(pred, segment_length))


@dataclass(frozen=True)
class StatSummary:
    mean: float
    q25: float
    median: float
    q75: float

    @classmethod
    def from_values(cls, values) -> "StatSummary":
        vals = sorted(float(v) for v in values)
        if not vals:
            raise ValueError("no values to summarize")
        q25, med, q75 = (statistics.quantiles(vals, n=4, method="inclusive")
                         if len(vals) > 1 else (vals[0], vals[0], vals[0]))
        return cls(statistics.fmean(vals), q25, med, q75)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "q25": self.q25,
                "median": self.median, "q75": self.q75}


@dataclass(frozen=True)
class MetricsReport:
    window: int
    segments: tuple[SegmentScore, ...]
    aggregates: dict
    hallucination: HallucinationStats
    filtered: dict | None

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "segment_count": len(self.segments),
            "aggregates": {k: v.to_dict() for k, v in self.aggregates.items()},
            "hallucination": self.hallucination.to_dict(),
            "filtered": dict(self.filtered) if self.filtered is not None else None,
            "segments": [
                {name: s.metric(name) for name in METRIC_NAMES}
                | {"hallucinated": s.hallucinated}
                for s in self.segments
            ],
        }

    def to_csv_rows(self) -> list[list]:
        rows = [["segment", *METRIC_NAMES, "hallucinated"]]
        for i, s in enumerate(self.segments):
            rows.append([i, *(s.metric(name) for name in METRIC_NAMES),
                         s.hallucinated])
        return rows


def aggregate(segments, window: int,
              hallucination: HallucinationStats | None = None) -> MetricsReport:
    """Unweighted per-segment means plus quartiles for each metric.

    The filtered block re-averages over segments free of hallucinations,
    mirroring the "after filtering" report variant; it is None when every
    segment hallucinated.
    """
    segments = tuple(segments)
    if not segments:
        raise ValueError("cannot aggregate zero segments")
    aggregates = {
        name: StatSummary.from_values(s.metric(name) for s in segments)
        for name in METRIC_NAMES
    }
    if hallucination is None:
        hallucination = HallucinationStats(0, (), None, None)
    clean = [s for s in segments if s.hallucinated == 0]
    filtered = None
    if clean:
        filtered = {
            name: statistics.fmean(s.metric(name) for s in clean)
            for name in METRIC_NAMES
        }
        filtered["segment_count"] = len(clean)
    return MetricsReport(
        window=window, segments=segments, aggregates=aggregates,
        hallucination=hallucination, filtered=filtered,
    )


def score_segments(items, window: int = DEFAULT_WINDOW) -> MetricsReport:
    """items: iterable of (pred, truth, segment_length) triples."""
    items = list(items)
    rows = [score_segment(p, t, n, window) for p, t, n in items]
    halluc = hallucination_stats((p, n) for p, _, n in items)
    return aggregate(rows, window=window, hallucination=halluc)
