"""Shared test helpers: independent reference implementations and goldens.

The references here deliberately avoid the library's own code paths (plain
quadratic scans, direct distance sums) so tests compare two routes to the
same answer.
"""

from __future__ import annotations

import numpy as np

from anomalab.generator import derive_seed
from anomalab.prompts import (
    REQUIREMENTS_MODES,
    SHOT_RANGES,
    STRATEGIES,
    build_prompt,
    format_series_text,
    select_shot_examples,
)

GOLDEN_SEED = 1234
GOLDEN_TARGET_TYPE = "global_point"
GOLDEN_VALUES = (1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 5, 1, 2, 1, 2)


def reference_prf(pred, truth, window: int):
    """Quadratic-scan windowed precision/recall/F, written from definitions."""
    pred = sorted(set(pred))
    truth = sorted(set(truth))
    if not pred and not truth:
        return (1.0, 1.0, 1.0)
    p_hits = 0
    for p in pred:
        if any(-window <= p - g <= window for g in truth):
            p_hits += 1
    r_hits = 0
    for g in truth:
        if any(-window <= p - g <= window for p in pred):
            r_hits += 1
    precision = p_hits / len(pred) if pred else 0.0
    recall = r_hits / len(truth) if truth else 1.0
    f = 0.0 if precision + recall == 0 else (
        2 * precision * recall / (precision + recall))
    return (precision, recall, f)


def brute_force_profile(values, m: int) -> np.ndarray:
    """Direct per-pair z-normalized euclidean distances, no dot-product trick."""
    x = np.asarray(values, dtype=float)
    n = x.size - m + 1
    subs = []
    for i in range(n):
        w = x[i:i + m]
        sd = max(float(w.std()), 1e-9)
        subs.append((w - w.mean()) / sd)
    excl = -(-m // 2)
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for j in range(n):
            if abs(i - j) < excl:
                continue
            d = float(np.sqrt(((subs[i] - subs[j]) ** 2).sum()))
            if d < best:
                best = d
        out[i] = best
    return out


def golden_prompt_cases():
    """All 26 (strategy, mode, shot-count) prompt bodies with pinned inputs."""
    values_text = format_series_text(GOLDEN_VALUES, precision=1)
    cases = []
    for strategy in STRATEGIES:
        lo, hi = SHOT_RANGES[strategy]
        for mode in REQUIREMENTS_MODES:
            for n in range(lo, hi + 1):
                rng = np.random.default_rng(
                    derive_seed(GOLDEN_SEED, "golden", strategy, mode, n))
                # a 5-shot draw needs all five types, so only an
                # anomaly-free target (no exclusion) can request it
                target = GOLDEN_TARGET_TYPE if n <= 4 else None
                shots = select_shot_examples(target, n, rng)
                bundle = build_prompt(strategy, values_text, mode=mode,
                                      shots=shots)
                cases.append((f"{strategy}_{mode}_{n}shot.txt", bundle.body))
    return cases
