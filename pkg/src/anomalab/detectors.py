"""Classic baseline detectors: z-score, matrix profile, forecast residuals.

All detectors are pure functions from a value sequence to a sorted list of
flagged indices. Degenerate inputs (zero variance, empty residual pools)
never raise; they log a warning and fall back to a conservative result.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

DETECTOR_KINDS = (
    "global_zscore",
    "local_zscore",
    "matrix_profile",
    "moving_average_residual",
    "seasonal_naive_residual",
)

FORECASTERS = ("moving_average", "seasonal_naive")

MIN_PERIOD = 4
# distances below this are numerical noise, not discords
_PROFILE_EPS = 1e-6
_ZNORM_EPS = 1e-9
_RESIDUAL_SIGMA_FLOOR = 1e-9


@dataclass(frozen=True)
class PeriodEstimate:
    window: int
    reliable: bool


def estimate_period_fft(values) -> PeriodEstimate:
    """Dominant-period window from the FFT magnitude spectrum.

    Window is T over the strongest non-DC bin, clamped to [4, T/2]. The
    estimate is reliable when that peak stands at least four times above
    the median non-DC magnitude, which separates genuine seasonality from
    a flat noise spectrum.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 8:
        raise ValueError("need at least 8 points to estimate a period")
    mags = np.abs(np.fft.rfft(x - x.mean()))[1:]
    if mags.size == 0 or not np.any(mags > 0):
        return PeriodEstimate(window=MIN_PERIOD, reliable=False)
    peak = int(np.argmax(mags))
    window = int(round(n / (peak + 1)))
    window = max(MIN_PERIOD, min(window, n // 2))
    median = float(np.median(mags))
    peak_mag = float(mags[peak])
    reliable = peak_mag > 0 and (median == 0 or peak_mag >= 4 * median)
    return PeriodEstimate(window=window, reliable=reliable)


def detect_global_zscore(values, threshold: float = 3.0) -> list[int]:
    """Indices where |value - mean| strictly exceeds threshold sigmas."""
    x = np.asarray(values, dtype=float)
    if x.size < 3:
        raise ValueError("need at least 3 points")
    sigma = float(x.std())
    if sigma == 0:
        log.warning("global z-score: zero variance, nothing to flag")
        return []
    flags = np.abs(x - x.mean()) > threshold * sigma
    return [int(i) for i in np.flatnonzero(flags)]


def detect_local_zscore(values, context: int, threshold: float = 3.0) -> list[int]:
    """Z-score against a +-context window around each point, point excluded.

    Windows are clipped at the series bounds; a window with zero variance
    skips its point rather than flagging it.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if context < 1:
        raise ValueError("context must be at least 1")
    if 2 * context + 1 > n:
        raise ValueError("context window exceeds series length")
    out = []
    for t in range(n):
        lo, hi = max(0, t - context), min(n, t + context + 1)
        window = np.concatenate([x[lo:t], x[t + 1:hi]])
        sigma = float(window.std())
        if sigma == 0:
            continue
        if abs(x[t] - window.mean()) > threshold * sigma:
            out.append(t)
    return out


def _znorm_subsequences(x: np.ndarray, m: int) -> np.ndarray:
    windows = np.lib.stride_tricks.sliding_window_view(x, m)
    means = windows.mean(axis=1, keepdims=True)
    stds = windows.std(axis=1, keepdims=True)
    stds = np.maximum(stds, _ZNORM_EPS)
    return (windows - means) / stds


def matrix_profile(values, m: int) -> np.ndarray:
    """Z-normalized nearest-neighbor distance per subsequence.

    All-pairs computation; fine at desk scale. Trivial matches within
    ceil(m/2) of each position are excluded.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if m < 4:
        raise ValueError("subsequence length must be at least 4")
    if n < 2 * m:
        raise ValueError("series must be at least twice the subsequence length")
    z = _znorm_subsequences(x, m)
    sq = np.einsum("ij,ij->i", z, z)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (z @ z.T)
    np.maximum(d2, 0.0, out=d2)
    k = z.shape[0]
    excl = math.ceil(m / 2)
    idx = np.arange(k)
    d2[np.abs(idx[:, None] - idx[None, :]) < excl] = np.inf
    return np.sqrt(d2.min(axis=1))


def detect_matrix_profile(values, m: int | None = None,
                          discord_quantile: float = 0.99) -> list[int]:
    """Flag every point of subsequences whose profile value is a discord.

    Discords are profile entries strictly above the given quantile of the
    profile (floored at a small epsilon so a self-similar series with a
    numerically noisy all-zero profile yields nothing).
    """
    x = np.asarray(values, dtype=float)
    if not 0 < discord_quantile < 1:
        raise ValueError("discord_quantile must be in (0, 1)")
    if m is None:
        m = estimate_period_fft(x).window
    profile = matrix_profile(x, m)
    cutoff = max(float(np.quantile(profile, discord_quantile)), _PROFILE_EPS)
    flagged = np.flatnonzero(profile > cutoff)
    points: set[int] = set()
    for i in flagged:
        points.update(range(int(i), int(i) + m))
    return sorted(points)


def _one_step_forecast(x: np.ndarray, t: int, forecaster: str, w: int) -> float:
    if forecaster == "moving_average":
        return float(x[t - w:t].mean())
    return float(x[t - w])  # seasonal_naive: repeat one period back


def detect_forecast_residual(values, forecaster: str = "moving_average",
                             train_fraction: float = 0.5,
                             threshold: float = 3.0,
                             window: int | None = None) -> list[int]:
    """Flag test points whose one-step residual is extreme vs train residuals.

    The first floor(train_fraction*T) points calibrate the residual mean and
    sigma; only indices at or past the split can be flagged. Forecasts use
    the true observed history (one-step-ahead), window defaults to the FFT
    period of the train split. A zero train sigma gets a tiny floor so a
    perfectly predictable series flags nothing.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if forecaster not in FORECASTERS:
        raise ValueError(f"unknown forecaster {forecaster!r}")
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    split = int(train_fraction * n)
    if split < 2 or split >= n:
        raise ValueError("train split is empty or leaves no test data")
    if window is None:
        if split < 8:
            raise ValueError("train split too short for an auto window")
        window = estimate_period_fft(x[:split]).window
    if window < 1:
        raise ValueError("window must be positive")
    if window >= split:
        raise ValueError("window must fit inside the train split")

    residual = np.array([
        x[t] - _one_step_forecast(x, t, forecaster, window)
        for t in range(window, n)
    ])
    train_res = residual[:split - window]
    mu = float(train_res.mean())
    sigma = float(train_res.std())
    if sigma == 0:
        log.warning("forecast residual: zero train sigma, flooring threshold")
        sigma = _RESIDUAL_SIGMA_FLOOR
    test_res = residual[split - window:]
    flags = np.abs(test_res - mu) > threshold * sigma
    return [int(i) + split for i in np.flatnonzero(flags)]


@dataclass(frozen=True)
class DetectorConfig:
    """Uniform configuration for run_detector dispatch.

    window doubles as the local z-score context and the seasonal-naive
    period; None means derive it from the FFT period estimate.
    """

    kind: str
    window: int | None = None
    threshold: float = 3.0
    train_fraction: float = 0.5
    discord_quantile: float = 0.99

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if self.window is not None and self.window < 2:
            raise ValueError("explicit window must be at least 2")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        if not 0 < self.discord_quantile < 1:
            raise ValueError("discord_quantile must be in (0, 1)")


def run_detector(values, config: DetectorConfig) -> list[int]:
    x = np.asarray(values, dtype=float)
    if config.kind == "global_zscore":
        return detect_global_zscore(x, config.threshold)
    if config.kind == "local_zscore":
        context = config.window
        if context is None:
            context = estimate_period_fft(x).window
            context = min(context, (x.size - 1) // 2)
        return detect_local_zscore(x, context, config.threshold)
    if config.kind == "matrix_profile":
        return detect_matrix_profile(x, config.window, config.discord_quantile)
    forecaster = ("moving_average" if config.kind == "moving_average_residual"
                  else "seasonal_naive")
    return detect_forecast_residual(
        x, forecaster, config.train_fraction, config.threshold, config.window,
    )
