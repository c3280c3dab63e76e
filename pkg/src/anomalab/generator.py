"""Synthetic base time series: seasonality + trend + noise.

A base series is fully described by a frozen spec. Rendering is deterministic:
``values = seasonal + trend_amplitude * trend + noise_amplitude * eps`` where
``eps ~ N(0, 1)`` comes from the spec's own seed. Frequencies count cycles over
the whole series, so the time axis is normalized to t / length.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

SEASONALITY_KINDS = ("single_sine", "square_sine", "ifft", "none")
TREND_KINDS = ("linear", "polynomial", "none")

# Sampling priors for the default spec sampler. The default sampler never
# emits seasonality "none": every generated base carries a pattern.
SEASONALITY_PROBS = (("single_sine", 0.25), ("square_sine", 0.25), ("ifft", 0.50))
TREND_PROBS = (("linear", 0.30), ("polynomial", 0.10), ("none", 0.60))

AMPLITUDE_RANGE = (1.0, 1000.0)
FREQUENCY_RANGE = (1, 10)
SQUARE_HARMONICS_RANGE = (3, 10)
IFFT_TERMS_RANGE = (1, 10)
IFFT_BIN_RANGE = (1, 10)
IFFT_AMPLITUDE_RANGE = (0.5, 1.5)
SLOPE_RANGE = (-1.0, 1.0)
POLY_DEGREE_RANGE = (2, 5)
POLY_COEFF_RANGE = (-1.0, 1.0)
POLY_SHIFT_RANGE = (-5.0, 5.0)
TREND_AMPLITUDE_RANGE = (1.0, 200.0)
NOISE_AMPLITUDE_RANGE = (1.0, 50.0)

MIN_LENGTH = 8


def derive_seed(*parts) -> int:
    """Stable 63-bit seed derived from arbitrary parts.

    Used to fan a master seed out to per-sample seeds. Built on sha256 rather
    than hash(): the builtin is salted per process.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass(frozen=True)
class SeasonalitySpec:
    """One seasonal component.

    kind single_sine: amplitude * sin(2*pi*frequency*t/T + phase).
    kind square_sine: amplitude * sum over the first `harmonics` odd harmonics
        of sin(2*pi*(2k+1)*frequency*t/T) / (2k+1), a square-wave approximation.
    kind ifft: real part of the inverse DFT of a spectrum holding
        bin_amplitudes on the integer `bins`; equivalently a sum of cosines.
    kind none: all zeros.
    """

    kind: str
    amplitude: float = 1.0
    frequency: float = 0.0
    phase: float = 0.0
    harmonics: int = 0
    bins: tuple[int, ...] = ()
    bin_amplitudes: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in SEASONALITY_KINDS:
            raise ValueError(f"unknown seasonality kind {self.kind!r}")
        if self.kind in ("single_sine", "square_sine") and self.frequency <= 0:
            raise ValueError(f"{self.kind} requires a positive frequency")
        if self.kind == "square_sine" and self.harmonics < 1:
            raise ValueError("square_sine requires at least one harmonic")
        if self.kind == "ifft":
            if not self.bins:
                raise ValueError("ifft requires a non-empty bin list")
            if len(self.bins) != len(self.bin_amplitudes):
                raise ValueError("ifft bins and bin_amplitudes must pair up")
            if len(set(self.bins)) != len(self.bins):
                raise ValueError("ifft bins must be distinct")


@dataclass(frozen=True)
class TrendSpec:
    """Trend component on the normalized axis x = t/T.

    linear: slope * x. polynomial: sum of coefficients[i] * x**(i+1) + shift
    (one coefficient per power, so the degree is len(coefficients)).
    """

    kind: str
    slope: float = 0.0
    coefficients: tuple[float, ...] = ()
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in TREND_KINDS:
            raise ValueError(f"unknown trend kind {self.kind!r}")
        if self.kind == "polynomial" and not self.coefficients:
            raise ValueError("polynomial trend requires coefficients")

    @property
    def degree(self) -> int:
        return len(self.coefficients)


@dataclass(frozen=True)
class NoiseSpec:
    distribution: str = "gaussian"
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if self.distribution != "gaussian":
            raise ValueError(f"unsupported noise distribution {self.distribution!r}")
        if self.std < 0:
            raise ValueError("noise std must be non-negative")


@dataclass(frozen=True)
class BaseSeriesSpec:
    length: int
    seasonality: SeasonalitySpec
    trend: TrendSpec
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    trend_amplitude: float = 1.0
    noise_amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.length < MIN_LENGTH:
            raise ValueError(f"series length must be >= {MIN_LENGTH}")
        if self.noise_amplitude < 0:
            raise ValueError("noise amplitude must be non-negative")


@dataclass(frozen=True)
class BaseSeries:
    """A rendered base series together with the spec that produced it."""

    spec: BaseSeriesSpec
    values: np.ndarray

    def __len__(self) -> int:
        return self.spec.length


def sample_seasonality_spec(rng: np.random.Generator, kind: str | None = None) -> SeasonalitySpec:
    """Draw a seasonality spec from the fixed priors.

    When `kind` is omitted it is drawn from the default kind distribution,
    which never yields "none".
    """
    if kind is None:
        kinds = [k for k, _ in SEASONALITY_PROBS]
        probs = [p for _, p in SEASONALITY_PROBS]
        kind = kinds[int(rng.choice(len(kinds), p=probs))]
    if kind == "none":
        return SeasonalitySpec(kind="none")
    if kind == "single_sine":
        return SeasonalitySpec(
            kind=kind,
            amplitude=float(rng.uniform(*AMPLITUDE_RANGE)),
            frequency=float(rng.integers(FREQUENCY_RANGE[0], FREQUENCY_RANGE[1] + 1)),
            phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        )
    if kind == "square_sine":
        # amplitude stays 1 so the k-th retained harmonic keeps coefficient 1/(2k+1)
        return SeasonalitySpec(
            kind=kind,
            amplitude=1.0,
            frequency=float(rng.integers(FREQUENCY_RANGE[0], FREQUENCY_RANGE[1] + 1)),
            harmonics=int(rng.integers(SQUARE_HARMONICS_RANGE[0], SQUARE_HARMONICS_RANGE[1] + 1)),
        )
    if kind == "ifft":
        n_terms = int(rng.integers(IFFT_TERMS_RANGE[0], IFFT_TERMS_RANGE[1] + 1))
        lo, hi = IFFT_BIN_RANGE
        bins = rng.choice(np.arange(lo, hi + 1), size=n_terms, replace=False)
        bins = tuple(int(b) for b in np.sort(bins))
        amps = tuple(float(a) for a in rng.uniform(*IFFT_AMPLITUDE_RANGE, size=n_terms))
        return SeasonalitySpec(kind=kind, bins=bins, bin_amplitudes=amps)
    raise ValueError(f"unknown seasonality kind {kind!r}")


def sample_trend_spec(rng: np.random.Generator, kind: str | None = None) -> TrendSpec:
    if kind is None:
        kinds = [k for k, _ in TREND_PROBS]
        probs = [p for _, p in TREND_PROBS]
        kind = kinds[int(rng.choice(len(kinds), p=probs))]
    if kind == "none":
        return TrendSpec(kind="none")
    if kind == "linear":
        return TrendSpec(kind="linear", slope=float(rng.uniform(*SLOPE_RANGE)))
    if kind == "polynomial":
        degree = int(rng.integers(POLY_DEGREE_RANGE[0], POLY_DEGREE_RANGE[1] + 1))
        coeffs = tuple(float(c) for c in rng.uniform(*POLY_COEFF_RANGE, size=degree))
        return TrendSpec(
            kind="polynomial",
            coefficients=coeffs,
            shift=float(rng.uniform(*POLY_SHIFT_RANGE)),
        )
    raise ValueError(f"unknown trend kind {kind!r}")


def sample_base_spec(rng: np.random.Generator, length: int) -> BaseSeriesSpec:
    """Draw a full base-series spec for a series of `length` points."""
    if length < MIN_LENGTH:
        raise ValueError(f"series length must be >= {MIN_LENGTH}")
    return BaseSeriesSpec(
        length=length,
        seasonality=sample_seasonality_spec(rng),
        trend=sample_trend_spec(rng),
        noise=NoiseSpec(),
        trend_amplitude=float(rng.uniform(*TREND_AMPLITUDE_RANGE)),
        noise_amplitude=float(rng.uniform(*NOISE_AMPLITUDE_RANGE)),
        seed=int(rng.integers(0, 2**63)),
    )


def seasonal_value(spec: SeasonalitySpec, t, length: int) -> np.ndarray:
    """Evaluate the seasonal component at (possibly fractional) time points.

    The continuous evaluator backs both the grid renderer and the period-warp
    used by period anomalies.
    """
    t = np.asarray(t, dtype=float)
    x = t / float(length)
    if spec.kind == "none":
        return np.zeros_like(t)
    if spec.kind == "single_sine":
        return spec.amplitude * np.sin(2.0 * np.pi * spec.frequency * x + spec.phase)
    if spec.kind == "square_sine":
        out = np.zeros_like(t)
        for k in range(spec.harmonics):
            odd = 2 * k + 1
            out += np.sin(2.0 * np.pi * odd * spec.frequency * x) / odd
        return spec.amplitude * out
    if spec.kind == "ifft":
        out = np.zeros_like(t)
        for b, a in zip(spec.bins, spec.bin_amplitudes):
            out += a * np.cos(2.0 * np.pi * b * x)
        return spec.amplitude * out
    raise ValueError(f"unknown seasonality kind {spec.kind!r}")


def render_seasonality(spec: SeasonalitySpec, length: int) -> np.ndarray:
    return seasonal_value(spec, np.arange(length), length)


def trend_value(spec: TrendSpec, x) -> np.ndarray:
    """Evaluate the trend at normalized positions x in [0, 1]."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "none":
        return np.zeros_like(x)
    if spec.kind == "linear":
        return spec.slope * x
    if spec.kind == "polynomial":
        out = np.full_like(x, spec.shift)
        for i, c in enumerate(spec.coefficients):
            out += c * x ** (i + 1)
        return out
    raise ValueError(f"unknown trend kind {spec.kind!r}")


def trend_gradient(spec: TrendSpec, x) -> np.ndarray:
    """Analytic derivative of the trend on the normalized axis."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "none":
        return np.zeros_like(x)
    if spec.kind == "linear":
        return np.full_like(x, spec.slope)
    if spec.kind == "polynomial":
        out = np.zeros_like(x)
        for i, c in enumerate(spec.coefficients):
            out += (i + 1) * c * x**i
        return out
    raise ValueError(f"unknown trend kind {spec.kind!r}")


def render_trend(spec: TrendSpec, length: int) -> np.ndarray:
    return trend_value(spec, np.arange(length) / float(length))


def compose_series(spec: BaseSeriesSpec) -> np.ndarray:
    """Render the base series for a spec. Bit-deterministic for equal specs."""
    seasonal = render_seasonality(spec.seasonality, spec.length)
    trend = render_trend(spec.trend, spec.length)
    rng = np.random.default_rng(spec.seed)
    eps = rng.normal(spec.noise.mean, spec.noise.std, spec.length)
    return seasonal + spec.trend_amplitude * trend + spec.noise_amplitude * eps


def generate_base(spec: BaseSeriesSpec) -> BaseSeries:
    return BaseSeries(spec=spec, values=compose_series(spec))


def seasonality_to_dict(spec: SeasonalitySpec) -> dict:
    d = {"kind": spec.kind}
    if spec.kind == "single_sine":
        d.update(amplitude=spec.amplitude, frequency=spec.frequency, phase=spec.phase)
    elif spec.kind == "square_sine":
        d.update(amplitude=spec.amplitude, frequency=spec.frequency, harmonics=spec.harmonics)
    elif spec.kind == "ifft":
        d.update(bins=list(spec.bins), bin_amplitudes=list(spec.bin_amplitudes))
    return d


def seasonality_from_dict(d: dict) -> SeasonalitySpec:
    return SeasonalitySpec(
        kind=d["kind"],
        amplitude=float(d.get("amplitude", 1.0)),
        frequency=float(d.get("frequency", 0.0)),
        phase=float(d.get("phase", 0.0)),
        harmonics=int(d.get("harmonics", 0)),
        bins=tuple(int(b) for b in d.get("bins", ())),
        bin_amplitudes=tuple(float(a) for a in d.get("bin_amplitudes", ())),
    )


def trend_to_dict(spec: TrendSpec) -> dict:
    d = {"kind": spec.kind}
    if spec.kind == "linear":
        d["slope"] = spec.slope
    elif spec.kind == "polynomial":
        d.update(coefficients=list(spec.coefficients), shift=spec.shift)
    return d


def trend_from_dict(d: dict) -> TrendSpec:
    return TrendSpec(
        kind=d["kind"],
        slope=float(d.get("slope", 0.0)),
        coefficients=tuple(float(c) for c in d.get("coefficients", ())),
        shift=float(d.get("shift", 0.0)),
    )


def spec_to_dict(spec: BaseSeriesSpec) -> dict:
    return {
        "length": spec.length,
        "seasonality": seasonality_to_dict(spec.seasonality),
        "trend": trend_to_dict(spec.trend),
        "noise": {
            "distribution": spec.noise.distribution,
            "mean": spec.noise.mean,
            "std": spec.noise.std,
        },
        "trend_amplitude": spec.trend_amplitude,
        "noise_amplitude": spec.noise_amplitude,
        "seed": spec.seed,
    }


def spec_from_dict(d: dict) -> BaseSeriesSpec:
    noise = d.get("noise", {})
    return BaseSeriesSpec(
        length=int(d["length"]),
        seasonality=seasonality_from_dict(d["seasonality"]),
        trend=trend_from_dict(d["trend"]),
        noise=NoiseSpec(
            distribution=noise.get("distribution", "gaussian"),
            mean=float(noise.get("mean", 0.0)),
            std=float(noise.get("std", 1.0)),
        ),
        trend_amplitude=float(d.get("trend_amplitude", 1.0)),
        noise_amplitude=float(d.get("noise_amplitude", 1.0)),
        seed=int(d.get("seed", 0)),
    )
