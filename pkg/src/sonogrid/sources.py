"""Deterministic signal sources standing in for the analog microphone front end."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp.blocks import ADC_HALF_SCALE, ADC_MIDPOINT
from .errors import ValidationError

SOURCE_KINDS = ("sine", "white-noise", "mixture", "file")

# mixture: deterministic split between the tonal and noise parts so the
# peak stays within amplitude_counts
MIXTURE_SINE_FRACTION = 0.7


@dataclass(frozen=True)
class SignalSourceSpec:
    kind: str
    amplitude_counts: float = 0.0
    frequency_hz: float | None = None
    seed: int | None = None
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in SOURCE_KINDS:
            raise ValidationError(f"unknown source kind {self.kind!r}")
        if self.kind != "file":
            if not (0.0 <= self.amplitude_counts <= ADC_HALF_SCALE):
                raise ValidationError(
                    f"amplitude_counts must be in [0, {ADC_HALF_SCALE}]"
                )
        if self.kind in ("sine", "mixture"):
            if self.frequency_hz is None or self.frequency_hz <= 0:
                raise ValidationError(f"{self.kind} source needs a positive frequency_hz")
        if self.kind in ("white-noise", "mixture") and self.seed is None:
            raise ValidationError(f"{self.kind} source needs a seed for determinism")
        if self.kind == "file" and not self.path:
            raise ValidationError("file source needs a path")


def _quantize(wave: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(wave), 0, 1023).astype(np.int64)


class SineSource:
    """Bias + A*sin, phase-continuous across blocks."""

    def __init__(self, spec: SignalSourceSpec, sample_rate_hz: float):
        self.amplitude = spec.amplitude_counts
        self.frequency_hz = spec.frequency_hz
        self.sample_rate_hz = sample_rate_hz
        self._sample_index = 0

    def next_block(self, n: int) -> np.ndarray:
        t = np.arange(self._sample_index, self._sample_index + n, dtype=np.float64)
        self._sample_index += n
        phase = 2.0 * np.pi * self.frequency_hz * t / self.sample_rate_hz
        return _quantize(ADC_MIDPOINT + self.amplitude * np.sin(phase))


class WhiteNoiseSource:
    """Uniform noise in [-A, A] counts (RMS = A/sqrt(3)); seeded."""

    def __init__(self, spec: SignalSourceSpec, sample_rate_hz: float):
        self.amplitude = spec.amplitude_counts
        self._rng = np.random.default_rng(spec.seed)

    def next_block(self, n: int) -> np.ndarray:
        noise = self._rng.uniform(-self.amplitude, self.amplitude, size=n)
        return _quantize(ADC_MIDPOINT + noise)


class MixtureSource:
    """Sine plus noise, amplitudes split so the sum stays within A."""

    def __init__(self, spec: SignalSourceSpec, sample_rate_hz: float):
        a = spec.amplitude_counts
        self._sine = SineSource(
            SignalSourceSpec("sine", a * MIXTURE_SINE_FRACTION, spec.frequency_hz),
            sample_rate_hz,
        )
        self._noise_amplitude = a * (1.0 - MIXTURE_SINE_FRACTION)
        self._rng = np.random.default_rng(spec.seed)

    def next_block(self, n: int) -> np.ndarray:
        tone = self._sine.next_block(n).astype(np.float64) - ADC_MIDPOINT
        noise = self._rng.uniform(-self._noise_amplitude, self._noise_amplitude, size=n)
        return _quantize(ADC_MIDPOINT + tone + noise)


class FileSource:
    """Replays a headerless file of ADC counts, one per line; wraps at EOF."""

    def __init__(self, spec: SignalSourceSpec, sample_rate_hz: float):
        self.samples = load_adc_file(spec.path)
        self._index = 0

    def next_block(self, n: int) -> np.ndarray:
        total = len(self.samples)
        idx = (self._index + np.arange(n)) % total
        self._index = (self._index + n) % total
        return self.samples[idx]


def load_adc_file(path: str | Path) -> np.ndarray:
    """Read one integer ADC count per line; errors name the offending line."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                value = int(text)
            except ValueError:
                raise ValidationError(f"{path}: line {lineno}: not an integer: {text!r}")
            if not (0 <= value <= 1023):
                raise ValidationError(f"{path}: line {lineno}: sample {value} outside [0, 1023]")
            values.append(value)
    if not values:
        raise ValidationError(f"{path}: no samples")
    return np.asarray(values, dtype=np.int64)


def make_source(spec: SignalSourceSpec, sample_rate_hz: float):
    cls = {
        "sine": SineSource,
        "white-noise": WhiteNoiseSource,
        "mixture": MixtureSource,
        "file": FileSource,
    }[spec.kind]
    return cls(spec, sample_rate_hz)
