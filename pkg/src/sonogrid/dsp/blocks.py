"""Block-level types and the time-domain half of the metering chain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..errors import ValidationError

ADC_FULL_SCALE = 1023
ADC_MIDPOINT = 512.0
#: Largest sine amplitude that keeps rebiased samples inside [0, 1023].
ADC_HALF_SCALE = 511.5

MEAN_TOLERANCE = 1e-9 * ADC_FULL_SCALE


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SampleBlock:
    """One acquisition window of raw 10-bit ADC counts."""

    samples: np.ndarray
    sample_rate_hz: float
    acquired_at_ms: int = 0

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ValidationError("samples must be one-dimensional")
        if not _is_pow2(len(samples)) or len(samples) < 8:
            raise ValidationError(
                f"block length must be a power of two >= 8, got {len(samples)}"
            )
        if not np.issubdtype(samples.dtype, np.integer):
            as_int = samples.astype(np.int64)
            if not np.array_equal(as_int, samples):
                raise ValidationError("samples must be integer ADC counts")
            samples = as_int
        if samples.min() < 0 or samples.max() > ADC_FULL_SCALE:
            raise ValidationError("samples outside 10-bit range [0, 1023]")
        if not (self.sample_rate_hz > 0):
            raise ValidationError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class CenteredBlock:
    """DC-removed block, ready for spectral or RMS processing.

    Produced by :func:`remove_dc`, which guarantees zero mean; windowing
    may then perturb the mean slightly, so the invariant is enforced at
    the construction site rather than here.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValidationError("samples must be one-dimensional")
        if not (self.sample_rate_hz > 0):
            raise ValidationError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class Calibration:
    """Maps count-domain RMS to dB: 20*log10(rms) + offset, clamped.

    The default offset anchors a full-scale sine (amplitude 511.5 counts)
    at the 120 dB ceiling.
    """

    offset_db: float = 68.83
    floor_db: float = 30.0
    ceiling_db: float = 120.0

    def __post_init__(self) -> None:
        if not (self.floor_db < self.ceiling_db):
            raise ValidationError("floor_db must be below ceiling_db")


@dataclass(frozen=True)
class SplReading:
    """A calibrated, clamped sound-pressure level at a point in time."""

    spl_db: float
    acquired_at_ms: int = 0


def remove_dc(block: SampleBlock) -> CenteredBlock:
    """Subtract the block mean (the electret front end sits on a DC bias)."""
    x = block.samples.astype(np.float64)
    centered = x - x.mean()
    out = CenteredBlock(centered, block.sample_rate_hz)
    assert abs(out.samples.mean()) <= MEAN_TOLERANCE
    return out


def hamming_window(n: int) -> np.ndarray:
    """Hamming coefficients w[i] = 0.54 - 0.46*cos(2*pi*i/(n-1))."""
    i = np.arange(n, dtype=np.float64)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * i / (n - 1))


WINDOW_KINDS = ("rectangular", "hamming")


def apply_window(block: CenteredBlock, kind: str = "rectangular") -> tuple[CenteredBlock, float]:
    """Taper the block; returns (windowed block, coherent gain).

    The coherent gain (mean of the window) lets level computations divide
    the amplitude loss back out.
    """
    if kind == "rectangular":
        return block, 1.0
    if kind == "hamming":
        w = hamming_window(len(block))
        return CenteredBlock(block.samples * w, block.sample_rate_hz), float(w.mean())
    raise ValidationError(f"unknown window kind {kind!r}")


def rms(block: CenteredBlock) -> float:
    """Root mean square in ADC counts."""
    if len(block) == 0:
        raise ValidationError("empty block")
    x = block.samples
    return float(np.sqrt(np.mean(x * x)))


def spl_from_rms(rms_counts: float, cal: Calibration, acquired_at_ms: int = 0) -> SplReading:
    """Calibrated SPL: 20*log10(rms) + offset, clamped into [floor, ceiling].

    Zero RMS maps to -inf before clamping — silence is a valid measurement
    and reads as the floor.
    """
    if rms_counts < 0:
        raise ValidationError("rms_counts must be >= 0")
    if rms_counts == 0.0:
        raw = -math.inf
    else:
        raw = 20.0 * math.log10(rms_counts) + cal.offset_db
    clamped = min(max(raw, cal.floor_db), cal.ceiling_db)
    return SplReading(spl_db=clamped, acquired_at_ms=acquired_at_ms)


def leq(levels: Iterable[SplReading | float]) -> float | None:
    """Equivalent continuous level: 10*log10 of the mean of 10^(L/10).

    Returns None for an empty sequence (absence, not an error).
    """
    values = [lv.spl_db if isinstance(lv, SplReading) else float(lv) for lv in levels]
    if not values:
        return None
    energies = [10.0 ** (v / 10.0) for v in values]
    return 10.0 * math.log10(sum(energies) / len(energies))
