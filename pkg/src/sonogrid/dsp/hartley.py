"""Fast Hartley transform and the power spectrum derived from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..kernels import fht_radix2
from .blocks import CenteredBlock, _is_pow2


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectrum, bins k = 0..N/2 in squared ADC counts."""

    power: np.ndarray
    bin_width_hz: float

    def __post_init__(self) -> None:
        power = np.asarray(self.power, dtype=np.float64)
        if power.ndim != 1 or len(power) < 2:
            raise ValidationError("power must be a 1-d array of at least 2 bins")
        if power.min() < 0:
            raise ValidationError("power bins must be non-negative")
        if not (self.bin_width_hz > 0):
            raise ValidationError("bin_width_hz must be positive")
        object.__setattr__(self, "power", power)

    @property
    def n_samples(self) -> int:
        """Length N of the originating block (bins are N/2 + 1)."""
        return 2 * (len(self.power) - 1)

    @property
    def frequencies_hz(self) -> np.ndarray:
        return np.arange(len(self.power), dtype=np.float64) * self.bin_width_hz


def hartley(x) -> np.ndarray:
    """Unnormalized Hartley transform H[k] = sum x[n]*cas(2*pi*k*n/N).

    Radix-2, O(N log N); length must be a power of two.
    """
    arr = np.array(x, dtype=np.float64)
    if arr.ndim != 1 or not _is_pow2(len(arr)):
        raise ValidationError(f"length must be a power of two, got shape {arr.shape}")
    fht_radix2(arr)
    return arr


def fht(block: CenteredBlock) -> np.ndarray:
    """Hartley coefficients of a centered block."""
    return hartley(block.samples)


def power_spectrum(hartley_coeffs, sample_rate_hz: float) -> Spectrum:
    """Fold Hartley coefficients into a one-sided power spectrum.

    P[k] = (H[k]^2 + H[(N-k) mod N]^2) / 2 for k = 0..N/2.
    """
    h = np.asarray(hartley_coeffs, dtype=np.float64)
    n = len(h)
    if not _is_pow2(n):
        raise ValidationError("coefficient length must be a power of two")
    if not (sample_rate_hz > 0):
        raise ValidationError("sample_rate_hz must be positive")
    mirrored = h[(-np.arange(n // 2 + 1)) % n]
    power = (h[: n // 2 + 1] ** 2 + mirrored**2) / 2.0
    return Spectrum(power=power, bin_width_hz=sample_rate_hz / n)


def total_energy(spectrum: Spectrum) -> float:
    """Time-domain energy sum(x^2) recovered from the spectrum.

    Interior bins carry both Hartley halves, so they count twice:
    sum(x^2) = (P[0] + P[N/2] + 2*sum(P[1:N/2])) / N.
    """
    p = spectrum.power
    return float((p[0] + p[-1] + 2.0 * p[1:-1].sum()) / spectrum.n_samples)
