"""A-frequency weighting (IEC 61672 response curve)."""

from __future__ import annotations

import math

import numpy as np

from .hartley import Spectrum

# 1 kHz normalization: 20*log10(R_A(1000)) is about -2.00 dB, so the gain
# below shifts the curve to 0 dB at 1 kHz.
A_WEIGHT_NORM_DB = 2.00


def a_weight_gain(freq_hz):
    """Amplitude gain of the A-weighting at ``freq_hz`` (0 at DC)."""
    f2 = np.square(np.asarray(freq_hz, dtype=np.float64))
    ra = (12194.0**2 * f2 * f2) / (
        (f2 + 20.6**2)
        * np.sqrt((f2 + 107.7**2) * (f2 + 737.9**2))
        * (f2 + 12194.0**2)
    )
    return ra * 10.0 ** (A_WEIGHT_NORM_DB / 20.0)


def a_weight_db(freq_hz: float) -> float:
    """Weighting in dB at one frequency (-inf at DC)."""
    gain = float(a_weight_gain(freq_hz))
    if gain == 0.0:
        return -math.inf
    return 20.0 * math.log10(gain)


def a_weight(spectrum: Spectrum) -> Spectrum:
    """Scale each power bin by the squared A-weighting amplitude gain."""
    gains = a_weight_gain(spectrum.frequencies_hz)
    return Spectrum(power=spectrum.power * gains * gains, bin_width_hz=spectrum.bin_width_hz)
