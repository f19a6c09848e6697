"""Deterministic signal chain: ADC sample blocks to calibrated dB readings."""

from .blocks import (
    Calibration,
    CenteredBlock,
    SampleBlock,
    SplReading,
    apply_window,
    hamming_window,
    leq,
    remove_dc,
    rms,
    spl_from_rms,
)
from .hartley import Spectrum, fht, hartley, power_spectrum, total_energy
from .pipeline import PipelineConfig, SplPipeline
from .weighting import a_weight, a_weight_db, a_weight_gain

__all__ = [
    "Calibration",
    "CenteredBlock",
    "PipelineConfig",
    "SampleBlock",
    "Spectrum",
    "SplPipeline",
    "SplReading",
    "a_weight",
    "a_weight_db",
    "a_weight_gain",
    "apply_window",
    "fht",
    "hamming_window",
    "hartley",
    "leq",
    "power_spectrum",
    "remove_dc",
    "rms",
    "spl_from_rms",
    "total_energy",
]
