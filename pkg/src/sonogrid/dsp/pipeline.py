"""Block pipeline: raw sample blocks to one calibrated reading per interval."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .blocks import Calibration, SampleBlock, SplReading, remove_dc, spl_from_rms
from .hartley import fht, power_spectrum, total_energy
from .weighting import a_weight

DEFAULT_SAMPLE_RATE_HZ = 9600.0
DEFAULT_BLOCK_SIZE = 256


@dataclass(frozen=True)
class PipelineConfig:
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    block_size: int = DEFAULT_BLOCK_SIZE
    calibration: Calibration = field(default_factory=Calibration)
    a_weighting: bool = False

    @property
    def block_duration_ms(self) -> float:
        return self.block_size / self.sample_rate_hz * 1000.0

    def blocks_per_interval(self, interval_ms: int) -> int:
        """Blocks needed to cover the publish interval (rounded up)."""
        exact = interval_ms * self.sample_rate_hz / (self.block_size * 1000.0)
        return max(1, math.ceil(exact - 1e-9))


class SplPipeline:
    """Computes levels the way the device would: unweighted SPL straight
    from the time-domain RMS, or from the A-weighted spectral energy when
    A-weighting is on. Windows are reserved for display spectra, so the
    Parseval bookkeeping stays exact.
    """

    def __init__(self, config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()

    def block_mean_square(self, block: SampleBlock) -> float:
        """Mean-square level of one block (squared counts)."""
        centered = remove_dc(block)
        if not self.config.a_weighting:
            x = centered.samples
            return float(np.mean(x * x))
        spec = a_weight(power_spectrum(fht(centered), block.sample_rate_hz))
        return total_energy(spec) / len(block)

    def block_spl(self, block: SampleBlock) -> SplReading:
        """Calibrated SPL of a single block."""
        ms = self.block_mean_square(block)
        return spl_from_rms(math.sqrt(ms), self.config.calibration, block.acquired_at_ms)

    def measure(self, blocks: Iterable[SampleBlock], acquired_at_ms: int = 0) -> SplReading:
        """Energy-mean level over an interval's blocks (Leq across blocks).

        Averaging happens in the linear (mean-square) domain before the
        single log/clamp, so quiet blocks aren't inflated to the floor
        before aggregation.
        """
        squares = [self.block_mean_square(b) for b in blocks]
        if not squares:
            raise ValueError("measure requires at least one block")
        pooled = math.sqrt(sum(squares) / len(squares))
        return spl_from_rms(pooled, self.config.calibration, acquired_at_ms)
