"""Block types, DC removal, windowing, RMS, calibration, and Leq."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sonogrid.dsp import (
    Calibration,
    CenteredBlock,
    SampleBlock,
    SplReading,
    apply_window,
    hamming_window,
    hartley,
    leq,
    power_spectrum,
    remove_dc,
    rms,
    spl_from_rms,
    total_energy,
)
from sonogrid.errors import ValidationError

from conftest import sine_block_samples

FS = 9600.0


def block(samples):
    return SampleBlock(np.asarray(samples), FS)


class TestSampleBlockValidation:
    def test_rejects_short_blocks(self):
        with pytest.raises(ValidationError):
            block([512] * 4)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValidationError):
            block([512] * 12)

    def test_rejects_out_of_range_samples(self):
        with pytest.raises(ValidationError):
            block([512] * 7 + [1024])
        with pytest.raises(ValidationError):
            block([512] * 7 + [-1])

    def test_rejects_fractional_samples(self):
        with pytest.raises(ValidationError):
            SampleBlock(np.array([512.5] * 8), FS)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValidationError):
            SampleBlock(np.array([512] * 8), 0.0)


class TestRemoveDc:
    def test_constant_block_is_all_zeros(self):
        out = remove_dc(block([512] * 256))
        assert np.array_equal(out.samples, np.zeros(256))

    def test_biased_quarter_rate_sine(self):
        out = remove_dc(block([512, 612, 512, 412] * 2))
        assert np.allclose(out.samples, [0.0, 100.0, 0.0, -100.0] * 2)

    def test_rail_to_rail_square(self):
        out = remove_dc(block([0, 1023] * 4))
        assert np.array_equal(out.samples, [-511.5, 511.5] * 4)

    def test_mean_is_zero_within_tolerance(self):
        rng = np.random.default_rng(2)
        out = remove_dc(block(rng.integers(0, 1024, size=256)))
        assert abs(out.samples.mean()) <= 1e-9 * 1023


class TestWindow:
    def test_rectangular_is_identity(self):
        cb = CenteredBlock(np.arange(8, dtype=float) - 3.5, FS)
        out, gain = apply_window(cb, "rectangular")
        assert out is cb
        assert gain == 1.0

    def test_hamming_edge_coefficient(self):
        w = hamming_window(256)
        assert w[0] == pytest.approx(0.08, abs=1e-12)
        assert w[-1] == pytest.approx(0.08, abs=1e-12)

    def test_hamming_peaks_at_one_mid_block(self):
        assert hamming_window(9)[4] == pytest.approx(1.0, abs=1e-15)
        assert round(float(hamming_window(256)[127]), 2) == 1.0

    def test_hamming_applies_pointwise_and_reports_gain(self):
        cb = CenteredBlock(np.ones(16), FS)
        out, gain = apply_window(cb, "hamming")
        w = hamming_window(16)
        assert np.allclose(out.samples, w)
        assert gain == pytest.approx(w.mean())

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError):
            apply_window(CenteredBlock(np.zeros(8), FS), "hann")


class TestRms:
    def test_silence(self):
        assert rms(CenteredBlock(np.zeros(64), FS)) == 0.0

    def test_sine_amplitude_over_sqrt2(self):
        t = np.arange(256)
        x = 100.0 * np.sin(2.0 * np.pi * 4 * t / 256)
        assert rms(CenteredBlock(x, FS)) == pytest.approx(70.71, abs=0.01)

    def test_matches_spectral_energy(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(-400, 400, size=256)
        x -= x.mean()
        cb = CenteredBlock(x, FS)
        spec = power_spectrum(hartley(x), FS)
        assert rms(cb) == pytest.approx(math.sqrt(total_energy(spec) / 256), rel=1e-12)


FULL_SCALE_RMS = 511.5 / math.sqrt(2.0)
FULL_SCALE_SPL = 20.0 * math.log10(FULL_SCALE_RMS) + 68.83  # 119.9966...


class TestSplFromRms:
    def test_silence_clamps_to_floor(self):
        assert spl_from_rms(0.0, Calibration()).spl_db == 30.0

    def test_full_scale_sine_reads_ceiling(self):
        reading = spl_from_rms(FULL_SCALE_RMS, Calibration())
        assert reading.spl_db == pytest.approx(FULL_SCALE_SPL, abs=1e-12)
        assert reading.spl_db == pytest.approx(120.0, abs=0.1)

    def test_half_scale_is_6dB_down(self):
        reading = spl_from_rms(FULL_SCALE_RMS / 2.0, Calibration())
        assert reading.spl_db == pytest.approx(113.98, abs=0.01)
        assert FULL_SCALE_SPL - reading.spl_db == pytest.approx(20.0 * math.log10(2.0), abs=1e-9)

    def test_loud_input_clamps_to_ceiling(self):
        assert spl_from_rms(1e9, Calibration()).spl_db == 120.0

    def test_negative_rms_rejected(self):
        with pytest.raises(ValidationError):
            spl_from_rms(-1.0, Calibration())

    def test_calibration_requires_floor_below_ceiling(self):
        with pytest.raises(ValidationError):
            Calibration(floor_db=120.0, ceiling_db=30.0)

    @given(
        st.floats(min_value=0.0, max_value=1e4),
        st.floats(min_value=0.0, max_value=1e4),
    )
    def test_monotone_in_rms(self, a, b):
        lo, hi = sorted((a, b))
        cal = Calibration()
        assert spl_from_rms(lo, cal).spl_db <= spl_from_rms(hi, cal).spl_db


class TestLeq:
    def test_constant_levels(self):
        assert leq([60.0, 60.0]) == pytest.approx(60.0)

    def test_mixed_levels_frozen_value(self):
        # 10*log10((1e5 + 1e6) / 2)
        assert leq([50.0, 60.0]) == pytest.approx(57.4036268949, abs=1e-9)

    def test_single_reading_is_identity(self):
        assert leq([SplReading(73.2, 0)]) == pytest.approx(73.2)

    def test_empty_window_is_absence(self):
        assert leq([]) is None

    @given(st.lists(st.floats(min_value=0.0, max_value=140.0), min_size=1, max_size=40))
    def test_bounded_by_min_and_max(self, levels):
        value = leq(levels)
        assert min(levels) - 1e-9 <= value <= max(levels) + 1e-9


def test_full_pipeline_purity():
    samples = sine_block_samples(200.0, 5, 256)
    a = remove_dc(SampleBlock(samples, FS))
    b = remove_dc(SampleBlock(samples, FS))
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(hartley(a.samples), hartley(b.samples))
