"""Tests for fiber loss, delay drift, and dispersion broadening."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starqkd.core import LinkParams
from starqkd.errors import ConfigurationError
from starqkd.fiber import (
    FiberLink,
    dispersion_sigma,
    propagate,
    thermal_delay_shift,
    transmission_probability,
)
from starqkd.source import PhotonStream


def _stream(times):
    times = np.asarray(times, dtype=float)
    n = len(times)
    return PhotonStream(
        times=times,
        pulse_index=np.arange(n, dtype=np.int64),
        bin_index=np.zeros(n, dtype=np.int8),
        port=np.zeros(n, dtype=np.int8),
    )


class TestTransmission:
    def test_lossless(self):
        assert transmission_probability(FiberLink(0.0)) == 1.0

    def test_6p7_db_total(self):
        link = FiberLink(0.0, extra_loss_db=6.7)
        assert transmission_probability(link) == pytest.approx(0.2138, abs=2e-4)

    def test_10_km_standard_fiber(self):
        link = FiberLink(10.0)
        assert transmission_probability(link) == pytest.approx(0.6026, abs=2e-4)

    def test_length_plus_extra_compose(self):
        link = FiberLink(26.8, extra_loss_db=0.804)
        # 26.8 km * 0.22 dB/km + 0.804 dB = 6.7 dB
        assert link.total_loss_db == pytest.approx(6.7, abs=1e-9)

    @given(st.floats(0, 100), st.floats(0, 20))
    def test_probability_in_unit_interval(self, length, extra):
        p = transmission_probability(FiberLink(length, extra_loss_db=extra))
        assert 0.0 < p <= 1.0


class TestThermalDrift:
    def test_one_km_one_kelvin(self):
        assert thermal_delay_shift(1.0, 1.0) == pytest.approx(39e-12)

    def test_zero_length(self):
        assert thermal_delay_shift(0.0, 5.0) == 0.0

    def test_77_km_at_0p7_kelvin_stays_under_run_budget(self):
        shift = thermal_delay_shift(77.0, 0.7)
        assert shift == pytest.approx(2.1e-9, rel=0.01)
        assert shift < 2.2e-9

    def test_ramp_is_linear_in_time(self):
        link = FiberLink(50.0, thermal_rate=0.7 / 90.0)
        assert link.thermal_drift_at(90.0) == pytest.approx(
            2.0 * link.thermal_drift_at(45.0)
        )

    def test_zero_rate_constant_delay(self):
        link = FiberLink(50.0, thermal_rate=0.0)
        t = np.linspace(0.0, 1000.0, 7)
        assert np.all(link.delay_at(t) == link.base_delay)


class TestDispersion:
    def test_81km_100ghz_sigma(self):
        link = FiberLink(81.2)
        sigma = dispersion_sigma(link, 100.0)
        # 17 ps/nm/km x 81.2 km x ~0.80 nm, FWHM converted to sigma
        assert sigma == pytest.approx(470e-12, rel=0.01)

    def test_zero_length_no_broadening(self):
        assert dispersion_sigma(FiberLink(0.0), 100.0) == 0.0

    def test_narrower_window_less_broadening(self):
        link = FiberLink(40.0)
        assert dispersion_sigma(link, 25.0) < dispersion_sigma(link, 100.0)


class TestPropagate:
    def test_identity_link(self):
        stream = _stream([1e-6, 2e-6, 3e-6])
        out = propagate(
            stream, FiberLink(0.0), np.random.default_rng(0), window=100.0
        )
        assert np.allclose(out.times, stream.times)
        assert len(out) == 3

    def test_base_delay_applied(self):
        stream = _stream([0.0, 1e-3])
        link = FiberLink(10.0)
        out = propagate(
            stream, link, np.random.default_rng(0), window=0.0, sample_loss=False
        )
        assert out.times == pytest.approx(stream.times + 49e-6)

    def test_survival_fraction(self):
        n = 1_000_000
        stream = _stream(np.linspace(0, 1, n))
        link = FiberLink(0.0, extra_loss_db=6.7)
        out = propagate(stream, link, np.random.default_rng(1), window=0.0)
        p = 0.2138
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(len(out) - n * p) < 3.5 * sigma

    def test_no_loss_sampling_when_prethinned(self):
        stream = _stream(np.linspace(0, 1, 1000))
        link = FiberLink(100.0, extra_loss_db=20.0)
        out = propagate(
            stream, link, np.random.default_rng(2), window=0.0, sample_loss=False
        )
        assert len(out) == 1000

    def test_output_sorted_despite_jitter(self):
        rng = np.random.default_rng(3)
        stream = _stream(np.sort(rng.uniform(0, 1e-6, 500)))
        link = FiberLink(81.2)
        out = propagate(stream, link, rng, window=100.0)
        assert np.all(np.diff(out.times) >= 0)

    def test_widely_spaced_photons_keep_order(self):
        # Spacing far above the dispersion sigma: order must survive.
        stream = _stream(np.arange(100) * 1e-6)
        link = FiberLink(81.2)
        out = propagate(
            stream, link, np.random.default_rng(4), window=100.0,
            sample_loss=False,
        )
        assert np.array_equal(out.pulse_index, stream.pulse_index)

    def test_thermal_ramp_shifts_late_photons_more(self):
        link = FiberLink(77.0, thermal_rate=0.7 / 90.0)
        stream = _stream([0.0, 90.0])
        out = propagate(
            stream, link, np.random.default_rng(5), window=0.0,
            sample_loss=False,
        )
        early_delay = out.times[0] - 0.0
        late_delay = out.times[1] - 90.0
        assert late_delay - early_delay == pytest.approx(2.1e-9, rel=0.01)

    def test_rejects_negative_length(self):
        with pytest.raises(ConfigurationError):
            FiberLink(-1.0)


class TestLinkParams:
    def test_custom_attenuation(self):
        link = FiberLink(10.0, params=LinkParams(attenuation_db_per_km=0.3))
        assert link.total_loss_db == pytest.approx(3.0)
