"""Encoder: filter design, IAF semantics, band selectivity, raster export."""

import numpy as np
import pytest

from spikebudget.encoder import (
    DEFAULT_BAND_EDGES,
    FilterBankSpec,
    IafParams,
    design_filterbank,
    encode,
    export_raster,
    iaf_spike_train,
    iaf_step,
)


class TestFilterDesign:
    def test_default_plan_at_50hz_clips_top_band(self):
        bank = design_filterbank(FilterBankSpec.default(50.0))
        assert bank.n_bands == 5
        assert bank.clipped_bands == {4: (32.0, 24.975)}
        assert bank.effective_edges[4] == (16.0, 24.975)

    def test_passband_and_stopband_gains(self):
        # Oracle: numeric frequency-response sweep of every designed band.
        bank = design_filterbank(FilterBankSpec.default(200.0))
        for b, (lo, hi) in enumerate(bank.effective_edges):
            center = np.sqrt(lo * hi)
            peak = bank.frequency_response(b, np.linspace(lo, hi, 200)).max()
            g_center = bank.frequency_response(b, np.array([center]))[0]
            assert 20 * np.log10(g_center / peak) >= -3.0
            g_stop = bank.frequency_response(b, np.array([min(4 * hi, 99.9)]))[0]
            assert 20 * np.log10(g_stop / peak) <= -20.0

    def test_single_band_gain_near_unity_at_center(self):
        spec = FilterBankSpec(sample_rate_hz=200.0, band_edges=((2.0, 4.0),))
        bank = design_filterbank(spec)
        gain = bank.frequency_response(0, np.array([np.sqrt(8.0)]))[0]
        assert 20 * np.log10(gain) > -3.0

    def test_explicit_band_above_nyquist_rejected(self):
        spec = FilterBankSpec(sample_rate_hz=50.0, band_edges=((20.0, 30.0),))
        with pytest.raises(ValueError, match="Nyquist"):
            design_filterbank(spec)

    def test_low_edge_above_nyquist_rejected_even_with_clip(self):
        spec = FilterBankSpec(
            sample_rate_hz=50.0, band_edges=((26.0, 40.0),), clip_high_to_nyquist=True
        )
        with pytest.raises(ValueError, match="low edge"):
            design_filterbank(spec)


class TestIaf:
    def test_subtraction_reset(self):
        params = IafParams(threshold=1.0, dt_ms=1.0)
        potential, n = iaf_step(0.9, 0.2, params)
        assert n == 1
        assert potential == pytest.approx(0.1)

    def test_zero_input_never_spikes(self):
        params = IafParams(threshold=1.0, dt_ms=1.0)
        potential = 0.0
        for _ in range(1000):
            potential, n = iaf_step(potential, 0.0, params)
            assert n == 0
        assert potential == 0.0

    def test_negative_input_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            iaf_step(0.0, -0.1, IafParams(threshold=1.0))

    def test_constant_rate_limit(self):
        # Renewal limit: rate -> increment / threshold.
        params = IafParams(threshold=1.0, dt_ms=1.0)
        c = 0.137
        n_steps = 20000
        total = 0
        potential = 0.0
        for _ in range(n_steps):
            potential, n = iaf_step(potential, c, params)
            total += n
        assert total / n_steps == pytest.approx(c, rel=1e-3)

    def test_vectorized_matches_step_loop(self):
        rng = np.random.default_rng(3)
        params = IafParams(threshold=0.7, dt_ms=1.0)
        values = rng.uniform(0, 0.5, size=(400, 4))
        fast = iaf_spike_train(values, params)
        slow = np.zeros_like(fast)
        pots = np.zeros(4)
        for t in range(values.shape[0]):
            for c in range(4):
                pots[c], n = iaf_step(pots[c], values[t, c], params)
                slow[t, c] = n
        np.testing.assert_array_equal(fast, slow)

    def test_rate_monotone_in_threshold(self):
        rng = np.random.default_rng(9)
        values = rng.uniform(0, 0.5, size=(600, 1))
        counts = [
            iaf_spike_train(values, IafParams(threshold=th)).sum()
            for th in np.linspace(0.2, 3.0, 10)
        ]
        assert all(b <= a for a, b in zip(counts, counts[1:]))


def sine_window(freq_hz, axis, fs=50.0, n=512, amplitude=1.0):
    t = np.arange(n) / fs
    imu = np.zeros((n, 3))
    imu[:, axis] = amplitude * np.sin(2 * np.pi * freq_hz * t)
    return imu


class TestEncode:
    spec = FilterBankSpec.default(50.0)
    iaf = IafParams(threshold=6.0, dt_ms=1.0)

    def test_zero_input_zero_raster(self):
        raster = encode(np.zeros((64, 3)), self.spec, self.iaf)
        assert raster.data.sum() == 0
        assert raster.data.shape == (64 * 20, 15)

    def test_band_selectivity_3hz_x_axis(self):
        raster = encode(sine_window(3.0, axis=0), self.spec, self.iaf)
        per_channel = raster.data.sum(axis=0)
        assert per_channel[1] / per_channel.sum() >= 0.8  # X-axis 2-4 Hz band

    def test_band_selectivity_12hz_z_axis(self):
        raster = encode(sine_window(12.0, axis=2), self.spec, self.iaf)
        per_channel = raster.data.sum(axis=0)
        assert per_channel.argmax() == 13  # Z-axis 8-16 Hz band

    def test_axis_separation(self):
        raster = encode(sine_window(6.0, axis=1), self.spec, self.iaf)
        per_channel = raster.data.sum(axis=0)
        assert per_channel[:5].sum() == 0
        assert per_channel[10:].sum() == 0
        assert per_channel[5:10].sum() > 0

    def test_energy_proportionality(self):
        low = encode(sine_window(6.0, axis=0, amplitude=0.5), self.spec, self.iaf)
        high = encode(sine_window(6.0, axis=0, amplitude=1.0), self.spec, self.iaf)
        assert high.data[:, 2].sum() >= 2 * low.data[:, 2].sum()

    def test_wrong_channel_count_rejected(self):
        with pytest.raises(ValueError, match="3"):
            encode(np.zeros((64, 2)), self.spec, self.iaf)

    def test_non_finite_rejected(self):
        imu = np.zeros((64, 3))
        imu[5, 1] = np.inf
        with pytest.raises(ValueError, match="finite"):
            encode(imu, self.spec, self.iaf)

    def test_deterministic(self):
        imu = sine_window(3.0, axis=0)
        a = encode(imu, self.spec, self.iaf)
        b = encode(imu, self.spec, self.iaf)
        np.testing.assert_array_equal(a.data, b.data)


class TestExport:
    def test_export_identical_bytes(self):
        raster = encode(sine_window(3.0, axis=0, n=64), FilterBankSpec.default(50.0), IafParams())
        assert export_raster(raster) == export_raster(raster)

    def test_export_header_and_events(self):
        raster = encode(sine_window(3.0, axis=0, n=64), FilterBankSpec.default(50.0), IafParams())
        text = export_raster(raster)
        lines = text.splitlines()
        assert lines[0] == "# spike-raster v1"
        assert lines[1].startswith("# dt_ms ")
        assert lines[2] == "# n_channels 15"
        assert lines[3] == f"# n_steps {raster.n_steps}"
        events = [line.split() for line in lines[4:]]
        assert len(events) == raster.data.sum()
        t0, c0 = map(int, events[0])
        assert raster.data[t0, c0] == 1
