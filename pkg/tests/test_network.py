"""Network assembly, forward semantics, and model file round trips."""

import collections

import numpy as np
import pytest

from spikebudget.lif import SpikeRaster
from spikebudget.network import (
    ForwardTrace,
    build_network,
    build_synnet,
    count_spikes,
    forward,
    load_model,
    save_model,
    simulate_batch,
)
from spikebudget.thresholds import ThresholdDistribution


class TestBuild:
    def test_weight_shapes_chain(self):
        model = build_synnet(n_out=6, rng_seed=0)
        shapes = [w.shape for w in model.weights]
        assert shapes == [(15, 48), (48, 48), (48, 48), (48, 6)]

    def test_tau_pyramid_default(self):
        model = build_synnet(n_out=3, tau_config=(2, 4, 8), rng_seed=0)
        expected = [
            {2.0: 24, 4.0: 24},
            {2.0: 12, 4.0: 12, 8.0: 12, 16.0: 12},
            {v: 6 for v in (2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0)},
        ]
        for taus, want in zip(model.tau_s_layers, expected):
            assert dict(collections.Counter(taus)) == want

    def test_degenerate_pyramid(self):
        model = build_synnet(n_out=3, tau_config=(1, 1, 1), rng_seed=0)
        for taus in model.tau_s_layers:
            assert set(taus) == {2.0}

    def test_indivisible_tau_config_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            build_synnet(n_out=3, tau_config=(5, 4, 8), rng_seed=0)

    def test_tau_m_fixed_2ms(self):
        assert build_synnet(n_out=3, rng_seed=0).tau_m_ms == 2.0

    def test_init_within_fan_in_bound(self):
        model = build_synnet(n_out=3, rng_seed=0)
        for w in model.weights:
            assert np.abs(w).max() <= 1.0 / np.sqrt(w.shape[0])

    def test_seed_recorded_and_reproducible(self):
        a = build_synnet(n_out=3, rng_seed=7)
        b = build_synnet(n_out=3, rng_seed=7)
        assert a.seed == 7
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)


def toy_model(seed=0, n_out=3, gain=30.0):
    model = build_synnet(n_out=n_out, rng_seed=seed)
    for w in model.weights:
        w *= gain  # enough drive that spikes occur with sparse inputs
    return model


def random_raster(rng, n_steps=120, n_channels=15, rate=0.1):
    return (rng.random((n_steps, n_channels)) < rate).astype(np.uint8)


class TestForward:
    def test_zero_raster_zero_spikes_class0(self):
        model = build_synnet(n_out=4, rng_seed=1)
        trace = forward(model, np.zeros((50, 15), dtype=np.uint8), theta_eff=1.0)
        assert trace.total_hidden_spikes == 0
        assert trace.decision == 0  # all-equal accumulators tie-break low

    def test_channel_mismatch_rejected(self):
        model = build_synnet(n_out=3, rng_seed=1)
        with pytest.raises(ValueError, match="channels"):
            forward(model, SpikeRaster(np.zeros((10, 7), dtype=np.uint8)), 1.0)

    def test_dt_mismatch_rejected(self):
        model = build_synnet(n_out=3, rng_seed=1)
        with pytest.raises(ValueError, match="dt"):
            forward(model, SpikeRaster(np.zeros((10, 15), dtype=np.uint8), dt_ms=20.0), 1.0)

    def test_spike_count_monotone_in_theta(self):
        rng = np.random.default_rng(3)
        model = toy_model()
        rasters = np.stack([random_raster(rng) for _ in range(12)])
        counts = []
        for theta in np.round(np.arange(0.6, 2.5, 0.2), 10):
            sim = simulate_batch(model, rasters, float(theta))
            counts.append(sim.hidden_spike_counts.mean())
        assert counts[0] > 0
        assert all(b <= a for a, b in zip(counts, counts[1:]))

    def test_count_spikes_matches_recount(self):
        rng = np.random.default_rng(5)
        model = toy_model(seed=2)
        trace = forward(model, random_raster(rng), 1.0)
        assert count_spikes(trace) == trace.total_hidden_spikes
        manual = sum(int(r.data.sum()) for r in trace.hidden_rasters)
        assert count_spikes(trace) == manual

    def test_hand_built_two_class_path(self):
        # One input channel drives one strong excitatory path; its class
        # must win for an input confined to that channel.
        model = build_network(2, (2,), 2, (1,), rng_seed=0)
        model.weights[0][:] = 0.0
        model.weights[0][0, 0] = 5.0  # channel 0 -> hidden 0
        model.weights[1][:] = 0.0
        model.weights[1][0, 0] = 5.0  # hidden 0 -> class 0
        raster = np.zeros((30, 2), dtype=np.uint8)
        raster[::2, 0] = 1
        trace = forward(model, raster, theta_eff=1.0)
        assert trace.total_hidden_spikes > 0
        assert trace.decision == 0
        assert trace.output_accumulator[0] > trace.output_accumulator[1]

    def test_determinism_identical_traces(self):
        rng = np.random.default_rng(11)
        model = toy_model(seed=4)
        raster = random_raster(rng)
        t1 = forward(model, raster, 1.0)
        t2 = forward(model, raster, 1.0)
        np.testing.assert_array_equal(t1.output_accumulator, t2.output_accumulator)
        for a, b in zip(t1.hidden_rasters, t2.hidden_rasters):
            np.testing.assert_array_equal(a.data, b.data)

    def test_theta_must_be_positive(self):
        model = build_synnet(n_out=3, rng_seed=1)
        with pytest.raises(ValueError, match="theta"):
            simulate_batch(model, np.zeros((1, 10, 15)), 0.0)


class TestModelFile:
    def test_round_trip_bit_exact(self, tmp_path):
        model = build_synnet(n_out=5, rng_seed=9)
        model.train_dist = ThresholdDistribution.continuous(1.0, 1.5)
        p1 = tmp_path / "m1.txt"
        p2 = tmp_path / "m2.txt"
        save_model(model, p1)
        loaded = load_model(p1)
        save_model(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        for wa, wb in zip(model.weights, loaded.weights):
            np.testing.assert_array_equal(wa, wb)
        assert loaded.train_dist == model.train_dist
        assert loaded.seed == model.seed

    def test_round_trip_discrete_dist(self, tmp_path):
        model = build_synnet(n_out=2, rng_seed=3)
        model.train_dist = ThresholdDistribution.discrete(1.0, 2.0, step=0.1)
        save_model(model, tmp_path / "m.txt")
        loaded = load_model(tmp_path / "m.txt")
        assert loaded.train_dist == model.train_dist

    def test_version_mismatch_rejected(self, tmp_path):
        model = build_synnet(n_out=2, rng_seed=0)
        path = tmp_path / "m.txt"
        save_model(model, path)
        text = path.read_text().replace("schema_version 1", "schema_version 99")
        path.write_text(text)
        with pytest.raises(ValueError, match="schema_version"):
            load_model(path)

    def test_truncated_rejected(self, tmp_path):
        model = build_synnet(n_out=2, rng_seed=0)
        path = tmp_path / "m.txt"
        save_model(model, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[: len(lines) // 2]))
        with pytest.raises(ValueError, match="line"):
            load_model(path)

    def test_forward_identical_after_reload(self, tmp_path):
        rng = np.random.default_rng(2)
        model = toy_model(seed=6)
        save_model(model, tmp_path / "m.txt")
        loaded = load_model(tmp_path / "m.txt")
        raster = random_raster(rng)
        a = forward(model, raster, 1.2)
        b = forward(loaded, raster, 1.2)
        np.testing.assert_array_equal(a.output_accumulator, b.output_accumulator)
