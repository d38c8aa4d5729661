import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lapool_lab.signal_demo import (
    DemoConfig,
    Signal1D,
    downsample_reconstruct,
    energy,
    generate_signal,
    rows_to_csv,
    run_demo,
    select_samples,
    smooth,
)

signals = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=30).map(np.array)


class TestGenerate:
    def test_forced_single_cosine(self):
        sig = generate_signal(16, terms=1, coefficients=([0.0], [1.0]))
        assert np.allclose(sig.samples, np.cos(2 * np.pi * np.arange(16) / 16), atol=1e-15)

    def test_same_seed_same_signal(self):
        a = generate_signal(25, 8, 0.2, seed=7).samples
        b = generate_signal(25, 8, 0.2, seed=7).samples
        assert np.array_equal(a, b)
        assert not np.array_equal(a, generate_signal(25, 8, 0.2, seed=8).samples)

    def test_pure_noise_variance(self):
        n = 10_000
        y = generate_signal(n, terms=0, noise_sd=1.0, seed=3).samples
        # sample variance of N(0,1) has standard deviation sqrt(2/(n-1))
        assert abs(y.var(ddof=1) - 1.0) < 3 * math.sqrt(2 / (n - 1))

    def test_bad_coefficient_length(self):
        with pytest.raises(ValueError):
            generate_signal(10, terms=2, coefficients=([1.0], [1.0]))


class TestSmooth:
    def test_constant_is_fixed_point(self):
        sig = Signal1D(np.full(9, 2.5))
        assert np.array_equal(smooth(sig, 3).samples, sig.samples)

    def test_hand_example(self):
        assert np.allclose(smooth(Signal1D([0.0, 3.0, 0.0]), 1).samples, [1.5, 1.0, 1.5])

    def test_zero_passes_is_identity(self):
        sig = generate_signal(12, seed=1)
        assert np.array_equal(smooth(sig, 0).samples, sig.samples)

    def test_impulse_energy_strictly_decreases(self):
        y = np.zeros(21)
        y[10] = 1.0
        sig = Signal1D(y)
        for _ in range(5):
            nxt = smooth(sig, 1)
            assert energy(nxt.samples) < energy(sig.samples)
            sig = nxt
        assert sig.smoothing_passes == 5


class TestDownsample:
    def test_full_sampling_is_exact(self):
        sig = generate_signal(25, noise_sd=0.2, seed=2)
        for mode in ("laplacian_max", "laplacian_min"):
            idx, recon, delta = downsample_reconstruct(sig, mode, 25)
            assert idx.size == 25 and delta == 0.0
            assert np.array_equal(recon, sig.samples)

    def test_triangle_apex(self):
        y = np.array([0, 1, 2, 3, 4, 3, 2, 1, 0], dtype=float)
        idx, recon, delta = downsample_reconstruct(y, "laplacian_max", 1)
        assert idx.tolist() == [0, 4, 8]
        assert np.array_equal(recon, y) and delta == 0.0

    def test_constant_signal_zero_gap(self):
        for mode in ("laplacian_max", "laplacian_min"):
            assert downsample_reconstruct(np.full(10, -1.5), mode, 3)[2] == 0.0

    def test_ties_prefer_smaller_index(self):
        # a constant signal has zero variation everywhere
        assert select_samples(np.ones(8), "laplacian_max", 2).tolist() == [0, 1, 7]
        assert select_samples(np.ones(8), "laplacian_min", 3).tolist() == [0, 1, 2, 7]

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            select_samples(np.zeros(5), "laplacian_max", 6)
        with pytest.raises(ValueError):
            select_samples(np.zeros(5), "laplacian_max", 0)
        with pytest.raises(ValueError):
            select_samples(np.zeros(5), "median", 2)

    @given(signals, st.data())
    def test_reconstruction_passes_through_samples(self, y, data):
        k = data.draw(st.integers(1, y.size))
        mode = data.draw(st.sampled_from(["laplacian_max", "laplacian_min"]))
        idx, recon, _ = downsample_reconstruct(y, mode, k)
        assert idx[0] == 0 and idx[-1] == y.size - 1
        assert np.array_equal(recon[idx], y[idx])
        assert energy(recon) >= 0.0


class TestDemo:
    def test_maxima_win_at_one_third(self):
        cfg = DemoConfig()
        assert cfg.ks == (9,)
        assert run_demo(cfg)["summary"]["9"]["max_win_rate"] >= 0.9

    def test_median_gap_non_increasing_in_k(self):
        summary = run_demo(DemoConfig(ks=tuple(range(1, 26))))["summary"]
        medians = [summary[str(k)]["median_abs_delta_max"] for k in range(1, 26)]
        assert all(b <= a for a, b in zip(medians, medians[1:]))
        assert medians[-1] == 0.0

    def test_noise_free_low_frequency_limit(self):
        sig = generate_signal(25, terms=2, seed=5)
        gaps = [abs(downsample_reconstruct(sig, m, 25)[2]) for m in ("laplacian_max", "laplacian_min")]
        assert gaps == [0.0, 0.0]

    def test_csv_is_deterministic(self):
        cfg = DemoConfig(seeds=5)
        text = rows_to_csv(run_demo(cfg)["rows"])
        assert text == rows_to_csv(run_demo(cfg)["rows"])
        assert text.splitlines()[0] == "seed,k,mode,E_orig,E_recon,delta_E"
        assert len(text.splitlines()) == 1 + 5 * 2

    def test_bad_config(self):
        with pytest.raises(ValueError):
            DemoConfig(ks=(30,))
        with pytest.raises(ValueError):
            DemoConfig(seeds=0)
