import numpy as np
import pytest
from scipy.stats import kstest

from biopuf import metrics, optics
from biopuf.exceptions import DimensionError, ParameterError
from biopuf.optics import (Challenge, JitterParams, OpticsConfig,
                           SurfaceParams, VirtualPuf, angular_spectrum,
                           fourier_shift, make_challenge, mint_puf, remeasure,
                           render_intensity, render_speckle)


class TestMintPuf:
    def test_deterministic(self):
        params = SurfaceParams()
        a = mint_puf(42, params)
        b = mint_puf(42, params)
        assert np.array_equal(a.height_map, b.height_map)

    def test_distinct_seeds_uncorrelated(self):
        a = mint_puf(1)
        b = mint_puf(2)
        assert abs(metrics.correlation(a.height_map, b.height_map)) < 0.1

    def test_rms_height(self):
        puf = mint_puf(5, SurfaceParams(rms_height=2.0))
        assert 1.9 <= puf.height_map.std(ddof=1) <= 2.1

    @pytest.mark.parametrize("kwargs,field", [
        (dict(grid_dims=(16, 256)), "grid_dims"),
        (dict(pitch=0.0), "pitch"),
        (dict(correlation_length=1.0), "correlation_length"),
        (dict(rms_height=-1.0), "rms_height"),
        (dict(refractive_index=1.0), "refractive_index"),
    ])
    def test_invalid_params_name_field(self, kwargs, field):
        with pytest.raises(ParameterError, match=field):
            mint_puf(1, SurfaceParams(**kwargs))

    def test_descriptor_round_trip(self, tmp_path):
        puf = mint_puf(9, SurfaceParams(rms_height=3.0))
        path = tmp_path / "puf.json"
        puf.save(path)
        again = VirtualPuf.load(path)
        assert again.puf_id == puf.puf_id
        assert np.array_equal(again.height_map, puf.height_map)


class TestMakeChallenge:
    def test_deterministic(self):
        assert np.array_equal(make_challenge(3).phase_map,
                              make_challenge(3).phase_map)

    def test_uniform_phases(self):
        chal = make_challenge(11, (100, 100))
        stat = kstest(chal.phase_map.ravel(),
                      "uniform", args=(0.0, 2.0 * np.pi)).statistic
        # 5% critical value for n = 1e4 is 1.358/sqrt(n)
        assert stat < 1.358 / 100.0

    def test_single_pixel(self):
        chal = make_challenge(1, (1, 1))
        assert 0.0 <= chal.phase_map[0, 0] < 2.0 * np.pi

    def test_bad_dims(self):
        with pytest.raises(ParameterError):
            make_challenge(1, (0, 4))

    def test_descriptor_round_trip(self, tmp_path):
        chal = make_challenge(17, (64, 64))
        path = tmp_path / "chal.json"
        chal.save(path)
        again = Challenge.load(path)
        assert np.array_equal(again.phase_map, chal.phase_map)


class TestPropagation:
    def test_energy_conserved(self, challenge):
        u = np.exp(1j * challenge.phase_map)
        power_in = (np.abs(u) ** 2).sum()
        for z in (5.0e4, 1.0e5):
            u_out = angular_spectrum(u, 0.6328, z, 2.0)
            power_out = (np.abs(u_out) ** 2).sum()
            assert abs(power_out - power_in) / power_in <= 1e-6

    def test_zero_distance_identity(self, challenge):
        u = np.exp(1j * challenge.phase_map)
        assert angular_spectrum(u, 0.6328, 0.0, 2.0) is u

    def test_bad_wavelength(self, challenge):
        with pytest.raises(ParameterError):
            angular_spectrum(np.ones((8, 8), complex), -1.0, 10.0, 2.0)


class TestRenderSpeckle:
    def test_deterministic(self, puf, challenge):
        a = render_speckle(puf, challenge)
        b = render_speckle(puf, challenge)
        assert np.array_equal(a.intensity, b.intensity)

    def test_contrast_fully_developed(self, puf, challenge):
        intensity = render_intensity(puf, challenge)
        contrast = intensity.std() / intensity.mean()
        assert 0.8 <= contrast <= 1.2

    def test_quantization_range(self, pattern):
        assert pattern.intensity.min() >= 0
        assert pattern.intensity.max() == 255

    def test_coarse_challenge_upsampled(self, puf):
        coarse = make_challenge(5, (128, 128))
        pat = render_speckle(puf, coarse)
        assert pat.dims == (256, 256)

    def test_incompatible_grids(self, puf):
        with pytest.raises(DimensionError):
            render_speckle(puf, make_challenge(5, (100, 100)))

    def test_aspect_ratio_mismatch(self, puf):
        with pytest.raises(DimensionError, match="aspect"):
            render_speckle(puf, make_challenge(5, (128, 64)))

    def test_fleet_uniqueness(self, challenge):
        patterns = [render_speckle(mint_puf(100 + i), challenge)
                    for i in range(20)]
        for i in range(len(patterns) - 1):
            for j in range(i + 1, len(patterns)):
                c = metrics.correlation(patterns[i].intensity,
                                        patterns[j].intensity)
                assert abs(c) < 0.1

    def test_pgm_round_trip(self, pattern, tmp_path):
        path = tmp_path / "speckle.pgm"
        pattern.to_pgm(path)
        again = optics.SpecklePattern.from_pgm(path)
        assert np.array_equal(again.intensity, pattern.intensity)


class TestRemeasure:
    def test_identity_jitter(self, puf, challenge, pattern):
        out = remeasure(puf, challenge, jitter=JitterParams())
        assert np.array_equal(out.intensity, pattern.intensity)

    def test_default_jitter_high_correlation(self, puf, challenge, pattern):
        for i in range(5):
            jitter = optics.draw_jitter(99, i)
            out = remeasure(puf, challenge, jitter=jitter)
            assert metrics.correlation(pattern.intensity, out.intensity) >= 0.97

    def test_large_shift_decorrelates(self, puf, challenge, pattern):
        jitter = JitterParams(lateral_shift=(20.0, 0.0), max_shift=50.0)
        out = remeasure(puf, challenge, jitter=jitter)
        assert metrics.correlation(pattern.intensity, out.intensity) < 0.1

    def test_shift_bound_enforced(self):
        with pytest.raises(ParameterError, match="max_shift"):
            JitterParams(lateral_shift=(2.0, 0.0)).validate()

    def test_noise_deterministic(self, puf, challenge):
        jitter = JitterParams(noise_sigma=0.01, noise_seed=5)
        a = remeasure(puf, challenge, jitter=jitter)
        b = remeasure(puf, challenge, jitter=jitter)
        assert np.array_equal(a.intensity, b.intensity)

    def test_whole_pixel_shift_covariance(self, puf, challenge):
        # k-pixel shift via the sub-pixel path == rolling the height map
        pitch = puf.params.pitch
        jitter = JitterParams(lateral_shift=(3 * pitch, 2 * pitch),
                              max_shift=10 * pitch)
        via_fourier = remeasure(puf, challenge, jitter=jitter)
        rolled = np.roll(np.roll(puf.height_map, 2, axis=0), 3, axis=1)
        direct = render_intensity(puf, challenge, height_map=rolled)
        fourier = render_intensity(
            puf, challenge,
            height_map=fourier_shift(puf.height_map, (2.0, 3.0)))
        assert np.allclose(fourier, direct, rtol=1e-9, atol=1e-9 * direct.max())
        assert via_fourier.dims == (256, 256)


class TestFourierShift:
    def test_integer_shift_equals_roll(self, puf):
        h = puf.height_map
        shifted = fourier_shift(h, (3.0, -2.0))
        rolled = np.roll(np.roll(h, 3, axis=0), -2, axis=1)
        assert np.abs(shifted - rolled).max() <= 1e-9 * np.abs(h).max()

    def test_zero_shift_identity(self, puf):
        shifted = fourier_shift(puf.height_map, (0.0, 0.0))
        assert np.allclose(shifted, puf.height_map, atol=1e-12)
