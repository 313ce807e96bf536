import numpy as np
import pytest
from scipy.signal import fftconvolve

from rlsfi import (
    ArrayGeometry,
    AudioBuffer,
    BeamformerFilters,
    Direction,
    SceneSource,
    SceneSpec,
    filter_and_sum,
    reference_signals,
    render_scene,
    speech_shaped_noise,
)
from rlsfi.dsp import fractional_delay_kernel

FS = 16000.0
LOOK = Direction(90.0, 90.0)


def naive_filter_and_sum(taps, x):
    n_ch, t_len = x.shape
    L = taps.shape[1]
    y = np.zeros(t_len + L - 1)
    for n in range(n_ch):
        for l in range(L):
            y[l : l + t_len] += taps[n, l] * x[n]
    return y


class TestFilterAndSum:
    def test_single_channel_identity(self, rng):
        x = rng.standard_normal(200)
        taps = np.zeros((1, 8))
        taps[0, 0] = 1.0
        y = filter_and_sum(BeamformerFilters(taps, FS), AudioBuffer(FS, x))
        assert np.allclose(y.samples[0][:200], x, atol=1e-12)
        assert np.allclose(y.samples[0][200:], 0.0, atol=1e-12)

    def test_averaging_identical_channels(self, rng):
        x = rng.standard_normal(300)
        buf = AudioBuffer(FS, np.tile(x, (4, 1)))
        taps = np.zeros((4, 6))
        taps[:, 0] = 0.25
        y = filter_and_sum(BeamformerFilters(taps, FS), buf)
        assert np.allclose(y.samples[0][:300], x, atol=1e-12)

    def test_matches_direct_convolution_oracle(self, rng):
        x = rng.standard_normal((3, 400))
        taps = rng.standard_normal((3, 32))
        y = filter_and_sum(BeamformerFilters(taps, FS), AudioBuffer(FS, x))
        want = naive_filter_and_sum(taps, x)
        assert np.max(np.abs(y.samples[0] - want)) <= 1e-10

    def test_time_invariance(self, rng):
        x = rng.standard_normal((2, 256))
        taps = rng.standard_normal((2, 16))
        bf = BeamformerFilters(taps, FS)
        shift = 13
        shifted = np.concatenate([np.zeros((2, shift)), x], axis=1)
        y0 = filter_and_sum(bf, AudioBuffer(FS, x)).samples[0]
        y1 = filter_and_sum(bf, AudioBuffer(FS, shifted)).samples[0]
        assert np.max(np.abs(y1[shift : shift + y0.size] - y0)) <= 1e-12

    def test_channel_count_mismatch(self, rng):
        taps = rng.standard_normal((3, 8))
        with pytest.raises(ValueError):
            filter_and_sum(BeamformerFilters(taps, FS), AudioBuffer(FS, np.zeros((2, 50))))

    def test_delay_and_sum_noise_rms(self, rng):
        n_mics = 12
        x = rng.standard_normal((n_mics, int(10 * FS)))
        taps = np.zeros((n_mics, 4))
        taps[:, 0] = 1.0 / n_mics
        y = filter_and_sum(BeamformerFilters(taps, FS), AudioBuffer(FS, x))
        ratio = np.sqrt(np.mean(y.samples[0][: x.shape[1]] ** 2)) * np.sqrt(n_mics)
        assert abs(ratio - 1.0) <= 0.1


class TestFractionalDelay:
    def test_integer_delay_is_exact_impulse(self):
        kernel, shift = fractional_delay_kernel(40.0)
        nz = np.flatnonzero(np.abs(kernel) > 1e-15)
        assert nz.size == 1
        assert kernel[nz[0]] == pytest.approx(1.0, abs=1e-15)
        assert nz[0] + shift == 40

    def test_half_sample_delay_symmetry(self):
        kernel, shift = fractional_delay_kernel(40.5)
        center = 40.5 - shift
        k = np.arange(kernel.size)
        lhs = kernel[np.abs(k - (center - 0.5)) < 1e-9]
        rhs = kernel[np.abs(k - (center + 0.5)) < 1e-9]
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_in_band_magnitude(self):
        for delay in (40.5, 33.7, 51.2):
            kernel, _ = fractional_delay_kernel(delay)
            spec = np.fft.rfft(kernel, 4096)
            f = np.fft.rfftfreq(4096, 1.0 / FS)
            band = (f >= 300.0) & (f <= 5000.0)
            assert np.max(np.abs(np.abs(spec[band]) - 1.0)) <= 1e-3


class TestRenderScene:
    def test_two_mic_interchannel_delay(self):
        # spacing chosen so the inter-channel delay is exactly 10 samples
        x = 343.0 * 10 / (2 * FS)
        geom = ArrayGeometry(np.array([[x, 0.0, 0.0], [-x, 0.0, 0.0]]))
        sig = speech_shaped_noise(1.0, FS, seed=4)
        scene = SceneSpec((SceneSource(sig, Direction(0.0, 90.0)),), 0, 1.0)
        render = render_scene(scene, geom, FS)
        a = render.stems[0].samples[0]
        b = render.stems[0].samples[1]
        cc = fftconvolve(a, b[::-1])
        lag = np.argmax(cc) - (b.size - 1)
        assert lag == 10

    def test_fractional_interchannel_delay(self):
        x = 343.0 * 10.35 / (2 * FS)
        geom = ArrayGeometry(np.array([[x, 0.0, 0.0], [-x, 0.0, 0.0]]))
        sig = speech_shaped_noise(1.0, FS, seed=4)
        scene = SceneSpec((SceneSource(sig, Direction(0.0, 90.0)),), 0, 1.0)
        render = render_scene(scene, geom, FS)
        a = render.stems[0].samples[0]
        b = render.stems[0].samples[1]
        cc = fftconvolve(a, b[::-1])
        i = int(np.argmax(cc))
        denom = 2 * (cc[i - 1] - 2 * cc[i] + cc[i + 1])
        frac = (cc[i - 1] - cc[i + 1]) / denom
        lag = i - (b.size - 1) + frac
        assert abs(lag - 10.35) <= 0.1

    def test_centroid_mic_unit_gain_in_band(self):
        geom = ArrayGeometry(np.array([[0.0, 0.0, 0.0]]))
        sig = speech_shaped_noise(1.0, FS, seed=7)
        scene = SceneSpec((SceneSource(sig, LOOK),), 0, 1.0)
        render = render_scene(scene, geom, FS)
        stem = render.stems[0].samples[0]
        spec_out = np.fft.rfft(stem)
        spec_in = np.fft.rfft(sig, stem.size)
        f = np.fft.rfftfreq(stem.size, 1.0 / FS)
        band = (f >= 300.0) & (f <= 5000.0)
        assert np.max(np.abs(np.abs(spec_out[band] / spec_in[band]) - 1.0)) <= 1e-3

    def test_mix_is_sum_of_stems_without_noise(self):
        geom = ArrayGeometry(np.array([[0.05, 0, 0], [-0.05, 0, 0]]))
        s1 = speech_shaped_noise(0.5, FS, seed=1)
        s2 = speech_shaped_noise(0.5, FS, seed=2)
        scene = SceneSpec(
            (SceneSource(s1, LOOK, gain_db=-3.0), SceneSource(s2, Direction(0.0, 73.0))),
            0,
            0.5,
        )
        render = render_scene(scene, geom, FS)
        total = render.stems[0].samples + render.stems[1].samples
        assert np.array_equal(render.mix.samples, total)

    def test_determinism_with_noise_seed(self, head_geom):
        sig = speech_shaped_noise(0.25, FS, seed=3)
        scene = SceneSpec((SceneSource(sig, LOOK),), 0, 0.25, sensor_noise_snr_db=20.0, seed=99)
        r1 = render_scene(scene, head_geom, FS)
        r2 = render_scene(scene, head_geom, FS)
        assert np.array_equal(r1.mix.samples, r2.mix.samples)

    def test_noise_snr_scaling(self, head_geom):
        sig = speech_shaped_noise(0.5, FS, seed=3)
        base = SceneSpec((SceneSource(sig, LOOK),), 0, 0.5, sensor_noise_snr_db=20.0, seed=99)
        quieter = SceneSpec((SceneSource(sig, LOOK),), 0, 0.5, sensor_noise_snr_db=40.0, seed=99)
        r1 = render_scene(base, head_geom, FS)
        r2 = render_scene(quieter, head_geom, FS)
        clean = render_scene(SceneSpec((SceneSource(sig, LOOK),), 0, 0.5), head_geom, FS)
        n1 = np.sqrt(np.mean((r1.mix.samples - clean.mix.samples) ** 2))
        n2 = np.sqrt(np.mean((r2.mix.samples - clean.mix.samples) ** 2))
        assert n1 / n2 == pytest.approx(10.0, rel=0.05)

    def test_hrtf_direction_must_be_on_grid(self, rng):
        from rlsfi import HrtfDataset, make_uniform_grid

        grid = make_uniform_grid(90.0, 90.0)
        geom = ArrayGeometry(rng.uniform(-0.1, 0.1, (3, 3)))
        ir = np.zeros((grid.size, 3, 8), dtype=np.float32)
        ir[:, :, 0] = 1.0
        ds = HrtfDataset(geom, grid, FS, ir)
        sig = speech_shaped_noise(0.1, FS, seed=5)
        ok = SceneSpec((SceneSource(sig, Direction(90.0, 90.0)),), 0, 0.1)
        render = render_scene(ok, None, FS, hrtf=ds)
        assert render.mix.num_channels == 3
        bad = SceneSpec((SceneSource(sig, Direction(92.0, 90.0)),), 0, 0.1)
        with pytest.raises(ValueError):
            render_scene(bad, None, FS, hrtf=ds)


class TestReferenceSignals:
    def test_target_only_scene_collapses(self, head_geom, rng):
        sig = speech_shaped_noise(0.25, FS, seed=8)
        scene = SceneSpec((SceneSource(sig, LOOK),), 0, 0.25)
        render = render_scene(scene, head_geom, FS)
        taps = rng.standard_normal((head_geom.num_mics, 64))
        refs = reference_signals(render, BeamformerFilters(taps, FS))
        assert np.array_equal(refs.input_ref.samples, refs.input_test.samples)
        assert np.array_equal(refs.output_ref.samples, refs.output_test.samples)

    def test_output_linearity(self, head_geom, rng):
        s1 = speech_shaped_noise(0.25, FS, seed=8)
        s2 = speech_shaped_noise(0.25, FS, seed=9)
        scene = SceneSpec(
            (SceneSource(s1, LOOK), SceneSource(s2, Direction(15.0, 73.0))), 0, 0.25
        )
        render = render_scene(scene, head_geom, FS)
        taps = rng.standard_normal((head_geom.num_mics, 64))
        bf = BeamformerFilters(taps, FS)
        refs = reference_signals(render, bf)
        y_parts = (
            filter_and_sum(bf, render.stems[0]).samples
            + filter_and_sum(bf, render.stems[1]).samples
        )
        assert np.max(np.abs(refs.output_test.samples - y_parts)) <= 1e-10

    def test_fig9b_matrix_is_enumerable(self):
        targets = [Direction(az, 90.0) for az in range(0, 181, 30)]
        interferers = [
            Direction(az % 360.0, el)
            for el in (90.0, 73.0)
            for az in range(15, 196, 30)
        ]
        assert len(targets) == 7
        assert len(interferers) == 14
        sig = np.ones(16)
        scenes = [
            SceneSpec((SceneSource(sig, t), SceneSource(sig, i)), 0, 0.001)
            for t in targets
            for i in interferers
        ]
        assert len(scenes) == 7 * 7 * 2


class TestSpeechShapedNoise:
    def test_deterministic_and_unit_rms(self):
        a = speech_shaped_noise(0.5, FS, seed=42)
        b = speech_shaped_noise(0.5, FS, seed=42)
        assert np.array_equal(a, b)
        assert np.sqrt(np.mean(a**2)) == pytest.approx(1.0, abs=1e-12)

    def test_spectral_tilt(self):
        x = speech_shaped_noise(4.0, FS, seed=1)
        spec = np.abs(np.fft.rfft(x)) ** 2
        f = np.fft.rfftfreq(x.size, 1.0 / FS)
        low = spec[(f > 200) & (f < 600)].mean()
        high = spec[(f > 4000) & (f < 6000)].mean()
        assert low > 10 * high  # strong rolloff above the speech band
