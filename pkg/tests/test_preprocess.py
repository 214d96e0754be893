import numpy as np
import pytest

from csisense.model import CsiTrace, TraceMeta
from csisense.preprocess import (StreamMatrix, butter_lowpass, interpolate, lowpass,
                                 normalize)

from oracles import freq_response_db, moving_mean_direct


def trace_from_amplitudes(ts, amps):
    """Real amplitudes as zero-phase complex gains, single pair."""
    gains = np.asarray(amps, dtype=np.complex128)[:, None, :]
    return CsiTrace(timestamps=np.asarray(ts, dtype=np.float64), gains=gains,
                    meta=TraceMeta(nominal_rate=1000.0))


def stream(values, rate=1000.0):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    smap = tuple((0, s) for s in range(values.shape[1]))
    return StreamMatrix(values=values, rate=rate, stream_map=smap)


class TestInterpolate:
    def test_midpoint_example(self):
        trace = trace_from_amplitudes([0.0, 0.002], [[0.0], [2.0]])
        m = interpolate(trace, 1000.0)
        assert m.values.shape == (3, 1)
        assert np.allclose(m.values[:, 0], [0.0, 1.0, 2.0])
        assert m.rate == 1000.0

    def test_on_grid_identity(self):
        rng = np.random.default_rng(0)
        ts = np.arange(64) / 1000.0
        amps = rng.uniform(0.5, 2.0, size=(64, 3))
        m = interpolate(trace_from_amplitudes(ts, amps), 1000.0)
        assert m.values.shape == (64, 3)
        assert np.allclose(m.values, amps, atol=1e-12)

    def test_jittered_constant_stays_constant(self):
        rng = np.random.default_rng(1)
        ts = np.cumsum(rng.uniform(0.5e-3, 2.0e-3, size=50))
        amps = np.full((50, 2), 1.37)
        m = interpolate(trace_from_amplitudes(ts, amps), 1000.0)
        assert np.allclose(m.values, 1.37, atol=1e-12)

    def test_stream_map_order(self):
        ts = [0.0, 0.001]
        gains = np.arange(2 * 2 * 3).reshape(2, 2, 3).astype(complex)
        trace = CsiTrace(timestamps=np.array(ts), gains=gains,
                         meta=TraceMeta(nominal_rate=1000.0))
        m = interpolate(trace, 1000.0)
        assert m.stream_map == ((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2))
        assert np.allclose(m.values[0], np.abs(gains[0]).ravel())

    def test_needs_two_frames(self):
        trace = trace_from_amplitudes([0.0], [[1.0]])
        with pytest.raises(ValueError, match="2 frames"):
            interpolate(trace, 1000.0)

    def test_rejects_bad_rate(self):
        trace = trace_from_amplitudes([0.0, 0.001], [[1.0], [1.0]])
        with pytest.raises(ValueError):
            interpolate(trace, 0.0)


class TestLowpass:
    def test_dc_unchanged(self):
        m = stream(np.full(500, 3.3))
        out = lowpass(m, order=5, cutoff=50.0)
        assert np.allclose(out.values, 3.3, atol=1e-9)

    def test_cutoff_tone_halves(self):
        # forward-backward squares the -3.01 dB cutoff magnitude: (1/sqrt(2))^2
        t = np.arange(1000) / 1000.0
        m = stream(np.sin(2 * np.pi * 50.0 * t))
        out = lowpass(m, order=5, cutoff=50.0).values[:, 0]
        central = out[200:800]
        amp = np.sqrt(2.0 * np.mean(central ** 2))
        assert abs(amp - 0.5) < 0.02

    def test_two_octaves_above_cutoff_suppressed(self):
        t = np.arange(1000) / 1000.0
        m = stream(np.sin(2 * np.pi * 200.0 * t))
        out = lowpass(m, order=5, cutoff=50.0).values[:, 0]
        residual = np.abs(out[200:800]).max()
        assert residual <= 0.002
        # the designed filter's own numeric response must predict this
        b, a = butter_lowpass(5, 50.0, 1000.0)
        single_pass_db = freq_response_db(b, a, 200.0, 1000.0)
        assert 10.0 ** (2.0 * single_pass_db / 20.0) <= 0.002

    def test_shape_and_map_preserved(self):
        rng = np.random.default_rng(2)
        m = stream(rng.normal(size=(400, 5)))
        out = lowpass(m)
        assert out.values.shape == m.values.shape
        assert out.rate == m.rate
        assert out.stream_map == m.stream_map

    def test_zero_phase_on_symmetric_pulse(self):
        t = np.arange(600)
        pulse = np.exp(-0.5 * ((t - 300) / 12.0) ** 2)
        out = lowpass(stream(pulse)).values[:, 0]
        assert np.argmax(out) == 300

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_bounded_input_bounded_output(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1.0, 1.0, size=700)
        out = lowpass(stream(x)).values[:, 0]
        assert np.isfinite(out).all()
        assert np.abs(out).max() <= 1.5

    def test_rejects_cutoff_at_nyquist(self):
        m = stream(np.zeros(100), rate=100.0)
        with pytest.raises(ValueError):
            lowpass(m, cutoff=50.0)

    def test_rejects_too_short_input(self):
        with pytest.raises(ValueError, match="samples"):
            lowpass(stream(np.zeros(10)))


class TestNormalize:
    def test_constant_goes_to_zero(self):
        out = normalize(stream(np.full((200, 2), 7.0)), window_s=0.05)
        assert np.allclose(out.values, 0.0, atol=1e-12)

    def test_impulse_keeps_one_minus_inverse_window(self):
        w = 15
        x = np.zeros(301)
        x[150] = 1.0
        out = normalize(stream(x), window_s=w / 1000.0).values[:, 0]
        assert abs(out[150] - (1.0 - 1.0 / w)) < 1e-12

    @pytest.mark.parametrize("window", [1, 2, 7, 50, 301])
    def test_matches_direct_loop_oracle(self, window):
        rng = np.random.default_rng(window)
        x = rng.normal(size=(301, 3))
        out = normalize(stream(x), window_s=window / 1000.0).values
        expected = x - moving_mean_direct(x, window)
        assert np.abs(out - expected).max() < 1e-9

    def test_full_window_removes_global_mean(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(250, 2)) + 3.0
        # window far beyond the stream length: every window is the whole stream
        out = normalize(stream(x), window_s=5.0).values
        assert np.allclose(out, x - x.mean(axis=0), atol=1e-9)
        assert np.abs(out.mean(axis=0)).max() < 1e-9

    def test_shape_preserved(self):
        m = stream(np.random.default_rng(3).normal(size=(123, 4)))
        out = normalize(m)
        assert out.values.shape == m.values.shape
        assert out.stream_map == m.stream_map

    def test_rejects_bad_window(self):
        m = stream(np.zeros(100))
        with pytest.raises(ValueError):
            normalize(m, window_s=0.0)
        with pytest.raises(ValueError):
            normalize(m, window_s=1e-9)


class TestStreamMatrixValidation:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            stream(np.array([1.0, np.nan]))

    def test_rejects_map_mismatch(self):
        with pytest.raises(ValueError):
            StreamMatrix(values=np.zeros((4, 2)), rate=10.0, stream_map=((0, 0),))

    def test_pair_columns(self):
        values = np.zeros((5, 4))
        smap = ((0, 0), (0, 1), (1, 0), (1, 1))
        m = StreamMatrix(values=values, rate=10.0, stream_map=smap)
        assert m.pair_columns(1).tolist() == [2, 3]
        assert m.n_pairs == 2
        with pytest.raises(IndexError):
            m.pair_columns(5)
