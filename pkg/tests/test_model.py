import numpy as np
import pytest

from csisense.model import (CsiFrame, CsiTrace, DynamicPath, StaticPath, StaticPathSet,
                            SyntheticChannelConfig, TraceMeta, action_catalog,
                            action_speed_profile, generate_trace, piecewise_displacement,
                            tap_profile)

from oracles import idft_direct, spectrum_peak_hz

WAVELENGTH = 0.0566


def static_set(reflector_gain=0.25 + 0.1j, reflector_delay=40e-9):
    return StaticPathSet(paths=(StaticPath(0.0, 1.0 + 0.0j),
                                StaticPath(reflector_delay, reflector_gain)))


def make_config(dynamic=(), noise_std=0.0, rate=250.0, seed=5, pairs=2, subcarriers=8,
                freq_offset=0.0, jitter=0.2):
    return SyntheticChannelConfig(
        wavelength=WAVELENGTH, static=static_set(), dynamic=tuple(dynamic),
        freq_offset=freq_offset, noise_std=noise_std, sample_rate=rate,
        pairs=pairs, subcarriers=subcarriers, rng_seed=seed, pair_gain_jitter=jitter)


class TestPiecewiseDisplacement:
    def test_constant_speed(self):
        t = np.array([0.0, 0.5, 2.0])
        d = piecewise_displacement(t, ((np.inf, 0.5),))
        assert np.allclose(d, [0.0, 0.25, 1.0])

    def test_cycled_schedule(self):
        # 0.5s at +1, 0.5s at -1: net zero per cycle
        seg = ((0.5, 1.0), (0.5, -1.0))
        t = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 1.25])
        d = piecewise_displacement(t, seg)
        assert np.allclose(d, [0.0, 0.25, 0.5, 0.25, 0.0, 0.25])

    def test_multi_segment_accumulates(self):
        seg = ((1.0, 2.0), (1.0, 0.0))
        t = np.array([0.5, 1.5, 2.5, 3.5])
        assert np.allclose(piecewise_displacement(t, seg), [1.0, 2.0, 3.0, 4.0])


class TestGenerateTrace:
    def test_static_only_constant_equals_hs(self):
        cfg = make_config(jitter=0.0)
        trace = generate_trace(cfg, 1.0)
        assert len(trace) == 250
        # constant over time
        assert np.allclose(trace.gains, trace.gains[0], atol=0.0)
        # and equal to the analytic static channel
        freqs = cfg.subcarrier_freqs()
        hs = sum(p.gain * np.exp(-2j * np.pi * freqs * p.delay) for p in cfg.static.paths)
        assert np.allclose(trace.gains[0, 0], hs, atol=1e-12)

    def test_static_only_amplitude_never_varies(self):
        trace = generate_trace(make_config(noise_std=0.0), 1.0)
        amps = np.abs(trace.gains)
        assert np.ptp(amps, axis=0).max() == 0.0
        assert amps.var(axis=0).max() < 1e-30

    def test_single_path_doppler_peak(self):
        # one moving path at 0.5 m/s: |H|^2 beats at v/wavelength ~ 8.83 Hz
        dyn = DynamicPath(initial_distance=2.0, speed=0.5, attenuation=0.05)
        cfg = make_config([dyn])
        trace = generate_trace(cfg, 4.0)
        expected = 0.5 / WAVELENGTH
        bin_hz = 1.0 / 4.0
        for pair in range(cfg.pairs):
            for sc in range(cfg.subcarriers):
                power = np.abs(trace.gains[:, pair, sc]) ** 2
                peak = spectrum_peak_hz(power, cfg.sample_rate)
                assert abs(peak - expected) <= bin_hz

    def test_two_paths_have_cross_term_peak(self):
        dyn = (DynamicPath(initial_distance=2.0, speed=0.5, attenuation=0.1),
               DynamicPath(initial_distance=3.0, speed=1.5, attenuation=0.1))
        cfg = make_config(dyn)
        trace = generate_trace(cfg, 4.0)
        power = np.abs(trace.gains[:, 0, 0]) ** 2
        spec = np.abs(np.fft.rfft(power - power.mean()))
        freqs = np.fft.rfftfreq(len(power), 1.0 / cfg.sample_rate)
        floor = np.median(spec)
        for f in (0.5 / WAVELENGTH, 1.5 / WAVELENGTH, (1.5 - 0.5) / WAVELENGTH):
            window = np.abs(freqs - f) <= 1.0 / 4.0
            assert spec[window].max() > 10.0 * floor, f"no peak near {f:.2f} Hz"

    def test_freq_offset_rotates_phase_only(self):
        cfg0 = make_config(jitter=0.0)
        cfg1 = make_config(jitter=0.0, freq_offset=11.0)
        t0 = generate_trace(cfg0, 1.0)
        t1 = generate_trace(cfg1, 1.0)
        assert np.allclose(np.abs(t0.gains), np.abs(t1.gains), atol=1e-12)
        expected = np.exp(-2j * np.pi * 11.0 * t0.timestamps)
        ratio = t1.gains[:, 0, 0] / t0.gains[:, 0, 0]
        assert np.allclose(ratio, expected, atol=1e-10)

    def test_deterministic_bit_identical(self):
        dyn = DynamicPath(initial_distance=2.0, speed=0.4, attenuation=0.05)
        cfg = make_config([dyn], noise_std=0.01)
        a = generate_trace(cfg, 1.5)
        b = generate_trace(cfg, 1.5)
        assert np.array_equal(a.gains, b.gains)
        assert np.array_equal(a.timestamps, b.timestamps)

    def test_different_seeds_differ(self):
        cfg_a = make_config(noise_std=0.01, seed=1)
        cfg_b = make_config(noise_std=0.01, seed=2)
        assert not np.array_equal(generate_trace(cfg_a, 0.5).gains,
                                  generate_trace(cfg_b, 0.5).gains)

    def test_pair_jitter_gives_distinct_pairs(self):
        trace = generate_trace(make_config(), 0.5)
        assert not np.allclose(trace.gains[:, 0, :], trace.gains[:, 1, :])

    def test_frame_count(self):
        trace = generate_trace(make_config(rate=100.0), 1.999)
        assert len(trace) == 199

    def test_rejects_bad_duration(self):
        with pytest.raises(ValueError):
            generate_trace(make_config(), 0.0)
        with pytest.raises(ValueError):
            generate_trace(make_config(), -1.0)

    def test_rejects_path_through_zero_distance(self):
        dyn = DynamicPath(initial_distance=0.1, speed=-1.0, attenuation=0.1)
        with pytest.raises(ValueError, match="zero distance"):
            generate_trace(make_config([dyn]), 1.0)


class TestConfigValidation:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            make_config(rate=float("nan"))
        with pytest.raises(ValueError):
            SyntheticChannelConfig(wavelength=float("inf"), static=static_set())

    def test_rejects_aliasing_rate(self):
        # 2 m/s moves at 35 Hz; 60 Hz sampling is below 2x
        dyn = DynamicPath(initial_distance=2.0, speed=2.0, attenuation=0.1)
        with pytest.raises(ValueError, match="alias"):
            make_config([dyn], rate=60.0)

    def test_rejects_bad_paths(self):
        with pytest.raises(ValueError):
            StaticPathSet(paths=())
        with pytest.raises(ValueError):
            DynamicPath(initial_distance=0.0)
        with pytest.raises(ValueError):
            DynamicPath(initial_distance=1.0, attenuation=-0.1)
        with pytest.raises(ValueError):
            DynamicPath(initial_distance=1.0, schedule=((0.0, 1.0),))

    def test_los_is_min_delay(self):
        s = StaticPathSet(paths=(StaticPath(3e-8, 0.5 + 0j), StaticPath(1e-8, 0.1 + 0j)))
        assert s.los.delay == 1e-8


class TestTraceInvariants:
    def test_rejects_nonincreasing_timestamps(self):
        with pytest.raises(ValueError):
            CsiTrace(timestamps=np.array([0.0, 0.1, 0.1]),
                     gains=np.zeros((3, 1, 2), dtype=complex))

    def test_rejects_short_duration_meta(self):
        with pytest.raises(ValueError):
            CsiTrace(timestamps=np.array([0.0, 1.0]),
                     gains=np.ones((2, 1, 2), dtype=complex),
                     meta=TraceMeta(duration=0.5))

    def test_frame_view(self):
        trace = generate_trace(make_config(), 0.1)
        frame = trace.frame(3)
        assert frame.timestamp == trace.timestamps[3]
        assert np.array_equal(frame.gains, trace.gains[3])


class TestTapProfile:
    def test_flat_spectrum_is_impulse(self):
        frame = CsiFrame(0.0, np.ones((1, 30), dtype=complex))
        taps = tap_profile(frame, 0)
        assert taps.shape == (30,)
        assert abs(taps[0] - 1.0) < 1e-12
        assert taps[1:].max() < 1e-12

    def test_los_only_concentrates_in_tap0(self):
        cfg = SyntheticChannelConfig(
            wavelength=WAVELENGTH,
            static=StaticPathSet(paths=(StaticPath(0.0, 0.8 + 0.3j),)),
            pairs=1, subcarriers=30, rng_seed=0, pair_gain_jitter=0.0)
        trace = generate_trace(cfg, 0.1)
        taps = tap_profile(trace.frame(0), 0)
        assert taps[0] > 0.99 * np.abs(0.8 + 0.3j)
        assert taps[1:].max() < 1e-9

    def test_two_path_peaks_and_direct_idft_oracle(self):
        s, spacing = 30, 312.5e3
        delay = 3.0 / (s * spacing)
        cfg = SyntheticChannelConfig(
            wavelength=WAVELENGTH,
            static=StaticPathSet(paths=(StaticPath(0.0, 1.0 + 0j),
                                        StaticPath(delay, 0.5 + 0j))),
            pairs=1, subcarriers=s, subcarrier_spacing=spacing,
            rng_seed=0, pair_gain_jitter=0.0)
        frame = generate_trace(cfg, 0.1).frame(0)
        taps = tap_profile(frame, 0)
        oracle = np.abs(idft_direct(frame.gains[0]))
        assert np.abs(taps - oracle).max() < 1e-10
        top2 = set(np.argsort(taps)[-2:])
        assert top2 == {0, 3}

    def test_out_of_range_pair(self):
        frame = CsiFrame(0.0, np.ones((2, 8), dtype=complex))
        with pytest.raises(IndexError):
            tap_profile(frame, 2)


class TestActionProfiles:
    def test_still_is_all_zero(self):
        assert all(v == 0.0 for _, v in action_speed_profile("still"))

    def test_fast_punch_faster_than_slow_wave(self):
        fast = max(abs(v) for _, v in action_speed_profile("fast-punch"))
        slow = max(abs(v) for _, v in action_speed_profile("slow-wave"))
        assert fast > slow

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown action"):
            action_speed_profile("cartwheel")

    def test_catalog_contains_documented_actions(self):
        names = action_catalog()
        for required in ("still", "slow-wave", "fast-punch", "walk-like"):
            assert required in names
        assert len(names) >= 6

    @pytest.mark.parametrize("fast,slow", [("fast-punch", "slow-wave"),
                                           ("run-like", "walk-like")])
    def test_faster_action_has_higher_dominant_frequency(self, fast, slow):
        peaks = {}
        for name in (fast, slow):
            dyn = DynamicPath(initial_distance=5.0, attenuation=0.05,
                              schedule=action_speed_profile(name))
            trace = generate_trace(make_config([dyn], pairs=1, subcarriers=4), 4.0)
            power = np.abs(trace.gains[:, 0, 0]) ** 2
            peaks[name] = spectrum_peak_hz(power, 250.0)
        assert peaks[fast] > peaks[slow]
