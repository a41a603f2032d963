import unittest

import numpy as np
import pytest

from pulsemap3d.core.errors import (
    DegenerateReference,
    EmptyMask,
    InvalidBand,
    NonPositiveBaseline,
    NoSpectralPeak,
    PreconditionError,
    SignalTooShort,
    SpanMismatch,
    TooShort,
    ZeroSignal,
    ZeroVariance,
)
from pulsemap3d.models import (
    AnalyticSignal,
    RgbFrameSequence,
    RgbSignal,
    ScalarSignal,
    SkinMask,
    SnrWindow,
)
from pulsemap3d.signals.filtering import (
    analytic,
    bandpass,
    detrend_normalize,
    lowpass,
    reference_factor,
    scale_reference,
)
from pulsemap3d.signals.pos import (
    green,
    pos,
    pos_array,
    reference_signal,
    skin_average,
    validate_reference,
)
from pulsemap3d.signals.spectral import (
    dominant_frequency,
    next_pow2,
    padded_length,
    power_spectrum,
    snr,
    snr_bands,
    snr_detail,
)

FS = 30.0
KAPPA = np.array([0.33, 0.77, 0.53])


def _sine(freq_hz, n=600, fs=FS, phase=0.0):
    t = np.arange(n) / fs
    return np.sin(2 * np.pi * freq_hz * t + phase)


def _pulsing_rgb(freq_hz=1.2, n=600, depth=0.01, base=(180.0, 120.0, 90.0)):
    pulse = _sine(freq_hz, n)
    return np.asarray(base)[None, :] * (1.0 + depth * KAPPA[None, :] * pulse[:, None])


class TestFiltering(unittest.TestCase):
    def test_bandpass_keeps_pulse_and_drops_drift(self):
        x = _sine(1.2) + 0.5 * _sine(0.05)
        out = bandpass(ScalarSignal(x, FS), 0.4, 4.0).samples
        middle = slice(200, 400)
        np.testing.assert_allclose(out[middle], _sine(1.2)[middle], atol=0.05)

    def test_lowpass_removes_fast_component(self):
        x = 1.0 + 0.5 * _sine(8.0)
        out = lowpass(ScalarSignal(x, FS), 0.4).samples
        np.testing.assert_allclose(out[100:500], 1.0, atol=0.01)

    def test_invalid_band(self):
        s = ScalarSignal(_sine(1.0), FS)
        with self.assertRaises(InvalidBand):
            bandpass(s, 4.0, 0.4)
        with self.assertRaises(InvalidBand):
            bandpass(s, 0.4, 15.0)
        with self.assertRaises(InvalidBand):
            lowpass(s, 0.0)

    def test_too_short(self):
        with self.assertRaises(TooShort):
            bandpass(ScalarSignal(_sine(1.0, n=10), FS), 0.4, 4.0)

    def test_detrend_normalize_is_scale_invariant(self):
        x = 100.0 * (1.0 + 0.01 * _sine(1.2))
        a = detrend_normalize(ScalarSignal(x, FS), 0.4).samples
        b = detrend_normalize(ScalarSignal(7.0 * x, FS), 0.4).samples
        np.testing.assert_allclose(a, b, atol=1e-12)
        np.testing.assert_allclose(a[150:450], 0.01 * _sine(1.2)[150:450], atol=2e-3)

    def test_detrend_normalize_rejects_dark_signal(self):
        with self.assertRaises(NonPositiveBaseline):
            detrend_normalize(ScalarSignal(np.zeros(600), FS), 0.4)

    def test_bandpass_stopband_attenuation(self):
        n = 3600
        middle = slice(n // 4, 3 * n // 4)
        lo, hi = 0.4, 4.0
        for freq in (lo / 2, min(2 * hi, 0.95 * FS / 2)):
            x = _sine(freq, n=n)
            out = bandpass(ScalarSignal(x, FS), lo, hi).samples
            ratio = np.sqrt(np.mean(out[middle] ** 2) / np.mean(x[middle] ** 2))
            self.assertLess(20 * np.log10(ratio), -40.0)

    def test_bandpass_is_linear(self):
        rng = np.random.default_rng(8)
        x, y = rng.standard_normal((2, 600))

        def bp(v):
            return bandpass(ScalarSignal(v, FS), 0.4, 4.0).samples

        np.testing.assert_allclose(bp(2.5 * x - 0.7 * y), 2.5 * bp(x) - 0.7 * bp(y), atol=1e-9)

    def test_analytic_has_no_negative_frequencies(self):
        rng = np.random.default_rng(9)
        x = bandpass(ScalarSignal(rng.standard_normal(600), FS), 0.7, 3.0)
        spec = np.fft.fft(analytic(x).samples)
        negative = spec[len(spec) // 2 + 1 :]
        self.assertLess(np.max(np.abs(negative)), 1e-9 * np.max(np.abs(spec)))

    def test_analytic_real_part_is_input(self):
        x = _sine(1.3)
        np.testing.assert_allclose(analytic(ScalarSignal(x, FS)).samples.real, x, atol=1e-12)


class TestScaleReference(unittest.TestCase):
    def test_self_projection_is_one(self):
        h = analytic(ScalarSignal(3.0 * _sine(1.2, phase=0.7), FS))
        out = scale_reference(h).samples
        proj = np.sum(out.real * out)
        self.assertAlmostEqual(proj.real, 1.0, places=9)
        self.assertAlmostEqual(proj.imag, 0.0, places=9)

    def test_scaled_reference_is_a_fixed_point(self):
        h = scale_reference(analytic(ScalarSignal(_sine(1.2), FS)))
        np.testing.assert_allclose(scale_reference(h).samples, h.samples, atol=1e-9)

    def test_degenerate(self):
        with self.assertRaises(DegenerateReference):
            scale_reference(AnalyticSignal(np.zeros(64, dtype=complex), FS))

    def test_circular_reference_gets_a_real_factor(self):
        t = np.arange(600) / FS
        for freq in (1.25, 1.5):
            h = analytic(ScalarSignal(np.cos(2 * np.pi * freq * t), FS))
            self.assertLess(abs(reference_factor(h).imag), 1e-12)
            alpha = scale_reference(h).samples[0] / h.samples[0]
            self.assertLess(abs(alpha.imag), 1e-12)
            self.assertAlmostEqual(alpha.real, np.sqrt(2.0 / 600), places=9)

    def test_contract_holds_for_random_band_limited_references(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            n = int(rng.integers(300, 1200))
            lo = float(rng.uniform(0.5, 1.0))
            x = bandpass(ScalarSignal(rng.standard_normal(n), FS), lo, lo + 2.0)
            out = scale_reference(analytic(x)).samples
            self.assertLess(abs(np.sum(out.real * out) - 1.0), 1e-9)

    def test_factor_stays_within_a_quarter_turn(self):
        rng = np.random.default_rng(5)
        x = bandpass(ScalarSignal(rng.standard_normal(600), FS), 0.7, 3.0)
        alpha = reference_factor(analytic(x))
        self.assertLessEqual(abs(np.angle(alpha)), np.pi / 4 + 1e-12)


class TestSpectral:
    @pytest.mark.parametrize("n,expected", [(1, 1), (5, 8), (8, 8), (600, 1024)])
    def test_next_pow2(self, n, expected):
        assert next_pow2(n) == expected

    def test_padded_length(self):
        assert padded_length(600, 4) == 4096
        with pytest.raises(PreconditionError):
            padded_length(600, 0)

    def test_dominant_frequency(self):
        spec = power_spectrum(ScalarSignal(_sine(1.25), FS), 4)
        assert spec.n_fft == 4096
        peak, ratio = dominant_frequency(spec, 0.5, 3.3)
        assert abs(peak - 1.25) <= spec.freq_resolution
        assert ratio > 3.0

    def test_no_spectral_peak(self):
        noise = np.random.default_rng(1).normal(size=600)
        with pytest.raises(NoSpectralPeak):
            dominant_frequency(power_spectrum(ScalarSignal(noise, FS)), min_peak_ratio=1e9)

    def test_snr_bands(self):
        freqs = np.fft.rfftfreq(600, d=1 / FS)
        bands = snr_bands(freqs, SnrWindow(hr_ref_hz=1.2))
        assert bands.signal[np.argmin(abs(freqs - 1.2))]
        assert bands.signal[np.argmin(abs(freqs - 2.4))]
        assert bands.noise[np.argmin(abs(freqs - 1.8))]
        assert bands.full[np.argmin(abs(freqs - 6.0))]
        assert not bands.full[np.argmin(abs(freqs - 8.0))]
        assert not bands.full[0]

    def test_snr_known_ratio(self):
        x = _sine(1.2) + 0.5 * _sine(1.8)
        result = snr_detail(ScalarSignal(x, FS), SnrWindow(hr_ref_hz=1.2))
        assert result.snr_db == pytest.approx(10 * np.log10(4.0), abs=1e-6)
        assert not result.clamped

    def test_snr_matches_direct_dft(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            n = int(rng.integers(300, 901))
            hr_bpm = float(rng.uniform(50.0, 150.0))
            t = np.arange(n) / FS
            x = np.sin(2 * np.pi * hr_bpm / 60.0 * t + rng.uniform(0, 2 * np.pi))
            x = x + 0.3 * np.sin(4 * np.pi * hr_bpm / 60.0 * t) + rng.normal(0.0, 1.0, n)

            xc = x - x.mean()
            m = np.arange(n // 2 + 1)
            dft = np.exp(-2j * np.pi * np.outer(m, np.arange(n)) / n) @ xc
            power = np.abs(dft) ** 2
            bpm = 60.0 * m * FS / n
            in_range = (bpm >= 30.0) & (bpm <= 400.0)
            target = (np.abs(bpm - hr_bpm) <= 6.0) | (np.abs(bpm - 2 * hr_bpm) <= 12.0)
            num = power[in_range & target].sum()
            den = power[in_range & ~target].sum()
            expected = 10 * np.log10(num / den)

            got = snr(ScalarSignal(x, FS), SnrWindow(hr_ref_hz=hr_bpm / 60.0))
            assert got == pytest.approx(expected, abs=0.1)

    def test_white_noise_power_is_exponential(self):
        # |X(f)|^2 of white noise is exponential, so a bin exceeds 5x the median with
        # probability 2**-5
        rng = np.random.default_rng(31)
        exceed = []
        mean_power = []
        for _ in range(100):
            spec = power_spectrum(ScalarSignal(rng.standard_normal(600), FS), 4)
            freqs = np.arange(len(spec.bins)) * spec.freq_resolution
            power = np.abs(spec.bins[(freqs >= 0.5) & (freqs <= 3.33)]) ** 2
            exceed.append(np.mean(power > 5.0 * np.median(power)))
            mean_power.append(power.mean())
        assert np.mean(exceed) == pytest.approx(2.0**-5, abs=0.01)
        assert np.mean(mean_power) == pytest.approx(600.0, rel=0.05)

    def test_snr_clamps(self):
        w = SnrWindow(hr_ref_hz=1.2)
        on = snr_detail(ScalarSignal(_sine(1.2), FS), w)
        assert on.snr_db == 60.0 and on.clamped
        assert snr(ScalarSignal(_sine(1.8), FS), w) == -60.0

    def test_snr_without_energy(self):
        with pytest.raises(ZeroSignal):
            snr(ScalarSignal(np.ones(600), FS), SnrWindow(hr_ref_hz=1.2))


class TestPos:
    def test_recovers_pulse_frequency(self):
        pulse = pos(RgbSignal(_pulsing_rgb(1.2), FS))
        peak, _ = dominant_frequency(power_spectrum(pulse), 0.5, 3.3)
        assert abs(peak - 1.2) < 0.02

    def test_is_intensity_scale_invariant(self):
        rgb = _pulsing_rgb(1.2)
        a = pos(RgbSignal(rgb, FS)).samples
        b = pos(RgbSignal(5.0 * rgb, FS)).samples
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_batch_matches_single_trace(self):
        a = _pulsing_rgb(1.2)
        b = _pulsing_rgb(1.5, base=(90.0, 140.0, 60.0))
        batch, ok = pos_array(np.stack([a.T, b.T]), FS)
        assert ok.all()
        np.testing.assert_allclose(batch[0], pos(RgbSignal(a, FS)).samples, atol=1e-10)
        np.testing.assert_allclose(batch[1], pos(RgbSignal(b, FS)).samples, atol=1e-10)

    def test_constant_input(self):
        rgb = RgbSignal(np.full((300, 3), 100.0), FS)
        np.testing.assert_array_equal(pos(rgb).samples, 0.0)
        with pytest.raises(ZeroVariance):
            pos(rgb, strict=True)

    def test_invalid_input(self):
        with pytest.raises(SignalTooShort):
            pos(RgbSignal(np.full((10, 3), 100.0), FS))
        dark = _pulsing_rgb(1.2)
        dark[5, 0] = 0.0
        with pytest.raises(NonPositiveBaseline):
            pos(RgbSignal(dark, FS))

    def test_green(self):
        out = green(RgbSignal(_pulsing_rgb(1.2), FS)).samples
        assert out.mean() == pytest.approx(0.0, abs=1e-12)

    def test_pos_rejects_white_specular_that_fools_green(self):
        t = np.arange(600) / FS
        pulse = np.sin(2 * np.pi * 1.2 * t)
        specular = 20.0 * (1.0 + np.sin(2 * np.pi * 0.3 * t))
        rgb = _pulsing_rgb(1.2) + specular[:, None]
        r_pos = np.corrcoef(pos(RgbSignal(rgb, FS)).samples, pulse)[0, 1]
        r_green = np.corrcoef(green(RgbSignal(rgb, FS)).samples, pulse)[0, 1]
        assert r_pos > 0.9
        assert abs(r_green) < 0.2


def _frames(freq_hz=1.2, n=300, size=4):
    rgb = _pulsing_rgb(freq_hz, n)
    frames = np.broadcast_to(rgb[:, None, None, :], (n, size, size, 3)).copy()
    return RgbFrameSequence(frames, FS, view_id=2)


class TestReference:
    def test_reference_signal(self):
        bundle = reference_signal(_frames(), SkinMask(np.ones((4, 4), bool)), min_duration_s=5.0)
        assert abs(bundle.hr_ref_hz - 1.2) < 0.02
        h = bundle.s_ref_hilb_scaled.samples
        assert np.sum(h.real * h).real == pytest.approx(1.0)
        assert len(bundle.s_ref) == 300

    def test_reference_requires_duration(self):
        with pytest.raises(SignalTooShort):
            reference_signal(_frames(), SkinMask(np.ones((4, 4), bool)))

    def test_skin_average_mask_checks(self):
        frames = _frames()
        with pytest.raises(EmptyMask):
            skin_average(frames, SkinMask(np.zeros((4, 4), bool)))
        with pytest.raises(EmptyMask):
            skin_average(frames, SkinMask(np.ones((3, 4), bool)))
        mask = np.zeros((4, 4), bool)
        mask[0, 0] = True
        single = skin_average(frames, SkinMask(mask)).samples
        np.testing.assert_allclose(single, frames.frames[:, 0, 0])

    def test_validate_against_ppg(self):
        bundle = reference_signal(_frames(), SkinMask(np.ones((4, 4), bool)), min_duration_s=5.0)
        ppg = ScalarSignal(_sine(1.2, n=1000, fs=100.0), 100.0)
        report = validate_reference(bundle, ppg, min_overlap_s=5.0)
        assert report.passed
        assert report.diff_bpm < 3.0

        wrong = ScalarSignal(_sine(1.8, n=1000, fs=100.0), 100.0)
        assert not validate_reference(bundle, wrong, min_overlap_s=5.0).passed

    def test_validate_span_mismatch(self):
        bundle = reference_signal(_frames(), SkinMask(np.ones((4, 4), bool)), min_duration_s=5.0)
        ppg = ScalarSignal(_sine(1.2, n=1000, fs=100.0), 100.0)
        with pytest.raises(SpanMismatch):
            validate_reference(bundle, ppg, ppg_t0_s=100.0)


if __name__ == "__main__":
    unittest.main()
