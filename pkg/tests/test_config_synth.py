import math

import numpy as np
import pytest

from anclab.audio_io import AudioClip, write_wav
from anclab.config import Config
from anclab.errors import ConfigError, FormatError
from anclab.metrics import snr_db
from anclab.synth import (
    ScenarioSpec,
    fir_channel,
    load_scenario,
    multitone_am,
    make_rng,
    random_channel,
    synth_scenario,
    synth_system_id,
    write_scenario,
)


class TestConfig:
    def test_parse_with_comments(self):
        cfg = Config.parse("# top\n\nscenario.duration = 2.5\n; other\nfilter.mu = 0.01 # step\n")
        assert cfg.get_float("scenario.duration") == 2.5
        assert cfg.get_float("filter.mu") == 0.01
        assert cfg.lines == {"scenario.duration": 3, "filter.mu": 5}

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="line 2"):
            Config.parse("a.b = 1\na.b = 2\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            Config.parse("just words\n")

    def test_type_error_anchored(self):
        cfg = Config.parse("x.y = 1\nfilter.num_taps = lots\n")
        with pytest.raises(ConfigError) as info:
            cfg.get_int("filter.num_taps")
        assert info.value.line == 2
        assert "filter.num_taps" in str(info.value)

    def test_inf_float(self):
        assert Config.parse("s.t = inf").get_float("s.t") == math.inf

    def test_nan_rejected(self):
        with pytest.raises(ConfigError):
            Config.parse("s.t = nan").get_float("s.t")

    def test_section_and_dumps(self):
        cfg = Config.parse("b.x = 1\na.y = 2\n")
        assert cfg.section("b") == {"x": "1"}
        assert cfg.dumps() == "a.y = 2\nb.x = 1\n"


class TestFirChannel:
    def test_identity(self):
        np.testing.assert_array_equal(fir_channel([3.0, -1.0, 2.0], [1.0]), [3.0, -1.0, 2.0])

    def test_unit_delay(self):
        np.testing.assert_array_equal(fir_channel([1.0, 2.0, 3.0], [0.0, 1.0]), [0.0, 1.0, 2.0])

    def test_hand_convolution(self):
        np.testing.assert_allclose(fir_channel([1, 1, 1], [0.5, 0.25]), [0.5, 0.75, 0.75])

    def test_empty_coeffs(self):
        with pytest.raises(ValueError):
            fir_channel([1.0], [])


class TestSynth:
    def test_calibrated_snr(self):
        sc = synth_scenario(ScenarioSpec(duration=2.0, seed=4))
        assert 4.9 <= snr_db(sc.clean.data, sc.primary.data) <= 5.1

    @pytest.mark.parametrize("target", [-5.0, 0.0, 12.0, 30.0])
    def test_calibration_other_targets(self, target):
        sc = synth_scenario(ScenarioSpec(duration=0.5, seed=1, target_snr_in=target))
        assert snr_db(sc.clean.data, sc.primary.data) == pytest.approx(target, abs=0.1)

    def test_infinite_target_is_noise_free(self):
        sc = synth_scenario(ScenarioSpec(duration=0.2, target_snr_in=math.inf))
        np.testing.assert_array_equal(sc.primary.data, sc.clean.data)
        assert sc.snr_in == math.inf

    def test_deterministic(self):
        a = synth_scenario(ScenarioSpec(duration=0.3, seed=9))
        b = synth_scenario(ScenarioSpec(duration=0.3, seed=9))
        for name in ("clean", "reference", "primary"):
            assert getattr(a, name).samples.tobytes() == getattr(b, name).samples.tobytes()

    def test_seed_changes_output(self):
        a = synth_scenario(ScenarioSpec(duration=0.1, seed=1))
        b = synth_scenario(ScenarioSpec(duration=0.1, seed=2))
        assert not np.array_equal(a.primary.data, b.primary.data)

    def test_noise_path_is_linear(self):
        sc = synth_scenario(ScenarioSpec(duration=0.5, seed=3, noise_kind="filtered-white"))
        np.testing.assert_allclose(sc.primary.data - sc.clean.data,
                                   fir_channel(sc.reference.data, sc.channel), atol=1e-12)

    def test_channel_shape(self):
        h = random_channel(make_rng(0), 16)
        assert np.sum(h**2) == pytest.approx(1.0)
        assert abs(h[12]) < 1.0

    def test_clean_surrogate(self):
        s = multitone_am(make_rng(0), 48000, 48000)
        assert np.max(np.abs(s)) == pytest.approx(0.35)
        spec = np.abs(np.fft.rfft(s))
        f = np.fft.rfftfreq(s.size, 1 / 48000)
        band = (f >= 150) & (f <= 3500)
        assert np.sum(spec[band] ** 2) > 0.99 * np.sum(spec**2)

    def test_leakage(self):
        sc = synth_scenario(ScenarioSpec(duration=0.1, seed=0, leakage=0.1))
        base = synth_scenario(ScenarioSpec(duration=0.1, seed=0))
        np.testing.assert_allclose(sc.reference.data - base.reference.data, 0.1 * base.clean.data)

    def test_wav_clean_source(self, tmp_path):
        s = np.sin(np.arange(1000) * 0.05) * 0.3
        write_wav(tmp_path / "speech.wav", AudioClip.mono(s, 8000), 24)
        sc = synth_scenario(ScenarioSpec(duration=0.25, sample_rate=8000, clean_kind="wav",
                                         clean_path=str(tmp_path / "speech.wav")))
        np.testing.assert_allclose(sc.clean.data[:1000], s, atol=2.0**-22)
        assert len(sc) == 2000

    @pytest.mark.parametrize("kwargs,key", [
        ({"duration": 0}, "scenario.duration"),
        ({"channel_taps": 0}, "scenario.channel_taps"),
        ({"noise_kind": "pink"}, "scenario.noise_kind"),
        ({"clean_kind": "wav"}, "scenario.clean_path"),
    ])
    def test_spec_validation(self, kwargs, key):
        with pytest.raises(ConfigError) as info:
            ScenarioSpec(**kwargs)
        assert info.value.key == key

    def test_from_config_reanchors(self):
        cfg = Config.parse("# hi\nscenario.duration = 0\n")
        with pytest.raises(ConfigError) as info:
            ScenarioSpec.from_config(cfg)
        assert info.value.line == 2
        assert "scenario.duration" in str(info.value)

    def test_write_and_load(self, tmp_path):
        sc = synth_scenario(ScenarioSpec(duration=0.1, seed=5))
        write_scenario(tmp_path, sc)
        back = load_scenario(tmp_path)
        np.testing.assert_allclose(back.primary.data, sc.primary.data, atol=2.0**-23)
        np.testing.assert_allclose(back.channel, sc.channel)

    def test_load_rejects_unequal(self, tmp_path):
        sc = synth_scenario(ScenarioSpec(duration=0.1, seed=5))
        write_scenario(tmp_path, sc)
        write_wav(tmp_path / "clean.wav", AudioClip.mono(np.zeros(10), 48000), 24)
        with pytest.raises(FormatError):
            load_scenario(tmp_path)

    def test_system_id_noise_level(self):
        x, d, h = synth_system_id(20000, 8, seed=3, noise_db=-20)
        clean = fir_channel(x, h)
        assert snr_db(clean, d) == pytest.approx(20.0, abs=0.3)
