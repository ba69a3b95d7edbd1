import pytest

from gypsum.config import Config, parse_config_text, preset, resolve
from gypsum.errors import ConfigError, MissingFile

PAPER_VALUES = dict(d_e=768, L_c=12, head_c=12, d_model=768, L_g=4, head_g=8, h_g=768, l_g=300,
                    L_d=6, heads_d=8, dropout=0.2, learning_rate=1e-4, batch_size=32, beam_size=6)


@pytest.mark.parametrize("language,l_c,l_s", [("java", 400, 100), ("python", 300, 80)])
def test_paper_preset(language, l_c, l_s):
    cfg = preset("paper", language)
    for k, v in PAPER_VALUES.items():
        assert getattr(cfg, k) == v, k
    assert (cfg.l_c, cfg.l_s) == (l_c, l_s)


def test_desk_preset():
    cfg = preset("desk")
    assert (cfg.d_e, cfg.L_c, cfg.L_g, cfg.L_d, cfg.l_c, cfg.l_g, cfg.l_s) == (64, 2, 2, 2, 64, 64, 32)
    assert cfg.patience == 5 and cfg.clip_norm == 5.0


def test_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\npreset = paper\nlanguage = python\nbeam_size = 3  # inline\nfusion_ffn = false\n")
    cfg = resolve(path, {"seed": "9"})
    assert (cfg.l_c, cfg.beam_size, cfg.fusion_ffn, cfg.seed) == (300, 3, False, 9)
    assert resolve(path, {"beam_size": 2}).beam_size == 2


def test_dump_round_trip():
    cfg = preset("paper", "java", seed=4)
    assert Config(**parse_config_text(cfg.dump())) == cfg


def test_seed_env_fallback(monkeypatch):
    monkeypatch.setenv("GYPSUM_SEED", "17")
    assert resolve().seed == 17
    assert resolve(None, {"seed": 3}).seed == 3


@pytest.mark.parametrize("text", ["bogus = 1", "d_e = wide", "no equals sign", "heads_d = 5",
                                  "copy_mode = triple", "fusion_ffn = maybe"])
def test_bad_config(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text + "\n")
    with pytest.raises(ConfigError):
        resolve(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(MissingFile):
        resolve(tmp_path / "none.cfg")
    with pytest.raises(ConfigError):
        preset("huge")
