import json

import pytest

from insolemotion.config import SEED_ENV, RunConfig


def test_defaults_follow_published_hyperparameters():
    cfg = RunConfig()
    assert (cfg.W, cfg.d, cfg.ff_dim, cfg.T, cfg.batch_size) == (100, 256, 512, 200, 256)
    assert (cfg.beta_start, cfg.beta_end, cfg.learning_rate, cfg.lam) == (1e-4, 0.02, 1e-3, 0.001)
    assert (cfg.pose_epochs, cfg.disp_epochs, cfg.overlap) == (500, 200, 25)


def test_load_order(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"W": 40, "seed": 1, "d": 32}))
    cfg = RunConfig.load(path, {"seed": 2, "d": None}, env={})
    assert (cfg.W, cfg.seed, cfg.d) == (40, 2, 32)
    cfg = RunConfig.load(path, {"seed": 2}, env={SEED_ENV: "9"})
    assert cfg.seed == 9
    assert RunConfig.load(env={}).to_dict() == RunConfig().to_dict()


def test_roundtrip():
    cfg = RunConfig(W=30, overlap=10, sampler_mode="predict-prev")
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("bad", [{"nope": 1}, {"W": "100"}, {"augment": 1}, {"overlap": 100},
                                 {"sampler_mode": "ddim"}, {"d": 30}, {"max_steps": 0}, {"beta_end": 1.5}])
def test_invalid_values_rejected(bad):
    with pytest.raises(ValueError):
        RunConfig.from_dict(bad)


def test_bad_seed_env_and_file(tmp_path):
    with pytest.raises(ValueError, match=SEED_ENV):
        RunConfig.load(env={SEED_ENV: "abc"})
    (tmp_path / "bad.json").write_text("[1, 2]")
    with pytest.raises(ValueError):
        RunConfig.load(tmp_path / "bad.json", env={})
    with pytest.raises(ValueError):
        RunConfig.load(tmp_path / "missing.json", env={})


def test_derived_configs():
    cfg = RunConfig(W=40, d=32, ff_dim=48, heads=4, T=50, insole_mha=False, disp_input="imu+pressure")
    assert cfg.denoiser_config().W == 40 and not cfg.denoiser_config().insole_mha
    assert cfg.disp_config().input == "imu+pressure"
    assert cfg.schedule().T == 50
    assert cfg.train_config("pose").epochs == 500 and cfg.train_config("disp").epochs == 200
