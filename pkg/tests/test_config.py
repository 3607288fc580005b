import pathlib

import pytest

from utils.utils_config import (
    PRESETS,
    EncoderDesign,
    PairMode,
    TrainingConfig,
    build_training_config,
    coerce_field,
    get_default_workers,
    get_output_root,
    read_config_file,
)
from utils.utils_errors import ConfigurationError

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"


class TestTrainingConfig:
    def test_defaults_follow_the_published_recipe(self):
        cfg = TrainingConfig()
        assert (cfg.epochs, cfg.batch_size, cfg.lr_peak, cfg.warmup_epochs) == (30, 16, 1e-5, 5)
        assert (cfg.beta1, cfg.beta2, cfg.alpha) == (0.9, 0.99, 0.85)

    def test_warmup_must_be_shorter_than_training(self):
        with pytest.raises(ConfigurationError):
            TrainingConfig(epochs=5, warmup_epochs=5)

    def test_zero_epochs_is_allowed(self):
        assert TrainingConfig(epochs=0).epochs == 0

    def test_lr_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            TrainingConfig(lr_peak=0.0)

    def test_enums_are_coerced(self):
        cfg = TrainingConfig(encoder_design="cnn_only", pair_mode="day-day")
        assert cfg.encoder_design is EncoderDesign.CNN_ONLY
        assert cfg.pair_mode is PairMode.DAY_DAY

    def test_bad_enum_value(self):
        with pytest.raises(ConfigurationError):
            TrainingConfig(fusion_mode="sum")

    def test_dict_round_trip(self):
        cfg = build_training_config("desk", overrides={"seed": 3})
        assert TrainingConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError):
            TrainingConfig.from_dict({"learning_rate": 1.0})


class TestCoercion:
    @pytest.mark.parametrize(
        "name,raw,expected",
        [
            ("epochs", "12", 12),
            ("lr_peak", "2e-4", 2e-4),
            ("crop", "false", False),
            ("crop", "Yes", True),
            ("grad_clip", "none", None),
            ("grad_clip", "5", 5.0),
            ("cnn_preset", "tiny", "tiny"),
        ],
    )
    def test_string_values(self, name, raw, expected):
        assert coerce_field(name, raw) == expected

    def test_bad_number(self):
        with pytest.raises(ConfigurationError):
            coerce_field("epochs", "many")


class TestResolution:
    def test_precedence(self, tmp_path):
        config_file = tmp_path / "run.env"
        config_file.write_text("EPOCHS=7\nSEED=4\n")
        cfg = build_training_config(
            "desk", file_values=read_config_file(config_file), overrides={"seed": 9, "epochs": None}
        )
        assert cfg.epochs == 7
        assert cfg.seed == 9
        assert cfg.image_height == PRESETS["desk"]["image_height"]

    def test_desk_file_matches_desk_preset(self):
        from_file = build_training_config("desk", file_values=read_config_file(DATA_DIR / "desk_config.env"))
        assert from_file == build_training_config("desk")

    def test_full_file_matches_full_preset(self):
        from_file = build_training_config("full", file_values=read_config_file(DATA_DIR / "full_config.env"))
        assert from_file == build_training_config("full")

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError):
            build_training_config("laptop")

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            read_config_file(tmp_path / "absent.env")


class TestEnvironmentGetters:
    def test_output_root(self, monkeypatch, tmp_path):
        monkeypatch.setenv("GLOCALFUSE_OUTPUT_ROOT", str(tmp_path))
        assert get_output_root() == tmp_path

    def test_workers_default(self, monkeypatch):
        monkeypatch.delenv("GLOCALFUSE_WORKERS", raising=False)
        assert get_default_workers() == 0
