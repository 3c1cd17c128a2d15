"""Unit tests for run configuration parsing and validation."""

import pytest

from uqrank.globals.errors import ConfigError
from uqrank.globals.run_config import (
    LOSS_FLAGS,
    SEED_ENV,
    RunConfig,
    load_run_config,
    load_task_spec,
    parse_run_config,
)


class TestRunConfig:
    """Unit tests for RunConfig validation."""

    def test_defaults_are_valid(self):
        """Test the default config enables every loss."""
        config = RunConfig()
        assert config.loss_flags == frozenset(LOSS_FLAGS)
        assert config.conv_dropout == (0.1, 0.2, 0.3)

    @pytest.mark.parametrize(
        "changes",
        [
            {"lr": 0.0},
            {"eta": -1.0},
            {"loss_flags": frozenset()},
            {"loss_flags": frozenset({"CE", "XYZ"})},
            {"fc_dropout": 1.5},
            {"conv_dropout": ()},
            {"conv_placement": "everywhere"},
            {"pooling": "median"},
            {"data_fraction": 0.0},
            {"lambda_ruam": 0.0},
            {"t_mc": 0},
            {"num_candidates": 1},
            {"diversity_source": "tokens"},
        ],
    )
    def test_invalid_fields(self, changes):
        """Test out-of-range fields raise ConfigError."""
        with pytest.raises(ConfigError):
            RunConfig().with_overrides(**changes)

    def test_zero_epochs_allowed(self):
        """Test zero epochs is a valid evaluate-only config."""
        assert RunConfig(epochs=0).epochs == 0


class TestParseRunConfig:
    """Unit tests for parse_run_config."""

    def test_typed_values(self):
        """Test every field kind is parsed from its string form."""
        config = parse_run_config(
            {
                "epochs": "3",
                "lr": "0.01",
                "loss_flags": "ce, gce+VE",
                "conv_dropout": "0.1,0.4",
                "mc_active_at_eval": "false",
                "pooling": "avg",
            }
        )
        assert config.epochs == 3
        assert config.lr == 0.01
        assert config.loss_flags == frozenset({"CE", "GCE", "VE"})
        assert config.conv_dropout == (0.1, 0.4)
        assert config.mc_active_at_eval is False
        assert config.pooling == "avg"

    def test_text_form_parses_back(self):
        """Test the rendered text of a config parses to an equal config."""
        config = RunConfig(seed=4, loss_flags=frozenset({"CE", "KL"}), conv_dropout=(0.25,))
        values = dict(
            line.split(" = ", 1) for line in config.to_text().splitlines() if line.strip()
        )
        assert parse_run_config(values) == config

    def test_unknown_key(self):
        """Test an unknown key raises ConfigError."""
        with pytest.raises(ConfigError, match="unknown config key"):
            parse_run_config({"learning_rate": "0.1"})

    def test_bad_value(self):
        """Test an unparsable value raises ConfigError."""
        with pytest.raises(ConfigError, match="epochs"):
            parse_run_config({"epochs": "many"})

    def test_missing_value(self):
        """Test an empty value raises ConfigError."""
        with pytest.raises(ConfigError):
            parse_run_config({"epochs": None})


class TestLoadRunConfig:
    """Unit tests for load_run_config and load_task_spec."""

    def test_file_values(self, tmp_path):
        """Test values are read from a key = value file with comments."""
        path = tmp_path / "run.cfg"
        path.write_text("# tiny run\nepochs = 2\nloss_flags = CE,KL\n", encoding="utf-8")
        config = load_run_config(path, env={})
        assert config.epochs == 2
        assert config.loss_flags == frozenset({"CE", "KL"})

    def test_seed_override(self, tmp_path):
        """Test the seed environment variable overrides the file."""
        path = tmp_path / "run.cfg"
        path.write_text("seed = 1\n", encoding="utf-8")
        assert load_run_config(path, env={SEED_ENV: "9"}).seed == 9

    def test_defaults_without_file(self):
        """Test no file gives the defaults."""
        assert load_run_config(None, env={}) == RunConfig()

    def test_missing_file(self, tmp_path):
        """Test a missing file raises ConfigError."""
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "absent.cfg", env={})

    def test_task_spec(self, tmp_path):
        """Test a generation spec reads tuples of words and is validated."""
        path = tmp_path / "task.cfg"
        path.write_text("num_dialogs = 3\nshapes = square,circle\n", encoding="utf-8")
        spec = load_task_spec(path, env={SEED_ENV: "5"})
        assert (spec.num_dialogs, spec.seed) == (3, 5)
        assert spec.shapes == ("square", "circle")

    def test_impossible_task_spec(self, tmp_path):
        """Test a spec with more objects than cells raises ConfigError."""
        path = tmp_path / "task.cfg"
        path.write_text("grid_size = 1\nmax_objects = 3\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_task_spec(path, env={})
