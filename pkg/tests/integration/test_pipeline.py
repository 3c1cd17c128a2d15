"""Integration tests for the experiment pipeline."""

import numpy as np
import pytest

from uqrank.cli_components.report import METRICS_CSV, write_report
from uqrank.globals.errors import UsageError
from uqrank.pipeline import DataSource, DefaultPipeline, synthetic_spec
from uqrank.pipeline_stages.loader import write_visdial_json
from uqrank.pipeline_stages.synthetic import gen_synthetic
from tests.conftest import tiny_run_config


class TestDefaultPipeline:
    """Integration tests for DefaultPipeline."""

    def test_process(self, tiny_config):
        """Test a full run returns losses, metrics, uncertainty and a frozen snapshot."""
        result = DefaultPipeline(tiny_config, "tiny").process()

        assert len(result.epoch_losses) == 1
        assert [row.run_id for row in result.metrics] == ["tiny", "tiny-lik"]
        assert len(result.uncertainty) == 2 * 2
        assert result.attention
        assert result.wall_clock > 0.0
        weights = next(iter(result.parameters.values()))
        with pytest.raises(ValueError):
            weights[...] = 0.0

    def test_reports_are_reproducible(self, tiny_config, tmp_path):
        """Test two runs with one seed write byte-identical metrics."""
        for name in ("a", "b"):
            write_report(DefaultPipeline(tiny_config).process(), tmp_path / name)

        first = (tmp_path / "a" / METRICS_CSV).read_bytes()
        assert first == (tmp_path / "b" / METRICS_CSV).read_bytes()

    def test_data_fraction(self):
        """Test the training split is cut to the fraction and the cut is noted."""
        pipeline = DefaultPipeline(tiny_run_config(data_fraction=0.5))
        train, val = pipeline.load()

        assert len(train) == 2
        assert len(val) == 2
        assert pipeline.problems.count("fraction") == 1

    def test_val_split_differs(self, tiny_config):
        """Test the validation split is generated from its own seed and ids."""
        train_spec = synthetic_spec(tiny_config, "train")
        val_spec = synthetic_spec(tiny_config, "val")

        assert val_spec.seed != train_spec.seed
        assert val_spec.first_id == tiny_config.train_dialogs

    def test_file_source(self, tiny_config, tiny_spec, tmp_path, test_problems):
        """Test dialogs can be read from VisDial-schema files."""
        path = tmp_path / "dialogs.json"
        write_visdial_json(gen_synthetic(tiny_spec, test_problems), path)
        pipeline = DefaultPipeline(tiny_config, source=DataSource(train=path, val=path))

        result = pipeline.process()

        assert len(result.uncertainty) == 4 * 3

    def test_noisy_validation(self, tiny_config):
        """Test regenerated validation data keeps the dialogs and scales the images."""
        pipeline = DefaultPipeline(tiny_config)
        clean = pipeline.records("val")
        noisy = pipeline.noisy_val(0.5)

        assert [r.dialog_id for r in noisy] == [r.dialog_id for r in clean]
        np.testing.assert_allclose(noisy[0].image, clean[0].image * 0.5)

    def test_stage_order(self, tiny_config):
        """Test batching before the vocabulary and evaluating before training fail."""
        pipeline = DefaultPipeline(tiny_config)
        with pytest.raises(UsageError):
            pipeline.batches([])
        with pytest.raises(UsageError):
            pipeline.evaluate([])
