"""Unit tests for report files and plots."""

import math

import numpy as np
import pytest

from uqrank.cli_components.report import (
    ABLATION_CSV,
    LOSSES_CSV,
    METRICS_CSV,
    SUMMARY_TXT,
    UNCERTAINTY_CSV,
    loss_frame,
    plot_report,
    read_attention,
    read_csv,
    summary_text,
    write_ablation,
    write_attention,
    write_report,
)
from uqrank.domain_model.results import (
    AblationRow,
    AblationTable,
    ExperimentResult,
    MetricsRow,
    UncertaintyRow,
)
from uqrank.globals.errors import ReportIOError, UsageError


@pytest.fixture
def result():
    return ExperimentResult(
        run_id="run",
        config_text="seed = 0\n",
        epoch_losses=[
            {"CE": 1.0 / 3.0, "total": 2.0, "variance": 0.5},
            {"CE": 0.25, "total": 1.5, "variance": 0.375},
        ],
        metrics=[MetricsRow("run", 0.5, 1.0, 1.0, 0.75, 1.5, 0.9, 2.0 / 7.0)],
        uncertainty=[
            UncertaintyRow(0, 0, 1.0, 0.5, 0.01, 1.5),
            UncertaintyRow(0, 1, 0.9, 0.3, 0.03, 1.2),
        ],
        attention={"0-0": np.array([[0.1, 0.2, 0.3], [0.15, 0.15, 0.1]])},
    )


class TestLossFrame:
    """Unit tests for loss_frame."""

    def test_long_format(self):
        """Test one row per epoch and component."""
        frame = loss_frame([{"CE": 1.0, "KL": 2.0}, {"CE": 0.5}])

        assert list(frame.columns) == ["epoch", "component", "value"]
        assert frame.values.tolist() == [[1, "CE", 1.0], [1, "KL", 2.0], [2, "CE", 0.5]]


class TestWriteReport:
    """Unit tests for write_report and read_csv."""

    def test_files_written(self, result, tmp_path):
        """Test the CSVs, attention grids and summary are written."""
        files = write_report(result, tmp_path / "out")

        names = {path.name for path in files}
        assert {METRICS_CSV, UNCERTAINTY_CSV, LOSSES_CSV, SUMMARY_TXT, "0-0.txt"} == names
        assert all(path.is_file() for path in files)

    def test_full_precision(self, result, tmp_path):
        """Test floats reload bit-for-bit."""
        write_report(result, tmp_path)

        metrics = read_csv(tmp_path / METRICS_CSV)
        losses = read_csv(tmp_path / LOSSES_CSV)
        assert metrics.loc[0, "sigma_o"] == 2.0 / 7.0
        assert losses.loc[0, "value"] == 1.0 / 3.0
        assert list(metrics.columns)[0] == "run_id"

    def test_summary(self, result):
        """Test the summary names the run, final losses, metrics and config."""
        text = summary_text(result)

        assert text.startswith("run: run\n")
        assert "epochs: 2" in text
        assert "final losses: CE=0.25, total=1.5" in text
        assert "R@1=0.5000" in text
        assert "aleatoric_mean: 0.4" in text
        assert text.rstrip().endswith("seed = 0")

    def test_unwritable_directory(self, result, tmp_path):
        """Test a directory path that is a file raises ReportIOError."""
        blocker = tmp_path / "blocker"
        blocker.write_text("", encoding="utf-8")
        with pytest.raises(ReportIOError):
            write_report(result, blocker)

    def test_missing_csv(self, tmp_path):
        """Test reading a missing CSV raises ReportIOError."""
        with pytest.raises(ReportIOError):
            read_csv(tmp_path / METRICS_CSV)


class TestAttentionFiles:
    """Unit tests for attention grid files."""

    def test_header_and_values(self, tmp_path):
        """Test the grid file starts with its shape and reloads exactly."""
        grid = np.array([[1.0 / 3.0, 0.5], [0.25, -1e-9], [2.0, 0.0]])
        path = write_attention(grid, tmp_path / "a.txt")

        assert path.read_text(encoding="utf-8").splitlines()[0] == "3 2"
        np.testing.assert_array_equal(read_attention(path), grid)

    def test_single_row(self, tmp_path):
        """Test a 1 x n grid keeps its shape."""
        path = write_attention(np.array([[0.5, 0.5]]), tmp_path / "a.txt")
        assert read_attention(path).shape == (1, 2)

    def test_malformed(self, tmp_path):
        """Test a file without a shape header raises ReportIOError."""
        path = tmp_path / "a.txt"
        path.write_text("x\n", encoding="utf-8")
        with pytest.raises(ReportIOError):
            read_attention(path)


class TestAblationAndPlots:
    """Unit tests for write_ablation and plot_report."""

    def test_ablation_files(self, result, tmp_path):
        """Test the ablation table and a report per variant are written."""
        row = AblationRow("eta", "eta=1.0", 0.5, 0.8, 1.0, 0.75, 2.5, 0.9, 0.4, 0.1, 0.02, 0.01)
        table = AblationTable("eta", [row], [result])

        files = write_ablation(table, tmp_path / "ablation-eta")

        assert files[0] == tmp_path / "ablation-eta" / ABLATION_CSV
        assert (tmp_path / "ablation-eta" / "run" / METRICS_CSV).is_file()
        frame = read_csv(files[0])
        assert frame.loc[0, "variant"] == "eta=1.0"
        assert math.isclose(frame.loc[0, "epistemic_std"], 0.01)
        assert math.isclose(frame.loc[0, "R5"], 0.8)
        assert math.isclose(frame.loc[0, "mean_rank"], 2.5)

    def test_plots(self, result, tmp_path):
        """Test one SVG per report CSV kind."""
        write_report(result, tmp_path)
        row = AblationRow("eta", "eta=1.0", 0.5, 0.8, 1.0, 0.75, 2.5, 0.9, 0.4, 0.1, 0.02, 0.01)
        write_ablation(AblationTable("eta", [row]), tmp_path)

        plots = plot_report(tmp_path)

        assert sorted(p.name for p in plots) == [
            "ablation.svg",
            "losses.svg",
            "uncertainty.svg",
            "variance.svg",
        ]
        assert all(p.read_text(encoding="utf-8").lstrip().startswith("<?xml") for p in plots)

    def test_plot_without_csvs(self, tmp_path):
        """Test plotting an empty directory raises UsageError."""
        with pytest.raises(UsageError):
            plot_report(tmp_path)

    def test_variance_plotted_apart_from_losses(self, tmp_path):
        """Test the variance history gets its own plot and only when it was recorded."""
        with_variance = tmp_path / "with"
        with_variance.mkdir()
        loss_frame([{"CE": 1.0, "variance": 0.5}]).to_csv(with_variance / LOSSES_CSV, index=False)
        without = tmp_path / "without"
        without.mkdir()
        loss_frame([{"CE": 1.0}]).to_csv(without / LOSSES_CSV, index=False)

        assert [p.name for p in plot_report(with_variance)] == ["losses.svg", "variance.svg"]
        assert [p.name for p in plot_report(without)] == ["losses.svg"]
