"""Report files: metrics, uncertainty and loss CSVs, attention grids, summaries and plots."""
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from uqrank.domain_model.outputs import VARIANCE  # noqa: E402
from uqrank.domain_model.results import (  # noqa: E402
    LOSS_COLUMNS,
    METRIC_COLUMNS,
    UNCERTAINTY_COLUMNS,
    AblationRow,
    AblationTable,
    ExperimentResult,
)
from uqrank.globals.errors import ReportIOError, UsageError  # noqa: E402

logger = logging.getLogger(__name__)

METRICS_CSV = "metrics.csv"
UNCERTAINTY_CSV = "uncertainty.csv"
LOSSES_CSV = "losses.csv"
ABLATION_CSV = "ablation.csv"
SUMMARY_TXT = "summary.txt"
ATTENTION_DIR = "attention"
ABLATION_COLUMNS = tuple(AblationRow.__dataclass_fields__)
FLOAT_FORMAT = "%.17g"


def _frame(rows: Sequence[object], columns: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame([asdict(row) for row in rows], columns=list(columns))  # type: ignore


def loss_frame(epoch_losses: Sequence[Dict[str, float]]) -> pd.DataFrame:
    """One row per epoch per loss component."""
    rows = [
        (epoch, name, value)
        for epoch, losses in enumerate(epoch_losses, start=1)
        for name, value in losses.items()
    ]
    return pd.DataFrame(rows, columns=list(LOSS_COLUMNS))


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise ReportIOError(f"cannot write {path}: {e}") from e
    return path


def read_csv(path: Path) -> pd.DataFrame:
    """Reload a report CSV with every float at full precision."""
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        raise ReportIOError(f"cannot read {path}: {e}") from e


def _prepare(out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportIOError(f"cannot create {out_dir}: {e}") from e
    return out_dir


def write_attention(grid: np.ndarray, path: Path) -> Path:
    """Write a ``u x v`` grid: a ``u v`` header line, then one row of the grid per line."""
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    u, v = grid.shape
    try:
        np.savetxt(path, grid, fmt=FLOAT_FORMAT, header=f"{u} {v}", comments="")
    except OSError as e:
        raise ReportIOError(f"cannot write {path}: {e}") from e
    return path


def read_attention(path: Path) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as f:
            u, v = (int(n) for n in f.readline().split())
            grid = np.loadtxt(f, ndmin=2)
    except (OSError, ValueError) as e:
        raise ReportIOError(f"cannot read {path}: {e}") from e
    return grid.reshape(u, v)


def summary_text(result: ExperimentResult) -> str:
    lines = [f"run: {result.run_id}", f"wall clock: {result.wall_clock:.2f} s"]
    lines.append(f"epochs: {len(result.epoch_losses)}")
    if result.epoch_losses:
        final = result.epoch_losses[-1]
        lines.append("final losses: " + ", ".join(f"{k}={v:.6g}" for k, v in final.items()))
    for row in result.metrics:
        lines.append(
            f"{row.run_id}: R@1={row.R1:.4f} R@5={row.R5:.4f} R@10={row.R10:.4f} "
            f"MRR={row.MRR:.4f} mean rank={row.mean_rank:.3f} NDCG={row.NDCG:.4f} "
            f"sigma_o={row.sigma_o:.4f}"
        )
    for name, value in result.uncertainty_summary().items():
        lines.append(f"{name}: {value:.6g}")
    lines.extend(["", "config:", result.config_text.rstrip()])
    return "\n".join(lines) + "\n"


def write_report(result: ExperimentResult, out_dir: Path) -> List[Path]:
    """
    Write every report file of one run.

    Raises:
        ReportIOError: If ``out_dir`` or a file in it cannot be written
    """
    out_dir = _prepare(out_dir)
    files = [
        _write_csv(_frame(result.metrics, METRIC_COLUMNS), out_dir / METRICS_CSV),
        _write_csv(_frame(result.uncertainty, UNCERTAINTY_COLUMNS), out_dir / UNCERTAINTY_CSV),
        _write_csv(loss_frame(result.epoch_losses), out_dir / LOSSES_CSV),
    ]
    if result.attention:
        grids = _prepare(out_dir / ATTENTION_DIR)
        for key, grid in result.attention.items():
            files.append(write_attention(grid, grids / f"{key}.txt"))
    summary = out_dir / SUMMARY_TXT
    try:
        summary.write_text(summary_text(result), encoding="utf-8")
    except OSError as e:
        raise ReportIOError(f"cannot write {summary}: {e}") from e
    files.append(summary)
    logger.info("wrote %d report files to %s", len(files), out_dir)
    return files


def write_ablation(table: AblationTable, out_dir: Path) -> List[Path]:
    """Write ``ablation.csv`` and one report directory per variant."""
    out_dir = _prepare(out_dir)
    files = [_write_csv(_frame(table.rows, ABLATION_COLUMNS), out_dir / ABLATION_CSV)]
    for result in table.results:
        files.extend(write_report(result, out_dir / result.run_id))
    return files


def plot_report(in_dir: Path) -> List[Path]:
    """
    Render SVG plots from the CSVs found in ``in_dir``.

    Raises:
        UsageError: If the directory holds no report CSV
        ReportIOError: If a CSV cannot be read or a plot cannot be written
    """
    in_dir = Path(in_dir)
    written: List[Path] = []
    losses = in_dir / LOSSES_CSV
    if losses.is_file():
        written.extend(_plot_losses(read_csv(losses), in_dir))
    uncertainty = in_dir / UNCERTAINTY_CSV
    if uncertainty.is_file():
        written.extend(_plot_uncertainty(read_csv(uncertainty), in_dir))
    ablation = in_dir / ABLATION_CSV
    if ablation.is_file():
        written.extend(_plot_ablation(read_csv(ablation), in_dir))
    if not any(p.is_file() for p in (losses, uncertainty, ablation)):
        raise UsageError(f"no report CSVs in {in_dir}")
    return written


def _save(fig: plt.Figure, path: Path) -> Path:
    try:
        fig.savefig(path, format="svg", bbox_inches="tight")
    except OSError as e:
        raise ReportIOError(f"cannot write {path}: {e}") from e
    finally:
        plt.close(fig)
    return path


def _plot_losses(frame: pd.DataFrame, out_dir: Path) -> List[Path]:
    if frame.empty:
        return []
    is_variance = frame["component"] == VARIANCE
    written = []
    losses = frame[~is_variance]
    if not losses.empty:
        fig, ax = plt.subplots(figsize=(7, 4))
        for component, group in losses.groupby("component", sort=False):
            ax.plot(group["epoch"], group["value"], marker="o", markersize=3, label=component)
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.legend(fontsize="small")
        written.append(_save(fig, out_dir / "losses.svg"))
    variance = frame[is_variance]
    if not variance.empty:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(variance["epoch"], variance["value"], marker="o")
        ax.set_xlabel("epoch")
        ax.set_title("mean predicted aleatoric variance")
        written.append(_save(fig, out_dir / "variance.svg"))
    return written


def _plot_uncertainty(frame: pd.DataFrame, out_dir: Path) -> List[Path]:
    if frame.empty:
        return []
    per_round = frame.groupby("round")[["aleatoric", "epistemic"]].mean()
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, column in zip(axes, ("aleatoric", "epistemic")):
        ax.plot(per_round.index + 1, per_round[column], marker="o")
        ax.set_xlabel("round")
        ax.set_title(f"mean {column}")
    return [_save(fig, out_dir / "uncertainty.svg")]


def _plot_ablation(frame: pd.DataFrame, out_dir: Path) -> List[Path]:
    if frame.empty:
        return []
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.5))
    axes[0].bar(frame["variant"].astype(str), frame["R1"])
    axes[0].set_title("R@1")
    axes[1].errorbar(
        frame["variant"].astype(str),
        frame["aleatoric_mean"],
        yerr=frame["aleatoric_std"],
        fmt="o",
        label="aleatoric",
    )
    axes[1].errorbar(
        frame["variant"].astype(str),
        frame["epistemic_mean"],
        yerr=frame["epistemic_std"],
        fmt="s",
        label="epistemic",
    )
    axes[1].legend(fontsize="small")
    for ax in axes:
        ax.tick_params(axis="x", labelrotation=30)
    return [_save(fig, out_dir / "ablation.svg")]
