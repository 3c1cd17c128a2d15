"""Holds CLI arguments configuration."""
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


@dataclass
class CLIConfig:
    """
    Configuration for CLI operations.

    Attributes:
        config_path: Run config file (``key = value``), or None for defaults
        out_dir: Directory receiving models, reports and plots
        train_data: VisDial-schema training file, or None for synthetic dialogs
        val_data: VisDial-schema evaluation file, or None for synthetic dialogs
        model_dir: Directory of a saved model
        grid_path: Ablation grid file, or None for the bundled grid
        max_warnings: Maximum number of warnings before exiting with error code 1
        no_warnings: Whether to suppress warning-level problems in output
    """

    config_path: Optional[Path] = None
    out_dir: Path = Path("runs")
    train_data: Optional[Path] = None
    val_data: Optional[Path] = None
    model_dir: Optional[Path] = None
    grid_path: Optional[Path] = None
    max_warnings: int = sys.maxsize
    no_warnings: bool = False
