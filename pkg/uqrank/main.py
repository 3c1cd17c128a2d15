"""Main CLI entry point for uqrank."""

import sys
from pathlib import Path
from typing import Any, Optional

import typer
from dotenv import load_dotenv

from uqrank.cli import CLI, StandardCLI
from uqrank.globals.cli_config import CLIConfig
from uqrank.globals.logging import configure_logging

load_dotenv()
app = typer.Typer(no_args_is_help=True)

CONFIG_HELP = "Run config file with one 'key = value' per line"
OUT_HELP = "Directory receiving the model, reports and plots"


def _cli(ctx: typer.Context, **options: Any) -> CLI:
    return StandardCLI(CLIConfig(**ctx.obj, **options))


@app.callback()
def main(
    ctx: typer.Context,
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at debug level"),
    quiet: bool = typer.Option(default=False, help="Suppress warning-level problems in output"),
    max_warnings: int = typer.Option(
        default=sys.maxsize,
        help="Maximum number of data warnings before exiting with error",
        min=0,
        show_default=False,
    ),
):
    """Trains and evaluates uncertainty-aware visual dialog rankers. \n
    Bayesian dropout encoders, uncertainty-driven attention and a diverse answer decoder,
    scored by retrieval metrics, uncertainty reports and SVD diversity.
    """
    configure_logging(verbose)
    ctx.obj = {"no_warnings": quiet, "max_warnings": max_warnings}


@app.command()
def gen(
    ctx: typer.Context,
    spec: Optional[Path] = typer.Option(None, help="Generation spec, 'key = value' per line"),
    out: Path = typer.Option(Path("data/synthetic.json"), help="Dialog JSON file to write"),
):
    """Generate a synthetic shapes-dialog dataset in the VisDial layout."""
    sys.exit(_cli(ctx).gen(spec, out))


@app.command()
def train(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, help=CONFIG_HELP),
    out: Path = typer.Option(Path("runs/train"), help=OUT_HELP),
    train_data: Optional[Path] = typer.Option(None, help="Training dialogs (VisDial JSON)"),
    val_data: Optional[Path] = typer.Option(None, help="Validation dialogs (VisDial JSON)"),
):
    """Train a model, evaluate it and write the model and its report."""
    cli = _cli(ctx, config_path=config, out_dir=out, train_data=train_data, val_data=val_data)
    sys.exit(cli.train())


@app.command(name="eval")
def evaluate(
    ctx: typer.Context,
    model: Path = typer.Option(..., help="Directory of a saved model"),
    data: Optional[Path] = typer.Option(None, help="Dialogs to evaluate (VisDial JSON)"),
    config: Optional[Path] = typer.Option(None, help=CONFIG_HELP),
    out: Path = typer.Option(Path("runs/eval"), help=OUT_HELP),
):
    """Evaluate a saved model: metrics, per-round uncertainty and attention maps."""
    cli = _cli(ctx, model_dir=model, val_data=data, config_path=config, out_dir=out)
    sys.exit(cli.evaluate())


@app.command()
def ablate(
    ctx: typer.Context,
    mode: str = typer.Option(..., help="losses, noise, data-fraction, dropout-placement or eta"),
    config: Optional[Path] = typer.Option(None, help=CONFIG_HELP),
    grid: Optional[Path] = typer.Option(None, help="Ablation grid YAML file"),
    out: Path = typer.Option(Path("runs"), help=OUT_HELP),
    train_data: Optional[Path] = typer.Option(None, help="Training dialogs (VisDial JSON)"),
    val_data: Optional[Path] = typer.Option(None, help="Validation dialogs (VisDial JSON)"),
):
    """Run one ablation sweep and write its table."""
    cli = _cli(
        ctx,
        config_path=config,
        grid_path=grid,
        out_dir=out,
        train_data=train_data,
        val_data=val_data,
    )
    sys.exit(cli.ablate(mode))


@app.command()
def diversity(
    ctx: typer.Context,
    model: Path = typer.Option(..., help="Directory of a saved model"),
    data: Optional[Path] = typer.Option(None, help="Dialogs to sample (VisDial JSON)"),
    config: Optional[Path] = typer.Option(None, help=CONFIG_HELP),
):
    """Report the SVD diversity of a saved model's sampled answers."""
    sys.exit(_cli(ctx, model_dir=model, val_data=data, config_path=config).diversity())


@app.command()
def plot(
    ctx: typer.Context,
    in_dir: Path = typer.Option(..., "--in", help="Report directory holding the CSVs"),
):
    """Render loss, uncertainty and ablation plots to SVG."""
    sys.exit(_cli(ctx).plot(in_dir))
