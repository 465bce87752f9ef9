"""Main CLI application entry point."""

import typer
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from . import __version__
from .commands import evaluate, generate, infer, report, score, train_ddl, train_sr, weights
from .core import ConfigManager

console = Console()

# Overview sections in pipeline order: (title, [(command, description)])
PIPELINE = [
    ("🖼️  Data", [
        ("generate", "Build a DSR/CSR benchmark from original images"),
    ]),
    ("🔁 Training", [
        ("train-ddl", "Stage 1: learn the domain generators G and F"),
        ("train-sr", "Stage 2: train the SR generator (ours, baseline, clean_input, lr_supervision, supervised)"),
        ("infer", "Super-resolve images with an sr checkpoint"),
    ]),
    ("📏 Evaluation", [
        ("evaluate", "Score a checkpoint on a benchmark (PSNR, SSIM, optional LPIPS)"),
        ("score", "Score SR images produced elsewhere"),
        ("report", "Render a saved metric report"),
    ]),
    ("📦 Weights", [
        ("weights", "Fetch and list pretrained ESRGAN / VGG19 weights"),
    ]),
]

QUICK_START = [
    "realsr generate --src data --out bench --scenario dsr --degradation noise",
    "realsr train-ddl --benchmark bench/dsr_noise --out runs/ddl",
    "realsr train-sr --benchmark bench/dsr_noise --out runs/sr --ddl-checkpoint runs/ddl/ddl_final.ckpt",
    "realsr evaluate --checkpoint runs/sr/sr_final.ckpt --benchmark bench/dsr_noise --out metrics.json",
]


def show_available_commands():
    """Print the command overview, grouped by pipeline stage."""
    console.print(Panel(
        f"[bold cyan]🔬 realsr {__version__}[/bold cyan]\n"
        "[cyan]Super-resolution for images with unknown real-world degradations[/cyan]",
        border_style="cyan",
    ))

    table = Table(show_header=False, box=None, padding=(0, 2))
    table.add_column("Command", style="cyan", min_width=12)
    table.add_column("Description", style="white")
    for title, commands in PIPELINE:
        table.add_row(f"[bold magenta]{title}[/bold magenta]", "")
        for name, desc in commands:
            table.add_row(f"  {name}", desc)
    console.print(table)

    console.print(Panel(
        "\n".join(f"[cyan]{line}[/cyan]" for line in QUICK_START),
        title="🚀 Quick Start",
        border_style="green",
    ))
    console.print(
        f"[yellow]💡 Tip:[/yellow] weights are cached in [cyan]{ConfigManager().weights_dir}[/cyan]; "
        "use [cyan]realsr <command> --help[/cyan] for every option"
    )


def version_callback(value: bool):
    if value:
        typer.echo(f"realsr {__version__}")
        raise typer.Exit()


app = typer.Typer(
    name="realsr",
    help="🔬 Real-world super-resolution via domain distance learning",
    rich_markup_mode="rich",
    no_args_is_help=False,  # the callback prints the overview instead
)

app.add_typer(generate.app, name="generate", help="Generate a DSR/CSR benchmark")
app.add_typer(train_ddl.app, name="train-ddl", help="Train the domain generators G and F")
app.add_typer(train_sr.app, name="train-sr", help="Train the SR generator")
app.add_typer(infer.app, name="infer", help="Super-resolve images with a trained checkpoint")
app.add_typer(evaluate.app, name="evaluate", help="Evaluate a checkpoint on a benchmark")
app.add_typer(score.app, name="score", help="Score a directory of SR images against a benchmark")
app.add_typer(report.app, name="report", help="Render a saved metric report")
app.add_typer(weights.app, name="weights", help="Manage pretrained weight files")


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    version: bool = typer.Option(
        False, "--version", callback=version_callback, is_eager=True, help="Show the realsr version and exit"
    ),
):
    """realsr - super-resolution for images with unknown real-world degradations 🔬"""
    if ctx.invoked_subcommand is None:
        show_available_commands()


if __name__ == "__main__":
    app()
