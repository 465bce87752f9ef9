"""Benchmark generation command."""

from enum import Enum
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from ..core import (
    BenchmarkSources,
    DegradationKind,
    DegradationRecipe,
    Scenario,
    build_training_sets,
    write_benchmark,
)
from ..utils import RealSRError, default_workers

app = typer.Typer(help="Generate a DSR/CSR benchmark")
console = Console(stderr=True)


class ScenarioChoice(str, Enum):
    DSR = "dsr"
    CSR = "csr"


class DegradationChoice(str, Enum):
    NOISE = "noise"
    JPEG = "jpeg"


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    src: Path = typer.Option(..., "--src", help="Source directory with train/, eval/ and optional train_clean/ originals"),
    out: Path = typer.Option(..., "--out", help="Benchmark root; files go to <out>/<scenario>_<degradation>/"),
    scenario: ScenarioChoice = typer.Option(..., "--scenario", case_sensitive=False, help="dsr (one shared domain) or csr (clean output set)"),
    degradation: DegradationChoice = typer.Option(..., "--degradation", case_sensitive=False, help="Degradation operator applied after downsampling"),
    sigma: float = typer.Option(8.0, "--sigma", min=0.0, help="Sensor noise standard deviation on the 8-bit scale"),
    quality: int = typer.Option(30, "--quality", min=1, max=100, help="JPEG quality"),
    scale: int = typer.Option(4, "--scale", min=1, help="Bicubic downsampling factor"),
    seed: int = typer.Option(0, "--seed", min=0, help="Master seed; every per-image seed is derived from it"),
    paired: bool = typer.Option(False, "--paired", help="Also write ground-truth training pairs for supervised runs"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1, help="Parallel rendering threads (default: logical cores; 1 = serial)"),
    force: bool = typer.Option(False, "--force", help="Rewrite files even when the benchmark is up to date"),
):
    """Render a benchmark tree and its manifest from original images."""
    if ctx.invoked_subcommand is not None:
        return

    kind = DegradationKind.SENSOR_NOISE if degradation == DegradationChoice.NOISE else DegradationKind.JPEG
    try:
        recipe = DegradationRecipe(kind=kind, sigma_8bit=sigma, quality=quality, seed=seed)
        sources = BenchmarkSources.discover(src)
        plan = build_training_sets(sources, Scenario(scenario.value.upper()), scale, recipe, paired=paired)

        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            console=console,
            transient=True,
        ) as progress:
            task = progress.add_task("🖼️  Rendering images", total=len(plan.jobs))
            summary = write_benchmark(
                out, plan, workers=default_workers(workers), force=force,
                on_item=lambda: progress.advance(task),
            )
    except RealSRError as e:
        console.print(f"[red]❌ {e}[/red]")
        raise typer.Exit(e.exit_code)

    if summary.up_to_date:
        console.print(f"[green]✅ {summary.bench_dir}: up-to-date, 0 files written[/green]")
        return

    table = Table(title=f"📦 {summary.bench_dir.name}", show_header=True, header_style="bold magenta")
    table.add_column("Role", style="cyan")
    table.add_column("Images", justify="right", style="green")
    for role, count in summary.counts.items():
        table.add_row(role, str(count))
    console.print(table)
    console.print(f"[green]✅ Wrote {summary.written} files to {summary.bench_dir}[/green]")
