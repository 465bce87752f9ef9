"""Scoring of externally produced SR images."""

from pathlib import Path
from typing import Optional

import typer
from rich.console import Console

from ..core import ReportFormat, score_external
from ..utils import RealSRError, default_workers
from .evaluate import emit_report, resolve_plugin, scoring_progress

app = typer.Typer(help="Score a directory of SR images against a benchmark")
console = Console(stderr=True)


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    images: Path = typer.Option(..., "--images", help="Directory of SR images named after the eval ids"),
    benchmark: Path = typer.Option(..., "--benchmark", help="Benchmark directory containing manifest.tsv"),
    plugin: Optional[str] = typer.Option(None, "--plugin", help="Perceptual metric: not-lpips, lpips, lpips:alex, lpips:vgg or an LPIPS weight file"),
    out: Optional[Path] = typer.Option(None, "--out", help="Save the report (.json for JSON, otherwise delimited text)"),
    fmt: ReportFormat = typer.Option(ReportFormat.TEXT, "--format", case_sensitive=False, help="Report format printed to stdout"),
    shave: int = typer.Option(0, "--shave", min=0, help="Border pixels excluded from the metrics"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1, help="Scoring threads (default: logical cores)"),
):
    """Score images produced by another method with the same metrics as evaluate."""
    if ctx.invoked_subcommand is not None:
        return

    metric = resolve_plugin(plugin)
    try:
        with scoring_progress() as progress:
            task = progress.add_task("📏 Scoring", total=None)
            report = score_external(
                images, benchmark, plugin=metric, shave=shave,
                workers=default_workers(workers), on_item=lambda: progress.advance(task),
            )
    except RealSRError as e:
        console.print(f"[red]❌ {e}[/red]")
        raise typer.Exit(e.exit_code)

    emit_report(report, out, fmt)
