"""Evaluation command."""

from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn

from ..core import MetricReport, ReportFormat, evaluate, load_plugin, render_report
from ..utils import PluginError, RealSRError, default_workers

app = typer.Typer(help="Evaluate a checkpoint on a benchmark")
console = Console(stderr=True)


def resolve_plugin(name: Optional[str]):
    """Load a perceptual plugin; an unusable plugin is reported and skipped."""
    try:
        return load_plugin(name)
    except PluginError as e:
        console.print(f"[yellow]⚠️  {e}; continuing without lpips[/yellow]")
        return None


def scoring_progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        console=console,
        transient=True,
    )


def emit_report(report: MetricReport, out: Optional[Path], fmt: ReportFormat):
    """Print the report to stdout and optionally save it.

    ``--out`` files ending in ``.json`` get the full JSON report with
    provenance; anything else gets the delimited format.
    """
    if report.warning:
        console.print(f"[yellow]⚠️  {report.warning}[/yellow]")
    typer.echo(render_report(report, fmt).decode("utf-8"), nl=False)
    if out is None:
        return
    if out.suffix.lower() == ".json":
        data = report.to_json().encode("utf-8") + b"\n"
    else:
        data = render_report(report, ReportFormat.DELIMITED)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(data)
    except OSError as e:
        console.print(f"[red]❌ cannot write report '{out}': {e}[/red]")
        raise typer.Exit(3)
    console.print(f"[green]💾 Report saved to {out}[/green]")


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    checkpoint: Path = typer.Option(..., "--checkpoint", help="sr checkpoint from train-sr"),
    benchmark: Path = typer.Option(..., "--benchmark", help="Benchmark directory containing manifest.tsv"),
    plugin: Optional[str] = typer.Option(None, "--plugin", help="Perceptual metric: not-lpips, lpips, lpips:alex, lpips:vgg or an LPIPS weight file"),
    out: Optional[Path] = typer.Option(None, "--out", help="Save the report (.json for JSON, otherwise delimited text)"),
    fmt: ReportFormat = typer.Option(ReportFormat.TEXT, "--format", case_sensitive=False, help="Report format printed to stdout"),
    shave: int = typer.Option(0, "--shave", min=0, help="Border pixels excluded from the metrics"),
    dump: Optional[Path] = typer.Option(None, "--dump", help="Also write the 8-bit predictions to this directory"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1, help="Scoring threads (default: logical cores)"),
):
    """Super-resolve every eval input and report PSNR, SSIM and optional LPIPS."""
    if ctx.invoked_subcommand is not None:
        return

    metric = resolve_plugin(plugin)
    try:
        with scoring_progress() as progress:
            task = progress.add_task("📏 Scoring", total=None)
            report = evaluate(
                checkpoint, benchmark, plugin=metric, shave=shave, dump_dir=dump,
                workers=default_workers(workers), on_item=lambda: progress.advance(task),
            )
    except RealSRError as e:
        console.print(f"[red]❌ {e}[/red]")
        raise typer.Exit(e.exit_code)

    emit_report(report, out, fmt)
