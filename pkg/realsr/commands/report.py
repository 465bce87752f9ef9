"""Report rendering command."""

from pathlib import Path

import typer
from rich.console import Console
from rich.panel import Panel

from ..core import ReportFormat, load_report, render_report
from ..utils import RealSRError

app = typer.Typer(help="Render a saved metric report")
console = Console(stderr=True)


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    path: Path = typer.Argument(..., help="Report saved by evaluate/score (.json or delimited)"),
    fmt: ReportFormat = typer.Option(ReportFormat.TEXT, "--format", case_sensitive=False, help="Output format"),
):
    """Print a saved report as a table or as delimited text."""
    if ctx.invoked_subcommand is not None:
        return

    try:
        report = load_report(path)
    except RealSRError as e:
        console.print(f"[red]❌ {e}[/red]")
        raise typer.Exit(e.exit_code)

    if fmt == ReportFormat.TEXT and report.checkpoint_id:
        provenance = [
            f"[cyan]Checkpoint:[/cyan] {report.checkpoint_id}",
            f"[cyan]Benchmark:[/cyan] {report.benchmark_id} ({report.scenario}, {report.degradation})",
        ]
        if report.plugin_id:
            provenance.append(f"[cyan]Perceptual:[/cyan] {report.plugin_id} ({report.plugin_fingerprint})")
        console.print(Panel("\n".join(provenance), title="📊 Report", border_style="blue"))
    if report.warning:
        console.print(f"[yellow]⚠️  {report.warning}[/yellow]")
    typer.echo(render_report(report, fmt).decode("utf-8"), nl=False)
