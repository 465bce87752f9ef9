"""Pretrained weight cache commands."""

from typing import Optional

import typer
from rich.console import Console
from rich.progress import BarColumn, DownloadColumn, Progress, TextColumn, TransferSpeedColumn
from rich.table import Table

from ..core import ConfigManager, WeightsClient, list_cached
from ..utils import RealSRError, format_file_size, show_subcommands

app = typer.Typer(help="Manage pretrained weight files")
console = Console(stderr=True)


@app.callback(invoke_without_command=True)
def main(ctx: typer.Context):
    """Manage pretrained weight files."""
    if ctx.invoked_subcommand is None:
        subcommands = [
            ("fetch", "⬇️  Download a weight file into the cache", "<url> --name FILE"),
            ("list", "📋 List cached weight files", None),
        ]

        show_subcommands(
            "weights",
            subcommands,
            "ESRGAN and VGG19 weights used by train-sr"
        )


@app.command("fetch")
def fetch(
    url: str = typer.Argument(..., help="http(s) URL of the weight file"),
    name: Optional[str] = typer.Option(None, "--name", help="File name in the cache (default: last URL segment)"),
    force: bool = typer.Option(False, "--force", help="Download again even if the file is cached"),
):
    """Download a weight file into the cache."""
    config_manager = ConfigManager()
    try:
        config_manager.ensure_cache_directory()
        client = WeightsClient(config_manager.weights_dir)
        with Progress(
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            DownloadColumn(),
            TransferSpeedColumn(),
            console=console,
            transient=True,
        ) as progress:
            task = progress.add_task("⬇️  Downloading", total=None)

            def advance(size: int, total: Optional[int]):
                progress.update(task, advance=size, total=total)

            path, downloaded = client.fetch(url, name=name, force=force, on_chunk=advance)
    except RealSRError as e:
        console.print(f"[red]❌ {e}[/red]")
        raise typer.Exit(e.exit_code)

    if downloaded:
        console.print(f"[green]✅ Saved {path.name} ({format_file_size(path.stat().st_size)}) to {path.parent}[/green]")
    else:
        console.print(f"[yellow]📦 {path.name} is already cached; use --force to download again[/yellow]")


@app.command("list")
def list_weights():
    """List cached weight files."""
    config_manager = ConfigManager()
    entries = list_cached(config_manager.weights_dir)

    if not entries:
        console.print(f"[yellow]No weight files in {config_manager.weights_dir}. Run 'realsr weights fetch <url>'.[/yellow]")
        return

    table = Table(title="📦 Cached weights", show_header=True, header_style="bold magenta")
    table.add_column("Name", style="cyan")
    table.add_column("Size", style="green", justify="right")
    table.add_column("SHA-256", style="blue")

    for path, size, digest in entries:
        table.add_row(path.name, format_file_size(size), digest)

    console.print(table)
