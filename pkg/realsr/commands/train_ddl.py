"""Stage-1 (domain distance learning) training command."""

from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.panel import Panel

from ..core import ConfigManager, Preset, Stage, TrainConfig, TrainMode, train_ddl
from ..utils import RealSRError, TrainingDivergedError, default_workers

app = typer.Typer(help="Train the domain generators G and F")
console = Console(stderr=True)


def load_train_config(stage: Stage, config_path: Optional[Path], **overrides) -> TrainConfig:
    """Build a training config from defaults, an optional config file and command-line values.

    ``workers`` falls back to the logical core count unless the file sets it.
    """
    config_manager = ConfigManager()
    file_values = config_manager.load_config_file(config_path) if config_path is not None else {}
    if overrides.get("workers") is None and "workers" not in file_values:
        overrides["workers"] = default_workers()
    return config_manager.build_train_config(stage, file_values=file_values, overrides=overrides)


def print_result(result, title: str):
    """Print the checkpoint summary of a finished (or stopped) run."""
    lines = [f"[cyan]Steps:[/cyan] {result.steps_done}/{result.total_steps}"]
    if result.last_report is not None:
        lines.append(f"[cyan]Last loss:[/cyan] {result.last_report.total:.4f}")
    if result.final_checkpoint is not None:
        lines.append(f"[cyan]Final:[/cyan] {result.final_checkpoint}")
    if result.latest_checkpoint is not None:
        lines.append(f"[cyan]Latest:[/cyan] {result.latest_checkpoint}")
    lines.append(f"[cyan]Log:[/cyan] {result.log_path}")
    console.print(Panel("\n".join(lines), title=title, border_style="green"))


def print_divergence(e: TrainingDivergedError):
    console.print(f"[red]❌ {e}[/red]")
    if e.last_good is not None:
        console.print(f"[yellow]💾 Last good checkpoint: {e.last_good}[/yellow]")
    else:
        console.print("[yellow]💾 No checkpoint was written before the divergence[/yellow]")


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    benchmark: Path = typer.Option(..., "--benchmark", help="Benchmark directory containing manifest.tsv"),
    out: Path = typer.Option(..., "--out", help="Run directory for checkpoints and train_log.jsonl"),
    config: Optional[Path] = typer.Option(None, "--config", help="key = value training config file"),
    resume: Optional[Path] = typer.Option(None, "--resume", help="Continue from a ddl checkpoint (its config snapshot wins)"),
    preset: Optional[Preset] = typer.Option(None, "--preset", case_sensitive=False, help="desk (small, CPU) or full (full-size) networks and crops"),
    mode: Optional[TrainMode] = typer.Option(None, "--mode", case_sensitive=False, help="Training mode; stage 1 only accepts 'ours'"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Seed for initialization and every training step"),
    steps: Optional[int] = typer.Option(None, "--steps", min=1, help="Total step count (default: epochs over the larger domain set)"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1, help="Image loading threads (default: logical cores)"),
    device: str = typer.Option("cpu", "--device", help="Torch device, e.g. cpu or cuda:0"),
):
    """Learn the domain distance between the input and downsampled output domains."""
    if ctx.invoked_subcommand is not None:
        return

    try:
        train_config = load_train_config(Stage.DDL, config, preset=preset, mode=mode, seed=seed, workers=workers)
        console.print(
            f"[blue]🔁 Training DDL ({train_config.preset.value}, seed {train_config.seed}) on {benchmark}[/blue]"
        )
        result = train_ddl(
            train_config, benchmark, out, resume=resume, total_steps=steps, progress=True, device=device,
        )
    except TrainingDivergedError as e:
        print_divergence(e)
        raise typer.Exit(e.exit_code)
    except RealSRError as e:
        console.print(f"[red]❌ {e}[/red]")
        raise typer.Exit(e.exit_code)

    print_result(result, "✅ DDL training complete")
