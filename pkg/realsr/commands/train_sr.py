"""Stage-2 super-resolution training command."""

from pathlib import Path
from typing import Optional

import typer
from rich.console import Console

from ..core import ConfigManager, Preset, Stage, TrainMode, train_sr
from ..utils import RealSRError, TrainingDivergedError
from .train_ddl import load_train_config, print_divergence, print_result

app = typer.Typer(help="Train the SR generator")
console = Console(stderr=True)


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    benchmark: Path = typer.Option(..., "--benchmark", help="Benchmark directory containing manifest.tsv"),
    out: Path = typer.Option(..., "--out", help="Run directory for checkpoints and train_log.jsonl"),
    mode: Optional[TrainMode] = typer.Option(None, "--mode", case_sensitive=False, help="ours, baseline, clean_input, lr_supervision or supervised (default: ours)"),
    ddl_checkpoint: Optional[Path] = typer.Option(None, "--ddl-checkpoint", help="Stage-1 checkpoint (required by ours and clean_input)"),
    config: Optional[Path] = typer.Option(None, "--config", help="key = value training config file"),
    resume: Optional[Path] = typer.Option(None, "--resume", help="Continue from an sr checkpoint (its config snapshot wins)"),
    preset: Optional[Preset] = typer.Option(None, "--preset", case_sensitive=False, help="desk (small, CPU) or full (full-size) networks and crops"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Seed for initialization and every training step"),
    steps: Optional[int] = typer.Option(None, "--steps", min=1, help="Total step count (default: iterations)"),
    pretrained: Optional[str] = typer.Option(None, "--pretrained", help="ESRGAN weights for S: a path or a file name in the weights cache"),
    vgg_weights: Optional[str] = typer.Option(None, "--vgg-weights", help="'imagenet', a path, or a cached VGG19 weight file for the feature loss"),
    materialize_pairs: Optional[bool] = typer.Option(None, "--materialize-pairs/--on-the-fly-pairs", help="Precompute G(B(Y)) once instead of per batch (mode ours)"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1, help="Image loading threads (default: logical cores)"),
    device: str = typer.Option("cpu", "--device", help="Torch device, e.g. cpu or cuda:0"),
):
    """Train S (and critic C) in one of the SR training modes."""
    if ctx.invoked_subcommand is not None:
        return

    try:
        train_config = load_train_config(
            Stage.SR, config, preset=preset, mode=mode, seed=seed,
            materialize_pairs=materialize_pairs, workers=workers,
        )
        config_manager = ConfigManager()
        pretrained_path = config_manager.resolve_weights(pretrained) if pretrained else None
        vgg_source = vgg_weights
        if vgg_weights is not None and vgg_weights != "imagenet":
            vgg_source = config_manager.resolve_weights(vgg_weights)

        console.print(
            f"[blue]🔁 Training SR ({train_config.mode.value}, {train_config.preset.value}, "
            f"seed {train_config.seed}) on {benchmark}[/blue]"
        )
        if train_config.reference_only:
            console.print(
                "[yellow]📌 Supervised mode uses the ground-truth degradation; "
                "treat its scores as a reference upper bound only[/yellow]"
            )
        result = train_sr(
            train_config, benchmark, out,
            ddl_checkpoint=ddl_checkpoint, resume=resume, pretrained=pretrained_path,
            vgg_weights=vgg_source, total_steps=steps, progress=True, device=device,
        )
    except TrainingDivergedError as e:
        print_divergence(e)
        raise typer.Exit(e.exit_code)
    except RealSRError as e:
        console.print(f"[red]❌ {e}[/red]")
        raise typer.Exit(e.exit_code)

    for warning in result.warnings:
        console.print(f"[yellow]⚠️  {warning}[/yellow]")
    print_result(result, "✅ SR training complete")
