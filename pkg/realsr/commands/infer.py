"""Inference command."""

from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from tqdm import tqdm

from ..core import Predictor, Preset
from ..core.imaging import load_image, save_image
from ..utils import RealSRError, UsageError, list_images

app = typer.Typer(help="Super-resolve images with a trained checkpoint")
console = Console(stderr=True)


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    checkpoint: Path = typer.Option(..., "--checkpoint", help="sr checkpoint from train-sr"),
    input_path: Path = typer.Option(..., "--in", help="Input image, or a directory of images"),
    output_path: Path = typer.Option(..., "--out", help="Output PNG, or a directory when --in is a directory"),
    preset: Optional[Preset] = typer.Option(None, "--preset", case_sensitive=False, help="Expected preset; a checkpoint of another preset is rejected"),
    device: str = typer.Option("cpu", "--device", help="Torch device, e.g. cpu or cuda:0"),
):
    """Upscale images 4x; a clean_input checkpoint applies its embedded F first."""
    if ctx.invoked_subcommand is not None:
        return

    try:
        if input_path.is_dir():
            sources = list_images(input_path)
            if not sources:
                raise UsageError(f"no images found in '{input_path}'")
            if output_path.exists() and not output_path.is_dir():
                raise UsageError(f"--out '{output_path}' must be a directory when --in is a directory")
            targets = [output_path / f"{src.stem}.png" for src in sources]
        elif input_path.exists():
            sources, targets = [input_path], [output_path]
        else:
            raise UsageError(f"input '{input_path}' does not exist")

        predictor = Predictor(checkpoint, preset=preset, device=device)
        for src, dst in tqdm(list(zip(sources, targets)), desc="infer", disable=len(sources) == 1, leave=False):
            save_image(predictor(load_image(src)), dst)
    except RealSRError as e:
        console.print(f"[red]❌ {e}[/red]")
        raise typer.Exit(e.exit_code)

    where = targets[0] if len(targets) == 1 else output_path
    console.print(f"[green]✅ Super-resolved {len(targets)} image(s) → {where}[/green]")
