"""Listing of a command group's subcommands, shown when the group is invoked bare."""

from typing import List, Optional, Sequence, Tuple

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

console = Console(stderr=True)

# (name, description, example arguments or None)
Subcommand = Tuple[str, str, Optional[str]]


def show_subcommands(command_name: str, subcommands: Sequence[Subcommand], description: Optional[str] = None):
    """Display the subcommands of a group with usage examples.

    Args:
        command_name: Name of the parent command
        subcommands: ``(name, description, example_args)`` entries; entries
            with example arguments are shown as usage lines
        description: Optional one-line description of the group
    """
    title = Text(f"🔬 realsr {command_name}", style="bold cyan")
    if description:
        title.append(f"\n{description}", style="cyan")
    console.print(Panel(title, border_style="cyan"))

    table = Table(show_header=True, header_style="bold magenta", box=None)
    table.add_column("Subcommand", style="cyan", min_width=15)
    table.add_column("Description", style="white")
    for name, desc, _ in subcommands:
        table.add_row(name, desc)
    console.print(table)

    usage: List[str] = [
        f"[cyan]realsr {command_name} {name}{' ' + args if args else ''}[/cyan]"
        for name, _, args in subcommands
    ]
    if usage:
        console.print(Panel("\n".join(usage), title="🚀 Usage", border_style="green"))

    console.print(
        f"[yellow]💡 Tip:[/yellow] [cyan]realsr {command_name} <subcommand> --help[/cyan] lists every option"
    )
