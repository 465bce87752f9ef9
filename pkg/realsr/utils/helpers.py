"""Helper utilities for realsr."""

import hashlib
import os
import re
from pathlib import Path
from typing import List, Optional

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"}


def format_file_size(size_bytes: int) -> str:
    """Format file size in bytes to human-readable string.

    Args:
        size_bytes: Size in bytes

    Returns:
        Formatted size string
    """
    if size_bytes == 0:
        return "0 B"

    units = ['B', 'KB', 'MB', 'GB', 'TB']
    size = float(size_bytes)
    unit_index = 0

    while size >= 1024 and unit_index < len(units) - 1:
        size /= 1024
        unit_index += 1

    if unit_index == 0:
        return f"{int(size)} {units[unit_index]}"
    return f"{size:.1f} {units[unit_index]}"


def sanitize_filename(filename: str) -> str:
    """Sanitize a filename for safe filesystem usage.

    Args:
        filename: Original filename

    Returns:
        Sanitized filename
    """
    sanitized = re.sub(r'[<>:"/\\|?*]', '_', filename)
    sanitized = re.sub(r'[\x00-\x1f\x7f-\x9f]', '', sanitized)
    sanitized = sanitized.strip(' .')

    if not sanitized:
        sanitized = "unnamed"

    return sanitized[:255]


def zero_padded_name(index: int, total: int, suffix: str = ".png") -> str:
    """Build a zero-padded numeric filename wide enough for ``total`` items.

    Args:
        index: Zero-based item index
        total: Number of items in the set
        suffix: File suffix

    Returns:
        Filename such as ``0007.png``
    """
    width = max(4, len(str(max(total, 1))))
    return f"{index + 1:0{width}d}{suffix}"


def list_images(directory: Path) -> List[Path]:
    """List image files in a directory, sorted by name.

    Args:
        directory: Directory to scan (non-recursive)

    Returns:
        Sorted list of image paths; empty if the directory does not exist
    """
    if not directory.is_dir():
        return []
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def sha256_file(path: Path, chunk_size: int = 1 << 20) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def default_workers(requested: Optional[int] = None) -> int:
    """Resolve a ``--workers`` value; ``None`` or 0 means all logical cores.

    Args:
        requested: Worker count from the command line

    Returns:
        Positive worker count
    """
    if requested and requested > 0:
        return requested
    return os.cpu_count() or 1
