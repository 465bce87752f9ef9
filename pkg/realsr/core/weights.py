"""Download and list pretrained weight files in the realsr cache."""

import os
from pathlib import Path
from typing import Callable, List, Optional, Tuple
from urllib.parse import urlparse

import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from .. import __version__
from ..utils.exceptions import DataIOError, UsageError
from ..utils.helpers import sanitize_filename, sha256_file


class WeightsClient:
    """HTTP client that fetches weight files into a cache directory."""

    def __init__(self, weights_dir: Path, timeout: int = 60):
        """Initialize weights client.

        Args:
            weights_dir: Destination directory
            timeout: Request timeout in seconds
        """
        self.weights_dir = weights_dir
        self.timeout = timeout

        # Setup session with retry strategy
        self.session = requests.Session()
        retry_strategy = Retry(
            total=3,
            backoff_factor=1,
            status_forcelist=[429, 500, 502, 503, 504],
        )
        adapter = HTTPAdapter(max_retries=retry_strategy)
        self.session.mount("http://", adapter)
        self.session.mount("https://", adapter)
        self.session.headers.update({"User-Agent": f"realsr/{__version__}"})

    def fetch(
        self,
        url: str,
        name: Optional[str] = None,
        force: bool = False,
        on_chunk: Optional[Callable[[int, Optional[int]], None]] = None,
    ) -> Tuple[Path, bool]:
        """Download ``url`` into the cache.

        Args:
            url: Source URL (http or https)
            name: Cache file name; defaults to the URL's last path segment
            force: Download even when the file is already cached
            on_chunk: Progress callback ``(bytes_in_chunk, total_bytes_or_None)``

        Returns:
            Cached path and whether a download happened
        """
        parsed = urlparse(url)
        if parsed.scheme not in ("http", "https"):
            raise UsageError(f"unsupported URL scheme '{parsed.scheme}' (expected http or https)")
        file_name = sanitize_filename(name or Path(parsed.path).name or "weights.pth")
        dest = self.weights_dir / file_name
        if dest.exists() and not force:
            return dest, False

        tmp_path = dest.with_name(dest.name + ".part")
        try:
            self.weights_dir.mkdir(parents=True, exist_ok=True)
            with self.session.get(url, stream=True, timeout=self.timeout) as response:
                response.raise_for_status()
                total = response.headers.get("Content-Length")
                total_bytes = int(total) if total and total.isdigit() else None
                with open(tmp_path, "wb") as f:
                    for chunk in response.iter_content(chunk_size=1 << 16):
                        if not chunk:
                            continue
                        f.write(chunk)
                        if on_chunk is not None:
                            on_chunk(len(chunk), total_bytes)
            os.replace(tmp_path, dest)
        except requests.exceptions.RequestException as e:
            tmp_path.unlink(missing_ok=True)
            raise DataIOError(f"download failed: {e}")
        except OSError as e:
            tmp_path.unlink(missing_ok=True)
            raise DataIOError(f"cannot write '{dest}': {e}")
        return dest, True


def list_cached(weights_dir: Path) -> List[Tuple[Path, int, str]]:
    """Cached weight files with size and SHA-256 prefix, sorted by name."""
    if not weights_dir.is_dir():
        return []
    entries = []
    for path in sorted(p for p in weights_dir.iterdir() if p.is_file() and not p.name.endswith(".part")):
        entries.append((path, path.stat().st_size, sha256_file(path)[:12]))
    return entries
