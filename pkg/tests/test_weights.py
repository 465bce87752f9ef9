"""Tests for the weights cache client."""

import pytest
import requests

from realsr.core.weights import WeightsClient, list_cached
from realsr.utils.exceptions import DataIOError, UsageError


class FakeResponse:
    def __init__(self, chunks, status=200):
        self.chunks = chunks
        self.status = status
        self.headers = {"Content-Length": str(sum(len(c) for c in chunks))}

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def raise_for_status(self):
        if self.status >= 400:
            raise requests.exceptions.HTTPError(f"{self.status} Server Error")

    def iter_content(self, chunk_size=1):
        return iter(self.chunks)


@pytest.fixture
def client(tmp_path):
    return WeightsClient(tmp_path / "weights")


def serve(monkeypatch, client, response, calls=None):
    def get(url, stream=False, timeout=None):
        if calls is not None:
            calls.append(url)
        return response

    monkeypatch.setattr(client.session, "get", get)


class TestFetch:
    def test_downloads_into_cache(self, client, monkeypatch):
        progress = []
        serve(monkeypatch, client, FakeResponse([b"abc", b"", b"defg"]))
        path, downloaded = client.fetch("https://example.org/models/RRDB_ESRGAN_x4.pth",
                                        on_chunk=lambda n, total: progress.append((n, total)))
        assert downloaded
        assert path == client.weights_dir / "RRDB_ESRGAN_x4.pth"
        assert path.read_bytes() == b"abcdefg"
        assert progress == [(3, 7), (4, 7)]
        assert not path.with_name(path.name + ".part").exists()

    def test_cached_file_is_not_downloaded_again(self, client, monkeypatch):
        calls = []
        serve(monkeypatch, client, FakeResponse([b"new"]), calls)
        client.weights_dir.mkdir(parents=True)
        (client.weights_dir / "vgg.pth").write_bytes(b"old")
        path, downloaded = client.fetch("https://example.org/vgg.pth")
        assert not downloaded and calls == []
        assert path.read_bytes() == b"old"
        _, downloaded = client.fetch("https://example.org/vgg.pth", force=True)
        assert downloaded
        assert path.read_bytes() == b"new"

    def test_custom_name_is_sanitized(self, client, monkeypatch):
        serve(monkeypatch, client, FakeResponse([b"x"]))
        path, _ = client.fetch("https://example.org/download?id=3", name="my:weights.pth")
        assert path.name == "my_weights.pth"

    def test_http_error_leaves_no_partial_file(self, client, monkeypatch):
        serve(monkeypatch, client, FakeResponse([b"x"], status=503))
        with pytest.raises(DataIOError, match="download failed"):
            client.fetch("https://example.org/w.pth")
        assert list(client.weights_dir.iterdir()) == []

    def test_rejects_other_schemes(self, client):
        with pytest.raises(UsageError, match="ftp"):
            client.fetch("ftp://example.org/w.pth")


class TestListCached:
    def test_missing_directory(self, tmp_path):
        assert list_cached(tmp_path / "none") == []

    def test_lists_complete_files_sorted(self, tmp_path):
        (tmp_path / "b.pth").write_bytes(b"bb")
        (tmp_path / "a.pth").write_bytes(b"a")
        (tmp_path / "c.pth.part").write_bytes(b"partial")
        entries = list_cached(tmp_path)
        assert [(p.name, size) for p, size, _ in entries] == [("a.pth", 1), ("b.pth", 2)]
        assert entries[0][2] == "ca978112ca1b"  # sha256("a")
