import pytest

from lyricgauge import generate_corpus, write_manifest


@pytest.fixture()
def toy_manifest(tmp_path):
    """Two-item corpus written to disk; returns (manifest, lyrics_root, items)."""
    items = generate_corpus(2, seed=8)
    manifest = tmp_path / "manifest.jsonl"
    lyrics_root = tmp_path / "lyrics"
    write_manifest(items, manifest, lyrics_root)
    return manifest, lyrics_root, items
