"""Sentence encoder backends behind one identifier scheme.

An encoder identifier is `<scheme>:<rest>`:

  hash:<dim>:<seed>   offline deterministic encoder, no model download;
                      sha256-derived coordinates in [-1, 1]. Meant for
                      pipeline tests and air-gapped runs.
  st:<model_name>     sentence-transformers model; exports the model's own
                      pooled sentence embedding.
  hf:<model_name>     transformers AutoModel; exports the mean over token
                      positions of the final hidden state. For emotion
                      checkpoints this is the pooled pre-classifier
                      representation, not the per-class logits.

Load failures (missing extra, unreachable hub, bad name) raise ExportError
with the failing identifier and a suggested fix.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np


class ExportError(ValueError):
    """Raised for bad identifiers, unloadable models, and export failures."""


_U32_SPAN = 4294967295.0


class HashSentenceEncoder:
    """Deterministic text -> vector map; equal sentences share a row."""

    def __init__(self, dim: int, seed: int) -> None:
        if dim < 1:
            raise ExportError(f"hash encoder dim must be >= 1, got {dim}")
        self.dim = dim
        self.seed = seed
        self.identifier = f"hash:{dim}:{seed}"

    def encode(self, sentences: list[str]) -> np.ndarray:
        out = np.empty((len(sentences), self.dim), dtype=np.float64)
        blocks = (self.dim + 7) // 8
        for row, text in enumerate(sentences):
            coords: list[float] = []
            for block in range(blocks):
                digest = hashlib.sha256(
                    f"{self.seed}:{block}:{text}".encode("utf-8")).digest()
                words = struct.unpack("<8I", digest)
                coords.extend(2.0 * (w / _U32_SPAN) - 1.0 for w in words)
            out[row] = coords[: self.dim]
        return out


class SentenceTransformerEncoder:
    """Wraps a sentence-transformers checkpoint. Requires the extra."""

    def __init__(self, model_name: str, device: str) -> None:
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ExportError(
                f"st:{model_name} needs the transformers extra; install with "
                "pip install 'lyricgauge-exporter[transformers]'") from exc
        try:
            self._model = SentenceTransformer(model_name, device=device)
        except Exception as exc:
            raise ExportError(
                f"could not load sentence-transformers model {model_name!r} "
                f"on {device!r}: {exc}") from exc
        self.identifier = f"st:{model_name}"
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, sentences: list[str]) -> np.ndarray:
        vecs = self._model.encode(sentences, convert_to_numpy=True,
                                  show_progress_bar=False)
        return np.asarray(vecs, dtype=np.float64)


class HiddenStateEncoder:
    """Mean-pooled final hidden state of a transformers AutoModel."""

    def __init__(self, model_name: str, device: str) -> None:
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ExportError(
                f"hf:{model_name} needs the transformers extra; install with "
                "pip install 'lyricgauge-exporter[transformers]'") from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_name)
            self._model = AutoModel.from_pretrained(model_name).to(device).eval()
        except Exception as exc:
            raise ExportError(
                f"could not load transformers model {model_name!r} "
                f"on {device!r}: {exc}") from exc
        self._torch = torch
        self._device = device
        self.identifier = f"hf:{model_name}"
        self.dim = int(self._model.config.hidden_size)

    def encode(self, sentences: list[str]) -> np.ndarray:
        torch = self._torch
        enc = self._tokenizer(sentences, padding=True, truncation=True,
                              return_tensors="pt").to(self._device)
        with torch.no_grad():
            hidden = self._model(**enc).last_hidden_state
        mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
        pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)
        return pooled.cpu().double().numpy()


def load_encoder(identifier: str, device: str = "cpu"):
    """Instantiate the encoder an identifier names."""
    if not identifier or ":" not in identifier:
        raise ExportError(
            f"encoder identifier must look like scheme:rest, got {identifier!r} "
            "(schemes: hash, st, hf)")
    scheme, rest = identifier.split(":", 1)
    if scheme == "hash":
        parts = rest.split(":")
        if len(parts) != 2:
            raise ExportError(f"hash identifier must be hash:<dim>:<seed>, got {identifier!r}")
        try:
            dim, seed = int(parts[0]), int(parts[1])
        except ValueError:
            raise ExportError(f"hash identifier needs integer dim and seed, got {identifier!r}")
        return HashSentenceEncoder(dim, seed)
    if scheme == "st":
        return SentenceTransformerEncoder(rest, device)
    if scheme == "hf":
        return HiddenStateEncoder(rest, device)
    raise ExportError(f"unknown encoder scheme {scheme!r} in {identifier!r} "
                      "(schemes: hash, st, hf)")
