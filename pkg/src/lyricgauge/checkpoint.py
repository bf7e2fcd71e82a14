"""Model checkpoints: a JSON header describing the architecture followed by
the raw float64 parameter payload, in a fixed tensor order.

Layout (little-endian):

    u32      header_len
    bytes    header JSON, utf-8, header_len bytes
    float64  all tensors concatenated in header tensor_order

The header pins format_version, the backbone config, head layout, strategy
name, tensor order with shapes, and free-form `extra` metadata (training
provenance such as the embedding cache digest). Loading rebuilds parameters
and refuses structurally inconsistent or truncated files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .model import BackboneConfig, ModelParams, init_params

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for malformed or inconsistent checkpoint files."""


@dataclass
class Checkpoint:
    params: ModelParams
    config: BackboneConfig
    head_dim: int
    with_rank_head: bool
    strategy: str
    extra: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, params: ModelParams, config: BackboneConfig,
                    head_dim: int, with_rank_head: bool, strategy: str,
                    extra: Mapping[str, Any] | None = None) -> None:
    header = {
        "format_version": CHECKPOINT_VERSION,
        "backbone": config.to_dict(),
        "head_dim": head_dim,
        "with_rank_head": with_rank_head,
        "strategy": strategy,
        "tensor_order": [[name, list(shape)] for name, shape in params.tensor_order()],
        "extra": dict(extra or {}),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(Path(path), "wb") as fh:
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(params.flatten().astype("<f8").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 4:
        raise CheckpointError(f"{path}: too short to hold a header length")
    (header_len,) = struct.unpack_from("<I", data, 0)
    if 4 + header_len > len(data):
        raise CheckpointError(f"{path}: header length {header_len} exceeds file size")
    try:
        header = json.loads(data[4: 4 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: header is not valid JSON: {exc}") from exc
    version = header.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version!r}")
    try:
        config = BackboneConfig.from_dict(header["backbone"])
        head_dim = int(header["head_dim"])
        with_rank_head = bool(header["with_rank_head"])
        strategy = str(header["strategy"])
        tensor_order = [(str(name), tuple(int(d) for d in shape))
                        for name, shape in header["tensor_order"]]
        extra = dict(header.get("extra", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: incomplete header: {exc}") from exc

    # the declared tensor list must match what the declared architecture builds
    expected = init_params(config, head_dim, with_rank_head, seed=0).tensor_order()
    if tensor_order != expected:
        raise CheckpointError(
            f"{path}: tensor order does not match the declared architecture "
            f"(header {tensor_order}, architecture {expected})")

    n_scalars = sum(int(np.prod(shape)) for _, shape in tensor_order)
    payload = data[4 + header_len:]
    if len(payload) != 8 * n_scalars:
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, expected {8 * n_scalars}")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    params = init_params(config, head_dim, with_rank_head, seed=0)
    params.load_flat(flat)
    return Checkpoint(params=params, config=config, head_dim=head_dim,
                      with_rank_head=with_rank_head, strategy=strategy, extra=extra)
