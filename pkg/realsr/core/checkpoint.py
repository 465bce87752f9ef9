"""Versioned checkpoint container for network parameters and optimizer moments.

Layout (all integers little-endian)::

    magic     8 bytes  b"RSRCKPT1"
    u32       header length, then the UTF-8 JSON header
    u32       tensor count
    per tensor:
      u16 name length, UTF-8 name
      u8  dtype tag (0 = float32), u8 ndim, ndim x u32 dims
      float32 values, little-endian, row-major
"""

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

import numpy as np
import torch
import torch.nn as nn

from ..utils.exceptions import CheckpointError, DataIOError
from ..utils.helpers import sha256_file
from .models import CheckpointHeader

MAGIC = b"RSRCKPT1"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 0

PathLike = Union[str, Path]


@dataclass
class Checkpoint:
    """Header plus named float32 tensors."""
    header: CheckpointHeader
    tensors: Dict[str, torch.Tensor] = field(default_factory=dict)

    def names(self, prefix: str) -> Dict[str, torch.Tensor]:
        """Tensors under ``prefix/`` with the prefix stripped."""
        head = prefix + "/"
        return {k[len(head):]: v for k, v in self.tensors.items() if k.startswith(head)}

    def has_network(self, name: str) -> bool:
        return name in self.header.architectures


def network_tensors(name: str, net: nn.Module) -> Dict[str, torch.Tensor]:
    """Named parameter and buffer tensors of a network under ``name/``."""
    return {f"{name}/{k}": v.detach() for k, v in net.state_dict().items()}


def optimizer_tensors(name: str, optimizer: torch.optim.Optimizer) -> Dict[str, torch.Tensor]:
    """Adam moments and step counters as ``optim/<name>/<index>/<field>`` tensors."""
    tensors: Dict[str, torch.Tensor] = {}
    for index, state in optimizer.state_dict()["state"].items():
        for key in ("exp_avg", "exp_avg_sq", "step"):
            if key in state:
                value = state[key]
                tensors[f"optim/{name}/{index}/{key}"] = torch.as_tensor(value).detach()
    return tensors


def save_checkpoint(path: PathLike, header: CheckpointHeader, tensors: Mapping[str, torch.Tensor]):
    """Write a checkpoint atomically (temporary file, then rename).

    Args:
        path: Destination file
        header: Metadata block
        tensors: Named tensors; stored as float32
    """
    path = Path(path)
    header_bytes = header.model_dump_json().encode("utf-8")
    tmp_path = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp_path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", len(header_bytes)))
            f.write(header_bytes)
            f.write(struct.pack("<I", len(tensors)))
            for name, tensor in tensors.items():
                encoded = name.encode("utf-8")
                values = tensor.detach().cpu().to(torch.float32).contiguous().numpy()
                f.write(struct.pack("<H", len(encoded)))
                f.write(encoded)
                f.write(struct.pack("<BB", DTYPE_FLOAT32, values.ndim))
                if values.ndim:
                    f.write(struct.pack(f"<{values.ndim}I", *values.shape))
                f.write(values.astype("<f4", copy=False).tobytes())
        os.replace(tmp_path, path)
    except OSError as e:
        raise DataIOError(f"cannot write checkpoint '{path}': {e}")


def _read_exact(f, size: int, path: Path) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise CheckpointError(f"checkpoint '{path}' is truncated")
    return data


def load_checkpoint(path: PathLike) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        DataIOError: File cannot be opened
        CheckpointError: Bad magic, unsupported version or malformed content
    """
    path = Path(path)
    try:
        f = open(path, "rb")
    except OSError as e:
        raise DataIOError(f"cannot read checkpoint '{path}': {e}")
    with f:
        if _read_exact(f, len(MAGIC), path) != MAGIC:
            raise CheckpointError(f"'{path}' is not a realsr checkpoint")
        (header_len,) = struct.unpack("<I", _read_exact(f, 4, path))
        try:
            header = CheckpointHeader.model_validate_json(_read_exact(f, header_len, path))
        except ValueError as e:
            raise CheckpointError(f"checkpoint '{path}' has an invalid header: {e}")
        if header.format_version != FORMAT_VERSION:
            raise CheckpointError(f"checkpoint format version {header.format_version} is not supported")

        (count,) = struct.unpack("<I", _read_exact(f, 4, path))
        tensors: Dict[str, torch.Tensor] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, path))
            name = _read_exact(f, name_len, path).decode("utf-8")
            dtype_tag, ndim = struct.unpack("<BB", _read_exact(f, 2, path))
            if dtype_tag != DTYPE_FLOAT32:
                raise CheckpointError(f"tensor '{name}' has unknown dtype tag {dtype_tag}")
            shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim, path)) if ndim else ()
            numel = int(np.prod(shape)) if shape else 1
            values = np.frombuffer(_read_exact(f, 4 * numel, path), dtype="<f4").reshape(shape)
            tensors[name] = torch.from_numpy(values.astype(np.float32))
        if f.read(1):
            raise CheckpointError(f"checkpoint '{path}' has trailing data")
    return Checkpoint(header=header, tensors=tensors)


def restore_network(checkpoint: Checkpoint, name: str, net: nn.Module) -> nn.Module:
    """Load ``name/`` tensors into ``net`` after checking architecture id and schema.

    Raises:
        CheckpointError: Network missing, architecture mismatch, or tensor set/shape mismatch
    """
    recorded = checkpoint.header.architectures.get(name)
    if recorded is None:
        raise CheckpointError(f"checkpoint has no network '{name}'")
    if recorded != net.architecture_id:
        raise CheckpointError(
            f"network '{name}' was saved as '{recorded}' but the runtime builds '{net.architecture_id}'"
        )
    state = checkpoint.names(name)
    expected = net.state_dict()
    if set(state) != set(expected):
        missing = sorted(set(expected) - set(state))
        extra = sorted(set(state) - set(expected))
        raise CheckpointError(f"network '{name}' tensor set mismatch: missing {missing}, unexpected {extra}")
    for key, tensor in state.items():
        if tuple(tensor.shape) != tuple(expected[key].shape):
            raise CheckpointError(
                f"tensor '{name}/{key}' has shape {tuple(tensor.shape)}, expected {tuple(expected[key].shape)}"
            )
        if not torch.isfinite(tensor).all():
            raise CheckpointError(f"tensor '{name}/{key}' contains non-finite values")
    net.load_state_dict({k: v.to(expected[k].dtype) for k, v in state.items()})
    return net


def restore_optimizer(checkpoint: Checkpoint, name: str, optimizer: torch.optim.Optimizer):
    """Restore Adam moments saved by :func:`optimizer_tensors`; missing state leaves the optimizer fresh."""
    prefix = f"optim/{name}"
    saved = checkpoint.names(prefix)
    if not saved:
        return
    state: Dict[int, Dict[str, torch.Tensor]] = {}
    for key, tensor in saved.items():
        index, field_name = key.split("/", 1)
        state.setdefault(int(index), {})[field_name] = tensor.clone()
    for entry in state.values():
        if "step" in entry:
            entry["step"] = entry["step"].reshape(())
    current = optimizer.state_dict()
    current["state"] = state
    try:
        optimizer.load_state_dict(current)
    except (ValueError, KeyError, RuntimeError) as e:
        raise CheckpointError(f"optimizer state '{name}' does not match: {e}")


def build_header(
    stage,
    mode,
    preset,
    step: int,
    networks: Mapping[str, nn.Module],
    config: Optional[Mapping] = None,
) -> CheckpointHeader:
    """Header recording the architecture id of every saved network."""
    return CheckpointHeader(
        format_version=FORMAT_VERSION,
        stage=stage,
        mode=mode,
        preset=preset,
        step=step,
        architectures={name: net.architecture_id for name, net in networks.items()},
        config=dict(config or {}),
    )


def collect_tensors(
    networks: Mapping[str, nn.Module],
    optimizers: Optional[Mapping[str, torch.optim.Optimizer]] = None,
) -> Dict[str, torch.Tensor]:
    tensors: Dict[str, torch.Tensor] = {}
    for name, net in networks.items():
        tensors.update(network_tensors(name, net))
    for name, optimizer in (optimizers or {}).items():
        tensors.update(optimizer_tensors(name, optimizer))
    return tensors


def checkpoint_id(path: PathLike) -> str:
    """Short content fingerprint used to label reports."""
    return f"{Path(path).name}@{sha256_file(Path(path))[:12]}"
