"""Versioned checkpoint container.

Layout (all integers little-endian)::

    b"LMANCKPT" | u32 format_version | u64 header_len | header JSON | tensor blobs

The header carries the GAN config, the epoch, free-form metadata and, for
every tensor, its name, dtype, shape and byte offset into the blob section.
Tensors are stored as float32 in name order, so serialization is a pure
function of the parameter values.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import CheckpointVersionError
from .config import GanConfig

MAGIC = b"LMANCKPT"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<IQ")


def _state_to_numpy(module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {
        k: v.detach().cpu().numpy().astype("<f4", copy=True)
        for k, v in module.state_dict().items()
    }


@dataclass
class GanCheckpoint:
    generator_params: dict[str, np.ndarray]
    discriminator_params: dict[str, np.ndarray]
    config: GanConfig
    epoch: int = 0
    format_version: int = FORMAT_VERSION
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_models(cls, generator, discriminator, config, epoch=0, metadata=None):
        return cls(
            _state_to_numpy(generator),
            _state_to_numpy(discriminator),
            config,
            epoch,
            FORMAT_VERSION,
            dict(metadata or {}),
        )

    def to_bytes(self) -> bytes:
        entries = []
        blobs = []
        offset = 0
        for prefix, params in (("generator", self.generator_params), ("discriminator", self.discriminator_params)):
            for name in sorted(params):
                arr = np.ascontiguousarray(params[name], dtype="<f4")
                raw = arr.tobytes()
                entries.append(
                    {
                        "name": f"{prefix}/{name}",
                        "dtype": "float32",
                        "shape": list(arr.shape),
                        "offset": offset,
                        "nbytes": len(raw),
                    }
                )
                blobs.append(raw)
                offset += len(raw)
        header = {
            "config": self.config.to_dict(),
            "epoch": self.epoch,
            "format_version": self.format_version,
            "metadata": self.metadata,
            "tensors": entries,
        }
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return MAGIC + _PREFIX.pack(self.format_version, len(head)) + head + b"".join(blobs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "GanCheckpoint":
        if data[: len(MAGIC)] != MAGIC:
            raise CheckpointVersionError("not a checkpoint container (bad magic)")
        start = len(MAGIC)
        version, head_len = _PREFIX.unpack_from(data, start)
        if version != FORMAT_VERSION:
            raise CheckpointVersionError(
                f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
            )
        body = start + _PREFIX.size
        header = json.loads(data[body : body + head_len].decode("utf-8"))
        blob_start = body + head_len
        params = {"generator": {}, "discriminator": {}}
        for entry in header["tensors"]:
            prefix, name = entry["name"].split("/", 1)
            lo = blob_start + entry["offset"]
            arr = np.frombuffer(data, dtype="<f4", count=entry["nbytes"] // 4, offset=lo)
            params[prefix][name] = arr.reshape(entry["shape"]).copy()
        return cls(
            params["generator"],
            params["discriminator"],
            GanConfig.from_dict(header["config"]),
            header["epoch"],
            version,
            header.get("metadata", {}),
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "GanCheckpoint":
        return cls.from_bytes(Path(path).read_bytes())

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def load_into(self, generator=None, discriminator=None) -> None:
        for module, params in ((generator, self.generator_params), (discriminator, self.discriminator_params)):
            if module is not None:
                module.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in params.items()})
