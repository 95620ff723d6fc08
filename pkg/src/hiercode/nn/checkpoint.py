"""Checkpoint archive: named raw tensors plus a JSON manifest.

Layout: a zip file containing manifest.json and one tensors/<name>.bin
per tensor, stored as raw little-endian values. The manifest records
the model config, every tensor's shape and dtype, and optional extra
JSON payload (vocabularies, class lists). Loading validates each
buffer's size against its declared shape.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np
import torch

from ..errors import MissingCheckpoint, ShapeMismatch

_DTYPES = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.int64: "<i8",
    torch.int32: "<i4",
    torch.bool: "|b1",
}
_TORCH_DTYPES = {v: k for k, v in _DTYPES.items()}


def save_checkpoint(
    path: str | Path,
    config: dict,
    state: dict[str, torch.Tensor],
    extra: dict | None = None,
) -> None:
    manifest = {
        "format": "hiercode-checkpoint-v1",
        "config": config,
        "tensors": {},
        "extra": extra or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, tensor in state.items():
            t = tensor.detach().cpu().contiguous()
            if t.dtype not in _DTYPES:
                raise ValueError(f"unsupported tensor dtype {t.dtype} for {name!r}")
            code = _DTYPES[t.dtype]
            manifest["tensors"][name] = {"shape": list(t.shape), "dtype": code}
            zf.writestr(f"tensors/{name}.bin", np.asarray(t.numpy(), dtype=code).tobytes())
        zf.writestr("manifest.json", json.dumps(manifest, indent=1, sort_keys=True))


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, torch.Tensor], dict]:
    path = Path(path)
    if not path.exists():
        raise MissingCheckpoint(f"no checkpoint at {path}")
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        state: dict[str, torch.Tensor] = {}
        for name, meta in manifest["tensors"].items():
            raw = zf.read(f"tensors/{name}.bin")
            shape = tuple(meta["shape"])
            array = np.frombuffer(raw, dtype=meta["dtype"])
            expected = int(np.prod(shape)) if shape else 1
            if array.size != expected:
                raise ShapeMismatch(
                    f"tensor {name!r}: manifest shape {shape} needs {expected} values, "
                    f"archive holds {array.size}"
                )
            tensor = torch.from_numpy(array.copy()).reshape(shape)
            state[name] = tensor.to(_TORCH_DTYPES[meta["dtype"]])
    return manifest["config"], state, manifest.get("extra", {})
