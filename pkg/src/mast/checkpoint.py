"""Checkpoint directories: ``manifest.json`` plus one MTSR file per array."""
from __future__ import annotations

import json
import os
import shutil
from pathlib import Path

import numpy as np

from .tensor import load_tensor, save_tensor

FORMAT = "mast-checkpoint/1"


class CheckpointError(Exception):
    pass


def save_checkpoint(path: str | Path, params: dict[str, np.ndarray], meta: dict,
                    optimizer: dict[str, np.ndarray] | None = None) -> Path:
    """Write atomically: a sibling temp directory is renamed into place."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    manifest = {"format": FORMAT, "meta": meta, "params": {}, "optimizer": {}}
    for section, arrays in (("params", params), ("optimizer", optimizer or {})):
        for i, (name, arr) in enumerate(arrays.items()):
            fname = f"{section[0]}{i:04d}.mtsr"
            save_tensor(np.asarray(arr, dtype=np.float64), tmp / fname)
            manifest[section][name] = {"file": fname, "shape": list(np.shape(arr))}
    (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if path.exists():
        shutil.rmtree(path)
    os.replace(tmp, path)
    return path


def read_manifest(path: str | Path) -> dict:
    mf = Path(path) / "manifest.json"
    if not mf.exists():
        raise CheckpointError(f"no manifest.json in {path}")
    manifest = json.loads(mf.read_text())
    if manifest.get("format") != FORMAT:
        raise CheckpointError(f"{path}: unsupported checkpoint format {manifest.get('format')!r}")
    return manifest


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict, dict[str, np.ndarray]]:
    """Returns ``(params, meta, optimizer_arrays)``."""
    path = Path(path)
    manifest = read_manifest(path)
    out = {}
    for section in ("params", "optimizer"):
        arrays = {}
        for name, entry in manifest[section].items():
            arr = load_tensor(path / entry["file"]).data
            if list(arr.shape) != entry["shape"]:
                raise CheckpointError(f"{path}/{entry['file']}: shape {arr.shape} != manifest {entry['shape']}")
            arrays[name] = arr
        out[section] = arrays
    return out["params"], manifest["meta"], out["optimizer"]
