"""
Checkpoints: a directory with params.cgfb (one CGFB record per tensor, in
manifest order) and manifest.json (names, shapes, dtypes, config)
"""
import hashlib
import json
import os
from pathlib import Path

import numpy as np
import torch

from data.cgfb import read_sections, write_sections
from utils.exceptions import FormatError

PARAMS_FILE = "params.cgfb"
MANIFEST_FILE = "manifest.json"


def _as_matrix(tensor: torch.Tensor) -> np.ndarray:
    array = tensor.detach().cpu().to(torch.float64).numpy()
    if array.ndim == 0:
        return array.reshape(1, 1)
    if array.ndim == 1:
        return array.reshape(1, -1)
    return array.reshape(-1, array.shape[-1])


def state_checksum(state: dict) -> str:
    """sha256 over names, shapes and raw bytes of every tensor in key order"""
    digest = hashlib.sha256()
    for name in sorted(state):
        tensor = state[name].detach().cpu().contiguous()
        digest.update(name.encode("utf-8"))
        digest.update(str(tuple(tensor.shape)).encode("utf-8"))
        digest.update(tensor.numpy().tobytes())
    return digest.hexdigest()


def save_checkpoint(module: torch.nn.Module, path, kind: str, config: dict, extra=None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    state = module.state_dict()
    names = list(state)
    write_sections(path / PARAMS_FILE, [_as_matrix(state[name]) for name in names])

    manifest = {
        "kind": kind,
        "tensors": [
            {"name": name, "shape": list(state[name].shape), "dtype": str(state[name].dtype).replace("torch.", "")}
            for name in names
        ],
        "config": config,
        "extra": extra or {},
    }
    tmp = path / (MANIFEST_FILE + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path / MANIFEST_FILE)
    return path


def read_manifest(path) -> dict:
    manifest_path = Path(path) / MANIFEST_FILE
    try:
        return json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"unreadable checkpoint manifest {manifest_path}: {e}")


def load_state(path) -> dict:
    """Tensors of a checkpoint keyed by name, restored to their recorded shape and dtype"""
    manifest = read_manifest(path)
    sections = read_sections(Path(path) / PARAMS_FILE)
    entries = manifest["tensors"]
    if len(sections) != len(entries):
        raise FormatError(f"manifest lists {len(entries)} tensors, params file holds {len(sections)}")
    state = {}
    for entry, matrix in zip(entries, sections):
        dtype = getattr(torch, entry["dtype"])
        state[entry["name"]] = torch.from_numpy(matrix.copy()).reshape(entry["shape"]).to(dtype)
    return state


def load_checkpoint(module: torch.nn.Module, path, kind=None) -> dict:
    manifest = read_manifest(path)
    if kind is not None and manifest.get("kind") != kind:
        raise FormatError(f"checkpoint at {path} is a '{manifest.get('kind')}' checkpoint, expected '{kind}'")
    try:
        module.load_state_dict(load_state(path), strict=True)
    except RuntimeError as e:
        raise FormatError(f"checkpoint at {path} does not fit the configured model: {e}")
    return manifest
