"""Flat named-tensor container: JSON with shapes, float64 values, and a config
block.  Values are serialized with repr so they round-trip bit-exact."""

from __future__ import annotations

import json

import numpy as np

from .autodiff import Tensor

FORMAT = "clarikit-tensors"
FORMAT_VERSION = 1


def save_tensors(path: str, tensors: dict[str, Tensor], config: dict | None = None) -> None:
    payload = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "config": config or {},
        "tensors": {
            name: {"shape": list(t.data.shape), "values": t.data.ravel().tolist()}
            for name, t in sorted(tensors.items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_tensors(path: str, requires_grad: bool = True) -> tuple[dict[str, Tensor], dict]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} file")
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {payload.get('format_version')}")
    tensors = {}
    for name, spec in payload["tensors"].items():
        data = np.asarray(spec["values"], dtype=np.float64).reshape(spec["shape"])
        tensors[name] = Tensor(data, requires_grad=requires_grad)
    return tensors, payload.get("config", {})
