"""Model checkpoint file: one .npz archive, self-describing via a JSON header."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .classifier import LayerParams, MLPParams, ModelParams
from .errors import DataFormatError
from .features import LayerConfig

MAGIC = "isograph-checkpoint"
VERSION = 1

_MLP_KEYS = ("w1", "b1", "w2", "b2", "w3", "b3")


def save_checkpoint(path, model: ModelParams) -> None:
    header = {
        "magic": MAGIC,
        "version": VERSION,
        "input_size": model.input_size,
        "d_in": model.mlp.d_in,
        "layers": [
            {
                "size_k": lp.config.size_k,
                "channels_c": lp.config.channels_c,
                "mode": lp.config.mode,
                "softmax_axis": lp.config.softmax_axis,
            }
            for lp in model.layers
        ],
    }
    arrays = {f"kernels_{i}": lp.kernels for i, lp in enumerate(model.layers)}
    for key in _MLP_KEYS:
        arrays[f"mlp_{key}"] = getattr(model.mlp, key)
    np.savez(path, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> ModelParams:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path) as archive:
        if "header" not in archive:
            raise DataFormatError(f"{path.name}: not a model checkpoint (no header)")
        try:
            header = json.loads(bytes(archive["header"]).decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise DataFormatError(f"{path.name}: unreadable checkpoint header")
        if header.get("magic") != MAGIC:
            raise DataFormatError(f"{path.name}: bad magic {header.get('magic')!r}")
        if header.get("version") != VERSION:
            raise DataFormatError(
                f"{path.name}: unsupported checkpoint version {header.get('version')!r}"
            )
        layers = [
            LayerParams(
                kernels=archive[f"kernels_{i}"],
                config=LayerConfig(
                    size_k=spec["size_k"],
                    channels_c=spec["channels_c"],
                    mode=spec["mode"],
                    softmax_axis=spec["softmax_axis"],
                ),
            )
            for i, spec in enumerate(header["layers"])
        ]
        mlp = MLPParams(**{key: archive[f"mlp_{key}"] for key in _MLP_KEYS})
    model = ModelParams(layers=layers, mlp=mlp, input_size=int(header["input_size"]))
    if model.mlp.d_in != int(header["d_in"]):
        raise DataFormatError(f"{path.name}: header d_in does not match stored weights")
    return model
