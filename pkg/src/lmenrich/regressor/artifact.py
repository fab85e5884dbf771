"""Binary model files.

Layout (all integers little-endian)::

    bytes 0-15   magic  b"LMENRICH-MODEL\\x00\\x00"
    bytes 16-19  uint32 container version (1)
    bytes 20-27  uint64 header length H
    next H bytes UTF-8 JSON header
    remaining    raw tensor bytes, concatenated in header order

The header holds the estimator parameters, scheme id, patch spec, index
embedding sizes, config hash, loss history, and a ``tensors`` table of
``{name, dtype, shape, offset, nbytes}`` relative to the start of the tensor
block. Network parameters are stored in their training dtype and the quality
model's sorted corpus scores as float64, so a save/load round trip is exact.
"""
from __future__ import annotations

import json
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np
import torch

from ..exceptions import ValidationError
from ..patches import AugmentConfig
from ..quality import QualityModel
from .estimator import OffsetRegressor

MAGIC = b"LMENRICH-MODEL\x00\x00"
VERSION = 1
QUALITY_TENSOR = "quality.scores"


def _params_from_config(cfg: dict) -> dict:
    params = dict(cfg)
    params["widths"] = tuple(params["widths"])
    params["lr_milestones"] = tuple(params["lr_milestones"])
    aug = dict(params["augment"])
    for key, value in aug.items():
        if isinstance(value, list):
            aug[key] = tuple(value)
    params["augment"] = AugmentConfig(**aug)
    return params


def save_model(path, model: OffsetRegressor) -> None:
    net = model.network_
    tensors = OrderedDict((k, v.detach().cpu().numpy()) for k, v in net.state_dict().items())
    tensors[QUALITY_TENSOR] = np.asarray(model.quality_model_.scores_, dtype=np.float64)
    table, blobs, offset = [], [], 0
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        data = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        table.append({"name": name, "dtype": arr.dtype.str.replace(">", "<").replace("=", "<"),
                      "shape": list(arr.shape), "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = {
        "params": model.config_dict(),
        "scheme_id": model.scheme_id_,
        "patch_spec": {"size": model.patch_size, "reference_size": model.reference_size},
        "index_embedding": {"m": net.channels, "n": net.n_anchors, "k": net.k},
        "quality_eps": model.quality_model_.eps,
        "config_hash": model.config_hash(),
        "loss_history": [float(v) for v in model.loss_history_],
        "tensors": table,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(head)))
        fh.write(head)
        for blob in blobs:
            fh.write(blob)


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValidationError(f"{path}: not a model file")
        version, length = struct.unpack("<IQ", fh.read(12))
        if version != VERSION:
            raise ValidationError(f"{path}: unsupported model container version {version}")
        return json.loads(fh.read(length).decode("utf-8"))


def load_model(path) -> OffsetRegressor:
    raw = Path(path).read_bytes()
    if raw[:len(MAGIC)] != MAGIC:
        raise ValidationError(f"{path}: not a model file")
    version, length = struct.unpack("<IQ", raw[len(MAGIC):len(MAGIC) + 12])
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported model container version {version}")
    start = len(MAGIC) + 12
    header = json.loads(raw[start:start + length].decode("utf-8"))
    block = raw[start + length:]

    arrays = {}
    for entry in header["tensors"]:
        chunk = block[entry["offset"]:entry["offset"] + entry["nbytes"]]
        if len(chunk) != entry["nbytes"]:
            raise ValidationError(f"{path}: truncated tensor {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"]).copy()

    model = OffsetRegressor(**_params_from_config(header["params"]))
    emb = header["index_embedding"]
    net = model.build_network(emb["n"])
    state = OrderedDict((k, torch.from_numpy(v)) for k, v in arrays.items() if k != QUALITY_TENSOR)
    net.load_state_dict(state)
    net.eval()
    model.network_ = net
    model.quality_model_ = QualityModel(eps=header["quality_eps"]).fit(arrays[QUALITY_TENSOR])
    model.loss_history_ = list(header["loss_history"])
    model.scheme_id_ = header["scheme_id"]
    model.n_anchors_ = emb["n"]
    model.config_hash_ = header["config_hash"]
    return model
