"""Binary checkpoints for the trained networks.

Layout::

    b"MMGZCKPT" | u32 version | u64 header length | header (UTF-8 JSON) | payload

The header lists every network with its layer sizes, activations and the
byte range of each array inside the payload; arrays are float64
little-endian. Header keys are sorted, so equal models give equal bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from . import nn
from .errors import CheckpointError, ConfigError, ShapeError

MAGIC = b"MMGZCKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_NORM_KEYS = ("input_shift", "input_scale", "output_shift", "output_scale")


def _net_arrays(net: nn.Mlp) -> list[tuple[str, np.ndarray]]:
    arrays = []
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays += [(f"W{i}", w), (f"b{i}", b)]
    for key in _NORM_KEYS:
        value = getattr(net, key)
        if value is not None:
            arrays.append((key, value))
    return arrays


def encode(kind: str, nets: dict[str, nn.Mlp], meta: dict | None = None) -> bytes:
    payload = bytearray()
    header = {"kind": kind, "meta": meta or {}, "nets": {}}
    for name in sorted(nets):
        net = nets[name]
        entries = []
        for key, arr in _net_arrays(net):
            data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            entries.append({"name": key, "shape": list(arr.shape),
                            "offset": len(payload), "nbytes": len(data)})
            payload += data
        header["nets"][name] = {
            "layer_dims": list(net.layer_dims),
            "activations": [str(a) for a in net.activations],
            "arrays": entries,
        }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _PREFIX.pack(MAGIC, VERSION, len(head)) + head + bytes(payload)


def decode(blob: bytes, expected_kind: str | None = None) -> tuple[str, dict[str, nn.Mlp], dict]:
    if len(blob) < _PREFIX.size:
        raise CheckpointError("checkpoint truncated before header")
    magic, version, head_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    start = _PREFIX.size + head_len
    if start > len(blob):
        raise CheckpointError("checkpoint truncated inside header")
    try:
        header = json.loads(blob[_PREFIX.size:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    kind = header.get("kind")
    if expected_kind is not None and kind != expected_kind:
        raise CheckpointError(f"checkpoint holds a {kind!r} model, expected {expected_kind!r}")
    payload = memoryview(blob)[start:]
    nets = {}
    try:
        for name, spec in header["nets"].items():
            arrays = {}
            for entry in spec["arrays"]:
                lo, n = entry["offset"], entry["nbytes"]
                if lo + n > len(payload):
                    raise CheckpointError(f"payload of {name}.{entry['name']} is truncated")
                arrays[entry["name"]] = np.frombuffer(payload[lo:lo + n], dtype="<f8").astype(
                    np.float64).reshape(entry["shape"])
            n_layers = len(spec["layer_dims"]) - 1
            nets[name] = nn.Mlp(
                list(spec["layer_dims"]),
                [arrays[f"W{i}"] for i in range(n_layers)],
                [arrays[f"b{i}"] for i in range(n_layers)],
                [nn.Activation.parse(a) for a in spec["activations"]],
                **{k: arrays.get(k) for k in _NORM_KEYS})
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError, ShapeError, ConfigError) as exc:
        raise CheckpointError(f"checkpoint does not match the network schema: {exc}") from exc
    return kind, nets, header.get("meta", {})


def save(path: str | Path, kind: str, nets: dict[str, nn.Mlp], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(kind, nets, meta))
    return path


def load(path: str | Path, expected_kind: str | None = None):
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {path}") from exc
    return decode(blob, expected_kind)


def sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_cycle(path, model, meta: dict | None = None) -> Path:
    return save(path, "cycle", model.nets(), meta)


def load_cycle(path):
    from .transform import CycleModel

    _, nets, meta = load(path, "cycle")
    try:
        return CycleModel(**nets), meta
    except (TypeError, ShapeError) as exc:
        raise CheckpointError(f"cycle checkpoint is missing networks: {exc}") from exc


def save_cvae(path, model, meta: dict | None = None) -> Path:
    meta = dict(meta or {}, latent_dim=model.latent_dim, class_range=list(model.class_range))
    return save(path, "cvae", model.nets(), meta)


def load_cvae(path):
    from .synth import CvaeModel

    _, nets, meta = load(path, "cvae")
    try:
        model = CvaeModel(nets["encoder"], nets["generator"], nets["regressor"],
                          int(meta["latent_dim"]), tuple(meta["class_range"]))
    except (KeyError, ShapeError, ConfigError) as exc:
        raise CheckpointError(f"cvae checkpoint does not describe a CVAE: {exc}") from exc
    return model, meta
