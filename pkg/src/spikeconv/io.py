"""On-disk formats: model manifest + blob, binary tensors, datasets, stats.

Model files are a JSON manifest listing layer specs plus a sidecar blob of
little-endian float32 values; each parameter records its byte offset into the
blob. Tensor files carry a small header (uint32 rank, uint32 extents) followed
by little-endian float32 data. A dataset file is ``count`` tensors back to
back with an optional trailing int32 label block. Activation stats reuse the
manifest+blob idea in a single self-contained file.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .model import (
    AvgPool2d,
    Conv2d,
    Dense,
    Flatten,
    MaxPool2d,
    NetworkGraph,
    Relu,
)

__all__ = [
    "save_model",
    "load_model",
    "save_tensor",
    "load_tensor",
    "save_dataset",
    "load_dataset",
    "save_stats",
    "load_stats",
]

_F32 = np.dtype("<f4")


class _BlobWriter:
    def __init__(self):
        self.chunks = []
        self.offset = 0

    def add(self, arr: np.ndarray) -> dict:
        data = np.ascontiguousarray(arr, dtype=_F32).tobytes()
        rec = {"offset": self.offset, "shape": list(arr.shape)}
        self.chunks.append(data)
        self.offset += len(data)
        return rec

    def bytes(self) -> bytes:
        return b"".join(self.chunks)


def _blob_read(blob: bytes, rec: dict) -> np.ndarray:
    shape = tuple(int(d) for d in rec["shape"])
    n = int(np.prod(shape)) if shape else 1
    start = int(rec["offset"])
    a = np.frombuffer(blob, dtype=_F32, count=n, offset=start)
    return a.reshape(shape).astype(np.float64)


def _layer_to_manifest(spec, blob: _BlobWriter) -> dict:
    d = {"kind": spec.kind}
    if spec.kind == "dense":
        d["in_features"] = spec.in_features
        d["out_features"] = spec.out_features
        d["weight"] = blob.add(spec.weight)
        if spec.bias is not None:
            d["bias"] = blob.add(spec.bias)
    elif spec.kind == "conv2d":
        d["in_channels"] = spec.in_channels
        d["out_channels"] = spec.out_channels
        d["kernel"] = list(spec.kernel)
        d["stride"] = list(spec.stride)
        d["padding"] = list(spec.padding)
        d["weight"] = blob.add(spec.weight)
        if spec.bias is not None:
            d["bias"] = blob.add(spec.bias)
    elif spec.kind in ("maxpool2d", "avgpool2d"):
        d["kernel"] = list(spec.kernel)
        d["stride"] = list(spec.stride)
        d["ceil_mode"] = bool(spec.ceil_mode)
    elif spec.kind not in ("relu", "flatten"):
        raise ValueError(f"cannot serialize layer kind {spec.kind!r}")
    return d


def _layer_from_manifest(d: dict, blob: bytes):
    kind = d["kind"]
    if kind == "dense":
        bias = _blob_read(blob, d["bias"]) if "bias" in d else None
        return Dense(weight=_blob_read(blob, d["weight"]), bias=bias)
    if kind == "conv2d":
        bias = _blob_read(blob, d["bias"]) if "bias" in d else None
        return Conv2d(
            weight=_blob_read(blob, d["weight"]),
            bias=bias,
            stride=tuple(d["stride"]),
            padding=tuple(d["padding"]),
        )
    if kind == "maxpool2d":
        return MaxPool2d(kernel=tuple(d["kernel"]), stride=tuple(d["stride"]),
                         ceil_mode=bool(d.get("ceil_mode", False)))
    if kind == "avgpool2d":
        return AvgPool2d(kernel=tuple(d["kernel"]), stride=tuple(d["stride"]),
                         ceil_mode=bool(d.get("ceil_mode", False)))
    if kind == "relu":
        return Relu()
    if kind == "flatten":
        return Flatten()
    raise ValueError(f"unknown layer kind {kind!r} in manifest")


def save_model(net: NetworkGraph, manifest_path, extra: dict | None = None) -> None:
    """Write ``<path>`` (JSON manifest) and its sidecar ``<stem>.bin`` blob.

    ``extra`` entries (e.g. normalization scales) are stored verbatim in the
    manifest.
    """
    manifest_path = Path(manifest_path)
    blob_path = manifest_path.with_suffix(".bin")
    blob = _BlobWriter()
    manifest = {
        "format": "spikeconv-model",
        "version": 1,
        "input_shape": list(net.input_shape),
        "layers": [_layer_to_manifest(spec, blob) for spec in net.layers],
        "blob": blob_path.name,
    }
    if extra:
        manifest.update(extra)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    blob_path.write_bytes(blob.bytes())


def load_model(manifest_path) -> tuple[NetworkGraph, dict]:
    """Read a manifest+blob pair; returns (graph, manifest dict)."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != "spikeconv-model":
        raise ValueError(f"{manifest_path} is not a model manifest")
    layers = manifest["layers"]
    if not isinstance(layers, list) or any(not isinstance(d, dict) for d in layers):
        raise ValueError("manifest layers must be a flat sequential list")
    blob = (manifest_path.parent / manifest["blob"]).read_bytes()
    net = NetworkGraph(
        layers=[_layer_from_manifest(d, blob) for d in layers],
        input_shape=tuple(manifest["input_shape"]),
    )
    return net, manifest


# --- tensors and datasets ----------------------------------------------------


def _tensor_bytes(x: np.ndarray) -> bytes:
    x = np.ascontiguousarray(x)
    header = struct.pack("<I", x.ndim) + struct.pack(f"<{x.ndim}I", *x.shape)
    return header + x.astype(_F32).tobytes()


def _tensor_from(buf: bytes, pos: int) -> tuple[np.ndarray, int]:
    (rank,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    if rank > 8:
        raise ValueError(f"implausible tensor rank {rank}")
    shape = struct.unpack_from(f"<{rank}I", buf, pos)
    pos += 4 * rank
    n = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(buf, dtype=_F32, count=n, offset=pos)
    pos += 4 * n
    return data.reshape(shape).astype(np.float64), pos


def save_tensor(x: np.ndarray, path) -> None:
    Path(path).write_bytes(_tensor_bytes(x))


def load_tensor(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    x, pos = _tensor_from(buf, 0)
    if pos != len(buf):
        raise ValueError(f"{path}: trailing bytes after tensor data")
    return x


def save_dataset(samples, path, labels=None) -> None:
    samples = list(samples)
    if labels is not None and len(labels) != len(samples):
        raise ValueError("labels length must match sample count")
    parts = [struct.pack("<IB", len(samples), 1 if labels is not None else 0)]
    parts += [_tensor_bytes(x) for x in samples]
    if labels is not None:
        parts.append(np.asarray(labels, dtype="<i4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_dataset(path) -> tuple[list[np.ndarray], np.ndarray | None]:
    buf = Path(path).read_bytes()
    count, has_labels = struct.unpack_from("<IB", buf, 0)
    pos = 5
    samples = []
    for _ in range(count):
        x, pos = _tensor_from(buf, pos)
        samples.append(x)
    labels = None
    if has_labels:
        labels = np.frombuffer(buf, dtype="<i4", count=count, offset=pos).copy()
        pos += 4 * count
    if pos != len(buf):
        raise ValueError(f"{path}: trailing bytes after dataset data")
    return samples, labels


# --- activation stats ---------------------------------------------------------


def save_stats(stats, path) -> None:
    """Single-file stats: uint32 json length, JSON index, float32 sample blob."""
    index = []
    chunks = []
    offset = 0
    for layer_index in sorted(stats.samples):
        arr = np.ascontiguousarray(stats.samples[layer_index], dtype=_F32)
        index.append(
            {
                "layer": int(layer_index),
                "offset": offset,
                "length": int(arr.size),
                "seen": int(stats.sample_counts[layer_index]),
            }
        )
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"format": "spikeconv-stats", "layers": index},
                        sort_keys=True).encode()
    Path(path).write_bytes(struct.pack("<I", len(header)) + header + b"".join(chunks))


def load_stats(path):
    from .normalize import ActivationStats

    buf = Path(path).read_bytes()
    (hlen,) = struct.unpack_from("<I", buf, 0)
    header = json.loads(buf[4 : 4 + hlen].decode())
    if header.get("format") != "spikeconv-stats":
        raise ValueError(f"{path} is not a stats file")
    base = 4 + hlen
    samples = {}
    counts = {}
    for rec in header["layers"]:
        arr = np.frombuffer(
            buf, dtype=_F32, count=rec["length"], offset=base + rec["offset"]
        )
        samples[rec["layer"]] = arr.copy()
        counts[rec["layer"]] = int(rec["seen"])
    return ActivationStats(samples=samples, sample_counts=counts)
