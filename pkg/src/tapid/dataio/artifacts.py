"""Binary container format shared by all trained artifacts.

Every file is ``magic (4 bytes) | version (u32 LE) | header length (u32 LE) |
UTF-8 JSON header | raw little-endian arrays``. The header lists the arrays in
payload order, and the payload must have exactly the declared size.
"""

from __future__ import annotations

import functools
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..classify import KernelSpec, SvmModel
from ..errors import FormatError
from ..neuralnet.model import Checkpoint, NetworkSpec, weight_shapes

FORMAT_VERSION = 1
CHECKPOINT_MAGIC = b"MSID"
SVM_MAGIC = b"MSVM"
EMBEDDING_MAGIC = b"MSEM"
_PREFIX = struct.Struct("<4sII")
_F32 = np.dtype("<f4")
_F64 = np.dtype("<f8")


def _pack(magic: bytes, header: dict, arrays, dtype) -> bytes:
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, dtype=dtype).tobytes() for a in arrays)
    return _PREFIX.pack(magic, FORMAT_VERSION, len(head)) + head + body


def _unpack(data: bytes, magic: bytes, dtype, shapes_of):
    if len(data) < _PREFIX.size:
        raise FormatError("file too short for header")
    got_magic, version, head_len = _PREFIX.unpack_from(data)
    if got_magic != magic:
        raise FormatError(f"bad magic {got_magic!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    start = _PREFIX.size + head_len
    if len(data) < start:
        raise FormatError("truncated header")
    try:
        header = json.loads(data[_PREFIX.size : start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt header: {exc}") from None
    try:
        shapes = [tuple(int(d) for d in s) for s in shapes_of(header)]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"header lacks a valid array layout: {exc}") from None
    if any(d < 0 for s in shapes for d in s):
        raise FormatError("negative array dimension in header")
    expected = sum(int(np.prod(s)) for s in shapes) * dtype.itemsize
    if len(data) - start != expected:
        raise FormatError(f"payload is {len(data) - start} bytes, header declares {expected}")
    arrays, pos = [], start
    for shape in shapes:
        n = int(np.prod(shape))
        arrays.append(np.frombuffer(data, dtype=dtype, count=n, offset=pos).reshape(shape).copy())
        pos += n * dtype.itemsize
    return header, arrays


def _write_atomic(path, payload: bytes) -> int:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)
    return len(payload)


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    header = {
        "spec": ckpt.spec.to_dict(),
        "arrays": [[name, list(w.shape)] for name, w in ckpt.weights.items()],
        "training_log": ckpt.training_log,
    }
    return _pack(CHECKPOINT_MAGIC, header, ckpt.weights.values(), _F32)


def _decoder(fn):
    """Report missing or mistyped header fields as format errors."""

    @functools.wraps(fn)
    def wrapper(data: bytes):
        try:
            return fn(data)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"malformed header: {exc!r}") from None

    return wrapper


@_decoder
def checkpoint_from_bytes(data: bytes) -> Checkpoint:
    def shapes(header):
        return [tuple(shape) for _, shape in header["arrays"]]

    header, arrays = _unpack(data, CHECKPOINT_MAGIC, _F32, shapes)
    spec = NetworkSpec.from_dict(header["spec"])
    names = [name for name, _ in header["arrays"]]
    expected = weight_shapes(spec)
    if {n: tuple(a.shape) for n, a in zip(names, arrays)} != expected:
        raise FormatError("weight arrays do not match the network spec")
    weights = {n: a.astype(np.float32) for n, a in zip(names, arrays)}
    return Checkpoint(spec=spec, weights=weights, training_log=header.get("training_log", []))


def save_checkpoint(ckpt: Checkpoint, path) -> int:
    return _write_atomic(path, checkpoint_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    return checkpoint_from_bytes(Path(path).read_bytes())


def svm_bytes(model: SvmModel) -> bytes:
    header = {
        "kernel": model.kernel.kind,
        "gamma": model.kernel.gamma,
        "c": model.c,
        "bias": model.bias,
        "mean": model.mean.tolist(),
        "scale": model.scale.tolist(),
        "n_support": int(model.support_vectors.shape[0]),
        "n_features": int(model.mean.shape[0]),
        "converged": model.converged,
        "iterations": model.iterations,
        "support_indices": list(model.support_indices),
    }
    return _pack(SVM_MAGIC, header, [model.support_vectors, model.dual_coefficients], _F64)


@_decoder
def svm_from_bytes(data: bytes) -> SvmModel:
    def shapes(h):
        return [(h["n_support"], h["n_features"]), (h["n_support"],)]

    h, (sv, coef) = _unpack(data, SVM_MAGIC, _F64, shapes)
    return SvmModel(
        support_vectors=sv,
        dual_coefficients=coef,
        bias=float(h["bias"]),
        kernel=KernelSpec(h["kernel"], h["gamma"]),
        c=float(h["c"]),
        mean=np.asarray(h["mean"], dtype=np.float64),
        scale=np.asarray(h["scale"], dtype=np.float64),
        converged=bool(h["converged"]),
        iterations=int(h["iterations"]),
        support_indices=tuple(h.get("support_indices", ())),
    )


def save_svm(model: SvmModel, path) -> int:
    return _write_atomic(path, svm_bytes(model))


def load_svm(path) -> SvmModel:
    return svm_from_bytes(Path(path).read_bytes())


@dataclass
class EmbeddingBatch:
    """Feature vectors keyed by (user_id, tap_index)."""

    keys: list[tuple[str, int]]
    vectors: np.ndarray
    source: str = ""

    def __post_init__(self):
        self.keys = [(str(u), int(t)) for u, t in self.keys]
        vectors = np.asarray(self.vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[0] != len(self.keys):
            raise ValueError(f"expected {len(self.keys)} row vectors, got shape {vectors.shape}")
        self.vectors = vectors

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    def as_dict(self) -> dict:
        return {k: v for k, v in zip(self.keys, self.vectors)}


def embeddings_bytes(batch: EmbeddingBatch) -> bytes:
    header = {
        "count": len(batch.keys),
        "width": batch.width,
        "keys": [list(k) for k in batch.keys],
        "source": batch.source,
    }
    return _pack(EMBEDDING_MAGIC, header, [batch.vectors], _F32)


@_decoder
def embeddings_from_bytes(data: bytes) -> EmbeddingBatch:
    header, (vectors,) = _unpack(data, EMBEDDING_MAGIC, _F32, lambda h: [(h["count"], h["width"])])
    keys = header.get("keys")
    if not isinstance(keys, list) or len(keys) != header["count"]:
        raise FormatError("key list does not match declared count")
    return EmbeddingBatch([tuple(k) for k in header["keys"]], vectors, header.get("source", ""))


def save_embeddings(batch: EmbeddingBatch, path) -> int:
    return _write_atomic(path, embeddings_bytes(batch))


def load_embeddings(path) -> EmbeddingBatch:
    return embeddings_from_bytes(Path(path).read_bytes())
