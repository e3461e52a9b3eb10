"""Versioned binary model files.

Layout (all integers little-endian uint32 unless noted):

    magic           4 bytes  b"TFL1"
    format version  u32      currently 1
    header length   u32
    header          UTF-8 JSON, canonical form (sorted keys, no spaces):
                    {"config": {...}, "scaler": {...}|null, "provenance": {...}}
    block count     u32
    per block:      name length u32, name UTF-8,
                    ndim u32, dims u32 x ndim,
                    data float64 little-endian, row-major

Canonical JSON plus fixed block order makes load -> save byte-identical.
Transferred models carry the SHA-256 of their parent file in provenance.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .dataset import ScalerParams
from .network import (
    DenseParams,
    LstmParams,
    ModelConfig,
    Seq2SeqModel,
    output_width,
    param_items,
)

MAGIC = b"TFL1"
VERSION = 1


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_model(model: Seq2SeqModel, scaler: ScalerParams | None, provenance: dict, path) -> None:
    """Write the model losslessly (64-bit weights) with config and provenance."""
    header = {
        "config": {
            "n_past": model.config.n_past,
            "n_future": model.config.n_future,
            "hidden": model.config.hidden,
            "attention": model.config.attention,
        },
        "scaler": None if scaler is None else {"min": scaler.min, "max": scaler.max},
        "provenance": provenance,
    }
    blob = _canonical_json(header)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        items = param_items(model)
        fh.write(struct.pack("<I", len(items)))
        for name, arr in items:
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(fh, n: int, path, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValueError(f"{path}: truncated model file while reading {what}")
    return data


def load_model(path) -> tuple[Seq2SeqModel, ScalerParams | None, dict]:
    """Read a model file back; rejects bad magic, newer versions, truncation,
    and weight shapes that contradict the stored config."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, path, "magic")
        if magic != MAGIC:
            raise ValueError(f"{path}: not a model file (magic {magic!r}, expected {MAGIC!r})")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, path, "version"))
        if version > VERSION:
            raise ValueError(
                f"{path}: unsupported format version {version} (this build reads <= {VERSION})"
            )
        (hlen,) = struct.unpack("<I", _read_exact(fh, 4, path, "header length"))
        try:
            header = json.loads(_read_exact(fh, hlen, path, "header"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: corrupt header: {exc}") from exc
        config = ModelConfig(**header["config"])
        scaler_blob = header.get("scaler")
        scaler = None if scaler_blob is None else ScalerParams(**scaler_blob)
        provenance = header.get("provenance", {})

        (n_blocks,) = struct.unpack("<I", _read_exact(fh, 4, path, "block count"))
        blocks: dict[str, np.ndarray] = {}
        for _ in range(n_blocks):
            (nlen,) = struct.unpack("<I", _read_exact(fh, 4, path, "block name length"))
            name = _read_exact(fh, nlen, path, "block name").decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(fh, 4, path, "block ndim"))
            dims = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, path, "block dims"))
            count = int(np.prod(dims)) if ndim else 1
            raw = _read_exact(fh, 8 * count, path, f"block '{name}' data")
            blocks[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after last weight block")

    model = _assemble(config, blocks, path)
    return model, scaler, provenance


def _assemble(config: ModelConfig, blocks: dict[str, np.ndarray], path) -> Seq2SeqModel:
    hid = config.hidden
    expected = {}
    for prefix, width in (("enc", 1), ("dec", hid)):
        for g in "fico":
            expected[f"{prefix}.w{g}"] = (hid, hid + width)
            expected[f"{prefix}.b{g}"] = (hid,)
    expected["out.w"] = (output_width(config),)
    expected["out.b"] = (1,)
    if set(blocks) != set(expected):
        raise ValueError(
            f"{path}: weight blocks {sorted(set(blocks) ^ set(expected))} "
            f"missing or unexpected"
        )
    for name, shape in expected.items():
        if blocks[name].shape != shape:
            raise ValueError(
                f"{path}: block '{name}' has shape {blocks[name].shape}, "
                f"config implies {shape}"
            )

    def lstm(prefix: str) -> LstmParams:
        return LstmParams(
            *(blocks[f"{prefix}.w{g}"] for g in "fico"),
            *(blocks[f"{prefix}.b{g}"] for g in "fico"),
        )

    return Seq2SeqModel(
        config=config,
        encoder=lstm("enc"),
        decoder=lstm("dec"),
        output=DenseParams(w=blocks["out.w"], b=blocks["out.b"]),
    )
