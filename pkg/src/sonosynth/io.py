"""On-disk formats: raw little-endian arrays with JSON sidecar headers.

Float stages (RF, envelope, B-mode, network inputs) persist as raw
little-endian float32, column-major so each scan line is contiguous, with a
``<file>.json`` sidecar recording dtype, order, shape, and stage metadata.
Class masks persist as raw uint8, row-major. Reads reproduce writes
bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _write_sidecar(path: Path, header: dict) -> None:
    _sidecar_path(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def _read_sidecar(path: Path) -> dict:
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise FileNotFoundError(f"missing sidecar header {sidecar}")
    return json.loads(sidecar.read_text())


def write_raw_f32(path, arr: np.ndarray, meta: dict | None = None) -> None:
    """Write a 2-D array as raw '<f4' in column-major order plus sidecar."""
    path = Path(path)
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
    header = {
        "format_version": FORMAT_VERSION,
        "dtype": "<f4",
        "order": "F",
        "shape": list(arr.shape),
        **(meta or {}),
    }
    path.write_bytes(arr.astype("<f4").tobytes(order="F"))
    _write_sidecar(path, header)


def read_raw_f32(path) -> tuple[np.ndarray, dict]:
    """Read a raw float32 file; returns (array, sidecar header)."""
    path = Path(path)
    header = _read_sidecar(path)
    shape = tuple(header["shape"])
    data = np.frombuffer(path.read_bytes(), dtype=header.get("dtype", "<f4"))
    if data.size != shape[0] * shape[1]:
        raise ValueError(
            f"{path}: payload has {data.size} values, sidecar declares shape {shape}"
        )
    return data.reshape(shape, order=header.get("order", "F")).copy(), header


def write_mask_u8(path, labels: np.ndarray, meta: dict | None = None) -> None:
    """Write a class-index raster as raw uint8, row-major, plus sidecar."""
    path = Path(path)
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"expected a 2-D mask, got shape {labels.shape}")
    header = {
        "format_version": FORMAT_VERSION,
        "dtype": "u1",
        "order": "C",
        "shape": list(labels.shape),
        **(meta or {}),
    }
    path.write_bytes(labels.astype(np.uint8).tobytes(order="C"))
    _write_sidecar(path, header)


def read_mask_u8(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    header = _read_sidecar(path)
    shape = tuple(header["shape"])
    data = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    if data.size != shape[0] * shape[1]:
        raise ValueError(
            f"{path}: payload has {data.size} values, sidecar declares shape {shape}"
        )
    return data.reshape(shape, order=header.get("order", "C")).copy(), header


def save_rf_frame(path, frame) -> None:
    """Persist an RfFrame: raw column-major float32 plus a config-echo sidecar."""
    write_raw_f32(
        path,
        frame.samples,
        {
            "stage": "rf",
            "pad_samples": frame.pad_samples,
            "config": frame.config.to_dict(),
        },
    )


def load_rf_frame(path):
    """Read an RfFrame written by :func:`save_rf_frame` (float32 samples)."""
    from .rf import RfFrame, TransducerConfig

    arr, header = read_raw_f32(path)
    return RfFrame(arr, TransducerConfig(**header["config"]), header["pad_samples"])


def write_png(path, img: np.ndarray) -> None:
    """8-bit grayscale PNG for visual inspection (linear mapping, no gamma)."""
    from PIL import Image

    img = np.asarray(img, dtype=np.float64)
    lo, hi = img.min(), img.max()
    scaled = np.zeros_like(img) if hi == lo else (img - lo) / (hi - lo)
    Image.fromarray((scaled * 255.0).round().astype(np.uint8), mode="L").save(Path(path))


def read_image_any(path) -> np.ndarray:
    """Read an external intensity image: .f32 (ours), .npy, or grayscale PNG."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".f32":
        return read_raw_f32(path)[0].astype(np.float64)
    if suffix == ".npy":
        arr = np.load(path)
        if arr.ndim != 2:
            raise ValueError(f"{path}: expected a 2-D array, got shape {arr.shape}")
        return arr.astype(np.float64)
    if suffix == ".png":
        from PIL import Image

        return np.asarray(Image.open(path).convert("F"), dtype=np.float64)
    raise ValueError(f"{path}: unsupported image format {suffix!r} (use .f32, .npy, or .png)")


def read_mask_any(path) -> np.ndarray:
    """Read an external class mask: .u8 (ours), .npy, or paletted/gray PNG."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".u8":
        return read_mask_u8(path)[0]
    if suffix == ".npy":
        arr = np.load(path)
        if arr.ndim != 2:
            raise ValueError(f"{path}: expected a 2-D mask, got shape {arr.shape}")
        return arr
    if suffix == ".png":
        from PIL import Image

        return np.asarray(Image.open(path).convert("L"))
    raise ValueError(f"{path}: unsupported mask format {suffix!r} (use .u8, .npy, or .png)")
