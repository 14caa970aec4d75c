"""RF -> envelope -> B-mode chain and network-input preprocessing.

Two surfaces over the same array kernels: plain functions operating on the
typed frame objects, and stateless sklearn transformers (fit is a no-op)
operating on image batches so the preprocessing composes with
``sklearn.pipeline.Pipeline``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal
from sklearn.base import BaseEstimator, TransformerMixin

from .rf import RfFrame, TransducerConfig
from .validation import check_image, check_image_batch

RESIZED_SIZE = 512
MIRROR_PAD = 30
NETWORK_INPUT_SIZE = RESIZED_SIZE + 2 * MIRROR_PAD  # 572
MASK_SIZE = 388
DEFAULT_DYNAMIC_RANGE_DB = 50.0


@dataclass(frozen=True)
class EnvelopeImage:
    """Non-negative envelope samples with the source frame's geometry."""

    samples: np.ndarray
    config: TransducerConfig
    pad_samples: int = 0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"envelope samples must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or (arr < 0).any():
            raise ValueError("envelope samples must be finite and non-negative")
        object.__setattr__(self, "samples", arr)

    def windowed(self) -> "EnvelopeImage":
        """Strip the pulse padding, leaving exactly the nominal depth window."""
        if self.pad_samples == 0:
            return self
        sl = slice(self.pad_samples, self.samples.shape[0] - self.pad_samples)
        return EnvelopeImage(self.samples[sl], self.config, 0)


@dataclass(frozen=True)
class BmodeImage:
    """Log-compressed envelope, values in [0, 1]."""

    samples: np.ndarray
    dynamic_range_db: float
    config: TransducerConfig | None = None
    pad_samples: int = 0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"B-mode samples must be 2-D, got shape {arr.shape}")
        if (arr < 0).any() or (arr > 1).any():
            raise ValueError("B-mode samples must lie in [0, 1]")
        object.__setattr__(self, "samples", arr)

    def windowed(self) -> "BmodeImage":
        if self.pad_samples == 0:
            return self
        sl = slice(self.pad_samples, self.samples.shape[0] - self.pad_samples)
        return BmodeImage(self.samples[sl], self.dynamic_range_db, self.config, 0)


@dataclass(frozen=True)
class NetworkInput:
    """Preprocessed 572x572 input in [0, 1], tagged with its provenance."""

    samples: np.ndarray
    provenance: str  # "envelope" | "bmode"
    source_id: str = ""

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.shape != (NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE):
            raise ValueError(
                f"network input must be {NETWORK_INPUT_SIZE}x{NETWORK_INPUT_SIZE}, "
                f"got shape {arr.shape}"
            )
        if (arr < 0).any() or (arr > 1).any():
            raise ValueError("network input values must lie in [0, 1]")
        if self.provenance not in ("envelope", "bmode"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "samples", arr)


def analytic_envelope(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Magnitude of the analytic signal along ``axis``.

    Frequency-domain construction: zero the negative frequencies, double the
    positive ones, invert, take the magnitude.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[axis] < 2:
        raise ValueError(f"need at least 2 samples along axis {axis}, got {x.shape[axis]}")
    return np.abs(scipy.signal.hilbert(x, axis=axis))


def detect_envelope(rf: RfFrame) -> EnvelopeImage:
    """Per-line envelope of an RF frame (geometry carried over)."""
    return EnvelopeImage(analytic_envelope(rf.samples, axis=0), rf.config, rf.pad_samples)


def log_compress_array(env: np.ndarray, dynamic_range_db: float = DEFAULT_DYNAMIC_RANGE_DB) -> np.ndarray:
    """Map an envelope to [0, 1] over the given dynamic range.

    ``clamp(20*log10(env / max), -DR, 0) / DR + 1``: the per-image maximum
    maps to 1, anything at or below -DR dB maps to 0. An all-zero image maps
    to all zeros.
    """
    if dynamic_range_db <= 0:
        raise ValueError("dynamic_range_db must be > 0")
    env = np.asarray(env, dtype=np.float64)
    peak = env.max() if env.size else 0.0
    if peak <= 0.0:
        return np.zeros_like(env)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(env / peak)
    return np.clip(db, -dynamic_range_db, 0.0) / dynamic_range_db + 1.0


def log_compress(env: EnvelopeImage, dynamic_range_db: float = DEFAULT_DYNAMIC_RANGE_DB) -> BmodeImage:
    """Log-compress an envelope image into a B-mode image."""
    return BmodeImage(
        log_compress_array(env.samples, dynamic_range_db),
        dynamic_range_db,
        env.config,
        env.pad_samples,
    )


def _axis_coords(n_out: int, n_src: int) -> np.ndarray:
    # Endpoint-aligned sampling: source index 0 maps to output index 0 and
    # n_src-1 to n_out-1, so interpolation never extrapolates and a linear
    # ramp resizes to a linear ramp exactly.
    if n_out == 1:
        return np.zeros(1)
    return np.arange(n_out) * (n_src - 1) / (n_out - 1)


def resize_bilinear(img: np.ndarray, height: int = RESIZED_SIZE, width: int = RESIZED_SIZE) -> np.ndarray:
    """Separable bilinear resize over the source grid (endpoint-aligned)."""
    img = check_image(img, "image")
    out = _interp_axis(img, _axis_coords(height, img.shape[0]), axis=0)
    return _interp_axis(out, _axis_coords(width, img.shape[1]), axis=1)


def _interp_axis(a: np.ndarray, coords: np.ndarray, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    i0 = np.floor(coords).astype(np.intp)
    i0 = np.clip(i0, 0, a.shape[0] - 2) if a.shape[0] > 1 else np.zeros_like(i0)
    w = (coords - i0)[:, np.newaxis] if a.ndim > 1 else coords - i0
    i1 = np.minimum(i0 + 1, a.shape[0] - 1)
    out = a[i0] * (1.0 - w) + a[i1] * w
    return np.moveaxis(out, 0, axis)


def resize_nearest(img: np.ndarray, height: int = MASK_SIZE, width: int = MASK_SIZE) -> np.ndarray:
    """Nearest-neighbor resize; the only safe choice for class-label rasters."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    rows = np.rint(_axis_coords(height, img.shape[0])).astype(np.intp)
    cols = np.rint(_axis_coords(width, img.shape[1])).astype(np.intp)
    return img[np.ix_(rows, cols)]


def normalize_unit(img: np.ndarray) -> np.ndarray:
    """Scale to [0, 1] as (x - min) / (max - min); constant images map to zeros."""
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def mirror_pad(img: np.ndarray, pad: int = MIRROR_PAD) -> np.ndarray:
    """Reflect-pad a 512x512 image to 572x572.

    Reflection excludes the border pixel (a pixel at distance d outside maps
    to distance d inside), matching overlap-tile extrapolation, so valid
    convolutions on the padded input cover the original image.
    """
    img = np.asarray(img)
    if img.shape != (RESIZED_SIZE, RESIZED_SIZE):
        raise ValueError(f"mirror_pad expects {RESIZED_SIZE}x{RESIZED_SIZE} input, got {img.shape}")
    return np.pad(img, pad, mode="reflect")


def make_network_input(img: np.ndarray, provenance: str, source_id: str = "") -> NetworkInput:
    """resize -> normalize -> mirror-pad, the full preprocessing chain.

    Normalization happens after the resize and before the padding (which
    preserves range), so the exported input is exactly 572x572 in [0, 1].
    """
    arr = mirror_pad(normalize_unit(resize_bilinear(img)))
    return NetworkInput(arr, provenance, source_id)


class _StatelessTransformer(TransformerMixin, BaseEstimator):
    """Base for pure per-image transforms; fit is a no-op."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        X = check_image_batch(X)
        return np.stack([self._apply(img) for img in X])

    def _apply(self, img):  # pragma: no cover - abstract
        raise NotImplementedError


class EnvelopeDetector(_StatelessTransformer):
    """Per-line analytic-signal envelope of RF frames, axis 1 of (n, S, L)."""

    def transform(self, X):
        return analytic_envelope(check_image_batch(X), axis=1)


class LogCompressor(_StatelessTransformer):
    """Per-image log compression to [0, 1] over ``dynamic_range_db``."""

    def __init__(self, dynamic_range_db=DEFAULT_DYNAMIC_RANGE_DB):
        self.dynamic_range_db = dynamic_range_db

    def _apply(self, img):
        return log_compress_array(img, self.dynamic_range_db)


class ImageResizer(_StatelessTransformer):
    """Resize each image; bilinear for intensities, nearest for label rasters."""

    def __init__(self, height=RESIZED_SIZE, width=RESIZED_SIZE, method="bilinear"):
        self.height = height
        self.width = width
        self.method = method

    def _apply(self, img):
        if self.method == "bilinear":
            return resize_bilinear(img, self.height, self.width)
        if self.method == "nearest":
            return resize_nearest(img, self.height, self.width)
        raise ValueError(f"unknown resize method {self.method!r}")


class UnitNormalizer(_StatelessTransformer):
    """Per-image min-max normalization to [0, 1]."""

    def _apply(self, img):
        return normalize_unit(img)


class MirrorPadder(_StatelessTransformer):
    """Reflect-pad 512x512 images to 572x572."""

    def __init__(self, pad=MIRROR_PAD):
        self.pad = pad

    def _apply(self, img):
        return mirror_pad(img, self.pad)


def network_input_pipeline():
    """sklearn Pipeline applying resize -> normalize -> mirror-pad to batches."""
    from sklearn.pipeline import Pipeline

    return Pipeline(
        [
            ("resize", ImageResizer()),
            ("normalize", UnitNormalizer()),
            ("mirror", MirrorPadder()),
        ]
    )
