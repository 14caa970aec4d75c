"""Input validation helpers shared across the toolkit.

Small check functions in the spirit of ``sklearn.utils.validation``: each
one either returns a normalized value or raises with a message naming the
offending argument.
"""

from __future__ import annotations

import numpy as np


class ValidationError(Exception):
    """Raised when user-supplied data fails a structural check."""


def check_image(x, name="image", min_size=2) -> np.ndarray:
    """Coerce ``x`` to a finite 2-D float64 array of at least ``min_size``²."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < min_size or arr.shape[1] < min_size:
        raise ValueError(
            f"{name} must be at least {min_size}x{min_size}, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_image_batch(X, name="X") -> np.ndarray:
    """Coerce ``X`` to a 3-D (n_images, height, width) float64 array.

    A single 2-D image is promoted to a batch of one.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be (n_images, height, width), got shape {arr.shape}")
    return arr


def check_mask_labels(labels, name="mask", allowed=(0, 1, 2)) -> np.ndarray:
    """Validate a class-index raster; report offending pixel coordinates."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    bad = ~np.isin(arr, allowed)
    if bad.any():
        rows, cols = np.nonzero(bad)
        shown = ", ".join(
            f"({r}, {c})={arr[r, c]}" for r, c in list(zip(rows, cols))[:5]
        )
        raise ValidationError(
            f"{name} contains labels outside {set(allowed)} at {bad.sum()} "
            f"pixel(s), first offenders: {shown}"
        )
    return arr.astype(np.uint8)


def check_split_fractions(fractions) -> tuple[float, float, float]:
    """Validate (train, val, test) fractions: non-negative, summing to 1."""
    fracs = tuple(float(f) for f in fractions)
    if len(fracs) != 3:
        raise ValueError(f"split must have 3 fractions, got {len(fracs)}")
    if any(f < 0 for f in fracs):
        raise ValueError(f"split fractions must be non-negative, got {fracs}")
    if abs(sum(fracs) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got sum {sum(fracs)!r}")
    return fracs


def check_seed(seed) -> int:
    """Validate an integer RNG seed representable in 64 bits."""
    if not isinstance(seed, (int, np.integer)):
        raise ValueError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not -(2**63) <= seed < 2**64:
        raise ValueError(f"seed must fit in 64 bits, got {seed}")
    return seed


def derived_seed(master_seed: int, *key: int) -> int:
    """Deterministically mix a master seed with an index key.

    Used to hand each image of a batch its own independent stream: the same
    (master seed, key) always yields the same child seed, regardless of how
    the generation work is scheduled across threads.
    """
    ss = np.random.SeedSequence([check_seed(master_seed) & (2**64 - 1), *key])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int, stream: int) -> np.random.Generator:
    """Generator for one named substream of ``seed``.

    Separate stream ids keep draws independent (e.g. lesion sampling vs
    scatterer placement) while staying reproducible from the single seed.
    """
    return np.random.default_rng(np.random.SeedSequence([check_seed(seed) & (2**64 - 1), stream]))
