"""Side-by-side inspection figures: envelope, B-mode, ground truth, and
optional predicted masks, one PNG per image."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import io
from .datasets import load_manifest

_MASK_CMAP = matplotlib.colors.ListedColormap(["black", "white", "gray"])


def _panel(ax, img, title, mask=False):
    if mask:
        ax.imshow(img, cmap=_MASK_CMAP, vmin=0, vmax=2, aspect="auto", interpolation="nearest")
    else:
        ax.imshow(img, cmap="gray", aspect="auto")
    ax.set_title(title, fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])


def render_example(
    dataset_root,
    image_id: str,
    out_dir,
    pred_envelope_dir=None,
    pred_bmode_dir=None,
) -> Path:
    """Write ``<image_id>.png`` with 3 panels (5 when predictions are given)."""
    root = Path(dataset_root)
    manifest = load_manifest(root)
    entry = manifest.entry(image_id)

    panels: list[tuple[np.ndarray, str, bool]] = []
    if entry.modality is None:
        env, _ = io.read_raw_f32(root / entry.files["envelope"])
        bmode, _ = io.read_raw_f32(root / entry.files["bmode"])
        panels.append((env, "(a) envelope data", False))
        panels.append((bmode, "(b) B-mode image", False))
    else:
        img, _ = io.read_raw_f32(root / entry.files["input"])
        panels.append((img, f"(a) {entry.modality} data", False))
    mask, _ = io.read_mask_u8(root / entry.files["mask"])
    panels.append((mask, f"({chr(ord('a') + len(panels))}) ground truth", True))

    for pred_dir, label in ((pred_envelope_dir, "envelope"), (pred_bmode_dir, "bmode")):
        if pred_dir is None:
            continue
        pred_path = Path(pred_dir) / f"{image_id}.mask.u8"
        if not pred_path.exists():
            raise FileNotFoundError(f"no prediction for {image_id!r} in {pred_dir}")
        pred, _ = io.read_mask_u8(pred_path)
        panels.append((pred, f"({chr(ord('a') + len(panels))}) predicted ({label})", True))

    fig, axes = plt.subplots(1, len(panels), figsize=(2.6 * len(panels), 3.2))
    if len(panels) == 1:
        axes = [axes]
    for ax, (img, title, is_mask) in zip(axes, panels):
        _panel(ax, img, title, mask=is_mask)
    fig.suptitle(image_id, fontsize=10)
    fig.tight_layout()

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{image_id}.png"
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
