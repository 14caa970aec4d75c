"""Segmentation scoring: per-class confusion counts, DSC and F2, and
mean +/- std aggregation over a test set.

Scores follow the usual conventions: DSC = 2TP / (2TP + FP + FN) and
F2 = 5TP / (5TP + 4FN + FP), computed one-vs-rest per class. A class absent
from both masks yields an undefined score (``None``), which aggregates
exclude while recording the exclusion count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

CLASS_NAMES = {0: "background", 1: "hyperechoic", 2: "anechoic"}

AGGREGATION_POLICY = (
    "undefined scores (class absent from both masks) are excluded from "
    "aggregates with the exclusion count recorded; std is the sample "
    "standard deviation (ddof=1), reported as 0.0 when n=1"
)


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-rest pixel counts; tn is recorded though DSC/F2 ignore it."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion_counts(y_true, y_pred, class_id: int) -> ConfusionCounts:
    """Confusion counts for one class, one-vs-rest.

    ``y_true`` is the reference mask, ``y_pred`` the prediction; both are
    class-index rasters of identical shape.
    """
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape:
        raise ValueError(f"mask shapes differ: truth {t.shape} vs prediction {p.shape}")
    t_pos = t == class_id
    p_pos = p == class_id
    tp = int(np.count_nonzero(t_pos & p_pos))
    fp = int(np.count_nonzero(~t_pos & p_pos))
    fn = int(np.count_nonzero(t_pos & ~p_pos))
    return ConfusionCounts(tp, fp, fn, t.size - tp - fp - fn)


def dsc_from_counts(c: ConfusionCounts) -> float | None:
    """Dice similarity coefficient; None when the class is absent from both masks."""
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        return None
    return 2 * c.tp / denom


def f2_from_counts(c: ConfusionCounts) -> float | None:
    """Recall-weighted F-beta (beta=2); None when the class is absent from both masks."""
    denom = 5 * c.tp + 4 * c.fn + c.fp
    if denom == 0:
        return None
    return 5 * c.tp / denom


def dice_score(y_true, y_pred, class_id: int) -> float | None:
    return dsc_from_counts(confusion_counts(y_true, y_pred, class_id))


def f2_score(y_true, y_pred, class_id: int) -> float | None:
    return f2_from_counts(confusion_counts(y_true, y_pred, class_id))


@dataclass(frozen=True)
class ImageScores:
    """Per-class counts and scores for one evaluated image."""

    image_id: str
    classes: dict  # class_id -> {"counts": ConfusionCounts, "dsc": ..., "f2": ...}

    def macro(self, metric: str) -> float | None:
        """Mean of the metric over classes defined in this image."""
        vals = [v[metric] for v in self.classes.values() if v[metric] is not None]
        return sum(vals) / len(vals) if vals else None


def score_image(image_id: str, y_true, y_pred, class_ids=(0, 1, 2)) -> ImageScores:
    classes = {}
    for cid in class_ids:
        c = confusion_counts(y_true, y_pred, cid)
        classes[cid] = {"counts": c, "dsc": dsc_from_counts(c), "f2": f2_from_counts(c)}
    return ImageScores(image_id, classes)


def _mean_std(values: list[float]) -> dict:
    """Mean and sample std (ddof=1) of the defined scores; std 0.0 when n=1."""
    n = len(values)
    if n == 0:
        return {"mean": None, "std": None, "n": 0}
    mean = sum(values) / n
    if n == 1:
        return {"mean": mean, "std": 0.0, "n": 1}
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return {"mean": mean, "std": math.sqrt(var), "n": n}


@dataclass(frozen=True)
class EvalReport:
    """Per-image scores plus per-class and macro aggregates for one modality."""

    modality: str
    images: tuple[ImageScores, ...]
    class_ids: tuple[int, ...] = (0, 1, 2)

    def per_class_aggregate(self, class_id: int, metric: str) -> dict:
        vals = [
            img.classes[class_id][metric]
            for img in self.images
            if img.classes[class_id][metric] is not None
        ]
        agg = _mean_std(vals)
        agg["n_excluded"] = len(self.images) - agg["n"]
        return agg

    def macro_aggregate(self, metric: str) -> dict:
        """Headline number: mean +/- std over per-image macro-averaged scores."""
        vals = [img.macro(metric) for img in self.images]
        vals = [v for v in vals if v is not None]
        agg = _mean_std(vals)
        agg["n_excluded"] = len(self.images) - agg["n"]
        return agg

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "modality": self.modality,
            "policy": AGGREGATION_POLICY,
            "n_images": len(self.images),
            "macro": {m: self.macro_aggregate(m) for m in ("dsc", "f2")},
            "per_class": {
                str(cid): {m: self.per_class_aggregate(cid, m) for m in ("dsc", "f2")}
                for cid in self.class_ids
            },
            "images": [
                {
                    "image_id": img.image_id,
                    "macro_dsc": img.macro("dsc"),
                    "macro_f2": img.macro("f2"),
                    "classes": {
                        str(cid): {
                            "tp": v["counts"].tp,
                            "fp": v["counts"].fp,
                            "fn": v["counts"].fn,
                            "tn": v["counts"].tn,
                            "dsc": v["dsc"],
                            "f2": v["f2"],
                        }
                        for cid, v in img.classes.items()
                    },
                }
                for img in self.images
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def aggregate(modality: str, images: list[ImageScores], class_ids=(0, 1, 2)) -> EvalReport:
    """Build the evaluation report for a set of scored images."""
    if not images:
        raise ValueError("cannot aggregate an empty score set")
    return EvalReport(modality, tuple(images), tuple(class_ids))


def _cell(agg: dict) -> str:
    if agg["n"] == 0:
        return "N/A"
    text = f"{agg['mean']:.2f} ± {agg['std']:.2f}"
    if agg["n"] == 1:
        text += " (n=1)"
    if agg.get("n_excluded"):
        text += f" [{agg['n_excluded']} excluded]"
    return text


def format_report_table(reports: list[EvalReport]) -> str:
    """Aligned text table in the layout of the published score tables.

    One headline row per modality (macro average over classes), followed by
    the per-class breakdown.
    """
    rows = [("Predicted Mask", "DSC", "F2")]
    for rep in reports:
        rows.append(
            (
                f"{rep.modality} data",
                _cell(rep.macro_aggregate("dsc")),
                _cell(rep.macro_aggregate("f2")),
            )
        )
        for cid in rep.class_ids:
            rows.append(
                (
                    f"  {CLASS_NAMES.get(cid, cid)}",
                    _cell(rep.per_class_aggregate(cid, "dsc")),
                    _cell(rep.per_class_aggregate(cid, "f2")),
                )
            )
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("-" * (sum(widths) + 4))
    return "\n".join(lines) + "\n"


def format_per_image_listing(report: EvalReport) -> str:
    """One line per image: macro scores plus the per-class breakdown."""

    def fmt(value) -> str:
        return "  n/a" if value is None else f"{value:.3f}"

    lines = [f"per-image scores ({report.modality}):"]
    for img in report.images:
        per_class = "  ".join(
            f"{CLASS_NAMES.get(cid, cid)}[dsc={fmt(v['dsc'])} f2={fmt(v['f2'])}]"
            for cid, v in img.classes.items()
        )
        lines.append(
            f"  {img.image_id}  macro[dsc={fmt(img.macro('dsc'))} "
            f"f2={fmt(img.macro('f2'))}]  {per_class}"
        )
    return "\n".join(lines) + "\n"
