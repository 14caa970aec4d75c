"""Dataset assembly: end-to-end simulation into versioned train/val/test
trees, ingestion of externally acquired images, validation, and evaluation
against prediction directories.

Layout of a dataset root::

    manifest.json                  # written last; the tree is invalid without it
    train/ val/ test/
      <id>.phantom.json            # every sampled value, re-derivable
      <id>.envelope.f32 (+ .json)  # 572x572 network input from envelope data
      <id>.bmode.f32    (+ .json)  # 572x572 network input from B-mode image
      <id>.mask.u8      (+ .json)  # 388x388 class-index ground truth

Generation fans out across a thread pool; every image derives its own seed
from (master seed, image index), so the output bytes are independent of the
thread count and schedule.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig, flatten_config
from .metrics import EvalReport, aggregate, score_image
from .phantoms import ClassMask, PhantomSpec, place_scatterers, rasterize_mask, sample_phantom_spec
from .pipeline import (
    MASK_SIZE,
    NETWORK_INPUT_SIZE,
    NetworkInput,
    detect_envelope,
    log_compress,
    make_network_input,
    resize_nearest,
)
from .rf import synthesize_rf
from .validation import ValidationError, check_mask_labels, check_split_fractions, derived_seed

SPLITS = ("train", "val", "test")
MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT_VERSION = 1

# Substream ids mixed into the master seed (distinct from the per-phantom
# stream ids used inside phantoms.py).
_STREAM_SPLIT = 100
_STREAM_IMAGE = 200


def split_counts(n_images: int, fractions) -> tuple[int, int, int]:
    """Train/val sizes floor their fractions; test takes the remainder."""
    if n_images < 1:
        raise ValueError(f"n_images must be >= 1, got {n_images}")
    f_train, f_val, _ = check_split_fractions(fractions)
    n_train = int(f_train * n_images)
    n_val = int(f_val * n_images)
    return n_train, n_val, n_images - n_train - n_val


def assign_splits(n_images: int, fractions, seed: int) -> list[str]:
    """Split label per image index, from a seeded permutation."""
    n_train, n_val, _ = split_counts(n_images, fractions)
    rng = np.random.default_rng(derived_seed(seed, _STREAM_SPLIT))
    perm = rng.permutation(n_images)
    labels = [""] * n_images
    for pos, idx in enumerate(perm):
        if pos < n_train:
            labels[idx] = "train"
        elif pos < n_train + n_val:
            labels[idx] = "val"
        else:
            labels[idx] = "test"
    return labels


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    split: str
    files: dict  # role -> path relative to the dataset root
    modality: str | None = None  # external records carry a single modality
    note: str = ""

    def to_dict(self) -> dict:
        d = {"image_id": self.image_id, "split": self.split, "files": dict(self.files)}
        if self.modality is not None:
            d["modality"] = self.modality
        if self.note:
            d["note"] = self.note
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        return cls(
            image_id=d["image_id"],
            split=d["split"],
            files=dict(d["files"]),
            modality=d.get("modality"),
            note=d.get("note", ""),
        )


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    kind: str  # "simulated" | "external"
    seed: int
    n_images: int
    split_fractions: tuple[float, float, float]
    config: dict = field(default_factory=dict)  # flat dotted-key parameter echo
    entries: tuple[ManifestEntry, ...] = ()

    def to_dict(self) -> dict:
        return {
            "format_version": MANIFEST_FORMAT_VERSION,
            "dataset_id": self.dataset_id,
            "kind": self.kind,
            "seed": self.seed,
            "n_images": self.n_images,
            "split_fractions": list(self.split_fractions),
            "split_counts": {s: sum(1 for e in self.entries if e.split == s) for s in SPLITS},
            "config": dict(self.config),
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        if d.get("format_version") != MANIFEST_FORMAT_VERSION:
            raise ValidationError(
                f"unsupported manifest format_version {d.get('format_version')!r}"
            )
        return cls(
            dataset_id=d["dataset_id"],
            kind=d["kind"],
            seed=d["seed"],
            n_images=d["n_images"],
            split_fractions=tuple(d["split_fractions"]),
            config=dict(d.get("config", {})),
            entries=tuple(ManifestEntry.from_dict(e) for e in d["entries"]),
        )

    def save(self, root) -> Path:
        path = Path(root) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    def entry(self, image_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise KeyError(f"image id {image_id!r} not in manifest")

    def split_entries(self, split: str) -> list[ManifestEntry]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}, expected one of {SPLITS}")
        return [e for e in self.entries if e.split == split]


def load_manifest(root) -> DatasetManifest:
    path = Path(root) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} under {root}")
    return DatasetManifest.from_dict(json.loads(path.read_text()))


@dataclass(frozen=True)
class SimulatedExample:
    """In-memory result of one end-to-end simulation."""

    spec: PhantomSpec
    mask: ClassMask
    envelope_input: NetworkInput
    bmode_input: NetworkInput


def generate_example(image_seed: int, run_config: RunConfig | None = None, source_id: str = "") -> SimulatedExample:
    """Run phantom -> RF -> envelope -> B-mode -> network inputs for one seed."""
    cfg = run_config or RunConfig()
    spec = sample_phantom_spec(image_seed, cfg.phantom)
    frame = synthesize_rf(place_scatterers(spec), cfg.transducer)
    env = detect_envelope(frame).windowed()
    bmode = log_compress(env, cfg.pipeline.dynamic_range_db)
    return SimulatedExample(
        spec=spec,
        mask=rasterize_mask(spec, MASK_SIZE, MASK_SIZE),
        envelope_input=make_network_input(env.samples, "envelope", source_id),
        bmode_input=make_network_input(bmode.samples, "bmode", source_id),
    )


def _write_example(root: Path, entry_dir: str, image_id: str, ex: SimulatedExample) -> dict:
    rel = {
        "phantom": f"{entry_dir}/{image_id}.phantom.json",
        "envelope": f"{entry_dir}/{image_id}.envelope.f32",
        "bmode": f"{entry_dir}/{image_id}.bmode.f32",
        "mask": f"{entry_dir}/{image_id}.mask.u8",
    }
    written = []
    try:
        (root / rel["phantom"]).write_text(ex.spec.to_json() + "\n")
        written.append(root / rel["phantom"])
        for role, net in (("envelope", ex.envelope_input), ("bmode", ex.bmode_input)):
            io.write_raw_f32(
                root / rel[role],
                net.samples,
                {"stage": "network_input", "provenance": net.provenance, "image_id": image_id},
            )
            written.append(root / rel[role])
        io.write_mask_u8(root / rel["mask"], ex.mask.labels, {"stage": "mask", "image_id": image_id})
        written.append(root / rel["mask"])
    except BaseException:
        # Keep the tree consistent: a half-written image is removed so the
        # failed build leaves no orphans behind.
        for path in written:
            path.unlink(missing_ok=True)
            Path(str(path) + ".json").unlink(missing_ok=True)
        raise
    return rel


def build_dataset(
    out_root,
    n_images: int,
    seed: int = 0,
    split=(0.6, 0.15, 0.25),
    run_config: RunConfig | None = None,
    threads: int | None = None,
    progress=None,
) -> DatasetManifest:
    """Simulate ``n_images`` end-to-end and write a dataset tree.

    Deterministic for a given (seed, config): image i always derives the same
    seed, so reruns produce byte-identical trees. The manifest is written
    last; a tree without one is not a valid dataset.
    """
    cfg = run_config or RunConfig()
    labels = assign_splits(n_images, split, seed)
    root = Path(out_root)
    for s in SPLITS:
        (root / s).mkdir(parents=True, exist_ok=True)

    image_ids = [f"img{i:05d}" for i in range(n_images)]

    def job(i: int) -> ManifestEntry:
        ex = generate_example(
            derived_seed(seed, _STREAM_IMAGE, i), cfg, source_id=image_ids[i]
        )
        rel = _write_example(root, labels[i], image_ids[i], ex)
        if progress is not None:
            progress(image_ids[i])
        return ManifestEntry(image_id=image_ids[i], split=labels[i], files=rel)

    workers = threads or os.cpu_count() or 1
    if workers == 1:
        entries = [job(i) for i in range(n_images)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(job, range(n_images)))

    manifest = DatasetManifest(
        dataset_id=f"sim-seed{seed}-n{n_images}",
        kind="simulated",
        seed=seed,
        n_images=n_images,
        split_fractions=tuple(float(f) for f in split),
        config=flatten_config(cfg),
        entries=tuple(entries),
    )
    manifest.save(root)
    return manifest


@dataclass(frozen=True)
class ExternalRecord:
    """One externally acquired image plus its manually drawn mask."""

    image_id: str
    modality: str  # "envelope" | "bmode"
    image_path: str
    mask_path: str
    note: str = ""

    def __post_init__(self):
        if self.modality not in ("envelope", "bmode"):
            raise ValueError(f"unknown modality {self.modality!r}")


def load_external_records(path) -> list[ExternalRecord]:
    """Read an ingestion list: JSON array of record objects."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ValidationError(f"{path}: expected a JSON array of records")
    base = Path(path).parent
    records = []
    for d in data:
        records.append(
            ExternalRecord(
                image_id=d["image_id"],
                modality=d["modality"],
                image_path=str((base / d["image"]).resolve()),
                mask_path=str((base / d["mask"]).resolve()),
                note=d.get("note", ""),
            )
        )
    return records


def ingest_external(records: list[ExternalRecord], out_root) -> DatasetManifest:
    """Preprocess external images into an evaluation-ready dataset tree.

    Images go through the same resize/normalize/mirror chain as simulated
    data; masks are nearest-neighbor resized to 388x388. Masks with labels
    outside {0, 1, 2} are rejected, naming the file and offending pixels.
    All entries land in the test split.
    """
    root = Path(out_root)
    (root / "test").mkdir(parents=True, exist_ok=True)
    seen = set()
    entries = []
    for rec in records:
        if rec.image_id in seen:
            raise ValidationError(f"duplicate external image id {rec.image_id!r}")
        seen.add(rec.image_id)
        img = io.read_image_any(rec.image_path)
        try:
            raw_mask = check_mask_labels(io.read_mask_any(rec.mask_path), name=rec.mask_path)
        except ValidationError as exc:
            raise ValidationError(f"rejected record {rec.image_id!r}: {exc}") from exc
        net = make_network_input(img, rec.modality, rec.image_id)
        mask = resize_nearest(raw_mask, MASK_SIZE, MASK_SIZE)

        rel = {
            "input": f"test/{rec.image_id}.{rec.modality}.f32",
            "mask": f"test/{rec.image_id}.mask.u8",
        }
        io.write_raw_f32(
            root / rel["input"],
            net.samples,
            {
                "stage": "network_input",
                "provenance": rec.modality,
                "image_id": rec.image_id,
                "source": Path(rec.image_path).name,
            },
        )
        io.write_mask_u8(root / rel["mask"], mask, {"stage": "mask", "image_id": rec.image_id})
        entries.append(
            ManifestEntry(
                image_id=rec.image_id,
                split="test",
                files=rel,
                modality=rec.modality,
                note=rec.note,
            )
        )

    manifest = DatasetManifest(
        dataset_id=f"external-n{len(entries)}",
        kind="external",
        seed=0,
        n_images=len(entries),
        split_fractions=(0.0, 0.0, 1.0),
        entries=tuple(entries),
    )
    manifest.save(root)
    return manifest


def validate_dataset(root) -> list[str]:
    """Structural check of a dataset tree; returns a list of problems.

    Verifies the manifest loads, ids are unique, every referenced file
    exists with the declared shape and value range, and every data file
    under the root is referenced by exactly one entry.
    """
    root = Path(root)
    problems: list[str] = []
    try:
        manifest = load_manifest(root)
    except (FileNotFoundError, ValidationError, json.JSONDecodeError) as exc:
        return [str(exc)]

    ids = [e.image_id for e in manifest.entries]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        problems.append(f"duplicate image ids in manifest: {dupes}")

    referenced = set()
    reference_counts: dict[Path, int] = {}
    for e in manifest.entries:
        for role, rel in e.files.items():
            path = root / rel
            reference_counts[path] = reference_counts.get(path, 0) + 1
            referenced.add(path)
            if role != "phantom":
                referenced.add(Path(str(path) + ".json"))
            if not path.exists():
                problems.append(f"{e.image_id}: missing file {rel}")
                continue
            try:
                if rel.endswith(".f32"):
                    arr, _ = io.read_raw_f32(path)
                    if arr.shape != (NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE):
                        problems.append(f"{rel}: bad shape {arr.shape}")
                    elif arr.min() < 0 or arr.max() > 1:
                        problems.append(f"{rel}: values outside [0, 1]")
                elif rel.endswith(".u8"):
                    mask, _ = io.read_mask_u8(path)
                    if mask.shape != (MASK_SIZE, MASK_SIZE):
                        problems.append(f"{rel}: bad shape {mask.shape}")
                    else:
                        check_mask_labels(mask, name=rel)
            except (ValidationError, ValueError, FileNotFoundError) as exc:
                problems.append(str(exc))

    for path, count in reference_counts.items():
        if count > 1:
            problems.append(f"file referenced by {count} entries: {path.relative_to(root)}")

    for path in sorted(root.rglob("*")):
        if path.is_dir() or path.name == MANIFEST_NAME:
            continue
        if path not in referenced:
            problems.append(f"orphan file not referenced by the manifest: {path.relative_to(root)}")
    return problems


def _input_path_for(entry: ManifestEntry, modality: str) -> str | None:
    if entry.modality is not None:
        return entry.files["input"] if entry.modality == modality else None
    return entry.files.get(modality)


def evaluation_set(manifest: DatasetManifest, modality: str, split: str = "test") -> list[ManifestEntry]:
    """Entries of a split that carry the requested modality."""
    return [e for e in manifest.split_entries(split) if _input_path_for(e, modality) is not None]


def evaluate_predictions(
    dataset_root,
    pred_dir,
    modality: str = "envelope",
    split: str = "test",
) -> EvalReport:
    """Score predicted masks (``<id>.mask.u8`` in ``pred_dir``) against truth.

    Every image of the evaluation set must have a prediction; missing ids
    are collected and reported together.
    """
    root = Path(dataset_root)
    manifest = load_manifest(root)
    entries = evaluation_set(manifest, modality, split)
    if not entries:
        raise ValidationError(
            f"no {modality!r} entries in split {split!r} of {manifest.dataset_id}"
        )
    pred_dir = Path(pred_dir)
    missing = [e.image_id for e in entries if not (pred_dir / f"{e.image_id}.mask.u8").exists()]
    if missing:
        raise ValidationError(
            f"missing predictions for {len(missing)} image id(s): {', '.join(missing)}"
        )
    scored = []
    for e in entries:
        truth, _ = io.read_mask_u8(root / e.files["mask"])
        pred, _ = io.read_mask_u8(pred_dir / f"{e.image_id}.mask.u8")
        check_mask_labels(pred, name=f"{e.image_id}.mask.u8")
        scored.append(score_image(e.image_id, truth, pred))
    return aggregate(modality, scored)
