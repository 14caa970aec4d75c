import json

import numpy as np
import pytest

from sonosynth import (
    ExternalRecord,
    ValidationError,
    build_dataset,
    evaluate_predictions,
    generate_example,
    ingest_external,
    load_manifest,
    split_counts,
    validate_dataset,
)
from sonosynth import io
from sonosynth.datasets import assign_splits, load_external_records
from sonosynth.validation import derived_seed


class TestSplits:
    def test_paper_scale_split_is_420_105_175(self):
        assert split_counts(700, (0.6, 0.15, 0.25)) == (420, 105, 175)

    def test_desk_scale_split(self):
        assert split_counts(20, (0.6, 0.15, 0.25)) == (12, 3, 5)

    def test_remainder_goes_to_test(self):
        assert sum(split_counts(7, (0.6, 0.15, 0.25))) == 7

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            split_counts(10, (0.5, 0.2, 0.2))

    def test_n_images_must_be_positive(self):
        with pytest.raises(ValueError, match="n_images"):
            split_counts(0, (0.6, 0.15, 0.25))

    def test_assignment_covers_all_images_disjointly(self):
        labels = assign_splits(20, (0.6, 0.15, 0.25), seed=7)
        assert len(labels) == 20
        assert labels.count("train") == 12
        assert labels.count("val") == 3
        assert labels.count("test") == 5

    def test_assignment_deterministic_and_seed_sensitive(self):
        a = assign_splits(50, (0.6, 0.15, 0.25), seed=1)
        assert a == assign_splits(50, (0.6, 0.15, 0.25), seed=1)
        assert a != assign_splits(50, (0.6, 0.15, 0.25), seed=2)


class TestGenerateExample:
    def test_shapes_and_ranges(self):
        ex = generate_example(derived_seed(3, 200, 0), source_id="img00000")
        assert ex.envelope_input.samples.shape == (572, 572)
        assert ex.bmode_input.samples.shape == (572, 572)
        assert ex.mask.labels.shape == (388, 388)
        assert ex.envelope_input.provenance == "envelope"
        assert ex.bmode_input.provenance == "bmode"

    def test_deterministic(self):
        a = generate_example(123456789)
        b = generate_example(123456789)
        np.testing.assert_array_equal(a.envelope_input.samples, b.envelope_input.samples)
        np.testing.assert_array_equal(a.mask.labels, b.mask.labels)
        assert a.spec == b.spec


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds") / "small"
    manifest = build_dataset(root, n_images=5, seed=3, threads=2)
    return root, manifest


class TestBuildDataset:
    def test_manifest_counts_and_files_exist(self, small_dataset):
        root, manifest = small_dataset
        assert manifest.n_images == 5
        d = manifest.to_dict()
        assert d["split_counts"] == {"train": 3, "val": 0, "test": 2}
        for entry in manifest.entries:
            for rel in entry.files.values():
                assert (root / rel).exists()

    def test_manifest_echoes_full_config(self, small_dataset):
        _, manifest = small_dataset
        assert manifest.config["transducer.num_lines"] == 50
        assert manifest.config["phantom.scatterer_density_per_mm3"] == 4.0

    def test_validates_clean(self, small_dataset):
        root, _ = small_dataset
        assert validate_dataset(root) == []

    def test_roundtrip_bit_exact(self, small_dataset):
        root, manifest = small_dataset
        entry = manifest.entries[0]
        arr, header = io.read_raw_f32(root / entry.files["envelope"])
        ex = generate_example(derived_seed(3, 200, 0), source_id=entry.image_id)
        np.testing.assert_array_equal(arr, ex.envelope_input.samples.astype("<f4"))
        assert header["provenance"] == "envelope"
        mask, _ = io.read_mask_u8(root / entry.files["mask"])
        np.testing.assert_array_equal(mask, ex.mask.labels)

    def test_phantom_spec_rederivable(self, small_dataset):
        root, manifest = small_dataset
        from sonosynth import PhantomSpec

        entry = manifest.entries[2]
        spec = PhantomSpec.from_json((root / entry.files["phantom"]).read_text())
        assert spec.seed == derived_seed(3, 200, 2)

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        build_dataset(a, n_images=3, seed=9, threads=1)
        build_dataset(b, n_images=3, seed=9, threads=3)
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_validate_flags_missing_and_orphan_files(self, tmp_path):
        root = tmp_path / "broken"
        manifest = build_dataset(root, n_images=2, seed=1, threads=1)
        victim = root / manifest.entries[0].files["mask"]
        victim.unlink()
        (root / "train").mkdir(exist_ok=True)
        stray = root / "train" / "stray.bin"
        stray.write_bytes(b"junk")
        problems = validate_dataset(root)
        assert any("missing file" in p for p in problems)
        assert any("orphan" in p for p in problems)

    def test_validate_reports_missing_manifest(self, tmp_path):
        (tmp_path / "empty").mkdir()
        problems = validate_dataset(tmp_path / "empty")
        assert len(problems) == 1 and "manifest" in problems[0]


def _write_external_set(tmp_path, n=6, bad_label_at=None):
    rng = np.random.default_rng(42)
    records = []
    for i in range(n):
        img = rng.uniform(0, 255, (64, 80))
        mask = rng.integers(0, 3, (64, 80)).astype(np.uint8)
        if bad_label_at is not None and i == bad_label_at:
            mask[5, 7] = 3
        img_path = tmp_path / f"ext{i}.npy"
        mask_path = tmp_path / f"ext{i}_mask.npy"
        np.save(img_path, img)
        np.save(mask_path, mask)
        records.append(
            ExternalRecord(
                image_id=f"phantom{i:02d}",
                modality="envelope" if i % 2 == 0 else "bmode",
                image_path=str(img_path),
                mask_path=str(mask_path),
                note="bench capture",
            )
        )
    return records


class TestIngestExternal:
    def test_six_records_build_an_evaluation_set(self, tmp_path):
        records = _write_external_set(tmp_path, n=6)
        root = tmp_path / "external"
        manifest = ingest_external(records, root)
        assert manifest.kind == "external"
        assert manifest.n_images == 6
        assert validate_dataset(root) == []
        entry = manifest.entries[0]
        arr, _ = io.read_raw_f32(root / entry.files["input"])
        assert arr.shape == (572, 572)
        assert arr.min() >= 0 and arr.max() <= 1
        mask, _ = io.read_mask_u8(root / entry.files["mask"])
        assert mask.shape == (388, 388)

    def test_bad_label_rejected_with_file_and_coordinates(self, tmp_path):
        records = _write_external_set(tmp_path, n=3, bad_label_at=1)
        with pytest.raises(ValidationError) as err:
            ingest_external(records, tmp_path / "external")
        message = str(err.value)
        assert "phantom01" in message
        assert "ext1_mask.npy" in message
        assert "(5, 7)" in message

    def test_empty_record_list_is_fine(self, tmp_path):
        manifest = ingest_external([], tmp_path / "external")
        assert manifest.n_images == 0 and manifest.entries == ()

    def test_png_roundtrip_supported(self, tmp_path):
        from PIL import Image

        rng = np.random.default_rng(1)
        img = (rng.uniform(0, 1, (64, 64)) * 255).astype(np.uint8)
        mask = rng.integers(0, 3, (64, 64)).astype(np.uint8)
        Image.fromarray(img, mode="L").save(tmp_path / "img.png")
        Image.fromarray(mask, mode="L").save(tmp_path / "mask.png")
        rec = ExternalRecord(
            image_id="png0",
            modality="bmode",
            image_path=str(tmp_path / "img.png"),
            mask_path=str(tmp_path / "mask.png"),
        )
        manifest = ingest_external([rec], tmp_path / "external")
        assert manifest.entries[0].modality == "bmode"

    def test_record_file_schema(self, tmp_path):
        _write_external_set(tmp_path, n=2)
        listing = [
            {"image_id": "a", "modality": "envelope", "image": "ext0.npy", "mask": "ext0_mask.npy"},
            {"image_id": "b", "modality": "bmode", "image": "ext1.npy", "mask": "ext1_mask.npy", "note": "x"},
        ]
        listing_path = tmp_path / "records.json"
        listing_path.write_text(json.dumps(listing))
        records = load_external_records(listing_path)
        assert [r.image_id for r in records] == ["a", "b"]
        assert records[1].note == "x"


class TestEvaluatePredictions:
    def test_truth_as_prediction_scores_one(self, small_dataset, tmp_path):
        root, manifest = small_dataset
        pred_dir = tmp_path / "preds"
        pred_dir.mkdir()
        for entry in manifest.split_entries("test"):
            mask, _ = io.read_mask_u8(root / entry.files["mask"])
            io.write_mask_u8(pred_dir / f"{entry.image_id}.mask.u8", mask)
        report = evaluate_predictions(root, pred_dir, modality="envelope", split="test")
        assert report.macro_aggregate("dsc")["mean"] == 1.0
        assert report.macro_aggregate("f2")["mean"] == 1.0

    def test_missing_predictions_listed(self, small_dataset, tmp_path):
        root, manifest = small_dataset
        pred_dir = tmp_path / "nopreds"
        pred_dir.mkdir()
        with pytest.raises(ValidationError) as err:
            evaluate_predictions(root, pred_dir, modality="envelope", split="test")
        for entry in manifest.split_entries("test"):
            assert entry.image_id in str(err.value)

    def test_all_background_prediction_scores_zero_on_lesions(self, small_dataset, tmp_path):
        root, manifest = small_dataset
        pred_dir = tmp_path / "bg"
        pred_dir.mkdir()
        blank = np.zeros((388, 388), dtype=np.uint8)
        for entry in manifest.split_entries("test"):
            io.write_mask_u8(pred_dir / f"{entry.image_id}.mask.u8", blank)
        report = evaluate_predictions(root, pred_dir, modality="envelope", split="test")
        for cid in (1, 2):
            agg = report.per_class_aggregate(cid, "dsc")
            if agg["n"]:
                assert agg["mean"] == 0.0

    def test_external_set_filters_by_modality(self, tmp_path):
        records = _write_external_set(tmp_path, n=4)
        root = tmp_path / "external"
        manifest = ingest_external(records, root)
        pred_dir = tmp_path / "p"
        pred_dir.mkdir()
        for entry in manifest.entries:
            mask, _ = io.read_mask_u8(root / entry.files["mask"])
            io.write_mask_u8(pred_dir / f"{entry.image_id}.mask.u8", mask)
        report = evaluate_predictions(root, pred_dir, modality="envelope", split="test")
        assert len(report.images) == 2  # records 0 and 2


class TestManifestRoundtrip:
    def test_load_equals_saved(self, small_dataset):
        root, manifest = small_dataset
        assert load_manifest(root) == manifest


class TestRfFramePersistence:
    def test_save_load_roundtrip_with_config_echo(self, tmp_path):
        from sonosynth import TransducerConfig, synthesize_rf
        from sonosynth.phantoms import ScattererField

        cfg = TransducerConfig(num_lines=8, axial_start_mm=40, axial_end_mm=50)
        frame = synthesize_rf(
            ScattererField(np.array([[0.0, 0.0, 45.0]]), np.array([1.0])), cfg
        )
        path = tmp_path / "frame.rf.f32"
        io.save_rf_frame(path, frame)
        loaded = io.load_rf_frame(path)
        assert loaded.config == cfg
        assert loaded.pad_samples == frame.pad_samples
        np.testing.assert_array_equal(loaded.samples, frame.samples.astype("<f4"))

    def test_png_export(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.uniform(-3, 5, (64, 48))
        io.write_png(tmp_path / "img.png", img)
        from PIL import Image

        loaded = np.asarray(Image.open(tmp_path / "img.png"))
        assert loaded.shape == (64, 48)
        assert loaded.min() == 0 and loaded.max() == 255
