"""Acceptance gate: one test per primary criterion, each printing a
PASS/FAIL line (run with ``pytest -s`` to see them inline)."""

import math
import time

import numpy as np
import pytest
from scipy import stats

from sonosynth import (
    PhantomSpec,
    RegionExtent,
    TransducerConfig,
    detect_envelope,
    dice_score,
    f2_score,
    io,
    load_manifest,
    place_scatterers,
    rasterize_mask,
    split_counts,
    synthesize_rf,
)
from sonosynth.cli import main as cli_main
from sonosynth.metrics import ConfusionCounts, dsc_from_counts, f2_from_counts
from sonosynth.phantoms import Lesion

RAYLEIGH_SNR = math.sqrt(math.pi / (4.0 - math.pi))  # 1.91306...


def _report(name: str, ok: bool, detail: str):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def _interior(env: np.ndarray, cfg: TransducerConfig) -> np.ndarray:
    """Samples away from window edges and wide-beam lateral falloff."""
    margin_ax = int(3.0 / cfg.mm_per_sample)
    crop_lat = cfg.beam_cutoff_sigmas * cfg.lateral_beam_sigma_mm + 0.5
    keep = np.abs(cfg.line_positions_mm) <= (cfg.lateral_max_mm - crop_lat)
    return env[margin_ax : env.shape[0] - margin_ax][:, keep]


class TestSpecklePhysics:
    def test_homogeneous_phantom_envelope_is_rayleigh(self):
        started = time.monotonic()
        cfg = TransducerConfig()
        pooled = []
        decimated = []
        for i in range(12):
            spec = PhantomSpec(lesions=(), scatterer_density_per_mm3=4.0, seed=9000 + i)
            frame = synthesize_rf(place_scatterers(spec), cfg)
            interior = _interior(detect_envelope(frame).windowed().samples, cfg)
            pooled.append(interior.ravel())
            # Thin to roughly independent samples for the goodness-of-fit.
            step_ax = int(2.5 / cfg.mm_per_sample)
            step_lat = int(math.ceil(3.0 * cfg.lateral_beam_sigma_mm / 0.8163))
            decimated.append(interior[::step_ax, ::step_lat].ravel())
        samples = np.concatenate(pooled)
        snr = samples.mean() / samples.std()
        elapsed = time.monotonic() - started

        assert samples.size >= 100_000
        thin = np.concatenate(decimated)
        sigma = math.sqrt(np.mean(thin**2) / 2.0)
        pvalue = stats.kstest(thin, "rayleigh", args=(0, sigma)).pvalue

        ok = abs(snr - RAYLEIGH_SNR) <= 0.05 and pvalue >= 0.01 and elapsed < 60.0
        _report(
            "speckle-physics",
            ok,
            f"SNR={snr:.4f} vs {RAYLEIGH_SNR:.4f}±0.05, KS p={pvalue:.3f}, "
            f"n={samples.size}, {elapsed:.1f}s",
        )


class TestContrastFidelity:
    def test_k10_lesion_brightens_envelope_tenfold(self):
        started = time.monotonic()
        # Narrow beam sharpens the lesion boundary; the mean-envelope ratio
        # is beam-independent, so this only reduces the measurement margin.
        cfg = TransducerConfig(lateral_beam_sigma_mm=0.5, elevation_beam_sigma_mm=1.0)
        extent = RegionExtent(elevation_thickness_mm=5.0)
        lesion = Lesion(
            shape="circle",
            center_lateral_mm=0.0,
            center_axial_mm=60.0,
            echogenicity="hyperechoic",
            k=10,
            radius_mm=3.0,
        )
        lesion_sum = lesion_n = bg_sum = bg_n = 0.0
        for i in range(30):
            spec = PhantomSpec(extent=extent, lesions=(lesion,), seed=7000 + i)
            frame = synthesize_rf(place_scatterers(spec), cfg)
            env = detect_envelope(frame).windowed().samples
            ax = 30.0 + np.arange(env.shape[0]) * cfg.mm_per_sample
            lat_grid, ax_grid = np.meshgrid(cfg.line_positions_mm, ax)
            dist = np.hypot(lat_grid, ax_grid - 60.0)
            margin_ax = int(3.0 / cfg.mm_per_sample)
            interior = np.zeros_like(dist, dtype=bool)
            interior[margin_ax:-margin_ax, np.abs(cfg.line_positions_mm) <= 17.0] = True
            inside = dist < lesion.radius_mm - 1.2
            background = (dist > lesion.radius_mm + 3.0) & interior
            lesion_sum += env[inside].sum()
            lesion_n += inside.sum()
            bg_sum += env[background].sum()
            bg_n += background.sum()
        ratio = (lesion_sum / lesion_n) / (bg_sum / bg_n)
        elapsed = time.monotonic() - started
        ok = abs(ratio - 10.0) / 10.0 <= 0.10 and elapsed < 60.0
        _report("contrast-fidelity", ok, f"ratio={ratio:.3f} vs 10±10%, {elapsed:.1f}s")


class TestMetricOracle:
    @staticmethod
    def _oracle(y_true, y_pred, class_id):
        truth = {(i, j) for i in range(32) for j in range(32) if y_true[i][j] == class_id}
        pred = {(i, j) for i in range(32) for j in range(32) if y_pred[i][j] == class_id}
        inter = len(truth & pred)
        dsc = None if not truth and not pred else 2 * inter / (len(pred) + len(truth))
        denom = 5 * inter + 4 * (len(truth) - inter) + (len(pred) - inter)
        f2 = None if denom == 0 else 5 * inter / denom
        return dsc, f2

    def test_dsc_f2_match_brute_force_on_1000_pairs(self):
        rng = np.random.default_rng(2024)
        mismatches = 0
        for _ in range(1000):
            truth = rng.integers(0, 3, (32, 32))
            pred = rng.integers(0, 3, (32, 32))
            for cid in (0, 1, 2):
                expected = self._oracle(truth, pred, cid)
                got = (dice_score(truth, pred, cid), f2_score(truth, pred, cid))
                if got != expected:
                    mismatches += 1
        worked_dsc = dsc_from_counts(ConfusionCounts(3, 1, 2, 0))
        worked_f2 = f2_from_counts(ConfusionCounts(3, 1, 2, 0))
        ok = (
            mismatches == 0
            and worked_dsc == pytest.approx(0.6667, abs=5e-5)
            and worked_f2 == 0.625
        )
        _report(
            "metric-oracle",
            ok,
            f"mismatches={mismatches}/1000 pairs, worked DSC={worked_dsc:.4f}, F2={worked_f2}",
        )


class TestGeometry:
    def test_mask_area_matches_analytic_for_radii_from_2mm(self):
        pixel_area = (40.0 / 388) * (60.0 / 388)
        worst = 0.0
        cases = [
            (2.0, (0.0, 60.0), "anechoic"),
            (2.0, (-8.0, 45.0), "hyperechoic"),
            (2.5, (5.0, 75.0), "anechoic"),
            (3.0, (0.0, 60.0), "hyperechoic"),
            (3.0, (10.0, 40.0), "anechoic"),
        ]
        for radius, center, echo in cases:
            lesion = Lesion(
                shape="circle",
                center_lateral_mm=center[0],
                center_axial_mm=center[1],
                echogenicity=echo,
                k=5,
                radius_mm=radius,
            )
            mask = rasterize_mask(PhantomSpec(lesions=(lesion,), seed=0), 388, 388)
            counted = (mask.labels == lesion.label).sum() * pixel_area
            analytic = math.pi * radius**2
            worst = max(worst, abs(counted - analytic) / analytic)
        ok = worst < 0.02
        _report("geometry", ok, f"worst relative area error {worst:.4f} over {len(cases)} lesions")


class TestPreprocessingShapes:
    def test_exported_inputs_and_masks(self, sim_dataset):
        manifest = load_manifest(sim_dataset)
        checked = 0
        for entry in manifest.entries:
            for role in ("envelope", "bmode"):
                arr, _ = io.read_raw_f32(sim_dataset / entry.files[role])
                assert arr.shape == (572, 572)
                assert arr.min() >= 0.0 and arr.max() <= 1.0
                # Reflection identities, pixel-exact on the exported file.
                for d in (1, 7, 30):
                    np.testing.assert_array_equal(arr[:, 30 - d], arr[:, 30 + d])
                    np.testing.assert_array_equal(arr[:, 541 + d], arr[:, 541 - d])
                    np.testing.assert_array_equal(arr[30 - d, :], arr[30 + d, :])
                    np.testing.assert_array_equal(arr[541 + d, :], arr[541 - d, :])
                checked += 1
            mask, _ = io.read_mask_u8(sim_dataset / entry.files["mask"])
            assert mask.shape == (388, 388)
            assert set(np.unique(mask)) <= {0, 1, 2}
        _report(
            "preprocessing-shapes",
            True,
            f"{checked} network inputs at 572x572 in [0,1], {len(manifest.entries)} masks at 388x388",
        )


class TestDeterminism:
    def test_same_seed_same_bytes(self, sim_dataset, tmp_path):
        rerun = tmp_path / "rerun"
        rc = cli_main(
            ["simulate", "--n", "20", "--seed", "7", "--out", str(rerun), "--quiet"]
        )
        assert rc == 0
        first = {p.relative_to(sim_dataset): p for p in sim_dataset.rglob("*") if p.is_file()}
        second = {p.relative_to(rerun): p for p in rerun.rglob("*") if p.is_file()}
        assert set(first) == set(second)
        diffs = [str(rel) for rel in first if first[rel].read_bytes() != second[rel].read_bytes()]
        ok = not diffs
        _report(
            "determinism",
            ok,
            f"{len(first)} files byte-identical across reruns"
            if ok
            else f"differing files: {diffs[:5]}",
        )


class TestSplitCounts:
    def test_paper_scale_exact(self):
        counts = split_counts(700, (0.6, 0.15, 0.25))
        ok = counts == (420, 105, 175)
        _report("split-counts", ok, f"n=700 -> {counts[0]}/{counts[1]}/{counts[2]}")
