import csv
import math

import numpy as np
import pytest
from scipy import ndimage as ndi

from vesselmorph import (
    BinaryMask,
    DatasetManifest,
    ManifestEntry,
    Rng,
    SweepConfig,
    TortuosityParams,
    VesselSpec,
    emit_results,
    load_mask,
    image_tortuosity,
    iou,
    render,
    run_sweep,
    save_image,
    save_mask,
)
from vesselmorph.sweep import AGGREGATES_HEADER, ROWS_HEADER


def _build_manifests(tmp_path, n_train=6, n_test=3, straight_source=True):
    """Tiny on-disk source/target manifests of tube windows."""
    rng = Rng(99)
    entries_src, entries_tgt = [], []
    k = 0

    def write_pair(kind, amp, split, bucket):
        nonlocal k
        spec = VesselSpec(
            kind=kind, amplitude_px=amp, wavelength_px=30.0, length_px=90.0,
            tube_radius_px=3.0,
        )
        img, mask, _ = render(spec, 128, 64, rng.substream("mk", k))
        ip = tmp_path / f"{bucket}_{k}.png"
        lp = tmp_path / f"{bucket}_{k}_label.png"
        save_image(img, ip)
        save_mask(mask, lp)
        entry = ManifestEntry(
            id=f"{bucket}_{k}", image=str(ip), label=str(lp), source_id=f"{bucket}_{k}",
            split=split, vessel_class="non-tortuous" if bucket == "src" else "tortuous",
        )
        k += 1
        return entry

    for i in range(4):
        entries_src.append(write_pair("straight" if straight_source else "sinusoid",
                                      0.0 if straight_source else 5.0, "train", "src"))
    for i in range(n_train):
        entries_tgt.append(write_pair("sinusoid", 4.0 + (i % 3), "train", "tgt"))
    for i in range(n_test):
        entries_tgt.append(write_pair("sinusoid", 5.0 + (i % 2), "test", "tgt"))
    return DatasetManifest(entries_src), DatasetManifest(entries_tgt)


@pytest.fixture(scope="module")
def manifests(tmp_path_factory):
    return _build_manifests(tmp_path_factory.mktemp("sweepdata"))


def _config(backend_name, n_values, **kw):
    return SweepConfig(
        n_values=tuple(n_values),
        seed=kw.pop("seed", 7),
        backend={"kind": "builtin", "name": backend_name},
        tortuosity_params=TortuosityParams(radius_um=10.0),
        prune_spurs_um=2.0,
        **kw,
    )


class TestOracleClosure:
    def test_oracle_stub_pins_everything_to_one(self, manifests, tmp_path):
        src, tgt = manifests
        result = run_sweep(_config("oracle", [0, 1, 2]), src, tgt, tmp_path / "w")
        assert len(result.rows) == 1 + 5 + 5  # K(6,1)=5, K(6,2)=5
        for row in result.rows:
            assert row.relative_iou == 1.0
            assert row.relative_tortuosity == pytest.approx(1.0, abs=1e-12)
        for agg in result.aggregates:
            assert agg.mean_R == pytest.approx(1.0, abs=1e-12)
            assert agg.std_R == pytest.approx(0.0, abs=1e-12)


class TestShrinkStub:
    def test_shrink_matches_brute_force(self, manifests, tmp_path):
        src, tgt = manifests
        result = run_sweep(_config("shrink", [0, 1]), src, tgt, tmp_path / "w")
        # brute force: erode each reference test label, recompute both metrics
        params = TortuosityParams(radius_um=10.0)
        ious, ratios = [], []
        for e in tgt.split_entries("test"):
            ref = load_mask(e.label)
            eroded = BinaryMask(
                ndi.binary_erosion(ref.bits, structure=np.ones((3, 3), bool)), ref.spacing
            )
            ious.append(iou(eroded, ref))
            ratios.append(
                image_tortuosity(eroded, params, prune_spurs_um=2.0)
                / image_tortuosity(ref, params, prune_spurs_um=2.0)
            )
        expect_iou = math.fsum(ious) / len(ious)
        expect_r = math.fsum(ratios) / len(ratios)
        for row in result.rows:
            assert row.relative_iou == pytest.approx(expect_iou, abs=1e-9)
            assert row.relative_iou < 1.0
            assert row.relative_tortuosity == pytest.approx(expect_r, abs=1e-9)


class TestSchedule:
    def test_row_counts_follow_repetition_schedule(self, tmp_path):
        # fabricate a 1280-entry train split over a handful of real files
        src, tgt = _build_manifests(tmp_path, n_train=2, n_test=2)
        real = tgt.split_entries("train")
        fabricated = [
            ManifestEntry(
                id=f"fab_{i}", image=real[i % 2].image, label=real[i % 2].label,
                source_id=f"fab_{i}", split="train", vessel_class="tortuous",
            )
            for i in range(1280)
        ]
        big = DatasetManifest(fabricated + tgt.split_entries("test"))
        result = run_sweep(_config("oracle", [10]), src, big, tmp_path / "w")
        assert len(result.rows) == 64  # max(5, ceil(1280/20))
        assert result.aggregates[0].K == 64

    def test_n_zero_runs_once(self, manifests, tmp_path):
        src, tgt = manifests
        result = run_sweep(_config("oracle", [0]), src, tgt, tmp_path / "w")
        assert len(result.rows) == 1

    def test_oversized_n_rejected_before_any_job(self, manifests, tmp_path):
        src, tgt = manifests
        with pytest.raises(ValueError, match="exceed the target train-split size"):
            run_sweep(_config("oracle", [0, 50]), src, tgt, tmp_path / "w")
        assert not (tmp_path / "w" / "jobs").exists()

    def test_zero_reference_tortuosity_rejected(self, tmp_path):
        # target whose test label is a straight tube: reference tortuosity 0
        src, _ = _build_manifests(tmp_path, n_train=2, n_test=1)
        straight = _straight_target(tmp_path, src)
        with pytest.raises(ValueError, match="strictly positive"):
            run_sweep(_config("oracle", [0]), src, straight, tmp_path / "w")


def _straight_target(tmp_path, src):
    img, mask, _ = render(VesselSpec(kind="straight", length_px=90), 128, 64, Rng(1))
    ip, lp = tmp_path / "st.png", tmp_path / "st_label.png"
    save_image(img, ip)
    save_mask(mask, lp)
    return DatasetManifest(
        [
            ManifestEntry("tr", src.entries[0].image, src.entries[0].label, "tr", split="train"),
            ManifestEntry("st", str(ip), str(lp), "st", split="test"),
        ]
    )


class TestDeterminismAndEmit:
    def test_equal_seeds_give_byte_identical_rows(self, manifests, tmp_path):
        src, tgt = manifests
        cfg = _config("shrink", [0, 1, 2], seed=123)
        r1 = run_sweep(cfg, src, tgt, tmp_path / "w1")
        r2 = run_sweep(cfg, src, tgt, tmp_path / "w2")
        emit_results(r1, tmp_path / "o1")
        emit_results(r2, tmp_path / "o2")
        b1 = (tmp_path / "o1" / "rows.csv").read_bytes()
        b2 = (tmp_path / "o2" / "rows.csv").read_bytes()
        assert b1 == b2

    def test_emitted_files_and_headers(self, manifests, tmp_path):
        src, tgt = manifests
        result = run_sweep(_config("oracle", [0, 1]), src, tgt, tmp_path / "w")
        emit_results(result, tmp_path / "out")
        rows_path = tmp_path / "out" / "rows.csv"
        agg_path = tmp_path / "out" / "aggregates.csv"
        svg = (tmp_path / "out" / "plot.svg").read_text()
        assert svg.lstrip().startswith("<?xml")
        with rows_path.open() as fh:
            reader = csv.reader(fh)
            assert tuple(next(reader)) == ROWS_HEADER
            rows = list(reader)
        assert len(rows) == len(result.rows)
        with agg_path.open() as fh:
            reader = csv.reader(fh)
            assert tuple(next(reader)) == AGGREGATES_HEADER
            aggs = list(reader)
        assert len(aggs) == 2

    def test_aggregates_recomputable_from_rows(self, manifests, tmp_path):
        src, tgt = manifests
        result = run_sweep(_config("shrink", [1, 2]), src, tgt, tmp_path / "w")
        emit_results(result, tmp_path / "out")
        with (tmp_path / "out" / "rows.csv").open() as fh:
            reader = csv.reader(fh)
            next(reader)
            parsed = [(int(n), float(ri), float(rt)) for n, _, ri, rt in reader]
        for agg in result.aggregates:
            rs = [rt for n, _, rt in parsed if n == agg.n]
            ious = [ri for n, ri, _ in parsed if n == agg.n]
            assert agg.K == len(rs)
            assert agg.mean_R == pytest.approx(math.fsum(rs) / len(rs), abs=1e-9)
            assert agg.mean_IoU == pytest.approx(math.fsum(ious) / len(ious), abs=1e-9)

    def test_parallel_jobs_do_not_change_results(self, manifests, tmp_path):
        src, tgt = manifests
        seq = run_sweep(_config("shrink", [0, 1], seed=5, jobs=1), src, tgt, tmp_path / "w1")
        par = run_sweep(_config("shrink", [0, 1], seed=5, jobs=4), src, tgt, tmp_path / "w2")
        assert seq.rows == par.rows


class TestConfigValidation:
    def test_negative_n_rejected(self):
        with pytest.raises(ValueError):
            SweepConfig(n_values=(-1,))

    def test_epochs_validated(self):
        with pytest.raises(ValueError):
            SweepConfig(train_epochs=0)
