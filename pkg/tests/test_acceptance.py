"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
Stub backends only; no neural component is involved.
"""

import math
import time

import numpy as np
import pytest
from scipy import ndimage as ndi

from conftest import annulus, mask_of, random_blob
from vesselmorph import (
    BinaryMask,
    DatasetManifest,
    ElasticParams,
    GrayImage,
    ManifestEntry,
    Rng,
    SweepConfig,
    TortuosityParams,
    VesselSpec,
    augment_pair,
    dice,
    emit_results,
    image_tortuosity,
    iou,
    load_image,
    load_mask,
    make_field,
    oracle_tortuosity,
    render,
    repetitions,
    run_sweep,
    save_image,
    save_mask,
    skeletonize,
    windows_and_split,
)


class _Check:
    """Collects sub-checks; prints one line; fails if any sub-check failed."""

    def __init__(self, name: str, budget_s: float):
        self.name = name
        self.budget_s = budget_s
        self.t0 = time.perf_counter()
        self.failures: list[str] = []

    def expect(self, ok: bool, what: str):
        if not ok:
            self.failures.append(what)

    def done(self):
        elapsed = time.perf_counter() - self.t0
        status = "PASS" if not self.failures and elapsed < self.budget_s else "FAIL"
        print(f"ACCEPTANCE {self.name}: {status} ({elapsed:.1f}s / budget {self.budget_s:.0f}s)")
        assert not self.failures, "; ".join(self.failures)
        assert elapsed < self.budget_s, f"runtime {elapsed:.1f}s exceeds budget {self.budget_s}s"


def _rand_mask_pair(rng):
    shape = (int(rng.integers(4, 24)), int(rng.integers(4, 24)))
    density_a, density_b = rng.uniform(0.0, 1.0, size=2)
    a = rng.random(shape) < density_a
    b = rng.random(shape) < density_b
    return mask_of(a), mask_of(b)


def test_dice_iou_identity():
    check = _Check("dice-iou-identity", budget_s=5.0)
    rng = np.random.default_rng(20240808)
    for _ in range(1000):
        a, b = _rand_mask_pair(rng)
        i, d = iou(a, b), dice(a, b)
        check.expect(abs(d - 2 * i / (1 + i)) <= 1e-12, f"identity broke at iou={i}")
    # first reported pair satisfies the identity within 5e-4
    check.expect(abs(2 * 0.8882 / (1 + 0.8882) - 0.9405) < 5e-4, "pair (0.8882, 0.9405)")
    check.done()


@pytest.mark.xfail(
    strict=True,
    reason=(
        "arithmetically unattainable as stated: 2*0.9158/1.9158 = 0.95605, "
        "which is 7.5e-4 from the reported mean Dice 0.9553; per-image means "
        "need not satisfy the per-pair identity, and this pair misses the "
        "5e-4 tolerance (the first pair is within 2.9e-4 and passes)"
    ),
)
def test_dice_iou_identity_second_reported_pair():
    ok = abs(2 * 0.9158 / (1 + 0.9158) - 0.9553) < 5e-4
    print(f"ACCEPTANCE dice-iou-identity-pair-2: {'PASS' if ok else 'FAIL'}")
    assert ok


def test_skeleton_invariant_suite():
    check = _Check("skeleton-invariants", budget_s=30.0)
    eight = np.ones((3, 3), int)

    def verify(bits, tag):
        sk = skeletonize(mask_of(bits)).mask.bits
        check.expect(not (sk & ~bits).any(), f"{tag}: subset")
        blocks = sk[:-1, :-1] & sk[1:, :-1] & sk[:-1, 1:] & sk[1:, 1:]
        check.expect(not blocks.any(), f"{tag}: thinness")
        check.expect(
            ndi.label(bits, structure=eight)[1] == ndi.label(sk, structure=eight)[1],
            f"{tag}: component count",
        )
        check.expect(
            ndi.label(~np.pad(bits, 1))[1] == ndi.label(~np.pad(sk, 1))[1],
            f"{tag}: hole count",
        )

    for seed in range(200):
        verify(random_blob(seed), f"blob{seed}")
    verify(annulus(), "annulus")
    rect = np.zeros((9, 25), bool)
    rect[3:6, 2:23] = True
    verify(rect, "rectangle")
    check.done()


def _acceptance_grid():
    specs = []
    for R in (30.0, 50.0, 80.0):
        # cap the span at 270 degrees so small-radius arcs do not self-overlap
        length = min(200.0, 1.5 * math.pi * R)
        specs.append((f"arc-R{R:.0f}", VesselSpec(kind="arc", arc_radius_px=R,
                                                  length_px=length, tube_radius_px=3.0)))
    for A in (2.0, 4.0, 8.0):
        specs.append((f"sin-A{A:.0f}", VesselSpec(kind="sinusoid", amplitude_px=A,
                                                  wavelength_px=50.0, length_px=200.0,
                                                  tube_radius_px=3.0)))
    return specs


def test_tortuosity_oracle_equivalence():
    check = _Check("tortuosity-oracle-equivalence", budget_s=60.0)
    # r = 16 um: inside the stated validity domain (tube radius <= 4 px,
    # r >= 8 um) and far enough above the +-0.5 px centerline quantisation
    # floor for the 15% bound to be meaningful on the gentlest grid curves.
    params = TortuosityParams(radius_um=16.0)
    sin_means = []
    for name, spec in _acceptance_grid():
        extent = 220
        _, mask, centerline = render(spec, extent, extent, Rng(0))
        pipeline = image_tortuosity(mask, params, prune_spurs_um=2.0)
        oracle = oracle_tortuosity(centerline, params)
        rel = abs(pipeline - oracle) / oracle
        check.expect(rel <= 0.15, f"{name}: rel err {rel:.1%} (pipe {pipeline:.3f} vs oracle {oracle:.3f})")
        if name.startswith("sin"):
            sin_means.append(pipeline)
    check.expect(sin_means[0] < sin_means[1] < sin_means[2], "sinusoid monotonicity")
    for kind in ("straight",):
        _, mask, _ = render(VesselSpec(kind=kind, length_px=200, tube_radius_px=3.0), 240, 64, Rng(0))
        flat = image_tortuosity(mask, params, prune_spurs_um=2.0)
        check.expect(flat <= 1e-6, f"straight tube scored {flat}")
    check.done()


def test_elastic_augmentation():
    check = _Check("elastic-augmentation", budget_s=60.0)
    img, mask, _ = render(VesselSpec(kind="straight", length_px=120, tube_radius_px=3.0),
                          176, 96, Rng(0))
    # alpha = 0 identity, bit-exact
    wimg, wmask = augment_pair(img, mask, ElasticParams(alpha=0.0, sigma=4.0, seed=1))
    check.expect(np.array_equal(wimg.data, img.data), "alpha-0 image identity")
    check.expect(np.array_equal(wmask.bits, mask.bits), "alpha-0 mask identity")
    # displacement bound on 100 seeded fields
    for seed in range(100):
        f = make_field(64, 48, ElasticParams(alpha=64.0, sigma=4.0, seed=seed))
        check.expect(float(np.abs(f.dx).max()) <= 64.0, f"dx bound seed {seed}")
        check.expect(float(np.abs(f.dy).max()) <= 64.0, f"dy bound seed {seed}")
    # tortuosity rises in at least 95 of 100 seeded trials at alpha=64 sigma=4
    params = TortuosityParams(radius_um=10.0)
    base = image_tortuosity(mask, params, prune_spurs_um=2.0)
    wins = 0
    for seed in range(100):
        _, warped = augment_pair(img, mask, ElasticParams(alpha=64.0, sigma=4.0, seed=seed))
        if image_tortuosity(warped, params, prune_spurs_um=2.0) > base:
            wins += 1
    check.expect(wins >= 95, f"only {wins}/100 trials gained tortuosity")
    check.done()


def _tube_manifests(tmp_path, n_train=6, n_test=2, size=(96, 48), length=70.0):
    rng = Rng(31)
    w, h = size
    src_entries, tgt_entries = [], []
    k = 0

    def add(kind, amp, split, bucket, store):
        nonlocal k
        spec = VesselSpec(kind=kind, amplitude_px=amp, wavelength_px=24.0,
                          length_px=length, tube_radius_px=2.5)
        img, msk, _ = render(spec, w, h, rng.substream("m", k))
        ip = tmp_path / f"{bucket}{k}.png"
        lp = tmp_path / f"{bucket}{k}_label.png"
        save_image(img, ip)
        save_mask(msk, lp)
        store.append(ManifestEntry(f"{bucket}{k}", str(ip), str(lp), f"{bucket}{k}", split=split))
        k += 1

    for _ in range(3):
        add("straight", 0.0, "train", "s", src_entries)
    for _ in range(n_train):
        add("sinusoid", 4.0, "train", "t", tgt_entries)
    for _ in range(n_test):
        add("sinusoid", 5.0, "test", "t", tgt_entries)
    return DatasetManifest(src_entries), DatasetManifest(tgt_entries)


def _stub_config(name, n_values, seed=11):
    return SweepConfig(
        n_values=tuple(n_values), seed=seed,
        backend={"kind": "builtin", "name": name},
        tortuosity_params=TortuosityParams(radius_um=10.0), prune_spurs_um=2.0,
    )


def test_repetition_schedule(tmp_path):
    check = _Check("eq5-repetition-schedule", budget_s=5.0)
    for n, expect in ((10, 64), (40, 16), (1280, 5)):
        check.expect(repetitions(1280, n) == expect, f"repetitions(1280, {n})")
    # the harness emits exactly K rows per n
    src, tgt = _tube_manifests(tmp_path, n_train=2, n_test=2, size=(64, 40), length=44.0)
    real = tgt.split_entries("train")
    fabricated = [
        ManifestEntry(f"fab{i}", real[i % 2].image, real[i % 2].label, f"fab{i}", split="train")
        for i in range(1280)
    ]
    big = DatasetManifest(fabricated + tgt.split_entries("test"))
    result = run_sweep(_stub_config("oracle", [10, 40, 1280]), src, big, tmp_path / "w")
    counts = {agg.n: agg.K for agg in result.aggregates}
    check.expect(counts == {10: 64, 40: 16, 1280: 5}, f"row counts {counts}")
    check.expect(len(result.rows) == 64 + 16 + 5, "total rows")
    check.done()


def test_sweep_closure(tmp_path):
    check = _Check("sweep-closure", budget_s=120.0)
    src, tgt = _tube_manifests(tmp_path)
    n_values = (0, 1, 3)
    oracle_res = run_sweep(_stub_config("oracle", n_values), src, tgt, tmp_path / "wo")
    for row in oracle_res.rows:
        check.expect(row.relative_iou == 1.0, f"oracle IoU at n={row.n}")
        check.expect(abs(row.relative_tortuosity - 1.0) <= 1e-12, f"oracle R at n={row.n}")
    shrink_res = run_sweep(_stub_config("shrink", n_values), src, tgt, tmp_path / "ws")
    params = TortuosityParams(radius_um=10.0)
    ratios, ious = [], []
    for e in tgt.split_entries("test"):
        ref = load_mask(e.label)
        eroded = BinaryMask(ndi.binary_erosion(ref.bits, np.ones((3, 3), bool)), ref.spacing)
        ious.append(iou(eroded, ref))
        ratios.append(
            image_tortuosity(eroded, params, 2.0) / image_tortuosity(ref, params, 2.0)
        )
    brute_iou = math.fsum(ious) / len(ious)
    brute_r = math.fsum(ratios) / len(ratios)
    for row in shrink_res.rows:
        check.expect(row.relative_iou < 1.0, f"shrink IoU at n={row.n} not < 1")
        check.expect(abs(row.relative_iou - brute_iou) <= 1e-9, "shrink IoU brute force")
        check.expect(abs(row.relative_tortuosity - brute_r) <= 1e-9, "shrink R brute force")
    check.done()


def test_sweep_determinism(tmp_path):
    check = _Check("sweep-determinism", budget_s=120.0)
    src, tgt = _tube_manifests(tmp_path)
    cfg = _stub_config("shrink", (0, 2), seed=777)
    r1 = run_sweep(cfg, src, tgt, tmp_path / "w1")
    r2 = run_sweep(cfg, src, tgt, tmp_path / "w2")
    emit_results(r1, tmp_path / "o1")
    emit_results(r2, tmp_path / "o2")
    b1 = (tmp_path / "o1" / "rows.csv").read_bytes()
    b2 = (tmp_path / "o2" / "rows.csv").read_bytes()
    check.expect(b1 == b2, "rows.csv not byte-identical")
    check.done()


def test_windowing(tmp_path):
    check = _Check("windowing", budget_s=60.0)
    rng = np.random.default_rng(0)
    # geometry at the full acquisition size
    big = tmp_path / "big"
    big.mkdir()
    img = GrayImage(rng.random((1104, 1376)))
    bits = rng.random((1104, 1376)) > 0.7
    save_image(img, big / "s.png", bit_depth=8)
    save_mask(BinaryMask(bits), big / "s_label.png")
    manifest = DatasetManifest(
        [ManifestEntry("s", str(big / "s.png"), str(big / "s_label.png"), "s")]
    )
    out = windows_and_split(manifest, tmp_path / "win", rng=Rng(0), fractions=(1.0, 0.0, 0.0))
    check.expect(len(out.entries) == 16, f"{len(out.entries)} windows")
    w0 = load_image(out.entries[0].image)
    check.expect((w0.width, w0.height) == (344, 276), f"window size {(w0.width, w0.height)}")
    # leakage freedom across 100 random splits of a 20-source corpus
    small = tmp_path / "small"
    small.mkdir()
    simg = GrayImage(rng.random((8, 8)))
    save_image(simg, small / "t.png", bit_depth=8)
    save_mask(BinaryMask(rng.random((8, 8)) > 0.5), small / "t_label.png")
    sources = DatasetManifest(
        [
            ManifestEntry(f"s{i}", str(small / "t.png"), str(small / "t_label.png"), f"s{i}")
            for i in range(20)
        ]
    )
    for seed in range(100):
        split = windows_and_split(
            sources, tmp_path / f"leak{seed}", grid=(1, 1), rng=Rng(seed)
        )
        try:
            split.validate(n_windows=1)
        except ValueError as e:
            check.expect(False, f"seed {seed}: {e}")
        sizes = tuple(len(split.split_entries(s)) for s in ("train", "val", "test"))
        check.expect(sizes == (16, 2, 2), f"seed {seed}: sizes {sizes}")
    check.done()
