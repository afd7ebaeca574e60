import numpy as np
import pytest

from vesselmorph import BinaryMask, Rng, VesselSpec, render, save_image, save_mask


def random_blob(seed: int, size: int = 96, fill: float = 0.30) -> np.ndarray:
    """Smooth random blob mask; the workhorse of the invariant suites."""
    from scipy import ndimage as ndi

    g = ndi.gaussian_filter(np.random.default_rng(seed).random((size, size)), 6.0)
    return g > np.quantile(g, 1.0 - fill)


def annulus(size: int = 40, outer: int = 15, inner: int = 8) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2.0
    r2 = (yy - c) ** 2 + (xx - c) ** 2
    return (r2 <= outer**2) & (r2 >= inner**2)


def mask_of(bits) -> BinaryMask:
    return BinaryMask(np.asarray(bits, dtype=bool))


@pytest.fixture(scope="session")
def tube_corpus(tmp_path_factory):
    """Small on-disk corpus of sinusoid tubes: images/, labels/, per-id specs."""
    root = tmp_path_factory.mktemp("tube_corpus")
    (root / "images").mkdir()
    (root / "labels").mkdir()
    entries = []
    rng = Rng(2024)
    for i, amp in enumerate((3.0, 4.0, 5.0, 6.0, 7.0, 8.0)):
        spec = VesselSpec(
            kind="sinusoid", amplitude_px=amp, wavelength_px=40.0, length_px=150.0,
            tube_radius_px=3.0, noise_std=0.03,
        )
        img, mask, _ = render(spec, 176, 96, rng.substream("tube", i))
        img_path = root / "images" / f"tube_{i}.png"
        lab_path = root / "labels" / f"tube_{i}.png"
        save_image(img, img_path)
        save_mask(mask, lab_path)
        entries.append((f"tube_{i}", str(img_path), str(lab_path)))
    return root, entries
