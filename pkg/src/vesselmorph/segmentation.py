"""Reference (non-neural) vessel segmentation.

Semi-supervised labelling pipeline: Gaussian smoothing, adaptive mean
thresholding over a physical window, then removal of connected
components below a physical area floor. Deterministic throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .raster import BinaryMask, GrayImage

__all__ = [
    "SegmenterParams",
    "gaussian_filter",
    "adaptive_threshold",
    "remove_small_components",
    "segment",
]

# Absorbs roundoff in the windowed mean so exactly-flat regions can never
# satisfy the strict intensity > mean comparison (observed wobble ~1e-16).
_FLAT_GUARD = 1e-9

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class SegmenterParams:
    """Knobs of the classic pipeline, physical units where applicable.

    The component floor defaults to 500 um^2: the volumetric 500 um^3
    floor collapsed through the 1 um slice spacing of the projections.
    """

    gaussian_sigma: float = 1.0        # px
    window_um: float = 100.0
    threshold_offset: float = 0.0      # intensity units, [-1, 1]
    min_component_area_um2: float = 500.0

    def __post_init__(self):
        if self.gaussian_sigma < 0:
            raise ValueError("gaussian_sigma must be >= 0")
        if not self.window_um > 0:
            raise ValueError("window_um must be > 0")
        if not -1.0 <= self.threshold_offset <= 1.0:
            raise ValueError("threshold_offset must lie in [-1, 1]")
        if self.min_component_area_um2 < 0:
            raise ValueError("min_component_area_um2 must be >= 0")


def gaussian_filter(img: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian blur, kernel truncated at 4 sigma, reflect borders."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return img
    out = ndi.gaussian_filter(img.data, sigma, mode="reflect", truncate=4.0)
    # unit-sum kernel keeps values inside [0, 1] up to roundoff
    return GrayImage(np.clip(out, 0.0, 1.0), img.spacing)


def _window_px(window_um: float, spacing_x: float) -> int:
    w = int(math.floor(window_um / spacing_x + 0.5))
    if w % 2 == 0:
        w += 1
    return w


def adaptive_threshold(img: GrayImage, window_um: float, offset: float = 0.0) -> BinaryMask:
    """Mark pixels strictly brighter than their local window mean plus offset.

    The window is a centred square of ``round(window_um / spacing_x)``
    pixels forced odd; border means use reflect padding.
    """
    if not window_um > 0:
        raise ValueError("window_um must be > 0")
    w = _window_px(window_um, img.spacing[0])
    if w < 3:
        raise ValueError(
            f"adaptive threshold window spans {w} px at spacing "
            f"{img.spacing[0]} um/px; at least 3 px are required"
        )
    mean = ndi.uniform_filter(img.data, size=w, mode="reflect")
    bits = (img.data - mean) > (offset + _FLAT_GUARD)
    return BinaryMask(bits, img.spacing)


def remove_small_components(mask: BinaryMask, min_area_um2: float) -> BinaryMask:
    """Drop 8-connected components whose physical area is below the floor."""
    if min_area_um2 < 0:
        raise ValueError("min_area_um2 must be >= 0")
    if min_area_um2 == 0 or not mask.bits.any():
        return mask
    labels, n = ndi.label(mask.bits, structure=_EIGHT)
    if n == 0:
        return mask
    px_area = mask.spacing[0] * mask.spacing[1]
    counts = np.bincount(labels.ravel())
    keep = counts * px_area >= min_area_um2
    keep[0] = False
    return BinaryMask(keep[labels], mask.spacing)


def segment(img: GrayImage, params: SegmenterParams | None = None) -> BinaryMask:
    """Full classic pipeline: blur, adaptive threshold, component floor."""
    p = params or SegmenterParams()
    smoothed = gaussian_filter(img, p.gaussian_sigma)
    mask = adaptive_threshold(smoothed, p.window_um, p.threshold_offset)
    return remove_small_components(mask, p.min_component_area_um2)
