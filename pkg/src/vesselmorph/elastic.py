"""Elastic deformation: smoothed random displacement fields.

A field is drawn i.i.d. uniform on [-1, 1] per pixel and axis, convolved
with a unit-sum Gaussian of standard deviation ``sigma`` (the elasticity:
sigma near 0 gives uncorrelated jitter, larger sigma coherent waves) and
scaled by ``alpha``. Because the smoothing kernel sums to one, every
displacement component is bounded by ``alpha`` pixels.

Warping is backward: the output at (x, y) samples the source at
(x + dx, y + dy), bilinearly for intensities and nearest-neighbour for
masks so labels stay binary. Straight tubes pushed through this become
convincingly tortuous, which is the augmentation's entire purpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .raster import BinaryMask, GrayImage
from .rng import Rng

__all__ = ["ElasticParams", "DisplacementField", "make_field", "warp_image", "warp_mask", "augment_pair"]


@dataclass(frozen=True)
class ElasticParams:
    alpha: float = 64.0
    sigma: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True, eq=False)
class DisplacementField:
    """Per-pixel (dx, dy) displacements in pixels, |d| <= alpha."""

    dx: np.ndarray
    dy: np.ndarray
    alpha: float
    sigma: float

    def __post_init__(self):
        if self.dx.shape != self.dy.shape:
            raise ValueError("dx and dy must share a shape")
        for a in (self.dx, self.dy):
            a.setflags(write=False)


def _smooth_scaled(raw: np.ndarray, sigma: float, alpha: float) -> np.ndarray:
    if sigma > 0:
        raw = ndi.gaussian_filter(raw, sigma, mode="reflect", truncate=4.0)
    # clip guards the |d| <= alpha bound against kernel-sum roundoff
    return np.clip(raw, -1.0, 1.0) * alpha


def make_field(width: int, height: int, params: ElasticParams, rng: Rng | None = None) -> DisplacementField:
    """Draw a smoothed displacement field; deterministic in the seed."""
    if width < 1 or height < 1:
        raise ValueError("field dimensions must be positive")
    rng = rng if rng is not None else Rng(params.seed)
    if params.alpha == 0:
        zero = np.zeros((height, width))
        return DisplacementField(zero, zero.copy(), params.alpha, params.sigma)
    dx = rng.substream("dx").generator().uniform(-1.0, 1.0, size=(height, width))
    dy = rng.substream("dy").generator().uniform(-1.0, 1.0, size=(height, width))
    return DisplacementField(
        _smooth_scaled(dx, params.sigma, params.alpha),
        _smooth_scaled(dy, params.sigma, params.alpha),
        params.alpha,
        params.sigma,
    )


def _sample_coords(field: DisplacementField):
    h, w = field.dx.shape
    yy, xx = np.mgrid[0:h, 0:w]
    return [yy + field.dy, xx + field.dx]


def warp_image(img: GrayImage, field: DisplacementField) -> GrayImage:
    """Backward bilinear warp with reflect padding outside the frame."""
    if field.dx.shape != img.data.shape:
        raise ValueError(
            f"field shape {field.dx.shape} does not match image shape {img.data.shape}"
        )
    out = ndi.map_coordinates(img.data, _sample_coords(field), order=1, mode="reflect")
    return GrayImage(np.clip(out, 0.0, 1.0), img.spacing)


def warp_mask(mask: BinaryMask, field: DisplacementField) -> BinaryMask:
    """Backward nearest-neighbour warp; output values are a subset of the input's."""
    if field.dx.shape != mask.bits.shape:
        raise ValueError(
            f"field shape {field.dx.shape} does not match mask shape {mask.bits.shape}"
        )
    out = ndi.map_coordinates(mask.bits.astype(np.uint8), _sample_coords(field), order=0, mode="reflect")
    return BinaryMask(out.astype(bool), mask.spacing)


def augment_pair(
    img: GrayImage,
    mask: BinaryMask,
    params: ElasticParams,
    rng: Rng | None = None,
) -> tuple[GrayImage, BinaryMask]:
    """Warp an image and its label with one shared field."""
    if img.data.shape != mask.bits.shape:
        raise ValueError("image and mask must share a shape")
    field = make_field(img.width, img.height, params, rng)
    return warp_image(img, field), warp_mask(mask, field)
