"""Synthetic tube images with analytic centerlines.

The verification dataset factory: parametric curves (straight runs,
circular arcs, sinusoids, bounded-turn random walks) rendered as tubes of
constant radius, returned together with the exact real-valued centerline
they were built from. The centerline feeds :func:`oracle_tortuosity`, a
deliberately independent brute-force reimplementation of the tortuosity
definition (dense analytic samples, closed-form 2x2 eigen-decomposition)
used to validate the pixel pipeline end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .raster import DEFAULT_SPACING_UM, BinaryMask, GrayImage
from .rng import Rng
from .tortuosity import TortuosityParams

__all__ = ["VesselSpec", "render", "oracle_tortuosity"]

_KINDS = ("straight", "arc", "sinusoid", "random-walk")
_STEP_PX = 0.1  # dense sampling step; oracle discretisation error is negligible at this scale


@dataclass(frozen=True)
class VesselSpec:
    kind: str = "straight"
    length_px: float = 200.0
    tube_radius_px: float = 3.0
    intensity: float = 0.8
    background: float = 0.1
    noise_std: float = 0.0
    amplitude_px: float = 4.0     # sinusoid
    wavelength_px: float = 50.0   # sinusoid
    arc_radius_px: float = 50.0   # arc
    heading_rad: float = 0.0
    max_turn_rad: float = 0.15    # random-walk heading jitter per px of arc length

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.tube_radius_px < 1:
            raise ValueError("tube_radius_px must be >= 1")
        if not 0 <= self.background < self.intensity <= 1:
            raise ValueError("need 0 <= background < intensity <= 1")
        if self.length_px <= 0:
            raise ValueError("length_px must be > 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


def _curve_points(spec: VesselSpec, rng: Rng) -> np.ndarray:
    """Sample the centerline at <= _STEP_PX spacing, local frame, (n, 2)."""
    n = int(math.ceil(spec.length_px / _STEP_PX)) + 1
    if spec.kind == "straight":
        t = np.linspace(0.0, spec.length_px, n)
        pts = np.stack([t, np.zeros_like(t)], axis=1)
    elif spec.kind == "arc":
        R = spec.arc_radius_px
        theta = np.linspace(0.0, spec.length_px / R, n)
        pts = np.stack([R * np.sin(theta), R * (1.0 - np.cos(theta))], axis=1)
    elif spec.kind == "sinusoid":
        t = np.linspace(0.0, spec.length_px, n)
        pts = np.stack([t, spec.amplitude_px * np.sin(2 * np.pi * t / spec.wavelength_px)], axis=1)
    else:  # random-walk: unit steps with bounded heading increments, resampled densely
        steps = int(math.ceil(spec.length_px))
        turns = rng.substream("walk").generator().uniform(
            -spec.max_turn_rad, spec.max_turn_rad, size=steps
        )
        headings = np.cumsum(turns)
        xy = np.zeros((steps + 1, 2))
        xy[1:, 0] = np.cumsum(np.cos(headings))
        xy[1:, 1] = np.cumsum(np.sin(headings))
        # densify each unit step
        fracs = np.linspace(0.0, 1.0, int(round(1 / _STEP_PX)), endpoint=False)
        dense = (xy[:-1, None, :] + fracs[None, :, None] * np.diff(xy, axis=0)[:, None, :]).reshape(-1, 2)
        pts = np.vstack([dense, xy[-1]])
    if spec.heading_rad:
        c, s = math.cos(spec.heading_rad), math.sin(spec.heading_rad)
        pts = pts @ np.array([[c, s], [-s, c]])
    return pts


def render(
    spec: VesselSpec,
    width: int,
    height: int,
    rng: Rng | None = None,
) -> tuple[GrayImage, BinaryMask, np.ndarray]:
    """Render a tube on a canvas; returns (image, mask, centerline points).

    The mask holds every pixel within ``tube_radius_px`` of the densely
    sampled centerline; the image is two-level plus optional Gaussian
    noise clipped back to [0, 1]. The centerline is an (n, 2) float array
    of (x, y) pixel coordinates.
    """
    rng = rng if rng is not None else Rng(0)
    pts = _curve_points(spec, rng)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = np.array([(width - 1) / 2.0, (height - 1) / 2.0])
    pts = pts - (lo + hi) / 2.0 + center

    margin = spec.tube_radius_px
    if (
        pts[:, 0].min() < margin
        or pts[:, 1].min() < margin
        or pts[:, 0].max() > width - 1 - margin
        or pts[:, 1].max() > height - 1 - margin
    ):
        raise ValueError(
            f"curve of extent {hi - lo} does not fit a {width}x{height} canvas "
            f"with a {margin} px tube margin"
        )

    yy, xx = np.mgrid[0:height, 0:width]
    centers = np.stack([xx.ravel(), yy.ravel()], axis=1).astype(np.float64)
    dist, _ = cKDTree(pts).query(centers, k=1)
    bits = (dist <= spec.tube_radius_px).reshape(height, width)

    data = np.where(bits, spec.intensity, spec.background)
    if spec.noise_std > 0:
        noise = rng.substream("noise").generator().normal(0.0, spec.noise_std, size=data.shape)
        data = np.clip(data + noise, 0.0, 1.0)
    return GrayImage(data, DEFAULT_SPACING_UM), BinaryMask(bits, DEFAULT_SPACING_UM), pts


def oracle_tortuosity(
    centerline: np.ndarray,
    params: TortuosityParams | None = None,
    spacing: tuple[float, float] = DEFAULT_SPACING_UM,
) -> float:
    """Brute-force tortuosity of an analytic centerline, in micrometres.

    Independent of the pixel pipeline by construction: it walks the dense
    analytic samples, gathers those within ``radius_um`` of each sample,
    solves the orthogonal fit with the explicit 2x2 eigenvalue formula and
    averages the RMS orthogonal distances over all samples.
    """
    p = params or TortuosityParams()
    pts = np.asarray(centerline, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("centerline must be an (n >= 2, 2) point array")
    um = pts * np.asarray(spacing, dtype=np.float64)
    r2 = p.radius_um**2
    vals = np.empty(len(um))
    for i in range(len(um)):
        d = um - um[i]
        nb = um[(d[:, 0] ** 2 + d[:, 1] ** 2) <= r2]
        if len(nb) < 2:
            vals[i] = 0.0
            continue
        cx, cy = nb.mean(axis=0)
        dx = nb[:, 0] - cx
        dy = nb[:, 1] - cy
        sxx = float(dx @ dx)
        syy = float(dy @ dy)
        sxy = float(dx @ dy)
        half_tr = 0.5 * (sxx + syy)
        root = math.sqrt(0.25 * (sxx - syy) ** 2 + sxy**2)
        lam_min = half_tr - root
        vals[i] = math.sqrt(max(lam_min, 0.0) / len(nb))
    return float(vals.mean())
