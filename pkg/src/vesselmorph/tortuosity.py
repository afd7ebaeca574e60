"""Centerline tortuosity from line-fit residuals.

For each centerline pixel, the pixels of the *same segment* within a
physical radius form its neighbourhood; a line is fitted to them and the
tortuosity of the pixel is the root mean squared point-to-line distance
in micrometres. Straight runs score zero, bends score higher.

The default fit is total least squares (orthogonal regression): the line
through the neighbourhood centroid along the dominant eigenvector of the
centred second-moment matrix. The sum of squared orthogonal distances is
then the smaller eigenvalue, so the value is sqrt(lambda_min / n). TLS is
rotation-equivariant and well defined at every orientation, which ordinary
y-on-x regression is not; ``regression="ols"`` keeps the vertical-residual
alternative selectable.

Branch points belong to no segment and carry no tortuosity value, so
neighbourhoods never mix vessels across a junction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import BinaryMask
from .skeleton import Segment, SkeletonGraph, decompose, skeletonize

__all__ = [
    "TortuosityParams",
    "TortuosityMap",
    "point_tortuosity",
    "tortuosity_map",
    "image_tortuosity",
]


@dataclass(frozen=True)
class TortuosityParams:
    radius_um: float = 10.0
    min_neighbors: int = 3
    regression: str = "tls"  # "tls" (orthogonal) or "ols" (y on x)

    def __post_init__(self):
        if not self.radius_um > 0:
            raise ValueError("radius_um must be > 0")
        if self.min_neighbors < 2:
            raise ValueError("min_neighbors must be >= 2")
        if self.regression not in ("tls", "ols"):
            raise ValueError(f"regression must be 'tls' or 'ols', got {self.regression!r}")


@dataclass(frozen=True)
class TortuosityMap:
    """Per-centerline-pixel values plus their arithmetic mean (0 if empty)."""

    entries: tuple[tuple[tuple[int, int], float], ...]
    mean: float


def _rms_residual_um(pts_um: np.ndarray, regression: str) -> float:
    """RMS residual of a least-squares line through ``pts_um`` ((n, 2), um)."""
    n = len(pts_um)
    c = pts_um.mean(axis=0)
    d = pts_um - c
    if regression == "tls":
        sxx = float(d[:, 0] @ d[:, 0])
        syy = float(d[:, 1] @ d[:, 1])
        sxy = float(d[:, 0] @ d[:, 1])
        lam_min = 0.5 * (sxx + syy) - math.hypot(0.5 * (sxx - syy), sxy)
        return math.sqrt(max(lam_min, 0.0) / n)
    sxx = float(d[:, 0] @ d[:, 0])
    if sxx == 0.0:
        return 0.0  # all x equal: vertical run, no vertical residual to measure
    slope = float(d[:, 0] @ d[:, 1]) / sxx
    res = d[:, 1] - slope * d[:, 0]
    return math.sqrt(float(res @ res) / n)


def _segment_coords_um(segment: Segment) -> np.ndarray:
    pix = segment.pixels
    if len(pix) > 1 and pix[0] == pix[-1]:  # closed loop: drop the closing pixel
        pix = pix[:-1]
    sx, sy = segment.spacing
    return np.asarray(pix, dtype=np.float64) * (sx, sy)


def point_tortuosity(segment: Segment, center_index: int, params: TortuosityParams) -> float:
    """Tortuosity of one segment pixel, in micrometres."""
    coords = _segment_coords_um(segment)
    if not 0 <= center_index < len(coords):
        raise IndexError(f"center_index {center_index} out of range for segment")
    d2 = np.sum((coords - coords[center_index]) ** 2, axis=1)
    nb = coords[d2 <= params.radius_um**2]
    if len(nb) < params.min_neighbors:
        return 0.0
    return _rms_residual_um(nb, params.regression)


def tortuosity_map(graph: SkeletonGraph, params: TortuosityParams | None = None) -> TortuosityMap:
    """One entry per segment pixel; branch points carry no value."""
    p = params or TortuosityParams()
    entries = []
    total = []
    r2 = p.radius_um**2
    for seg in graph.segments:
        coords = _segment_coords_um(seg)
        pix = seg.pixels[: len(coords)]
        for i, px in enumerate(pix):
            d2 = np.sum((coords - coords[i]) ** 2, axis=1)
            nb = coords[d2 <= r2]
            v = 0.0 if len(nb) < p.min_neighbors else _rms_residual_um(nb, p.regression)
            entries.append((px, v))
            total.append(v)
    mean = math.fsum(total) / len(total) if total else 0.0
    return TortuosityMap(tuple(entries), mean)


def image_tortuosity(
    mask: BinaryMask,
    params: TortuosityParams | None = None,
    prune_spurs_um: float = 0.0,
) -> float:
    """Mean centerline tortuosity of a mask: thin, decompose, average."""
    skel = skeletonize(mask, prune_spurs_um=prune_spurs_um)
    return tortuosity_map(decompose(skel), params).mean
