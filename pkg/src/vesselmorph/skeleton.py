"""Topology-preserving thinning and centerline graph decomposition.

Masks are thinned to one-pixel-wide curve skeletons by iterative boundary
peeling: per cycle, four directional sub-iterations (N, S, E, W) visit the
pixels whose neighbour in that direction was background when the
sub-iteration started, in raster order, and delete a pixel only if it is
still *simple* at its turn - i.e. its removal provably preserves local
topology (8-connected foreground, 4-connected background) - and it is not
an end point. Deletability depends only on the 8-neighbourhood, so it is
precomputed as a 256-entry lookup table.

Consequences of this contract, all enforced by tests:

* the skeleton is a subset of the mask;
* no 2x2 block survives (thinness);
* foreground component count and background hole count are preserved;
* curve end points persist, so open vessel runs keep their full extent.

Boundary bumps of a thick mask erode into short terminal twigs whose end
points are then protected; ``prune_spurs_um`` optionally removes terminal
segments below a physical length after thinning, since such twigs would
otherwise register as vessel segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .raster import BinaryMask

__all__ = ["Skeleton", "SkeletonGraph", "Segment", "skeletonize", "decompose"]

_EIGHT = np.ones((3, 3), dtype=int)
_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)

# Neighbourhood bit layout: bit k set when the pixel at offset _OFFSETS[k]
# (dx, dy) is foreground.
_OFFSETS = ((1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1))


def _build_deletable_lut() -> np.ndarray:
    """A pixel is deletable iff it is simple and has >= 2 foreground neighbours.

    Simplicity for (8, 4) connectivity: the foreground neighbours form
    exactly one 8-component, and exactly one 4-component of the background
    neighbourhood touches a 4-neighbour of the centre.
    """
    lut = np.zeros(256, dtype=np.uint8)
    for code in range(256):
        nb = np.zeros((3, 3), dtype=bool)
        for k, (dx, dy) in enumerate(_OFFSETS):
            if code >> k & 1:
                nb[dy + 1, dx + 1] = True
        if int(nb.sum()) < 2:
            continue  # isolated pixel or end point: never deleted
        _, n_fg = ndi.label(nb, structure=_EIGHT)
        if n_fg != 1:
            continue
        bg = ~nb
        bg[1, 1] = False
        bg_labels, _ = ndi.label(bg, structure=_FOUR)
        touching = {bg_labels[0, 1], bg_labels[1, 0], bg_labels[1, 2], bg_labels[2, 1]} - {0}
        if len(touching) == 1:
            lut[code] = 1
    return lut


_DELETABLE = _build_deletable_lut()


def _directional_pass(m, border, lut):
    """Sequentially delete deletable border pixels; returns removal count.

    ``m`` is the padded uint8 mask, mutated in place; ``border`` is the
    candidate snapshot taken at sub-iteration start. Raster order is part
    of the thinning contract.
    """
    h, w = m.shape
    removed = 0
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            if border[y, x] and m[y, x] == 1:
                code = (
                    m[y, x + 1]
                    | m[y - 1, x + 1] << 1
                    | m[y - 1, x] << 2
                    | m[y - 1, x - 1] << 3
                    | m[y, x - 1] << 4
                    | m[y + 1, x - 1] << 5
                    | m[y + 1, x] << 6
                    | m[y + 1, x + 1] << 7
                )
                if lut[code]:
                    m[y, x] = 0
                    removed += 1
    return removed


try:  # the sequential scan dominates runtime; JIT it when numba is present
    from numba import njit

    _directional_pass = njit(cache=True)(_directional_pass)
except ImportError:  # pragma: no cover - numba is a declared dependency
    pass

# N, S, E, W: offset of the neighbour that must be background.
_DIRECTIONS = ((0, -1), (0, 1), (1, 0), (-1, 0))


def _thin(bits: np.ndarray) -> np.ndarray:
    h, w = bits.shape
    m = np.zeros((h + 2, w + 2), dtype=np.uint8)
    m[1:-1, 1:-1] = bits
    border = np.zeros_like(m)
    while True:
        removed = 0
        for dx, dy in _DIRECTIONS:
            border[:] = 0
            border[1:-1, 1:-1] = (m[1:-1, 1:-1] == 1) & (
                m[1 + dy : h + 1 + dy, 1 + dx : w + 1 + dx] == 0
            )
            removed += _directional_pass(m, border, _DELETABLE)
        if removed == 0:
            return m[1:-1, 1:-1].astype(bool)


@dataclass(frozen=True, eq=False)
class Skeleton:
    """One-pixel-wide centerline raster plus its pixel list."""

    mask: BinaryMask
    points: tuple[tuple[int, int], ...]  # (x, y), raster order
    spacing: tuple[float, float]


@dataclass(frozen=True, eq=False)
class Segment:
    """Ordered 8-connected centerline path; µm length along the path."""

    pixels: tuple[tuple[int, int], ...]
    length_um: float
    spacing: tuple[float, float]


@dataclass(frozen=True, eq=False)
class SkeletonGraph:
    segments: tuple[Segment, ...]
    branch_points: tuple[tuple[int, int], ...]
    end_points: tuple[tuple[int, int], ...]
    spacing: tuple[float, float]


def _path_length_um(pixels, spacing) -> float:
    if len(pixels) < 2:
        return 0.0
    p = np.asarray(pixels, dtype=np.float64)
    d = np.diff(p, axis=0) * np.asarray(spacing)
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def _skeleton_from_bits(bits: np.ndarray, spacing) -> Skeleton:
    ys, xs = np.nonzero(bits)
    points = tuple(zip(xs.tolist(), ys.tolist()))
    return Skeleton(BinaryMask(bits, spacing), points, spacing)


def skeletonize(mask: BinaryMask, prune_spurs_um: float = 0.0) -> Skeleton:
    """Thin a mask to its centerline, optionally pruning short terminal twigs."""
    if prune_spurs_um < 0:
        raise ValueError("prune_spurs_um must be >= 0")
    bits = _thin(mask.bits)
    if prune_spurs_um > 0:
        bits = _prune(bits, mask.spacing, prune_spurs_um)
    return _skeleton_from_bits(bits, mask.spacing)


def _prune(bits: np.ndarray, spacing, min_length_um: float) -> np.ndarray:
    """Iteratively drop terminal segments shorter than the physical floor.

    A terminal segment touches at least one end point; whole isolated
    fragments below the floor are dropped too.
    """
    bits = bits.copy()
    while True:
        graph = decompose(_skeleton_from_bits(bits, spacing))
        ends = set(graph.end_points)
        removed = False
        for seg in graph.segments:
            if not seg.pixels:
                continue
            terminal = seg.pixels[0] in ends or seg.pixels[-1] in ends
            if terminal and seg.length_um < min_length_um:
                for x, y in seg.pixels:
                    bits[y, x] = False
                removed = True
        if not removed:
            return bits
        # junction pixels left behind by a removed twig may now be simple
        bits = _thin(bits)


_NB_OFFSETS = tuple(
    (dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0)
)


def decompose(skel: Skeleton) -> SkeletonGraph:
    """Split a skeleton into maximal segments between end and branch points.

    Classification is by 8-neighbour count on the skeleton: 1 neighbour is
    an end point, 2 an interior pixel, 3 or more a branch point. Segments
    own their end points but not branch points; every skeleton pixel is in
    exactly one segment or is a branch point. A pure cycle becomes one
    segment whose first pixel is repeated at the end; an isolated pixel
    becomes a zero-length single-pixel segment.
    """
    bits = skel.mask.bits
    spacing = skel.spacing

    def neighbors(p):
        x, y = p
        out = []
        for dx, dy in _NB_OFFSETS:
            nx, ny = x + dx, y + dy
            if 0 <= ny < bits.shape[0] and 0 <= nx < bits.shape[1] and bits[ny, nx]:
                out.append((nx, ny))
        return out

    degree = {p: len(neighbors(p)) for p in skel.points}
    branch = tuple(p for p in skel.points if degree[p] >= 3)
    ends = tuple(p for p in skel.points if degree[p] == 1)
    branch_set = set(branch)

    claimed = set()  # interior + end pixels already assigned to a segment
    segments = []

    def walk(start, first):
        """Trace from ``start`` through ``first`` until a stop pixel.

        Stops on branch points (excluded from the path), on end points
        (included), and on returning to ``start`` (cycle closed).
        """
        path = [start] if start not in branch_set else []
        prev, cur = start, first
        while True:
            if cur in branch_set or cur == start:
                return path
            path.append(cur)
            if degree[cur] != 2:  # end point reached
                return path
            a, b = neighbors(cur)
            prev, cur = cur, (b if a == prev else a)

    # open segments: start at end points and at branch-adjacent interiors
    starts = [(p, n) for p in ends for n in neighbors(p)]
    starts += [
        (b, n)
        for b in branch
        for n in neighbors(b)
        if n not in branch_set and degree[n] <= 2
    ]
    for start, first in starts:
        if first in claimed or (start in claimed and start not in branch_set):
            continue
        path = walk(start, first)
        if not path:
            continue
        if any(p in claimed for p in path):
            continue
        claimed.update(path)
        segments.append(path)

    # isolated pixels -> zero-length segments
    for p in skel.points:
        if degree[p] == 0:
            claimed.add(p)
            segments.append([p])

    # leftovers are pure cycles (all degree 2)
    for p in skel.points:
        if p in claimed or p in branch_set:
            continue
        path = walk(p, neighbors(p)[0])
        # close the loop by repeating the first pixel
        claimed.update(path)
        segments.append(path + [p])

    built = tuple(
        Segment(tuple(path), _path_length_um(path, spacing), spacing)
        for path in sorted(segments, key=lambda s: (s[0][1], s[0][0]))
    )
    return SkeletonGraph(built, branch, ends, spacing)
