"""Raster types and PNG I/O.

All images travel with their physical pixel spacing (micrometres per
pixel) because the pipeline parameters downstream are physical: the
adaptive-threshold window, the component-area floor and the tortuosity
neighbourhood radius are all given in micrometres.

File container is single-channel PNG, 8 or 16 bit. An optional sidecar
``<file>.meta.json`` (the image filename with ``.meta.json`` appended)
carries ``spacing_um: [x, y]`` and, for stacks, ``z_spacing_um``; when
absent the confocal default of 0.908 um/pixel is assumed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "DEFAULT_SPACING_UM",
    "GrayImage",
    "ImageStack",
    "BinaryMask",
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
    "max_intensity_projection",
]

# §-free default: confocal voxel footprint when no sidecar metadata exists.
DEFAULT_SPACING_UM = (0.908, 0.908)

_GRAY_MODES = {"L": 255, "I": 65535, "I;16": 65535, "I;16B": 65535}


def _check_spacing(spacing) -> tuple[float, float]:
    sx, sy = float(spacing[0]), float(spacing[1])
    if not (sx > 0 and sy > 0):
        raise ValueError(f"pixel spacing must be strictly positive, got {spacing}")
    return (sx, sy)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """2D intensity raster, values in [0, 1], row-major (height, width)."""

    data: np.ndarray
    spacing: tuple[float, float] = DEFAULT_SPACING_UM

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"image data must be 2D, got shape {data.shape}")
        if data.size == 0:
            raise ValueError("zero-sized image")
        if not np.all(np.isfinite(data)):
            raise ValueError("image intensities must be finite")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("image intensities must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """2D boolean raster marking vessel pixels."""

    bits: np.ndarray
    spacing: tuple[float, float] = DEFAULT_SPACING_UM

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise ValueError(f"mask bits must be 2D, got shape {bits.shape}")
        if bits.size == 0:
            raise ValueError("zero-sized mask")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True, eq=False)
class ImageStack:
    """Ordered slices of identical geometry; input form of 3D acquisitions."""

    slices: tuple[GrayImage, ...]
    z_spacing_um: float = 1.0

    def __post_init__(self):
        slices = tuple(self.slices)
        if not slices:
            raise ValueError("image stack must contain at least one slice")
        first = slices[0]
        for s in slices[1:]:
            if s.data.shape != first.data.shape or s.spacing != first.spacing:
                raise ValueError("all stack slices must share dimensions and spacing")
        if not self.z_spacing_um > 0:
            raise ValueError("z spacing must be strictly positive")
        object.__setattr__(self, "slices", slices)

    @property
    def depth(self) -> int:
        return len(self.slices)


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _read_spacing(path: Path, default: tuple[float, float] | None) -> tuple[float, float]:
    meta = _meta_path(path)
    if meta.is_file():
        fields = json.loads(meta.read_text())
        if "spacing_um" in fields:
            sx, sy = fields["spacing_um"]
            return (float(sx), float(sy))
    return DEFAULT_SPACING_UM if default is None else default


def _write_meta(path: Path, spacing: tuple[float, float]) -> None:
    _meta_path(path).write_text(json.dumps({"spacing_um": list(spacing)}) + "\n")


def _open_gray(path: Path) -> tuple[np.ndarray, int]:
    """Return (array, full-scale value); rejects non-grayscale content."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        img = Image.open(path)
        img.load()
    except (UnidentifiedImageError, OSError) as e:
        raise ValueError(f"unreadable image file {path}: {e}") from e
    if img.mode not in _GRAY_MODES:
        raise ValueError(
            f"multi-channel input not supported: {path} has mode {img.mode!r}, "
            "expected single-channel 8- or 16-bit grayscale"
        )
    arr = np.asarray(img)
    if arr.size == 0:
        raise ValueError(f"zero-sized image: {path}")
    return arr, _GRAY_MODES[img.mode]


def load_image(path, default_spacing: tuple[float, float] | None = None) -> GrayImage:
    """Read an 8/16-bit grayscale PNG, mapping intensities linearly to [0, 1]."""
    path = Path(path)
    arr, full = _open_gray(path)
    data = arr.astype(np.float64) / full
    return GrayImage(data, _read_spacing(path, default_spacing))


def save_image(img: GrayImage, path, bit_depth: int = 16, write_meta: bool = True) -> None:
    """Quantise to the requested bit depth and write a grayscale PNG."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit depth must be 8 or 16, got {bit_depth}")
    path = Path(path)
    full = 255 if bit_depth == 8 else 65535
    q = np.round(img.data * full)
    arr = q.astype(np.uint8) if bit_depth == 8 else q.astype(np.uint16)
    Image.fromarray(arr).save(path, format="PNG")
    if write_meta:
        _write_meta(path, img.spacing)


def load_mask(path, default_spacing: tuple[float, float] | None = None) -> BinaryMask:
    """Read a {0, 255} 8-bit PNG as a boolean mask."""
    path = Path(path)
    arr, full = _open_gray(path)
    vals = np.unique(arr)
    if not np.all(np.isin(vals, (0, full))):
        raise ValueError(
            f"mask file {path} contains values other than 0 and {full}: {vals[:8].tolist()}"
        )
    return BinaryMask(arr == full, _read_spacing(path, default_spacing))


def save_mask(mask: BinaryMask, path, write_meta: bool = True) -> None:
    """Write vessel pixels as 255 and background as 0 in an 8-bit PNG."""
    path = Path(path)
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")
    if write_meta:
        _write_meta(path, mask.spacing)


def max_intensity_projection(stack: ImageStack) -> GrayImage:
    """Depth-wise maximum of a stack; the canonical 2D input of the pipeline."""
    data = np.max(np.stack([s.data for s in stack.slices]), axis=0)
    return GrayImage(data, stack.slices[0].spacing)
