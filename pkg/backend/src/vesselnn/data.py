"""PNG image/label pairs as tensors."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset

_FULL = {"L": 255.0, "I": 65535.0, "I;16": 65535.0, "I;16B": 65535.0}


def load_gray(path) -> np.ndarray:
    img = Image.open(path)
    img.load()
    if img.mode not in _FULL:
        raise ValueError(f"{path}: expected single-channel grayscale, got mode {img.mode!r}")
    return np.asarray(img, dtype=np.float32) / _FULL[img.mode]


def load_label(path) -> np.ndarray:
    img = Image.open(path)
    img.load()
    arr = np.asarray(img)
    vals = set(np.unique(arr).tolist())
    if not vals <= {0, 255}:
        raise ValueError(f"{path}: label must be a {{0,255}} mask, found values {sorted(vals)[:6]}")
    return (arr == 255).astype(np.int64)


def save_mask(bits: np.ndarray, path) -> None:
    Image.fromarray(np.where(bits, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")


class PairDataset(Dataset):
    """Image/label file pairs; all pairs must share one resolution."""

    def __init__(self, images: list[str], labels: list[str]):
        if len(images) != len(labels):
            raise ValueError("images and labels lists differ in length")
        if not images:
            raise ValueError("empty training set")
        self.images = [Path(p) for p in images]
        self.labels = [Path(p) for p in labels]
        shape = load_gray(self.images[0]).shape
        for p, q in zip(self.images, self.labels):
            if load_gray(p).shape != shape or load_label(q).shape != shape:
                raise ValueError(f"nonconforming image size at {p.name}; all pairs must match {shape}")
        self.shape = shape

    def __len__(self):
        return len(self.images)

    def __getitem__(self, i):
        x = torch.from_numpy(load_gray(self.images[i]))[None]  # (1, H, W)
        y = torch.from_numpy(load_label(self.labels[i]))  # (H, W)
        return x, y
