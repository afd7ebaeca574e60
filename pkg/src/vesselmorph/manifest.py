"""Dataset manifests: ranking, windowing and leakage-free splits.

A manifest row ties an image file to its label file and records where the
pair came from (source image, window index), which split it landed in and
which tortuosity class the source was assigned. The one hard rule is that
windows of the same source image never straddle splits; everything else
is bookkeeping.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .raster import load_image, load_mask, save_image, save_mask
from .rng import Rng
from .tortuosity import TortuosityParams, image_tortuosity

__all__ = [
    "ManifestEntry",
    "DatasetManifest",
    "scan_corpus",
    "rank_and_select",
    "windows_and_split",
]

_SPLITS = ("train", "val", "test")
_CLASSES = ("tortuous", "non-tortuous", "false-tortuous")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image: str
    label: str
    source_id: str
    window: int | None = None
    split: str | None = None
    vessel_class: str | None = None
    mean_tortuosity_um: float | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["class"] = d.pop("vessel_class")
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ManifestEntry":
        d = dict(d)
        d["vessel_class"] = d.pop("class", None)
        return cls(**d)


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]

    def split_entries(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def class_entries(self, vessel_class: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.vessel_class == vessel_class]

    def validate(self, n_windows: int | None = None) -> None:
        """Enforce the leakage rule and field ranges on a split manifest."""
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest entry ids must be unique")
        split_of: dict[str, str] = {}
        for e in self.entries:
            if e.split not in _SPLITS:
                raise ValueError(f"entry {e.id}: invalid split {e.split!r}")
            if e.vessel_class is not None and e.vessel_class not in _CLASSES:
                raise ValueError(f"entry {e.id}: invalid class {e.vessel_class!r}")
            if n_windows is not None:
                if e.window is None or not 0 <= e.window < n_windows:
                    raise ValueError(f"entry {e.id}: window {e.window} outside [0, {n_windows})")
            seen = split_of.setdefault(e.source_id, e.split)
            if seen != e.split:
                raise ValueError(
                    f"leakage: source image {e.source_id!r} appears in splits "
                    f"{seen!r} and {e.split!r}"
                )

    def save(self, path) -> None:
        payload = {"entries": [e.to_json() for e in self.entries]}
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        payload = json.loads(Path(path).read_text())
        return cls([ManifestEntry.from_json(d) for d in payload["entries"]])


def scan_corpus(images_dir, labels_dir) -> DatasetManifest:
    """Pair image and label PNGs by filename stem."""
    images_dir, labels_dir = Path(images_dir), Path(labels_dir)
    entries = []
    for img in sorted(images_dir.glob("*.png")):
        label = labels_dir / img.name
        if not label.is_file():
            raise FileNotFoundError(f"no label for image {img.name} in {labels_dir}")
        entries.append(
            ManifestEntry(id=img.stem, image=str(img), label=str(label), source_id=img.stem)
        )
    if not entries:
        raise ValueError(f"no .png images found in {images_dir}")
    return DatasetManifest(entries)


def rank_and_select(
    corpus: DatasetManifest,
    count: int,
    params: TortuosityParams | None = None,
    prune_spurs_um: float = 0.0,
) -> DatasetManifest:
    """Label the ``count`` most tortuous sources tortuous, the least non-tortuous.

    Ranking key is (mean label tortuosity, id); with ties everywhere the
    non-tortuous class is therefore the first ``count`` ids and the
    tortuous class the last ``count``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if len(corpus.entries) < 2 * count:
        raise ValueError(
            f"need at least {2 * count} labeled images to select {count} per class, "
            f"got {len(corpus.entries)}"
        )
    scored = []
    for e in corpus.entries:
        t = image_tortuosity(load_mask(e.label), params, prune_spurs_um=prune_spurs_um)
        scored.append((t, e.id, e))
    scored.sort(key=lambda s: (s[0], s[1]))
    chosen = []
    for t, _, e in scored[:count]:
        chosen.append(replace(e, vessel_class="non-tortuous", mean_tortuosity_um=t))
    for t, _, e in scored[-count:]:
        chosen.append(replace(e, vessel_class="tortuous", mean_tortuosity_um=t))
    return DatasetManifest(chosen)


def _split_counts(n: int, fractions: tuple[float, float, float]) -> list[int]:
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {fractions}")
    base = [math.floor(n * f) for f in fractions]
    rem = n - sum(base)
    order = sorted(range(3), key=lambda i: (-(n * fractions[i] - base[i]), i))
    for i in order[:rem]:
        base[i] += 1
    return base


def windows_and_split(
    manifest: DatasetManifest,
    out_dir,
    grid: tuple[int, int] = (4, 4),
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    rng: Rng | None = None,
) -> DatasetManifest:
    """Cut each source into grid windows and assign whole sources to splits.

    Window files go to ``out_dir/images`` and ``out_dir/labels``. Any
    remainder when dimensions are not divisible by the grid is cropped
    from the right/bottom edge. Sources are shuffled with the given rng
    and allocated to train/val/test by largest-remainder counts, so all
    windows of a source share its split.
    """
    gx, gy = grid
    if gx < 1 or gy < 1:
        raise ValueError("grid must be at least 1x1")
    rng = rng if rng is not None else Rng(0)
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    lab_dir = out_dir / "labels"
    img_dir.mkdir(parents=True, exist_ok=True)
    lab_dir.mkdir(parents=True, exist_ok=True)

    sources = list(manifest.entries)
    counts = _split_counts(len(sources), fractions)
    perm = rng.substream("split").generator().permutation(len(sources))
    split_of = {}
    cursor = 0
    for split, c in zip(_SPLITS, counts):
        for k in perm[cursor : cursor + c]:
            split_of[sources[k].id] = split
        cursor += c

    entries = []
    for src in sources:
        image = load_image(src.image)
        label = load_mask(src.label)
        if image.data.shape != label.bits.shape:
            raise ValueError(f"source {src.id}: image and label dimensions differ")
        win_w, win_h = image.width // gx, image.height // gy
        if win_w < 1 or win_h < 1:
            raise ValueError(f"source {src.id}: image smaller than the {gx}x{gy} grid")
        for row in range(gy):
            for col in range(gx):
                k = row * gx + col
                sub = (slice(row * win_h, (row + 1) * win_h), slice(col * win_w, (col + 1) * win_w))
                wid = f"{src.id}_w{k:02d}"
                img_path = img_dir / f"{wid}.png"
                lab_path = lab_dir / f"{wid}.png"
                save_image(type(image)(image.data[sub], image.spacing), img_path)
                save_mask(type(label)(label.bits[sub], label.spacing), lab_path)
                entries.append(
                    ManifestEntry(
                        id=wid,
                        image=str(img_path),
                        label=str(lab_path),
                        source_id=src.id,
                        window=k,
                        split=split_of[src.id],
                        vessel_class=src.vessel_class,
                        mean_tortuosity_um=src.mean_tortuosity_um,
                    )
                )
    result = DatasetManifest(entries)
    result.validate(n_windows=gx * gy)
    return result
