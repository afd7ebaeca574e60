"""Fine-tuning sweep: the bias-measurement experiment.

Starting from a model trained on a source dataset, the harness repeatedly
fine-tunes a fresh copy on ``n`` randomly drawn target training images and
evaluates the result on the target test split, for every ``n`` in the
sweep. Two numbers come out of each run: the mean IoU of the predicted
masks against the reference labels, and the mean per-image ratio of the
predicted tortuosity to the reference tortuosity. The repetition count per
``n`` follows the max(5, ceil(l/2n)) schedule; ``n = 0`` is the
off-the-shelf case, deterministic, run once.

Repetitions never chain: each fine-tune restarts from the saved source
artifact. Sampling, job seeds and field draws all derive from the sweep
seed, so equal seeds give byte-identical rows.csv when the backend is
deterministic.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .backends import Backend, BackendError, resolve_backend, run_backend
from .manifest import DatasetManifest, ManifestEntry
from .metrics import iou, repetitions
from .raster import load_mask
from .rng import Rng
from .tortuosity import TortuosityParams, image_tortuosity

__all__ = ["SweepConfig", "SweepRow", "SweepAggregate", "SweepResult", "run_sweep", "emit_results"]

ROWS_HEADER = ("n", "repetition", "relative_iou", "relative_tortuosity")
AGGREGATES_HEADER = ("n", "K", "mean_R", "std_R", "mean_IoU", "std_IoU")


@dataclass(frozen=True)
class SweepConfig:
    n_values: tuple[int, ...] = tuple(range(41))
    seed: int = 0
    backend: dict = field(default_factory=lambda: {"kind": "builtin", "name": "oracle"})
    tortuosity_params: TortuosityParams = field(default_factory=TortuosityParams)
    prune_spurs_um: float = 0.0
    train_epochs: int = 30
    finetune_epochs: int = 15
    timeout_s: float | None = None
    jobs: int = 1

    def __post_init__(self):
        if any(n < 0 for n in self.n_values):
            raise ValueError("n_values must be non-negative")
        if self.train_epochs < 1 or self.finetune_epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class SweepRow:
    n: int
    repetition: int
    relative_iou: float
    relative_tortuosity: float


@dataclass(frozen=True)
class SweepAggregate:
    n: int
    K: int
    mean_R: float
    std_R: float
    mean_IoU: float
    std_IoU: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    aggregates: list[SweepAggregate]


def _aggregate(rows: list[SweepRow]) -> list[SweepAggregate]:
    out = []
    seen = []
    for row in rows:
        if row.n not in seen:
            seen.append(row.n)
    for n in seen:
        rs = [r.relative_tortuosity for r in rows if r.n == n]
        ious = [r.relative_iou for r in rows if r.n == n]
        out.append(
            SweepAggregate(
                n=n,
                K=len(rs),
                mean_R=math.fsum(rs) / len(rs),
                std_R=statistics.stdev(rs) if len(rs) > 1 else 0.0,
                mean_IoU=math.fsum(ious) / len(ious),
                std_IoU=statistics.stdev(ious) if len(ious) > 1 else 0.0,
            )
        )
    return out


def _evaluate_predictions(
    masks: list[str],
    test_entries: list[ManifestEntry],
    ref_masks: dict,
    ref_tort: dict,
    config: SweepConfig,
) -> tuple[float, float]:
    def one(pair):
        entry, mask_path = pair
        pred = load_mask(mask_path)
        pair_iou = iou(pred, ref_masks[entry.id])
        tort = image_tortuosity(
            pred, config.tortuosity_params, prune_spurs_um=config.prune_spurs_um
        )
        return pair_iou, tort / ref_tort[entry.id]

    pairs = list(zip(test_entries, masks))
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]
    rel_iou = math.fsum(r[0] for r in results) / len(results)
    rel_t = math.fsum(r[1] for r in results) / len(results)
    return rel_iou, rel_t


def run_sweep(
    config: SweepConfig,
    source_manifest: DatasetManifest,
    target_manifest: DatasetManifest,
    work_dir,
) -> SweepResult:
    """Execute the full sweep; see the module docstring for the protocol."""
    work = Path(work_dir)
    work.mkdir(parents=True, exist_ok=True)
    rng = Rng(config.seed)

    train_entries = target_manifest.split_entries("train")
    test_entries = target_manifest.split_entries("test")
    if not test_entries:
        raise ValueError("target manifest has no test split")
    if not train_entries:
        raise ValueError("target manifest has no train split")
    l = len(train_entries)
    too_big = [n for n in config.n_values if n > l]
    if too_big:
        raise ValueError(
            f"n values {too_big} exceed the target train-split size {l}; "
            "they cannot be sampled without replacement"
        )

    label_map = {
        e.image: e.label for e in (*source_manifest.entries, *target_manifest.entries)
    }
    backend = resolve_backend(config.backend, label_map=label_map, timeout_s=config.timeout_s)

    ref_masks = {e.id: load_mask(e.label) for e in test_entries}
    ref_tort = {}
    for e in test_entries:
        t = image_tortuosity(
            ref_masks[e.id], config.tortuosity_params, prune_spurs_um=config.prune_spurs_um
        )
        if t <= 0:
            raise ValueError(
                f"reference tortuosity for test image {e.id!r} is {t}; relative "
                "tortuosity needs strictly positive reference values"
            )
        ref_tort[e.id] = t

    # source model: reuse a provided artifact or train one
    model0 = config.backend.get("model")
    if not model0:
        src_train = source_manifest.split_entries("train") or source_manifest.entries
        model0 = str(work / "models" / "source.model")
        run_backend(
            backend,
            {
                "command": "train",
                "model_out": model0,
                "images": [e.image for e in src_train],
                "labels": [e.label for e in src_train],
                "epochs": config.train_epochs,
                "seed": rng.substream("train").seed,
                "out_dir": str(work / "jobs" / "train"),
            },
            work / "jobs" / "train",
        )

    rows: list[SweepRow] = []
    for n in config.n_values:
        K = repetitions(l, n) if n > 0 else 1
        for rep in range(K):
            try:
                if n == 0:
                    model = model0
                else:
                    gen = rng.substream("sample", n, rep).generator()
                    take = gen.choice(l, size=n, replace=False)
                    sampled = [train_entries[i] for i in sorted(take.tolist())]
                    job_dir = work / "jobs" / f"finetune_n{n}_r{rep}"
                    model = str(work / "models" / f"finetune_n{n}_r{rep}.model")
                    run_backend(
                        backend,
                        {
                            "command": "finetune",
                            "model_in": model0,
                            "model_out": model,
                            "images": [e.image for e in sampled],
                            "labels": [e.label for e in sampled],
                            "epochs": config.finetune_epochs,
                            "seed": rng.substream("backend", n, rep).seed,
                            "out_dir": str(job_dir),
                        },
                        job_dir,
                    )
                pred_dir = work / "pred" / f"n{n}_r{rep}"
                done = run_backend(
                    backend,
                    {
                        "command": "predict",
                        "model_in": model,
                        "images": [e.image for e in test_entries],
                        "epochs": 0,
                        "seed": rng.substream("predict", n, rep).seed,
                        "out_dir": str(pred_dir),
                    },
                    pred_dir,
                )
            except BackendError as e:
                raise BackendError(
                    f"backend failed at n={n} repetition={rep}: {e}", code=e.code
                ) from e
            rel_iou, rel_t = _evaluate_predictions(
                done["masks"], test_entries, ref_masks, ref_tort, config
            )
            rows.append(SweepRow(n, rep, rel_iou, rel_t))
    return SweepResult(rows, _aggregate(rows))


def _rows_csv_text(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROWS_HEADER)
    for r in result.rows:
        w.writerow([r.n, r.repetition, repr(r.relative_iou), repr(r.relative_tortuosity)])
    return buf.getvalue()


def _aggregates_csv_text(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATES_HEADER)
    for a in result.aggregates:
        w.writerow([a.n, a.K, repr(a.mean_R), repr(a.std_R), repr(a.mean_IoU), repr(a.std_IoU)])
    return buf.getvalue()


def plot_aggregates(aggregates: list[SweepAggregate], out_path) -> None:
    """Two error-bar series (mean R, mean IoU) against n, written as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ns = [a.n for a in aggregates]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.errorbar(
        ns, [a.mean_R for a in aggregates], yerr=[a.std_R for a in aggregates],
        marker="o", capsize=3, label="relative tortuosity (R)",
    )
    ax.errorbar(
        ns, [a.mean_IoU for a in aggregates], yerr=[a.std_IoU for a in aggregates],
        marker="s", capsize=3, label="relative IoU",
    )
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("fine-tuning samples n")
    ax.set_ylabel("relative value")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_results(result: SweepResult, out_dir) -> None:
    """Write rows.csv, aggregates.csv and plot.svg."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "rows.csv").write_text(_rows_csv_text(result))
    (out / "aggregates.csv").write_text(_aggregates_csv_text(result))
    plot_aggregates(result.aggregates, out / "plot.svg")
