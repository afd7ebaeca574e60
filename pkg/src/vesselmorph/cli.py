"""Command-line interface: one executable, one subcommand per stage.

Every flag can instead be given in a JSON config file (``--config``),
with flag names as keys; explicit flags win over config values. Domain
errors exit 1 and print a single machine-parseable line
``error: <code>: <message>``; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .backends import BackendError, resolve_backend, run_backend
from .elastic import ElasticParams, augment_pair
from .manifest import DatasetManifest, rank_and_select, scan_corpus, windows_and_split
from .metrics import dice, iou
from .raster import load_image, load_mask, save_image, save_mask
from .rng import Rng
from .segmentation import SegmenterParams, segment
from .skeleton import decompose, skeletonize
from .sweep import (
    AGGREGATES_HEADER,
    SweepAggregate,
    SweepConfig,
    emit_results,
    plot_aggregates,
    run_sweep,
)
from .synth import VesselSpec, render
from .tortuosity import TortuosityParams, tortuosity_map

_SUBCOMMANDS = (
    "segment",
    "skeletonize",
    "tortuosity",
    "augment",
    "synth",
    "metrics",
    "prepare",
    "sweep",
    "plot",
    "backend-serve",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line, machine-parseable usage errors
        self.exit(2, f"error: usage: {message}\n")


def _pair(text: str) -> tuple[float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return (parts[0], parts[1])


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p != "")
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _config_of(ns) -> dict:
    path = getattr(ns, "config", None)
    if not path:
        return {}
    cfg = json.loads(Path(path).read_text())
    if not isinstance(cfg, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return cfg


def _getter(ns):
    cfg = _config_of(ns)

    def get(name, default=None):
        v = getattr(ns, name.replace("-", "_"), None)
        if v is not None:
            return v
        if name in cfg:
            return cfg[name]
        return default

    return get


def _seed_of(get) -> int:
    v = get("seed")
    if v is None:
        v = os.environ.get("VESSELMORPH_SEED")
    return int(v) if v is not None else 0


def _tortuosity_params(get) -> TortuosityParams:
    return TortuosityParams(
        radius_um=float(get("radius-um", 10.0)),
        min_neighbors=int(get("min-neighbors", 3)),
        regression=str(get("regression", "tls")),
    )


# --- subcommands -----------------------------------------------------------


def _cmd_segment(ns):
    get = _getter(ns)
    spacing = get("spacing-um")
    img = load_image(get("in"), default_spacing=tuple(spacing) if spacing else None)
    params = SegmenterParams(
        gaussian_sigma=float(get("gaussian-sigma", 1.0)),
        window_um=float(get("window-um", 100.0)),
        threshold_offset=float(get("threshold-offset", 0.0)),
        min_component_area_um2=float(get("min-component-area-um2", 500.0)),
    )
    save_mask(segment(img, params), get("out"))


def _cmd_skeletonize(ns):
    get = _getter(ns)
    mask = load_mask(get("in"))
    skel = skeletonize(mask, prune_spurs_um=float(get("prune-spurs-um", 0.0)))
    out_mask = get("out-mask") or str(Path(get("in")).with_suffix("")) + ".skeleton.png"
    out_graph = get("out-graph") or str(Path(get("in")).with_suffix("")) + ".graph.json"
    save_mask(skel.mask, out_mask)
    graph = decompose(skel)
    payload = {
        "segments": [[list(p) for p in seg.pixels] for seg in graph.segments],
        "branch_points": [list(p) for p in graph.branch_points],
        "end_points": [list(p) for p in graph.end_points],
    }
    Path(out_graph).write_text(json.dumps(payload) + "\n")


def _cmd_tortuosity(ns):
    get = _getter(ns)
    mask = load_mask(get("in"))
    params = _tortuosity_params(get)
    prune = float(get("prune-spurs-um", 0.0))
    tmap = tortuosity_map(decompose(skeletonize(mask, prune_spurs_um=prune)), params)
    out_csv = get("out-csv") or str(Path(get("in")).with_suffix("")) + ".tortuosity.csv"
    out_json = get("out-json") or str(Path(get("in")).with_suffix("")) + ".tortuosity.json"
    lines = ["x,y,tortuosity_um"]
    lines += [f"{x},{y},{v!r}" for (x, y), v in tmap.entries]
    Path(out_csv).write_text("\n".join(lines) + "\n")
    summary = {
        "mean_um": tmap.mean,
        "n_points": len(tmap.entries),
        "params": {
            "radius_um": params.radius_um,
            "min_neighbors": params.min_neighbors,
            "regression": params.regression,
            "prune_spurs_um": prune,
        },
    }
    Path(out_json).write_text(json.dumps(summary, indent=2) + "\n")


def _cmd_augment(ns):
    get = _getter(ns)
    img = load_image(get("image"))
    mask = load_mask(get("mask"))
    seed = _seed_of(get)
    params = ElasticParams(
        alpha=float(get("alpha", 64.0)), sigma=float(get("sigma", 4.0)), seed=seed
    )
    count = int(get("count", 1))
    out = Path(get("out-dir"))
    out.mkdir(parents=True, exist_ok=True)
    rng = Rng(seed)
    pairs = []
    for i in range(count):
        wimg, wmask = augment_pair(img, mask, params, rng.substream("augment", i))
        img_path = out / f"aug_{i:03d}.png"
        mask_path = out / f"aug_{i:03d}_label.png"
        save_image(wimg, img_path)
        save_mask(wmask, mask_path)
        pairs.append({"index": i, "image": str(img_path), "mask": str(mask_path)})
    manifest = {"alpha": params.alpha, "sigma": params.sigma, "seed": seed, "pairs": pairs}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _cmd_synth(ns):
    get = _getter(ns)
    seed = _seed_of(get)
    count = int(get("count", 1))
    kind = str(get("kind", "straight"))
    width, height = int(get("width", 256)), int(get("height", 256))
    out = Path(get("out-dir"))
    for sub in ("images", "labels", "centerlines"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    spec = VesselSpec(
        kind=kind,
        length_px=float(get("length", 200.0)),
        tube_radius_px=float(get("tube-radius", 3.0)),
        intensity=float(get("intensity", 0.8)),
        background=float(get("background", 0.1)),
        noise_std=float(get("noise-std", 0.0)),
        amplitude_px=float(get("amplitude", 4.0)),
        wavelength_px=float(get("wavelength", 50.0)),
        arc_radius_px=float(get("arc-radius", 50.0)),
        heading_rad=float(get("heading", 0.0)),
        max_turn_rad=float(get("max-turn", 0.15)),
    )
    rng = Rng(seed)
    entries = []
    for i in range(count):
        img, mask, centerline = render(spec, width, height, rng.substream("synth", i))
        sid = f"{kind}_{i:03d}"
        img_path = out / "images" / f"{sid}.png"
        lab_path = out / "labels" / f"{sid}.png"
        ctr_path = out / "centerlines" / f"{sid}.csv"
        save_image(img, img_path)
        save_mask(mask, lab_path)
        ctr_path.write_text(
            "x,y\n" + "\n".join(f"{x!r},{y!r}" for x, y in centerline.tolist()) + "\n"
        )
        entries.append(
            {"id": sid, "image": str(img_path), "label": str(lab_path), "centerline": str(ctr_path)}
        )
    corpus = {"kind": kind, "seed": seed, "count": count, "entries": entries}
    (out / "corpus.json").write_text(json.dumps(corpus, indent=2) + "\n")


def _cmd_metrics(ns):
    get = _getter(ns)
    pred_dir, ref_dir = Path(get("pred-dir")), Path(get("ref-dir"))
    preds = sorted(pred_dir.glob("*.png"))
    if not preds:
        raise ValueError(f"no .png masks in {pred_dir}")
    rows = []
    for p in preds:
        r = ref_dir / p.name
        if not r.is_file():
            raise FileNotFoundError(f"no reference mask for {p.name} in {ref_dir}")
        a, b = load_mask(p), load_mask(r)
        rows.append((p.stem, iou(a, b), dice(a, b)))
    out_csv = get("out-csv") or str(pred_dir / "metrics.csv")
    out_json = get("out-json") or str(pred_dir / "metrics.json")
    Path(out_csv).write_text(
        "id,iou,dice\n" + "\n".join(f"{i},{v!r},{d!r}" for i, v, d in rows) + "\n"
    )
    summary = {
        "n_pairs": len(rows),
        "mean_iou": math.fsum(r[1] for r in rows) / len(rows),
        "mean_dice": math.fsum(r[2] for r in rows) / len(rows),
    }
    Path(out_json).write_text(json.dumps(summary, indent=2) + "\n")


def _cmd_prepare(ns):
    get = _getter(ns)
    if get("manifest"):
        corpus = DatasetManifest.load(get("manifest"))
    else:
        corpus = scan_corpus(get("images-dir"), get("labels-dir"))
    ranked = rank_and_select(
        corpus,
        int(get("count")),
        _tortuosity_params(get),
        prune_spurs_um=float(get("prune-spurs-um", 0.0)),
    )
    grid = get("grid", (4, 4))
    if isinstance(grid, str):
        grid = tuple(int(g) for g in grid.split(","))
    fractions = get("fractions", (0.8, 0.1, 0.1))
    if isinstance(fractions, str):
        fractions = tuple(float(f) for f in fractions.split(","))
    out = Path(get("out-dir"))
    result = windows_and_split(
        ranked, out, grid=tuple(grid), fractions=tuple(fractions), rng=Rng(_seed_of(get))
    )
    result.save(out / "manifest.json")


def _backend_descriptor(get) -> dict:
    raw = get("backend", "oracle")
    if isinstance(raw, dict):
        return raw
    raw = str(raw)
    if raw.lstrip().startswith("{"):
        return json.loads(raw)
    if raw.startswith("process:"):
        return {"kind": "process", "argv": raw[len("process:") :].split()}
    return {"kind": "builtin", "name": raw}


def _filtered(manifest: DatasetManifest, vessel_class: str | None) -> DatasetManifest:
    if not vessel_class:
        return manifest
    picked = [e for e in manifest.entries if e.vessel_class == vessel_class]
    if not picked:
        raise ValueError(f"manifest has no entries of class {vessel_class!r}")
    return DatasetManifest(picked)


def _cmd_sweep(ns):
    get = _getter(ns)
    source = _filtered(DatasetManifest.load(get("source-manifest")), get("source-class"))
    target = _filtered(DatasetManifest.load(get("target-manifest")), get("target-class"))
    n_values = get("n-values", tuple(range(41)))
    if isinstance(n_values, str):
        n_values = _int_list(n_values)
    config = SweepConfig(
        n_values=tuple(int(n) for n in n_values),
        seed=_seed_of(get),
        backend=_backend_descriptor(get),
        tortuosity_params=_tortuosity_params(get),
        prune_spurs_um=float(get("prune-spurs-um", 0.0)),
        train_epochs=int(get("train-epochs", 30)),
        finetune_epochs=int(get("finetune-epochs", 15)),
        timeout_s=float(get("timeout-s")) if get("timeout-s") is not None else None,
        jobs=int(get("jobs", 1)),
    )
    out = Path(get("out-dir"))
    result = run_sweep(config, source, target, out / "work")
    emit_results(result, out)


def _cmd_plot(ns):
    get = _getter(ns)
    path = Path(get("aggregates"))
    lines = path.read_text().splitlines()
    if not lines or tuple(lines[0].split(",")) != AGGREGATES_HEADER:
        raise ValueError(f"{path} does not look like an aggregates.csv (bad header)")
    aggs = []
    for line in lines[1:]:
        n, k, mr, sr, mi, si = line.split(",")
        aggs.append(SweepAggregate(int(n), int(k), float(mr), float(sr), float(mi), float(si)))
    plot_aggregates(aggs, get("out") or path.with_name("plot.svg"))


def _cmd_backend_serve(ns):
    get = _getter(ns)
    label_map = None
    if get("labels-from"):
        manifest = DatasetManifest.load(get("labels-from"))
        label_map = {e.image: e.label for e in manifest.entries}
    backend = resolve_backend(
        {"kind": "builtin", "name": get("name", "oracle"), "params": None}, label_map=label_map
    )
    job = json.loads(Path(ns.job).read_text())
    run_backend(backend, job, Path(ns.job).parent)


# --- parser ----------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, help="RNG seed (env VESSELMORPH_SEED is the fallback)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="vesselmorph", description=__doc__)
    parser.add_argument("--version", action="version", version=f"vesselmorph {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(_SUBCOMMANDS) + "}")

    p = sub.add_parser("segment", help="classic segmentation of a grayscale image")
    p.add_argument("--in", dest="in_", required=True, metavar="PNG")
    p.add_argument("--out", required=True, metavar="PNG")
    p.add_argument("--gaussian-sigma", type=float)
    p.add_argument("--window-um", type=float)
    p.add_argument("--threshold-offset", type=float)
    p.add_argument("--min-component-area-um2", type=float)
    p.add_argument("--spacing-um", type=_pair, metavar="X,Y")
    _add_common(p)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("skeletonize", help="thin a mask to its centerline")
    p.add_argument("--in", dest="in_", required=True, metavar="PNG")
    p.add_argument("--out-mask", metavar="PNG")
    p.add_argument("--out-graph", metavar="JSON")
    p.add_argument("--prune-spurs-um", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_skeletonize)

    p = sub.add_parser("tortuosity", help="per-pixel and mean centerline tortuosity")
    p.add_argument("--in", dest="in_", required=True, metavar="PNG")
    p.add_argument("--out-csv", metavar="CSV")
    p.add_argument("--out-json", metavar="JSON")
    p.add_argument("--radius-um", type=float)
    p.add_argument("--min-neighbors", type=int)
    p.add_argument("--regression", choices=("tls", "ols"))
    p.add_argument("--prune-spurs-um", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_tortuosity)

    p = sub.add_parser("augment", help="elastic-transform an image/label pair")
    p.add_argument("--image", required=True, metavar="PNG")
    p.add_argument("--mask", required=True, metavar="PNG")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--count", type=int)
    _add_common(p)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("synth", help="generate synthetic tube images with ground truth")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--kind", choices=("straight", "arc", "sinusoid", "random-walk"))
    p.add_argument("--count", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--length", type=float)
    p.add_argument("--tube-radius", type=float)
    p.add_argument("--intensity", type=float)
    p.add_argument("--background", type=float)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--wavelength", type=float)
    p.add_argument("--arc-radius", type=float)
    p.add_argument("--heading", type=float)
    p.add_argument("--max-turn", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("metrics", help="IoU/Dice between two mask directories")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--ref-dir", required=True)
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    _add_common(p)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("prepare", help="rank by tortuosity, window and split a corpus")
    p.add_argument("--images-dir")
    p.add_argument("--labels-dir")
    p.add_argument("--manifest", help="existing corpus manifest instead of directories")
    p.add_argument("--count", type=int, required=True, help="images per class")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--grid", help="e.g. 4,4")
    p.add_argument("--fractions", help="e.g. 0.8,0.1,0.1")
    p.add_argument("--radius-um", type=float)
    p.add_argument("--min-neighbors", type=int)
    p.add_argument("--regression", choices=("tls", "ols"))
    p.add_argument("--prune-spurs-um", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("sweep", help="fine-tuning sweep over n with a backend")
    p.add_argument("--source-manifest", required=True)
    p.add_argument("--target-manifest", required=True)
    p.add_argument("--source-class")
    p.add_argument("--target-class")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--backend", help="builtin name, 'process:<argv>' or JSON descriptor")
    p.add_argument("--n-values", help="comma-separated, e.g. 0,1,2,5")
    p.add_argument("--train-epochs", type=int)
    p.add_argument("--finetune-epochs", type=int)
    p.add_argument("--radius-um", type=float)
    p.add_argument("--min-neighbors", type=int)
    p.add_argument("--regression", choices=("tls", "ols"))
    p.add_argument("--prune-spurs-um", type=float)
    p.add_argument("--timeout-s", type=float)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("plot", help="re-plot an aggregates.csv as SVG")
    p.add_argument("--aggregates", required=True, metavar="CSV")
    p.add_argument("--out", metavar="SVG")
    _add_common(p)
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser(
        "backend-serve", help="serve one builtin-backend job (subprocess protocol testing)"
    )
    p.add_argument("job", metavar="JOB_JSON")
    p.add_argument("--name", choices=("oracle", "shrink", "dilate", "false-components", "classic"))
    p.add_argument("--labels-from", metavar="MANIFEST_JSON")
    _add_common(p)
    p.set_defaults(func=_cmd_backend_serve)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if not getattr(ns, "func", None):
        parser.error("a subcommand is required")
    # `--in` lands on ns.in_; expose it under the config-key name
    if hasattr(ns, "in_"):
        setattr(ns, "in", ns.in_)
    try:
        ns.func(ns)
        return 0
    except BackendError as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: not-found: {e}", file=sys.stderr)
        return 1
    except (ValueError, IndexError, KeyError, TypeError) as e:
        print(f"error: invalid-argument: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: io: {e}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
