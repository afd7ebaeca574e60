"""Segmentation-backend protocol and built-in backends.

A backend is anything that can train, fine-tune and predict. The harness
talks to it through files:

* it writes ``job.json``::

      {"command": "train" | "finetune" | "predict",
       "model_in":  "<path>",          # finetune, predict
       "model_out": "<path>",          # train, finetune
       "images": ["<path>", ...],
       "labels": ["<path>", ...],      # train, finetune
       "epochs": <int>,                # 0 for predict
       "seed": <int>,
       "out_dir": "<path>"}

* the backend runs and writes ``done.json`` into ``out_dir``::

      {"model": "<path>"}              # train, finetune
      {"masks": ["<path>", ...]}       # predict, parallel to images

Process backends are spawned as ``argv + [job.json path]`` and must exit
0. Built-in backends implement the same contract in-process; they include
the classic segmenter and the test stubs (oracle, shrink, dilate,
false-components) that model the artifact taxonomy of biased segmenters:
the oracle returns reference labels verbatim, shrink underestimates
caliber, dilate overestimates it and false-components sprinkles spurious
small blobs.

Every ``predict`` is validated: one mask per input image, dimensions
matching, values strictly {0, 255}.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage as ndi

from .raster import BinaryMask, load_image, load_mask, save_mask
from .rng import Rng
from .segmentation import SegmenterParams, segment

__all__ = ["BackendError", "Backend", "resolve_backend", "run_backend", "BUILTIN_BACKENDS"]

_COMMANDS = ("train", "finetune", "predict")


class BackendError(RuntimeError):
    """Backend failure; ``code`` feeds the CLI error line."""

    def __init__(self, message: str, code: str = "backend"):
        super().__init__(message)
        self.code = code


@dataclass
class Backend:
    """Resolved backend: either a subprocess argv or an in-process callable."""

    name: str
    argv: tuple[str, ...] | None = None
    serve: "callable | None" = None
    timeout_s: float | None = None

    def run(self, job: dict, job_path: Path) -> None:
        if self.serve is not None:
            self.serve(job)
            return
        try:
            proc = subprocess.run(
                list(self.argv) + [str(job_path)],
                capture_output=True,
                text=True,
                timeout=self.timeout_s,
            )
        except FileNotFoundError as e:
            raise BackendError(
                f"backend executable not reachable: {self.argv[0]}", code="backend-unreachable"
            ) from e
        except subprocess.TimeoutExpired as e:
            raise BackendError(
                f"backend timed out after {self.timeout_s}s: {' '.join(self.argv)}",
                code="backend-timeout",
            ) from e
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout or "").strip().splitlines()[-3:]
            raise BackendError(
                f"backend exited {proc.returncode}: {' | '.join(tail) or 'no output'}",
                code="backend",
            )


def _write_stub_model(job: dict, name: str) -> dict:
    model_out = job.get("model_out")
    if not model_out:
        raise BackendError(f"{job['command']} job without model_out", code="backend-protocol")
    payload = {
        "backend": name,
        "command": job["command"],
        "seed": job["seed"],
        "n_images": len(job["images"]),
        "parent": job.get("model_in"),
    }
    Path(model_out).parent.mkdir(parents=True, exist_ok=True)
    Path(model_out).write_text(json.dumps(payload) + "\n")
    return {"model": model_out}


def _stub(name: str, transform):
    """Build a label-transforming stub backend. ``transform(bits, rng) -> bits``."""

    def factory(label_map: dict[str, str] | None = None, **_):
        if label_map is None:
            raise BackendError(f"builtin backend {name!r} needs a label map", code="backend")

        def serve(job: dict) -> dict:
            out_dir = Path(job["out_dir"])
            out_dir.mkdir(parents=True, exist_ok=True)
            if job["command"] in ("train", "finetune"):
                done = _write_stub_model(job, name)
            else:
                masks = []
                rng = Rng(job["seed"])
                for i, image in enumerate(job["images"]):
                    if image not in label_map:
                        raise BackendError(
                            f"{name} stub has no reference label for {image}", code="backend"
                        )
                    ref = load_mask(label_map[image])
                    bits = transform(ref.bits, rng.substream("img", i))
                    path = out_dir / f"{Path(image).stem}_pred.png"
                    save_mask(BinaryMask(bits, ref.spacing), path)
                    masks.append(str(path))
                done = {"masks": masks}
            (out_dir / "done.json").write_text(json.dumps(done) + "\n")
            return done

        return serve

    return factory


_SQUARE = np.ones((3, 3), dtype=bool)


def _shrink(bits, _rng):
    return ndi.binary_erosion(bits, structure=_SQUARE)


def _dilate(bits, _rng):
    return ndi.binary_dilation(bits, structure=_SQUARE)


def _oracle(bits, _rng):
    return bits


def _false_components(bits, rng, n_blobs: int = 12, blob_px: int = 2):
    out = bits.copy()
    gen = rng.generator()
    h, w = bits.shape
    free = ~ndi.binary_dilation(bits, structure=_SQUARE, iterations=3)
    ys, xs = np.nonzero(free[: h - blob_px, : w - blob_px])
    if len(ys):
        take = gen.choice(len(ys), size=min(n_blobs, len(ys)), replace=False)
        for k in take:
            out[ys[k] : ys[k] + blob_px, xs[k] : xs[k] + blob_px] = True
    return out


def _classic_factory(label_map=None, params: dict | None = None, **_):
    seg_params = SegmenterParams(**(params or {}))

    def serve(job: dict) -> dict:
        out_dir = Path(job["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        if job["command"] in ("train", "finetune"):
            done = _write_stub_model(job, "classic")
        else:
            masks = []
            for image in job["images"]:
                mask = segment(load_image(image), seg_params)
                path = out_dir / f"{Path(image).stem}_pred.png"
                save_mask(mask, path)
                masks.append(str(path))
            done = {"masks": masks}
        (out_dir / "done.json").write_text(json.dumps(done) + "\n")
        return done

    return serve


BUILTIN_BACKENDS = {
    "oracle": _stub("oracle", _oracle),
    "shrink": _stub("shrink", _shrink),
    "dilate": _stub("dilate", _dilate),
    "false-components": _stub("false-components", _false_components),
    "classic": _classic_factory,
}


def resolve_backend(
    descriptor: dict,
    label_map: dict[str, str] | None = None,
    timeout_s: float | None = None,
) -> Backend:
    """Turn a JSON descriptor into a runnable backend.

    ``{"kind": "builtin", "name": ...}`` or ``{"kind": "process",
    "argv": [...]}``; builtin stubs receive the reference ``label_map``.
    """
    kind = descriptor.get("kind")
    if kind == "builtin":
        name = descriptor.get("name")
        if name not in BUILTIN_BACKENDS:
            raise BackendError(
                f"unknown builtin backend {name!r}; have {sorted(BUILTIN_BACKENDS)}",
                code="backend-unreachable",
            )
        serve = BUILTIN_BACKENDS[name](label_map=label_map, params=descriptor.get("params"))
        return Backend(name=name, serve=serve)
    if kind == "process":
        argv = descriptor.get("argv")
        if not argv:
            raise BackendError("process backend descriptor needs argv", code="backend-unreachable")
        return Backend(
            name=Path(argv[0]).name,
            argv=tuple(argv),
            timeout_s=descriptor.get("timeout_s", timeout_s),
        )
    raise BackendError(f"unknown backend kind {kind!r}", code="backend-unreachable")


def _validate_predict(job: dict, done: dict) -> list[str]:
    masks = done.get("masks")
    if not isinstance(masks, list):
        raise BackendError("done.json from predict lacks a masks list", code="backend-protocol")
    images = job["images"]
    if len(masks) != len(images):
        missing = images[len(masks) :] if len(masks) < len(images) else []
        what = f"; first missing input: {Path(missing[0]).name}" if missing else ""
        raise BackendError(
            f"backend wrote {len(masks)} masks for {len(images)} inputs{what}",
            code="backend-protocol",
        )
    for image, mask_path in zip(images, masks):
        if not Path(mask_path).is_file():
            raise BackendError(f"predicted mask missing on disk: {mask_path}", code="backend-protocol")
        try:
            mask = load_mask(mask_path)
        except ValueError as e:
            raise BackendError(f"ill-formed predicted mask {mask_path}: {e}", code="backend-protocol") from e
        with_img = load_image(image)
        if mask.bits.shape != with_img.data.shape:
            raise BackendError(
                f"mask {Path(mask_path).name} is {mask.bits.shape}, "
                f"input {Path(image).name} is {with_img.data.shape}",
                code="backend-protocol",
            )
    return masks


def run_backend(backend: Backend, job: dict, job_dir) -> dict:
    """Write job.json, run the backend, read and validate done.json."""
    command = job.get("command")
    if command not in _COMMANDS:
        raise BackendError(f"unknown backend command {command!r}", code="backend-protocol")
    for field in ("images", "epochs", "seed", "out_dir"):
        if field not in job:
            raise BackendError(f"job is missing required field {field!r}", code="backend-protocol")
    job_dir = Path(job_dir)
    job_dir.mkdir(parents=True, exist_ok=True)
    job_path = job_dir / "job.json"
    job_path.write_text(json.dumps(job, indent=2) + "\n")

    backend.run(job, job_path)

    done_path = Path(job["out_dir"]) / "done.json"
    if not done_path.is_file():
        raise BackendError(f"backend wrote no done.json in {job['out_dir']}", code="backend-protocol")
    done = json.loads(done_path.read_text())
    if command == "predict":
        _validate_predict(job, done)
    else:
        model = done.get("model")
        if not model or not Path(model).is_file():
            raise BackendError(
                f"{command} produced no model artifact (done.json: {done})", code="backend-protocol"
            )
    return done
