"""Job-file protocol server.

Invoked as ``vesselnn-backend <job.json>`` (or ``python -m
vesselnn.serve <job.json>``). Reads the job, runs the requested command
and writes ``done.json`` into the job's ``out_dir``:

* ``train``    - random init, optimise on the listed pairs, save
  ``model_out``; done.json ``{"model": ...}``.
* ``finetune`` - load ``model_in``, continue with the same recipe for
  the given epochs, save ``model_out``.
* ``predict``  - load ``model_in``, write one {0,255} mask PNG per input
  at input resolution into ``out_dir``; done.json ``{"masks": [...]}``,
  parallel to the input list.

A ``history.json`` with per-epoch losses is written next to every model
artifact. Malformed jobs, missing artifacts and nonconforming images
exit nonzero with a message on stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from .data import load_gray, save_mask
from .training import load_model, make_recipe, predict, save_model, train


def _require(job: dict, *fields: str) -> None:
    missing = [f for f in fields if job.get(f) in (None, [], "")]
    if missing:
        raise ValueError(f"job is missing required fields: {', '.join(missing)}")


def _write_history(model_out: Path, history: list[float]) -> None:
    model_out.with_name(model_out.name + ".history.json").write_text(
        json.dumps({"epoch_losses": history}) + "\n"
    )


def serve_job(job: dict) -> dict:
    command = job.get("command")
    if command not in ("train", "finetune", "predict"):
        raise ValueError(f"unknown command {command!r}")
    out_dir = Path(job["out_dir"]) if job.get("out_dir") else None
    if out_dir is None:
        raise ValueError("job is missing required fields: out_dir")
    out_dir.mkdir(parents=True, exist_ok=True)

    if command in ("train", "finetune"):
        _require(job, "images", "labels", "model_out", "seed")
        epochs = job.get("epochs")
        if not isinstance(epochs, int) or epochs < 1:
            raise ValueError(f"{command} requires epochs >= 1, got {epochs!r}")
        seed = int(job["seed"])
        model_out = Path(job["model_out"])
        if command == "train":
            model, history = train(job["images"], job["labels"], epochs, seed)
            recipe = make_recipe(epochs, seed, init="random")
        else:
            _require(job, "model_in")
            model, _ = load_model(job["model_in"])
            model, history = train(job["images"], job["labels"], epochs, seed, model=model)
            recipe = make_recipe(epochs, seed, init=f"finetune:{job['model_in']}")
        save_model(model, recipe, model_out)
        _write_history(model_out, history)
        done = {"model": str(model_out)}
    else:
        _require(job, "images", "model_in")
        model, _ = load_model(job["model_in"])
        masks = []
        for image in job["images"]:
            bits = predict(model, load_gray(image)).numpy()
            path = out_dir / f"{Path(image).stem}_pred.png"
            save_mask(bits, path)
            masks.append(str(path))
        done = {"masks": masks}

    (out_dir / "done.json").write_text(json.dumps(done) + "\n")
    return done


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: vesselnn-backend <job.json>", file=sys.stderr)
        return 2
    try:
        job = json.loads(Path(argv[0]).read_text())
        serve_job(job)
        return 0
    except Exception as e:  # protocol requires nonzero exit + stderr message
        print(f"vesselnn-backend: {e}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
