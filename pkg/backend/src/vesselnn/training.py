"""Training recipe: Adam + pixelwise cross-entropy + 1cycle schedule.

The same recipe drives initial training and fine-tuning; fine-tuning
just starts from a loaded checkpoint and runs fewer epochs. Every run is
seeded end to end (init, shuffling) so identical jobs reproduce
identical weights on CPU.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from torch import nn
from torch.optim import Adam
from torch.optim.lr_scheduler import OneCycleLR
from torch.utils.data import DataLoader

from .data import PairDataset
from .model import UNetResNet34

MAX_LR = 5e-4
BATCH_SIZE = 8


def make_recipe(epochs: int, seed: int, init: str) -> dict:
    return {
        "architecture": "unet-resnet34",
        "optimizer": "adam",
        "loss": "cross-entropy",
        "schedule": "1cycle",
        "max_lr": MAX_LR,
        "epochs": epochs,
        "batch_size": BATCH_SIZE,
        "init": init,
        "seed": seed,
    }


def save_model(model: nn.Module, recipe: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"state_dict": model.state_dict(), "recipe": recipe}, path)
    path.with_name(path.name + ".recipe.json").write_text(json.dumps(recipe, indent=2) + "\n")


def load_model(path: Path) -> tuple[nn.Module, dict]:
    if not Path(path).is_file():
        raise FileNotFoundError(f"model artifact not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    model = UNetResNet34()
    model.load_state_dict(payload["state_dict"])
    return model, payload.get("recipe", {})


def train(
    images: list[str],
    labels: list[str],
    epochs: int,
    seed: int,
    model: nn.Module | None = None,
) -> tuple[nn.Module, list[float]]:
    """Optimise (or continue optimising) a model; returns per-epoch losses."""
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    torch.manual_seed(seed)
    if model is None:
        model = UNetResNet34()
    dataset = PairDataset(images, labels)
    loader = DataLoader(
        dataset,
        batch_size=min(BATCH_SIZE, len(dataset)),
        shuffle=True,
        generator=torch.Generator().manual_seed(seed),
        num_workers=0,
        drop_last=False,
    )
    optimizer = Adam(model.parameters(), lr=MAX_LR)
    scheduler = OneCycleLR(optimizer, max_lr=MAX_LR, total_steps=max(1, epochs * len(loader)))
    criterion = nn.CrossEntropyLoss()
    model.train()
    history = []
    for _ in range(epochs):
        total, count = 0.0, 0
        for x, y in loader:
            optimizer.zero_grad()
            loss = criterion(model(x), y)
            loss.backward()
            optimizer.step()
            scheduler.step()
            total += float(loss.detach()) * len(x)
            count += len(x)
        history.append(total / count)
    return model, history


@torch.no_grad()
def predict(model: nn.Module, image) -> "torch.Tensor":
    """Boolean mask for one image array; probability threshold 0.5."""
    model.eval()
    x = torch.from_numpy(image)[None, None]
    prob = torch.softmax(model(x), dim=1)[0, 1]
    return prob > 0.5
