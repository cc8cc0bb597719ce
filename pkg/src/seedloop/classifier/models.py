"""Model specs, the backend registry and the built-in compact CNN backend.

Backends are registered under a string id so the pipeline never depends on a
particular architecture; heavyweight pretrained networks can be added as
extra backends without touching the rest of the system.
"""

from __future__ import annotations

import copy
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn as nn

from ..dataset import ImageRecord


class UnknownBackendError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    backend_id: str = "smallcnn"
    input_resolution: tuple[int, int] = (32, 32)
    num_classes: int = 4
    init_seed: int = 0

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 20
    early_stop_patience: int = 4
    early_stop_metric: str = "val_accuracy"  # or "val_loss"
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not 0 < self.early_stop_patience < self.max_epochs:
            raise ValueError("early_stop_patience must be in [1, max_epochs)")
        if self.early_stop_metric not in ("val_accuracy", "val_loss"):
            raise ValueError(f"unknown early_stop_metric {self.early_stop_metric!r}")
        if self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("batch_size must be >= 1 and learning_rate > 0")


class ClassifierModel(ABC):
    """Contract every backend model fulfils.

    Predictions are deterministic for fixed weights; training mutates the
    model in place under a single-writer discipline.
    """

    spec: ModelSpec

    @abstractmethod
    def predict_proba(self, records: Sequence[ImageRecord]) -> np.ndarray:
        """(N, num_classes) probabilities in input order, rows summing to 1."""

    @abstractmethod
    def embed(self, records: Sequence[ImageRecord]) -> np.ndarray:
        """(N, d) penultimate-layer features in input order."""

    def predict_with_embeddings(self, records: Sequence[ImageRecord]
                                ) -> tuple[np.ndarray, np.ndarray]:
        return self.predict_proba(records), self.embed(records)

    @abstractmethod
    def train_epoch(self, images: np.ndarray, labels: np.ndarray,
                    config: TrainConfig) -> float:
        """One pass over pre-shuffled (N,H,W,3) float inputs; returns train accuracy."""

    @abstractmethod
    def weight_state(self) -> object:
        """Deep-copied weight snapshot for best-epoch restore."""

    @abstractmethod
    def load_weight_state(self, state: object) -> None:
        ...

    def save(self, path: str | Path) -> None:
        torch.save({
            "backend_id": self.spec.backend_id,
            "spec": asdict(self.spec),
            "weights": self.weight_state(),
        }, str(path))


_BACKENDS: dict[str, Callable[[ModelSpec], ClassifierModel]] = {}


def register_backend(backend_id: str, factory: Callable[[ModelSpec], ClassifierModel]) -> None:
    _BACKENDS[backend_id] = factory


def registered_backends() -> list[str]:
    return sorted(_BACKENDS)


def init_model(spec: ModelSpec) -> ClassifierModel:
    """Freshly initialized model; same spec (same init_seed) gives identical weights."""
    try:
        factory = _BACKENDS[spec.backend_id]
    except KeyError:
        raise UnknownBackendError(
            f"unknown backend {spec.backend_id!r}; registered: {registered_backends()}"
        ) from None
    return factory(spec)


def save_model(model: ClassifierModel, path: str | Path) -> None:
    model.save(path)


def load_model(path: str | Path) -> ClassifierModel:
    blob = torch.load(str(path), weights_only=False)
    spec = ModelSpec(**{**blob["spec"], "input_resolution": tuple(blob["spec"]["input_resolution"])})
    model = init_model(spec)
    model.load_weight_state(blob["weights"])
    return model


class _SmallCnnNet(nn.Module):
    """Three conv blocks then a small fully connected head; embedding is the
    64-d penultimate activation."""

    def __init__(self, num_classes: int):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(16, 32, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(32, 64, 3, padding=1), nn.ReLU(), nn.AdaptiveAvgPool2d(4),
        )
        self.fc_embed = nn.Linear(64 * 4 * 4, 64)
        self.fc_out = nn.Linear(64, num_classes)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = self.features(x).flatten(1)
        emb = torch.relu(self.fc_embed(h))
        return self.fc_out(emb), emb


class SmallCnnModel(ClassifierModel):
    """Desk-scale CNN backend suitable for 32-64 px crops on CPU."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        torch.manual_seed(spec.init_seed)
        self.net = _SmallCnnNet(spec.num_classes)
        self._opt: torch.optim.Optimizer | None = None
        self._opt_lr: float | None = None

    def _to_tensor(self, images: np.ndarray) -> torch.Tensor:
        # NHWC float in [0,1] -> NCHW
        return torch.from_numpy(np.ascontiguousarray(images.transpose(0, 3, 1, 2)))

    def _forward_records(self, records: Sequence[ImageRecord]) -> tuple[np.ndarray, np.ndarray]:
        from .training import records_to_array
        self.net.eval()
        probs_out, emb_out = [], []
        with torch.no_grad():
            for start in range(0, len(records), 256):
                chunk = records[start:start + 256]
                x = self._to_tensor(records_to_array(chunk, self.spec.input_resolution))
                logits, emb = self.net(x)
                probs_out.append(torch.softmax(logits, dim=1).numpy())
                emb_out.append(emb.numpy())
        if not probs_out:
            d = self.net.fc_embed.out_features
            return np.zeros((0, self.spec.num_classes)), np.zeros((0, d))
        return np.concatenate(probs_out), np.concatenate(emb_out)

    def predict_proba(self, records: Sequence[ImageRecord]) -> np.ndarray:
        return self._forward_records(records)[0]

    def embed(self, records: Sequence[ImageRecord]) -> np.ndarray:
        return self._forward_records(records)[1]

    def predict_with_embeddings(self, records: Sequence[ImageRecord]
                                ) -> tuple[np.ndarray, np.ndarray]:
        return self._forward_records(records)

    def train_epoch(self, images: np.ndarray, labels: np.ndarray,
                    config: TrainConfig) -> float:
        if self._opt is None or self._opt_lr != config.learning_rate:
            self._opt = torch.optim.Adam(self.net.parameters(), lr=config.learning_rate)
            self._opt_lr = config.learning_rate
        loss_fn = nn.CrossEntropyLoss()
        self.net.train()
        correct = 0
        x_all = self._to_tensor(images)
        y_all = torch.from_numpy(labels.astype(np.int64))
        for start in range(0, len(images), config.batch_size):
            x = x_all[start:start + config.batch_size]
            y = y_all[start:start + config.batch_size]
            self._opt.zero_grad()
            logits, _ = self.net(x)
            loss = loss_fn(logits, y)
            loss.backward()
            self._opt.step()
            correct += int((logits.argmax(dim=1) == y).sum())
        return correct / max(1, len(images))

    def weight_state(self) -> object:
        return copy.deepcopy(self.net.state_dict())

    def load_weight_state(self, state: object) -> None:
        self.net.load_state_dict(state)


register_backend("smallcnn", SmallCnnModel)
