"""Conditional GAN for class-targeted seed image synthesis.

Label-conditioned generator (embedding concatenated with the noise vector)
against a projection discriminator, trained with the non-saturating softplus
loss on class-balanced minibatches.  Trained generators back the dataset
balancing workflow: sample per-class images, wrap them as generated records
and union them with the real training split.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .dataset import (
    CANONICAL_CLASSES,
    BalancingPlan,
    Dataset,
    DatasetError,
    ImageRecord,
    class_stats,
)
from .classifier.training import records_to_array
from .seeds import derive_seed

_LABEL_EMBED_DIM = 32
_BASE_SPATIAL = 4  # generator starts from a 4x4 feature map
_MAX_CHANNELS = 256


class GanError(ValueError):
    """Raised for invalid GAN configuration or inputs."""


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GanConfig:
    """Hyperparameters for conditional GAN training."""

    resolution: tuple[int, int] = (64, 64)
    num_classes: int = len(CANONICAL_CLASSES)
    dim_z: int = 128
    batch_size: int = 16
    learning_rate: float = 2e-4
    epochs: int = 250
    seed: int = 0

    def __post_init__(self) -> None:
        h, w = self.resolution
        if h != w or not _is_pow2(h) or h < 32:
            raise GanError(
                f"resolution must be square, a power of two and >= 32, got {self.resolution}"
            )
        if self.num_classes < 2:
            raise GanError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.batch_size < self.num_classes or self.batch_size % self.num_classes:
            raise GanError(
                f"batch_size {self.batch_size} must be a positive multiple of "
                f"num_classes {self.num_classes} for class-balanced batches"
            )
        if self.dim_z < 1:
            raise GanError(f"dim_z must be positive, got {self.dim_z}")
        if self.epochs < 0:
            raise GanError(f"epochs must be >= 0, got {self.epochs}")


def _channel_schedule(side: int) -> list[int]:
    """Widths from the 4x4 base up to the output resolution."""
    ups = int(math.log2(side // _BASE_SPATIAL))
    return [min(_MAX_CHANNELS, 16 * 2 ** (ups - i)) for i in range(ups + 1)]


class _GeneratorNet(nn.Module):
    """Noise + label embedding -> image in [0, 1]."""

    def __init__(self, config: GanConfig) -> None:
        super().__init__()
        side = config.resolution[0]
        chans = _channel_schedule(side)
        self.embed = nn.Embedding(config.num_classes, _LABEL_EMBED_DIM)
        self.fc = nn.Linear(
            config.dim_z + _LABEL_EMBED_DIM, chans[0] * _BASE_SPATIAL * _BASE_SPATIAL
        )
        blocks: list[nn.Module] = []
        for c_in, c_out in zip(chans[:-1], chans[1:]):
            blocks += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(c_in, c_out, 3, padding=1),
                nn.BatchNorm2d(c_out),
                nn.ReLU(inplace=True),
            ]
        blocks.append(nn.Conv2d(chans[-1], 3, 3, padding=1))
        self.blocks = nn.Sequential(*blocks)
        self.base_channels = chans[0]

    def forward(self, z: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        h = torch.cat([z, self.embed(y)], dim=1)
        h = self.fc(h).view(-1, self.base_channels, _BASE_SPATIAL, _BASE_SPATIAL)
        return torch.sigmoid(self.blocks(h))


class _DiscriminatorNet(nn.Module):
    """Projection discriminator: logit = psi(phi(x)) + <embed(y), phi(x)>."""

    def __init__(self, config: GanConfig) -> None:
        super().__init__()
        side = config.resolution[0]
        chans = list(reversed(_channel_schedule(side)))
        layers: list[nn.Module] = [nn.Conv2d(3, chans[0], 3, padding=1), nn.LeakyReLU(0.2)]
        for c_in, c_out in zip(chans[:-1], chans[1:]):
            layers += [nn.Conv2d(c_in, c_out, 4, stride=2, padding=1), nn.LeakyReLU(0.2)]
        self.features = nn.Sequential(*layers)
        self.psi = nn.Linear(chans[-1], 1)
        self.embed = nn.Embedding(config.num_classes, chans[-1])

    def forward(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        phi = self.features(x).sum(dim=(2, 3))
        return self.psi(phi).squeeze(1) + (self.embed(y) * phi).sum(dim=1)


class Generator:
    """Trained conditional generator with a deterministic sampling surface."""

    def __init__(self, net: _GeneratorNet, config: GanConfig, classes: tuple[str, ...]):
        self.net = net
        self.config = config
        self.classes = tuple(classes)

    def class_index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise GanError(f"unknown class {label!r}; generator knows {self.classes}") from None

    def generate(self, z: np.ndarray, label: str) -> np.ndarray:
        """Images in [0, 1] float32, shape (n, H, W, 3).

        Samples run through the network one at a time so a given (z, label)
        always yields bit-identical pixels regardless of batch context.
        """
        z = np.asarray(z, dtype=np.float32)
        if z.ndim == 1:
            z = z[None, :]
        if z.ndim != 2 or z.shape[1] != self.config.dim_z:
            raise GanError(f"z must have shape (n, {self.config.dim_z}), got {z.shape}")
        idx = self.class_index(label)
        self.net.eval()
        outs = []
        with torch.no_grad():
            for row in z:
                zt = torch.from_numpy(np.ascontiguousarray(row[None, :]))
                yt = torch.tensor([idx], dtype=torch.long)
                img = self.net(zt, yt)[0].permute(1, 2, 0).numpy()
                outs.append(img)
        return np.stack(outs).astype(np.float32)


class Discriminator:
    """Trained projection discriminator (kept for inspection and resumes)."""

    def __init__(self, net: _DiscriminatorNet, config: GanConfig, classes: tuple[str, ...]):
        self.net = net
        self.config = config
        self.classes = tuple(classes)

    def score(self, images: np.ndarray, label: str) -> np.ndarray:
        """Real-vs-fake logits for float images (n, H, W, 3) in [0, 1]."""
        idx = self.classes.index(label)
        x = torch.from_numpy(np.ascontiguousarray(images, dtype=np.float32)).permute(0, 3, 1, 2)
        y = torch.full((x.shape[0],), idx, dtype=torch.long)
        self.net.eval()
        with torch.no_grad():
            return self.net(x, y).numpy()


def class_balanced_batches(
    dataset: Dataset,
    batch_size: int,
    seed: int,
    num_batches: int,
    classes: tuple[str, ...] = CANONICAL_CLASSES,
) -> list[list[ImageRecord]]:
    """Batches with an equal per-class record count.

    Each class keeps its own seeded shuffle and wraps around with a reshuffle
    when exhausted, so minority classes repeat more often rather than vanishing
    from late batches.
    """
    if batch_size % len(classes):
        raise GanError(f"batch_size {batch_size} not divisible by {len(classes)} classes")
    per = batch_size // len(classes)
    by_class: dict[str, list[ImageRecord]] = {c: [] for c in classes}
    for rec in dataset.records:
        if rec.label is None:
            raise DatasetError(f"record {rec.id!r} is unlabeled; GAN training needs labels")
        if rec.label not in by_class:
            raise DatasetError(f"record {rec.id!r} has label {rec.label!r} outside {classes}")
        by_class[rec.label].append(rec)
    empty = [c for c in classes if not by_class[c]]
    if empty:
        raise DatasetError(f"no records for class(es) {empty}; cannot balance batches")

    rng = np.random.default_rng(seed)
    orders = {c: list(rng.permutation(len(by_class[c]))) for c in classes}
    cursors = {c: 0 for c in classes}
    batches: list[list[ImageRecord]] = []
    for _ in range(num_batches):
        batch: list[ImageRecord] = []
        for c in classes:
            for _ in range(per):
                if cursors[c] == len(orders[c]):
                    orders[c] = list(rng.permutation(len(by_class[c])))
                    cursors[c] = 0
                batch.append(by_class[c][orders[c][cursors[c]]])
                cursors[c] += 1
        batches.append(batch)
    return batches


def train_cgan(
    train_set: Dataset,
    config: GanConfig,
    classes: tuple[str, ...] = CANONICAL_CLASSES,
    max_steps: int | None = None,
    log_every: int = 0,
) -> tuple[Generator, Discriminator, list[tuple[float, float]]]:
    """Alternating single D/G updates; returns per-step (d_loss, g_loss).

    Runs epochs * ceil(len(train_set) / batch_size) steps (optionally capped
    by max_steps).  epochs=0 yields freshly initialized networks and an empty
    history.
    """
    if len(classes) != config.num_classes:
        raise GanError(f"{len(classes)} classes but config.num_classes={config.num_classes}")
    h, w = config.resolution
    torch.manual_seed(derive_seed(config.seed, "gan-init"))
    g_net = _GeneratorNet(config)
    d_net = _DiscriminatorNet(config)
    opt_g = torch.optim.Adam(g_net.parameters(), lr=config.learning_rate, betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(d_net.parameters(), lr=config.learning_rate, betas=(0.5, 0.999))

    steps_per_epoch = math.ceil(len(train_set) / config.batch_size) if len(train_set) else 0
    total = config.epochs * steps_per_epoch
    if max_steps is not None:
        total = min(total, max_steps)
    history: list[tuple[float, float]] = []
    if total == 0:
        return (
            Generator(g_net, config, classes),
            Discriminator(d_net, config, classes),
            history,
        )

    images = records_to_array(train_set.records, (h, w))
    row = {rec.id: i for i, rec in enumerate(train_set.records)}
    label_idx = {c: i for i, c in enumerate(classes)}
    noise = torch.Generator().manual_seed(derive_seed(config.seed, "gan-noise"))
    per = config.batch_size // len(classes)
    fake_y = torch.tensor(
        [i for i in range(len(classes)) for _ in range(per)], dtype=torch.long
    )

    step = 0
    for epoch in range(config.epochs):
        batches = class_balanced_batches(
            train_set,
            config.batch_size,
            derive_seed(config.seed, "gan-batches", epoch),
            steps_per_epoch,
            classes,
        )
        for batch in batches:
            real_x = torch.from_numpy(
                np.stack([images[row[r.id]] for r in batch])
            ).permute(0, 3, 1, 2)
            real_y = torch.tensor([label_idx[r.label] for r in batch], dtype=torch.long)

            # Discriminator step: push real logits up, fake logits down.
            z = torch.randn(config.batch_size, config.dim_z, generator=noise)
            with torch.no_grad():
                fake_x = g_net(z, fake_y)
            d_real = d_net(real_x, real_y)
            d_fake = d_net(fake_x, fake_y)
            d_loss = (F.softplus(-d_real) + F.softplus(d_fake)).mean()
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()

            # Generator step: non-saturating loss on fresh noise.
            z = torch.randn(config.batch_size, config.dim_z, generator=noise)
            g_fake = d_net(g_net(z, fake_y), fake_y)
            g_loss = F.softplus(-g_fake).mean()
            opt_g.zero_grad()
            g_loss.backward()
            opt_g.step()

            history.append((float(d_loss.item()), float(g_loss.item())))
            step += 1
            if log_every and step % log_every == 0:
                print(f"step {step}/{total} d_loss={d_loss.item():.4f} g_loss={g_loss.item():.4f}")
            if step >= total:
                break
        if step >= total:
            break
    return Generator(g_net, config, classes), Discriminator(d_net, config, classes), history


def sample(
    generator: Generator, label: str, n: int, seed: int, id_prefix: str = "gen"
) -> list[ImageRecord]:
    """n generated records for one class; same (label, n, seed) -> same pixels."""
    if n < 0:
        raise GanError(f"sample count must be >= 0, got {n}")
    generator.class_index(label)  # validate before any work
    gen = torch.Generator().manual_seed(derive_seed(seed, "sample", label))
    z = torch.randn(n, generator.config.dim_z, generator=gen).numpy()
    images = generator.generate(z, label) if n else np.zeros((0, 1, 1, 3), np.float32)
    records = []
    for i in range(n):
        pixels = np.clip(np.rint(images[i] * 255.0), 0, 255).astype(np.uint8)
        records.append(
            ImageRecord(
                id=f"{id_prefix}-{label}-s{seed}-{i:05d}",
                view="top",
                source="generated",
                label=label,
                pixels=pixels,
            )
        )
    return records


def interpolate(
    generator: Generator, z_start: np.ndarray, z_end: np.ndarray, label: str, steps: int
) -> list[np.ndarray]:
    """Images along the straight line from z_start to z_end (inclusive).

    Endpoints reuse the exact input vectors, and identical endpoints collapse
    to a constant path, so frame pixels match direct generate() calls bit for
    bit.
    """
    if steps < 2:
        raise GanError(f"interpolation needs steps >= 2, got {steps}")
    z_start = np.asarray(z_start, dtype=np.float32).reshape(-1)
    z_end = np.asarray(z_end, dtype=np.float32).reshape(-1)
    if z_start.shape != z_end.shape:
        raise GanError(f"endpoint shapes differ: {z_start.shape} vs {z_end.shape}")
    if np.array_equal(z_start, z_end):
        frame = generator.generate(z_start, label)[0]
        return [frame.copy() for _ in range(steps)]
    frames = []
    for i in range(steps):
        if i == 0:
            z = z_start
        elif i == steps - 1:
            z = z_end
        else:
            t = np.float32(i / (steps - 1))
            z = (np.float32(1.0) - t) * z_start + t * z_end
        frames.append(generator.generate(z, label)[0])
    return frames


def augment_dataset(
    train_set: Dataset, generator: Generator, plan: BalancingPlan, seed: int
) -> Dataset:
    """Union of train_set and per-class generated records filling the plan."""
    stats = class_stats(train_set, classes=generator.classes)
    for cls in generator.classes:
        have = stats.counts[cls]
        want = plan.to_generate.get(cls, 0)
        if want < 0:
            raise DatasetError(f"plan.to_generate[{cls!r}] is negative: {want}")
        if have + want != plan.target_per_class:
            raise DatasetError(
                f"balancing plan inconsistent for {cls!r}: {have} present + {want} "
                f"generated != target {plan.target_per_class}"
            )
    generated: list[ImageRecord] = []
    for cls in generator.classes:
        n = plan.to_generate.get(cls, 0)
        if n:
            generated.extend(
                sample(generator, cls, n, derive_seed(seed, "augment", cls))
            )
    return train_set.union(Dataset(generated))


def save_gan(generator: Generator, discriminator: Discriminator, path: str | Path) -> None:
    """Single-archive checkpoint holding config, classes and both networks."""
    payload = {
        "config": asdict(generator.config),
        "classes": list(generator.classes),
        "generator": generator.net.state_dict(),
        "discriminator": discriminator.net.state_dict(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_gan(path: str | Path) -> tuple[Generator, Discriminator]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    cfg_raw = dict(payload["config"])
    cfg_raw["resolution"] = tuple(cfg_raw["resolution"])
    config = GanConfig(**cfg_raw)
    classes = tuple(payload["classes"])
    g_net = _GeneratorNet(config)
    g_net.load_state_dict(payload["generator"])
    d_net = _DiscriminatorNet(config)
    d_net.load_state_dict(payload["discriminator"])
    return Generator(g_net, config, classes), Discriminator(d_net, config, classes)
