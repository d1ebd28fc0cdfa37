"""Training loops: adversarial (generator + patch discriminator) and
plain-MSE baselines, with early stopping on validation R²."""

from __future__ import annotations

import json
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from torch.utils.data import DataLoader, TensorDataset

from .errors import EmptySplit, NonFiniteLoss
from .metrics import AVG_ROW
from .models import (ModelFamily, ModelSpec, as_model_fn, build_discriminator,
                     build_reconstructor, save_checkpoint)
from .preprocess import DEFAULT_STRIDE, WINDOW_LENGTH, PreprocessConfig, make_windows
from .report import evaluate_records

EARLY_STOP_SPLITS = ("val", "test")


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 14
    patience: int = 3
    batch_size: int = 16
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    lambda_recon: float = 100.0
    seed: int = 0
    window_length: int = WINDOW_LENGTH
    stride: int = DEFAULT_STRIDE
    early_stop_split: str = "val"
    deterministic: bool = False

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not 1 <= self.patience <= self.max_epochs:
            raise ValueError("patience must be in [1, max_epochs]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.lambda_recon < 0:
            raise ValueError("lambda_recon must be >= 0")
        if self.window_length < 1 or self.stride < 1:
            raise ValueError("window_length and stride must be >= 1")
        if self.early_stop_split not in EARLY_STOP_SPLITS:
            raise ValueError(f"early_stop_split must be one of {EARLY_STOP_SPLITS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class TrainResult:
    best_epoch: int
    best_val_r2: float
    epochs_run: int
    history: list = field(default_factory=list)
    best_path: Path | None = None
    last_path: Path | None = None
    log_path: Path | None = None


def seed_all(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)


def gan_step(generator: nn.Module, discriminator: nn.Module,
             opt_g: torch.optim.Optimizer, opt_d: torch.optim.Optimizer,
             inputs: torch.Tensor, targets: torch.Tensor,
             lambda_recon: float = 100.0) -> dict:
    """One discriminator update followed by one generator update.

    Patch logits are pushed toward 1 on real pairs and 0 on generated pairs;
    the generator is scored against all-ones plus an L1 reconstruction term."""
    fake = generator(inputs)

    d_real = discriminator(inputs, targets)
    d_fake = discriminator(inputs, fake.detach())
    loss_d = 0.5 * (
        F.binary_cross_entropy_with_logits(d_real, torch.ones_like(d_real))
        + F.binary_cross_entropy_with_logits(d_fake, torch.zeros_like(d_fake)))
    opt_d.zero_grad()
    loss_d.backward()
    opt_d.step()

    d_gen = discriminator(inputs, fake)
    loss_adv = F.binary_cross_entropy_with_logits(d_gen, torch.ones_like(d_gen))
    loss_l1 = F.l1_loss(fake, targets)
    loss_g = loss_adv + lambda_recon * loss_l1
    opt_g.zero_grad()
    loss_g.backward()
    opt_g.step()

    return {"loss_d": float(loss_d.detach()),
            "loss_g": float(loss_g.detach()),
            "loss_adv": float(loss_adv.detach()),
            "loss_l1": float(loss_l1.detach())}


def baseline_step(model: nn.Module, opt: torch.optim.Optimizer,
                  inputs: torch.Tensor, targets: torch.Tensor) -> dict:
    pred = model(inputs)
    loss = F.mse_loss(pred, targets)
    opt.zero_grad()
    loss.backward()
    opt.step()
    return {"loss": float(loss.detach())}


def _window_tensors(records, length: int, stride: int):
    xs, ys = [], []
    for rec in records:
        ds = make_windows(rec, length=length, stride=stride)
        for w in ds.windows:
            xs.append(w.input)
            ys.append(w.target)
    if not xs:
        raise EmptySplit(
            f"no training windows of length {length} could be cut from "
            f"{len(records)} record(s)")
    x = torch.from_numpy(np.stack(xs).astype(np.float32))
    y = torch.from_numpy(np.stack(ys).astype(np.float32))
    return TensorDataset(x, y)


def _check_finite(losses: dict, *, epoch: int, step: int, dump):
    for name, value in losses.items():
        if not np.isfinite(value):
            dump()
            raise NonFiniteLoss(
                f"{name}={value} at epoch {epoch}, step {step}; "
                "state saved for post-mortem")


def fit(train_records: list, val_records: list, *,
        model_spec: ModelSpec, config: TrainConfig,
        preprocess_config: PreprocessConfig,
        out_dir, val_metric_fn=None) -> TrainResult:
    """Train a reconstructor with early stopping.

    Stops once the validation metric (mean per-record, per-lead R² unless a
    custom ``val_metric_fn(model) -> float`` is injected) has not improved for
    ``config.patience`` consecutive epochs. Writes ``best.pt`` / ``last.pt``
    checkpoints and a JSONL epoch log under ``out_dir``.
    """
    if not train_records:
        raise EmptySplit("no records in the training split")
    if val_metric_fn is None and not val_records:
        raise EmptySplit("no records in the early-stopping split")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"
    best_path = out_dir / "best.pt"
    last_path = out_dir / "last.pt"

    seed_all(config.seed)
    if config.deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)

    model = build_reconstructor(model_spec)
    adversarial = model_spec.family is ModelFamily.GAN
    disc = build_discriminator(model_spec) if adversarial else None

    dataset = _window_tensors(train_records, config.window_length, config.stride)
    loader = DataLoader(dataset, batch_size=config.batch_size, shuffle=True,
                        generator=torch.Generator().manual_seed(config.seed))

    betas = (config.beta1, config.beta2)
    opt_g = torch.optim.Adam(model.parameters(), lr=config.lr, betas=betas)
    opt_d = (torch.optim.Adam(disc.parameters(), lr=config.lr, betas=betas)
             if adversarial else None)

    if val_metric_fn is None:
        def val_metric_fn(m):
            rep = evaluate_records(val_records, as_model_fn(m), model_name="val")
            return rep.overall[AVG_ROW].r2

    def checkpoint(path, epoch, step, val_r2):
        save_checkpoint(path, model_spec=model_spec, model=model,
                        discriminator=disc,
                        preprocess_config=preprocess_config.to_dict(),
                        preprocess_hash=preprocess_config.hash(),
                        epoch=epoch, step=step, val_r2=val_r2)

    history = []
    best_val = -np.inf
    best_epoch = 0
    stale = 0
    global_step = 0
    log = open(log_path, "w")
    try:
        for epoch in range(1, config.max_epochs + 1):
            model.train()
            if disc is not None:
                disc.train()
            epoch_losses: dict = {}
            n_batches = 0
            for inputs, targets in loader:
                if adversarial:
                    losses = gan_step(model, disc, opt_g, opt_d, inputs,
                                      targets, config.lambda_recon)
                else:
                    losses = baseline_step(model, opt_g, inputs, targets)
                global_step += 1
                _check_finite(
                    losses, epoch=epoch, step=global_step,
                    dump=lambda: checkpoint(out_dir / "diverged.pt", epoch,
                                            global_step, float("nan")))
                for k, v in losses.items():
                    epoch_losses[k] = epoch_losses.get(k, 0.0) + v
                n_batches += 1
            epoch_losses = {k: v / n_batches for k, v in epoch_losses.items()}

            model.eval()
            val_r2 = float(val_metric_fn(model))

            improved = val_r2 > best_val
            if improved:
                best_val = val_r2
                best_epoch = epoch
                stale = 0
                checkpoint(best_path, epoch, global_step, val_r2)
            else:
                stale += 1
            checkpoint(last_path, epoch, global_step, val_r2)

            entry = {"epoch": epoch, "step": global_step, "val_r2": val_r2,
                     "improved": improved, "best_epoch": best_epoch,
                     "time": time.time(), **epoch_losses}
            history.append(entry)
            log.write(json.dumps(entry) + "\n")
            log.flush()

            if stale >= config.patience:
                break
    finally:
        log.close()

    return TrainResult(best_epoch=best_epoch, best_val_r2=float(best_val),
                       epochs_run=len(history), history=history,
                       best_path=best_path, last_path=last_path,
                       log_path=log_path)
