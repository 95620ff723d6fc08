"""Task losses, deterministic seeding, and the optimization loop.

fit() is task-agnostic: it owns the optimizer, gradient clipping, epoch
bookkeeping, early stopping, and divergence handling, while the caller
supplies a loss function over (model, batch) and a validation metric
over the model. Every epoch appends one row to an optional CSV report.
"""

from __future__ import annotations

import csv
import math
import random
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import torch
from torch import nn

from .config import TrainSchedule
from .errors import DivergedTraining, ShapeMismatch
from .nn.core import PROB_FLOOR

REPORT_COLUMNS = ("epoch", "train_loss", "valid_metric", "wall_seconds")


def seed_everything(seed: int) -> None:
    """Seed torch, numpy, and random; pin torch to one thread.

    Single-threaded execution keeps floating-point reductions
    order-stable, which the bitwise determinism guarantees rely on.
    """
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
    torch.set_num_threads(1)


def classification_loss(probs: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean negative log-probability of the gold class.

    probs [B, C] are post-softmax; targets [B] are class indices. The
    picked probability is floored at 1e-9 inside the log.
    """
    if probs.dim() != 2 or targets.shape != probs.shape[:1]:
        raise ShapeMismatch(
            f"probs {tuple(probs.shape)} does not match targets {tuple(targets.shape)}"
        )
    picked = probs.gather(1, targets.view(-1, 1)).squeeze(1)
    return -torch.log(picked.clamp_min(PROB_FLOOR)).mean()


def scope_pair_loss(p: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy for same-scope probabilities.

    p [N] in [0, 1], y [N] in {0, 1}. Both log arguments are floored at
    1e-9 so saturated predictions stay finite.
    """
    if p.shape != y.shape:
        raise ShapeMismatch(f"p {tuple(p.shape)} does not match y {tuple(y.shape)}")
    y = y.to(p.dtype)
    return -(
        y * torch.log(p.clamp_min(PROB_FLOOR))
        + (1.0 - y) * torch.log((1.0 - p).clamp_min(PROB_FLOOR))
    ).mean()


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_metric: float
    wall_seconds: float


@dataclass
class FitResult:
    history: list[EpochRecord]
    best_epoch: int
    best_metric: float
    stopped_early: bool


def _clone_state(model: nn.Module) -> dict[str, torch.Tensor]:
    return {k: v.detach().clone() for k, v in model.state_dict().items()}


def _open_report(report_path: str | Path | None):
    if report_path is None:
        return None
    path = Path(report_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = path.open("w", newline="", encoding="utf-8")
    writer = csv.writer(handle)
    writer.writerow(REPORT_COLUMNS)
    handle.flush()
    return handle, writer


def fit(
    model: nn.Module,
    train_batches: Sequence,
    loss_fn: Callable[[nn.Module, object], torch.Tensor],
    metric_fn: Callable[[nn.Module], float],
    schedule: TrainSchedule,
    *,
    higher_is_better: bool = True,
    report_path: str | Path | None = None,
    trainable: Iterable[nn.Parameter] | None = None,
) -> FitResult:
    """Train with AdamW, clipping, early stopping, and best-weight restore.

    Batch order is reshuffled deterministically every epoch from the
    schedule seed. Training stops after `patience` epochs without
    improvement on the validation metric and the best weights are
    restored before returning. A non-finite loss or metric restores the
    last good weights and raises DivergedTraining. With epochs=0 the
    model is untouched and the report holds only the header row.
    """
    seed_everything(schedule.seed)
    params = list(trainable) if trainable is not None else list(model.parameters())
    optimizer = torch.optim.AdamW(
        params,
        lr=schedule.lr,
        betas=(schedule.beta1, schedule.beta2),
        eps=schedule.eps,
        weight_decay=schedule.weight_decay,
    )

    report = _open_report(report_path)
    fallback = _clone_state(model)
    best_state: dict[str, torch.Tensor] | None = None
    best_metric = -math.inf if higher_is_better else math.inf
    best_epoch = -1
    bad_epochs = 0
    history: list[EpochRecord] = []
    stopped_early = False

    def restore_last_good() -> None:
        model.load_state_dict(best_state if best_state is not None else fallback)

    try:
        for epoch in range(schedule.epochs):
            started = time.perf_counter()
            model.train()
            order = list(range(len(train_batches)))
            random.Random(schedule.seed * 100003 + epoch).shuffle(order)
            total = 0.0
            for index in order:
                batch = train_batches[index]
                optimizer.zero_grad(set_to_none=True)
                loss = loss_fn(model, batch)
                if not bool(torch.isfinite(loss)):
                    restore_last_good()
                    raise DivergedTraining(
                        f"non-finite training loss in epoch {epoch}",
                        report={"epoch": epoch, "batch": index},
                    )
                loss.backward()
                nn.utils.clip_grad_norm_(params, schedule.clip_norm)
                optimizer.step()
                total += float(loss.detach())
            train_loss = total / max(len(train_batches), 1)

            model.eval()
            with torch.no_grad():
                valid_metric = float(metric_fn(model))
            if not math.isfinite(valid_metric):
                restore_last_good()
                raise DivergedTraining(
                    f"non-finite validation metric in epoch {epoch}",
                    report={"epoch": epoch},
                )

            record = EpochRecord(
                epoch, train_loss, valid_metric, time.perf_counter() - started
            )
            history.append(record)
            if report is not None:
                handle, writer = report
                writer.writerow(
                    [record.epoch, record.train_loss, record.valid_metric,
                     f"{record.wall_seconds:.6f}"]
                )
                handle.flush()

            improved = (
                valid_metric > best_metric
                if higher_is_better
                else valid_metric < best_metric
            )
            if improved:
                best_metric = valid_metric
                best_epoch = epoch
                best_state = _clone_state(model)
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= schedule.patience:
                    stopped_early = True
                    break
    finally:
        if report is not None:
            report[0].close()

    if best_state is not None:
        model.load_state_dict(best_state)
    return FitResult(
        history=history,
        best_epoch=best_epoch,
        best_metric=best_metric if best_epoch >= 0 else math.nan,
        stopped_early=stopped_early,
    )
