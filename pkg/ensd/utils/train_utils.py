from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Union

import torch
import torch.nn as nn
from accelerate import Accelerator
from accelerate.logging import get_logger
from accelerate.utils import ProjectConfiguration
from omegaconf import DictConfig
from torch.optim import Optimizer
from torch.optim.lr_scheduler import LRScheduler
from torch.utils.data import DataLoader

from ensd.errors import NumericError
from .log_utils import Averager

logger = get_logger(__name__)

StepFn = Callable[[nn.Module, Any], tuple[torch.Tensor, dict]]


@dataclass
class TrainingState:
    current_train_step: int = 1
    current_epoch: int = 1
    last_log: float = field(default_factory=time.time)
    current_loss: float = float("inf")
    history: list[dict] = field(default_factory=list)


def get_accelerator(args: DictConfig, project_dir: Union[str, Path], run_name: str) -> Accelerator:
    log_with = args.logging.log_with
    accelerator = Accelerator(
        cpu=True,
        log_with=None if log_with in (None, "none") else log_with,
        project_config=ProjectConfiguration(
            project_dir=str(project_dir), logging_dir=str(Path(project_dir) / "tensorboard_logs")
        ),
    )
    accelerator.init_trackers(run_name)
    return accelerator


def add_prefix(prefix: str, stats: dict[str, float]):
    return {f"{prefix}/{k}": v for k, v in stats.items()}


def check_finite(loss: torch.Tensor, state: TrainingState) -> None:
    if not torch.isfinite(loss).all():
        raise NumericError(f"loss became {loss.item()} at step {state.current_train_step}")


def maybe_logging(
        model: nn.Module,
        accelerator: Accelerator,
        optimizer: Optimizer,
        averager: Averager,
        args: DictConfig,
        state: TrainingState,
        prefix: str,
        final: bool = False,
):
    def extra_stats(args, state, model, optimizer):
        stats = {}

        if args.logging.weights_l2:
            weights_l2 = (
                    sum(p.detach().norm(2).item() ** 2 for p in model.parameters() if p.requires_grad) ** 0.5
            )
            stats["weights_l2"] = weights_l2

        stats["lr"] = optimizer.param_groups[0]["lr"]
        stats["seconds_per_step"] = (time.time() - state.last_log) / args.logging.every_steps

        return stats

    due = bool(averager.total) if final else state.current_train_step % args.logging.every_steps == 0
    if due:
        stats = extra_stats(args, state, model, optimizer)

        averager.update(stats)
        averaged_stats = averager.average()
        averaged_stats["epoch"] = state.current_epoch
        averaged_stats = add_prefix(prefix, averaged_stats)
        accelerator.log(averaged_stats, step=state.current_train_step)
        averaged_stats["step"] = state.current_train_step
        logger.info(averaged_stats)
        state.history.append(averaged_stats)

        state.last_log = time.time()


def maybe_grad_clip_and_grad_calc(
        model: nn.Module,
        accelerator: Accelerator,
        args: DictConfig,
):
    if args.grad_clip > 0:
        grad_l2 = accelerator.clip_grad_norm_(
            parameters=model.parameters(),
            max_norm=args.grad_clip,
            norm_type=2,
        ).item()
    else:
        grad_l2 = None

    if grad_l2 is None:
        grad_l2 = (
                sum(
                    p.grad.detach().norm(2).item() ** 2 for p in model.parameters() if p.grad is not None
                )
                ** 0.5
        )

    return {"grad_l2": grad_l2}


def train(
        model: nn.Module,
        dataloader: DataLoader,
        step_fn: StepFn,
        accelerator: Accelerator,
        lr_scheduler: LRScheduler,
        optimizer: Optimizer,
        optim_args: DictConfig,
        args: DictConfig,
        state: TrainingState,
        prefix: str = "train",
        max_steps: Optional[int] = None,
) -> TrainingState:
    """Run optimizer steps over epochs of the dataloader until the step budget is spent.

    Each step averages `step_fn` losses over the examples of one batch.

    Args:
        model: Model being trained, already prepared by the accelerator.
        dataloader: Batches of per-utterance examples, each passed to `step_fn` as is.
        step_fn: Returns the loss of one example and the stats to log for it.
        accelerator: Accelerator handling backward passes and trackers.
        lr_scheduler: Learning rate schedule stepped after every update.
        optimizer: Optimizer over the model parameters.
        optim_args: Optimizer section of the config.
        args: Full config, for the logging section.
        state: Step counters and logged history, updated in place.
        prefix: Tracker namespace of the logged stats.
        max_steps: Overrides `optim_args.total_steps`.
    """
    total_steps = max_steps or optim_args.total_steps
    model.train()
    train_averager = Averager()

    while state.current_train_step <= total_steps:
        for batch in dataloader:
            if state.current_train_step > total_steps:
                break

            optimizer.zero_grad(set_to_none=True)
            losses = []
            for example in batch:
                loss, stats = step_fn(model, example)
                losses.append(loss)
                train_averager.update(stats)
            loss = torch.stack(losses).mean()
            check_finite(loss, state)
            state.current_loss = loss.item()

            accelerator.backward(loss)
            train_averager.update({"loss": loss.detach()})
            train_averager.update(maybe_grad_clip_and_grad_calc(model, accelerator, optim_args))

            optimizer.step()
            lr_scheduler.step()

            maybe_logging(model, accelerator, optimizer, train_averager, args, state, prefix)
            state.current_train_step += 1

        state.current_epoch += 1

    maybe_logging(model, accelerator, optimizer, train_averager, args, state, prefix, final=True)
    model.eval()
    return state
