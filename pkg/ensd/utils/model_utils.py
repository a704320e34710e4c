from __future__ import annotations

from typing import Sequence

import torch
import torch.nn as nn
from omegaconf import DictConfig
from torch.optim import Adam, AdamW, Optimizer
from torch.utils.data import DataLoader
from torch.optim.lr_scheduler import (
    LRScheduler,
    SequentialLR,
    LinearLR,
    CosineAnnealingLR,
    ConstantLR,
)

from ensd.dataset.examples import ExampleDataset
from ensd.errors import ConfigError
from ensd.model.transducer import TransducerModel
from ensd.model.weighter import WeighterModel
from ensd.tokenizer import Tokenizer

TRANSDUCER = "transducer"
WEIGHTER = "weighter"


def get_tokenizer(vocab: list[str]) -> Tokenizer:
    return Tokenizer(vocab)


def get_model(args: DictConfig, tokenizer: Tokenizer, feature_dim: int) -> TransducerModel:
    return TransducerModel(args, tokenizer, feature_dim)


def get_weighter(args: DictConfig, tokenizer: Tokenizer, feature_dim: int, num_experts: int) -> WeighterModel:
    return WeighterModel(args, tokenizer, feature_dim, num_experts)


def build_model(kind: str, arch: DictConfig, tokenizer: Tokenizer) -> nn.Module:
    """Rebuild a model from checkpoint architecture settings."""
    if kind == TRANSDUCER:
        return get_model(arch, tokenizer, arch.feature_dim)
    if kind == WEIGHTER:
        return get_weighter(arch, tokenizer, arch.feature_dim, arch.num_experts)
    raise ConfigError("checkpoint.kind", f"unknown model kind {kind!r}")


def get_optimizer(model: nn.Module, args: DictConfig) -> Optimizer:
    no_decay = ["bias", "norm"]

    optimizer_grouped_parameters = [
        {
            "params": [
                p
                for n, p in model.named_parameters()
                if not any(nd in n for nd in no_decay)
            ],
            "weight_decay": args.weight_decay,
        },
        {
            "params": [
                p
                for n, p in model.named_parameters()
                if any(nd in n for nd in no_decay)
            ],
            "weight_decay": 0.0,
        },
    ]

    if args.name == "adam":
        optimizer = Adam(optimizer_grouped_parameters, lr=args.base_lr)
    elif args.name == "adamw":
        optimizer = AdamW(optimizer_grouped_parameters, lr=args.base_lr)
    else:
        raise ConfigError("optim.name", f"unknown optimizer {args.name!r}")

    return optimizer


def get_scheduler(optimizer: Optimizer, args: DictConfig) -> LRScheduler:
    if args.lr_scheduler == "constant":
        return ConstantLR(optimizer, factor=1.0, total_iters=0)
    if args.lr_scheduler != "cosine":
        raise ConfigError("optim.lr_scheduler", f"unknown scheduler {args.lr_scheduler!r}")

    scheduler_p1 = LinearLR(
        optimizer,
        start_factor=0.5,
        end_factor=1,
        total_iters=args.warmup_steps,
        last_epoch=-1,
    )

    scheduler_p2 = CosineAnnealingLR(
        optimizer,
        T_max=max(1, args.total_steps - args.warmup_steps),
        eta_min=args.final_cosine,
    )

    scheduler = SequentialLR(
        optimizer,
        schedulers=[scheduler_p1, scheduler_p2],
        milestones=[args.warmup_steps],
    )

    return scheduler


def get_dataloader(examples: Sequence, args: DictConfig, seed: int) -> DataLoader:
    """Seeded shuffles of whole examples; every epoch drops its last partial batch."""
    dataset = ExampleDataset(examples)
    return DataLoader(
        dataset,
        batch_size=min(args.batch_size, len(dataset)),
        shuffle=True,
        drop_last=True,
        collate_fn=list,
        generator=torch.Generator().manual_seed(seed),
    )
