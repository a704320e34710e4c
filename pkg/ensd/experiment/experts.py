from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import torch
from accelerate.logging import get_logger
from accelerate.utils import set_seed
from omegaconf import DictConfig

from ensd.dataset import Utterance
from ensd.errors import ConfigError
from ensd.metrics.alignment import tokenize
from ensd.model import TransducerModel, arch_dict, save_checkpoint, student_forward
from ensd.rnnt import rnnt_loss
from ensd.tokenizer import Tokenizer
from ensd.utils import (
    TRANSDUCER,
    TrainingState,
    derive_seed,
    get_accelerator,
    get_dataloader,
    get_model,
    get_optimizer,
    get_scheduler,
    train,
)
from .workdir import LABELED, Workdir, expert_utterances, feature_dim, feature_tensor, load_partition, \
    load_tokenizer, load_utterances

logger = get_logger(__name__)

EXPERT_SEED_KEY = 1


@dataclass(frozen=True)
class TranscribedExample:
    utt_id: str
    features: torch.Tensor
    tokens: list[int]


def labeled_examples(utterances: Sequence[Utterance], tokenizer: Tokenizer) -> list[TranscribedExample]:
    return [
        TranscribedExample(u.utt_id, feature_tensor(u), tokenizer.encode(tokenize(u.ref_text)))
        for u in utterances
    ]


def transducer_step(model: TransducerModel, example: TranscribedExample):
    lattice = student_forward(model, example.features, example.tokens)
    return rnnt_loss(lattice, example.tokens), {}


def train_transducer(
        args: DictConfig,
        examples: Sequence,
        step_fn,
        tokenizer: Tokenizer,
        num_features: int,
        seed: int,
        run_name: str,
        out_path: Path,
        optim_args: DictConfig,
) -> TrainingState:
    """Train a fresh transducer with `step_fn` and write it to `out_path`."""
    workdir = Workdir.from_args(args)
    set_seed(seed)
    model = get_model(args.transducer, tokenizer, num_features)
    optimizer = get_optimizer(model, optim_args)
    scheduler = get_scheduler(optimizer, optim_args)
    accelerator = get_accelerator(args, workdir.root, run_name)
    dataloader = get_dataloader(examples, optim_args, seed)
    model, optimizer, scheduler, dataloader = accelerator.prepare(model, optimizer, scheduler, dataloader)

    state = train(model, dataloader, step_fn, accelerator, scheduler, optimizer, optim_args, args,
                  TrainingState(), prefix=run_name)

    save_checkpoint(
        out_path,
        accelerator.unwrap_model(model),
        TRANSDUCER,
        arch_dict(args.transducer, feature_dim=num_features),
        tokenizer,
        seed,
        state.current_train_step - 1,
    )
    accelerator.end_training()
    logger.info(f"Saved {run_name} to {out_path} after {state.current_train_step - 1} steps, "
                f"last loss {state.current_loss:.4f}")
    return state


def train_experts(args: DictConfig) -> list[TrainingState]:
    """Train one transducer per partition split on ground-truth transcripts."""
    workdir = Workdir.from_args(args)
    tokenizer = load_tokenizer(workdir)
    num_features = feature_dim(workdir)
    partition = load_partition(workdir)
    if partition.k != args.experts.k:
        raise ConfigError("experts.k", f"partition has {partition.k} experts, config asks for {args.experts.k}")
    utterances = load_utterances(workdir, LABELED)

    states = []
    for k in range(1, partition.k + 1):
        split = expert_utterances(utterances, partition, k)
        if not split:
            raise ConfigError("experts", f"expert {k} has no training utterances")
        logger.info(f"Training expert {k} on {len(split)} utterances from {len(partition.speakers(k))} speakers")
        states.append(train_transducer(
            args,
            labeled_examples(split, tokenizer),
            transducer_step,
            tokenizer,
            num_features,
            derive_seed(args.seed, EXPERT_SEED_KEY, k),
            f"expert{k}",
            workdir.expert(k),
            args.optim,
        ))
    return states
