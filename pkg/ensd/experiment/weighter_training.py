from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import torch
from accelerate.logging import get_logger
from accelerate.utils import set_seed
from omegaconf import DictConfig

from ensd.confidence.nbest import NBestEntry, NBestList, entropy
from ensd.dataset import Split, Utterance
from ensd.errors import ConfigError
from ensd.fusion import VotingScheme, fuse_table
from ensd.metrics.alignment import TokenSequence, tokenize
from ensd.metrics.wer import best_expert_labels, wer
from ensd.model import WeighterModel, arch_dict, load_checkpoint, save_checkpoint, weighter_forward
from ensd.tokenizer import Tokenizer
from ensd.utils import (
    WEIGHTER,
    TrainingState,
    derive_seed,
    get_accelerator,
    get_dataloader,
    get_optimizer,
    get_scheduler,
    get_weighter,
    train,
)
from ensd.weighting.bce import bce_loss
from .workdir import LABELED, Workdir, feature_dim, feature_tensor, load_nbest_table, load_tokenizer, \
    load_utterances, nbest_row

logger = get_logger(__name__)

WEIGHTER_SEED_KEY = 2


@dataclass(frozen=True)
class WeighterExample:
    utt_id: str
    features: torch.Tensor
    hyps: list[TokenSequence]
    transcripts: list[list[int]]
    entropies: list[float]
    labels: Optional[tuple[int, ...]] = None
    wers: Optional[tuple[Fraction, ...]] = None


def weighted_experts(args: DictConfig) -> int:
    """Number of transcripts the weighter weighs: the experts, plus ROVER when it is included."""
    return args.experts.k + int(args.experts.include_rover)


def with_rover_expert(table: dict[str, list[NBestList]], scheme: VotingScheme) -> dict[str, list[NBestList]]:
    """Append each utterance's ROVER transcript as one more expert with a single entry."""
    fused = fuse_table(table, scheme)
    return {
        utt_id: row + [NBestList(utt_id, len(row) + 1, (NBestEntry(fused[utt_id], 1.0),))]
        for utt_id, row in table.items()
    }


def weighter_table(args: DictConfig, workdir: Workdir, corpus: str) -> dict[str, list[NBestList]]:
    """Expert n-best lists of a corpus as the weighter sees them."""
    table = load_nbest_table(workdir, corpus, args.experts.k, args.decode.n_max)
    if args.experts.include_rover:
        table = with_rover_expert(table, VotingScheme.parse(args.rover.scheme))
    return table


def weighter_examples(
        utterances: Sequence[Utterance],
        table: dict[str, list[NBestList]],
        tokenizer: Tokenizer,
        with_labels: bool,
) -> list[WeighterExample]:
    """Pair each utterance with the experts' 1-best transcripts and n-best entropies.

    Labels mark every expert whose transcript has the lowest WER. They and the
    per-expert WERs are only computed when `with_labels` is set, which reads the
    reference transcript.
    """
    examples = []
    for utterance in utterances:
        row = nbest_row(table, utterance.utt_id)
        hyps = [nbest.one_best for nbest in row]
        ref = tokenize(utterance.ref_text) if with_labels else None
        examples.append(WeighterExample(
            utt_id=utterance.utt_id,
            features=feature_tensor(utterance),
            hyps=hyps,
            transcripts=[tokenizer.encode(h) for h in hyps],
            entropies=[entropy(nbest) for nbest in row],
            labels=None if ref is None else best_expert_labels(ref, hyps),
            wers=None if ref is None else tuple(wer(ref, h) for h in hyps),
        ))
    return examples


def train_weighter(args: DictConfig) -> TrainingState:
    """Fit the Smart-Weighter on the labeled weighter split with BCE on best-expert labels."""
    workdir = Workdir.from_args(args)
    tokenizer = load_tokenizer(workdir)
    num_features = feature_dim(workdir)
    num_experts = weighted_experts(args)
    table = weighter_table(args, workdir, LABELED)
    utterances = load_utterances(workdir, LABELED, splits=[Split.WEIGHTER])
    if not utterances:
        raise ConfigError("corpus.split_fractions", "the labeled corpus has no weighter split")
    examples = weighter_examples(utterances, table, tokenizer, with_labels=True)

    seed = derive_seed(args.seed, WEIGHTER_SEED_KEY)
    set_seed(seed)
    model = get_weighter(args.weighter, tokenizer, num_features, num_experts)
    optimizer = get_optimizer(model, args.weighter_optim)
    scheduler = get_scheduler(optimizer, args.weighter_optim)
    accelerator = get_accelerator(args, workdir.root, "weighter")
    dataloader = get_dataloader(examples, args.weighter_optim, seed)
    model, optimizer, scheduler, dataloader = accelerator.prepare(model, optimizer, scheduler, dataloader)

    rng = np.random.default_rng(seed)
    use_entropy = args.weighter.use_entropy

    def weighter_step(model: WeighterModel, example: WeighterExample):
        # expert order is shuffled per example so position carries no label information
        order = rng.permutation(num_experts) if args.weighter_train.shuffle_experts else np.arange(num_experts)
        weights = model(
            example.features,
            [example.transcripts[i] for i in order],
            [example.entropies[i] for i in order] if use_entropy else None,
            expert_ids=order.tolist(),
        )
        targets = [example.labels[i] for i in order]
        loss, _ = bce_loss(weights, targets)
        chosen = int(order[int(weights.argmax())])
        return loss, {"accuracy": float(example.labels[chosen]), "chosen_wer": example.wers[chosen]}

    state = train(model, dataloader, weighter_step, accelerator, scheduler, optimizer, args.weighter_optim, args,
                  TrainingState(), prefix="weighter")

    save_checkpoint(
        workdir.weighter,
        accelerator.unwrap_model(model),
        WEIGHTER,
        arch_dict(args.weighter, feature_dim=num_features, num_experts=num_experts),
        tokenizer,
        seed,
        state.current_train_step - 1,
    )
    accelerator.end_training()
    trajectory = [round(h["weighter/accuracy"], 4) for h in state.history if "weighter/accuracy" in h]
    logger.info(f"Weighter training accuracy trajectory: {trajectory}")
    return state


@torch.no_grad()
def predict_weights(model: WeighterModel, examples: Sequence[WeighterExample]) -> np.ndarray:
    """Raw weighter outputs in natural expert order, one row per example."""
    model.eval()
    rows = []
    for example in examples:
        entropies = example.entropies if model.use_entropy else None
        rows.append(weighter_forward(model, example.features, example.transcripts, entropies).cpu().numpy())
    return np.stack(rows) if rows else np.zeros((0, model.num_experts))


def load_weighter(workdir: Workdir, num_experts: Optional[int] = None) -> WeighterModel:
    if not workdir.weighter.exists():
        raise ConfigError("weighter", f"no weighter checkpoint at {workdir.weighter}; run train_weighter first")
    model, _, _ = load_checkpoint(workdir.weighter)
    if num_experts is not None and model.num_experts != num_experts:
        raise ConfigError("experts.include_rover", f"the weighter checkpoint weighs {model.num_experts} transcripts, "
                                                   f"expected {num_experts}; run train_weighter again")
    return model
