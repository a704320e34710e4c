from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch
from accelerate.logging import get_logger
from omegaconf import DictConfig

from ensd.confidence.nbest import NBestList
from ensd.dataset import Split, Utterance
from ensd.errors import ConfigError
from ensd.fusion import VotingScheme
from ensd.metrics.alignment import TokenSequence, tokenize
from ensd.metrics.wer import corpus_wer
from ensd.model import TransducerModel
from ensd.rnnt import weighted_multi_teacher_loss
from ensd.tokenizer import Tokenizer
from ensd.utils import TrainingState, derive_seed
from ensd.weighting.policies import (
    Policy,
    best_expert_weights,
    oracle_weights,
    temperature_renormalize,
    uniform_weights,
)
from .experts import train_transducer
from .fuse import fuse_corpus, fusion_settings
from .weighter_training import load_weighter, predict_weights, weighted_experts, weighter_examples, \
    with_rover_expert
from .workdir import LABELED, POOL, Workdir, feature_dim, feature_tensor, load_nbest_table, load_tokenizer, \
    load_utterances, nbest_row, read_fused, read_fusion_settings, write_jsonl

logger = get_logger(__name__)

STUDENT_SEED_KEY = 3


@dataclass(frozen=True)
class Supervision:
    """Teacher transcripts of one utterance and the weight each gets in the student loss."""
    utt_id: str
    transcripts: list[TokenSequence]
    weights: np.ndarray

    def to_record(self, policy: Policy) -> dict:
        return {"utt_id": self.utt_id, "weights": [float(w) for w in self.weights], "policy": policy.value}


@dataclass(frozen=True)
class StudentExample:
    utt_id: str
    features: torch.Tensor
    transcripts: list[list[int]]
    weights: np.ndarray


def expert_wer_table(workdir: Workdir, split: str, num_experts: int, n_max: int) -> list[float]:
    """Corpus WER of every expert's 1-best on a labeled split."""
    table = load_nbest_table(workdir, LABELED, num_experts, n_max)
    utterances = [u for u in load_utterances(workdir, LABELED, splits=[split]) if u.utt_id in table]
    if not utterances:
        raise ConfigError("student.best_expert_split", f"no decoded utterances in split {split!r}")
    refs = [tokenize(u.ref_text) for u in utterances]
    return [
        float(corpus_wer(refs, [table[u.utt_id][k].one_best for u in utterances]))
        for k in range(num_experts)
    ]


def supervise(
        policy: Policy,
        utterances: Sequence[Utterance],
        table: dict[str, list[NBestList]],
        temperature: float = 1.0,
        dev_wers: Optional[Sequence[float]] = None,
        fused: Optional[dict[str, TokenSequence]] = None,
        weighter_weights: Optional[dict[str, np.ndarray]] = None,
) -> list[Supervision]:
    """Per-utterance teacher weights under a policy.

    Only the oracle policy reads reference transcripts; the others see audio
    and expert transcripts alone.
    """
    records = []
    for utterance in utterances:
        hyps = [nbest.one_best for nbest in nbest_row(table, utterance.utt_id)]
        if policy == Policy.ROVER:
            records.append(Supervision(utterance.utt_id, [fused[utterance.utt_id]], np.ones(1)))
            continue
        if policy == Policy.BEST_EXPERT:
            weights = best_expert_weights(dev_wers)
        elif policy == Policy.ALL_EXPERTS:
            weights = uniform_weights(len(hyps))
        elif policy == Policy.SMART_WEIGHTER:
            weights = temperature_renormalize(weighter_weights[utterance.utt_id], temperature)
        elif policy == Policy.ORACLE:
            weights = oracle_weights(tokenize(utterance.ref_text), hyps)
        else:
            raise ConfigError("student.policy", f"unhandled policy {policy}")
        records.append(Supervision(utterance.utt_id, hyps, weights))
    return records


def policy_supervision(args: DictConfig, policy: Policy, utterances: Sequence[Utterance],
                       table: dict[str, list[NBestList]]) -> list[Supervision]:
    workdir = Workdir.from_args(args)
    num_experts = args.experts.k
    dev_wers = fused = weighter_weights = None

    if policy == Policy.BEST_EXPERT:
        dev_wers = expert_wer_table(workdir, args.student.best_expert_split, num_experts, args.decode.n_max)
        logger.info(f"Expert WERs on {args.student.best_expert_split}: {[round(w, 4) for w in dev_wers]}")
    elif policy == Policy.ROVER:
        path = workdir.fused(POOL)
        if not path.exists() or read_fusion_settings(path) != fusion_settings(args):
            logger.info(f"Fusing the pool again with {args.rover.scheme} voting")
            fuse_corpus(args, POOL)
        fused = read_fused(path)
    elif policy == Policy.SMART_WEIGHTER:
        # weights depend only on audio and fixed expert transcripts, so they are computed once
        if args.experts.include_rover:
            table = with_rover_expert(table, VotingScheme.parse(args.rover.scheme))
        model = load_weighter(workdir, weighted_experts(args))
        examples = weighter_examples(utterances, table, load_tokenizer(workdir), with_labels=False)
        weighter_weights = dict(zip((e.utt_id for e in examples), predict_weights(model, examples)))

    return supervise(policy, utterances, table, args.student.temperature, dev_wers, fused, weighter_weights)


def student_examples(utterances: Sequence[Utterance], supervision: Sequence[Supervision],
                     tokenizer: Tokenizer) -> list[StudentExample]:
    by_id = {s.utt_id: s for s in supervision}
    return [
        StudentExample(
            u.utt_id,
            feature_tensor(u),
            [tokenizer.encode(t) for t in by_id[u.utt_id].transcripts],
            by_id[u.utt_id].weights,
        )
        for u in utterances
    ]


def student_step(model: TransducerModel, example: StudentExample):
    return weighted_multi_teacher_loss(model, example.features, example.transcripts, example.weights), {}


def train_student(args: DictConfig, policy: Optional[str] = None) -> TrainingState:
    """Train a student on the unlabeled pool from expert transcripts weighted by a policy."""
    policy = Policy.parse(policy or args.student.policy)
    workdir = Workdir.from_args(args)
    tokenizer = load_tokenizer(workdir)
    table = load_nbest_table(workdir, POOL, args.experts.k, args.decode.n_max)
    utterances = load_utterances(workdir, POOL, splits=[Split.POOL], guard=not policy.reads_references)
    if not utterances:
        raise ConfigError("pool", "the student pool is empty")

    supervision = policy_supervision(args, policy, utterances, table)
    write_jsonl(workdir.supervision(policy.value), (s.to_record(policy) for s in supervision))
    logger.info(f"Training {policy.value} student on {len(utterances)} pool utterances")

    return train_transducer(
        args,
        student_examples(utterances, supervision, tokenizer),
        student_step,
        tokenizer,
        feature_dim(workdir, POOL),
        derive_seed(args.seed, STUDENT_SEED_KEY),
        f"student_{policy.value}",
        workdir.student(policy.value),
        args.student_optim,
    )
