from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from accelerate.logging import get_logger
from omegaconf import DictConfig

from ensd.dataset import Utterance
from ensd.errors import ConfigError, EmptySet, UndefinedWER
from ensd.fusion import VotingScheme, fuse_table
from ensd.metrics import corpus_wer, tokenize, weighted_wer, weighter_accuracy
from ensd.metrics.alignment import TokenSequence
from ensd.model import load_checkpoint
from ensd.utils import config_hash
from ensd.weighting.policies import Policy, oracle_weights, uniform_weights
from .decode import transcribe
from .report import MetricsReport
from .student import expert_wer_table
from .weighter_training import load_weighter, predict_weights, weighted_experts, weighter_examples, weighter_table
from .workdir import LABELED, Workdir, expert_utterances, load_partition, load_tokenizer, \
    load_utterances, require

logger = get_logger(__name__)

WEIGHTED_WER_REFERENCES = ("ground_truth", "best_expert")
ROVER_TRANSCRIPTS = "rover_transcripts"


def evaluation_splits(args: DictConfig, workdir: Workdir, utterances: Sequence[Utterance]) -> dict[str, list[Utterance]]:
    """Each expert's own training split followed by the held-out labeled splits."""
    partition = load_partition(workdir)
    splits = {f"expert{k}": expert_utterances(utterances, partition, k) for k in range(1, partition.k + 1)}
    for name in args.evaluate.splits:
        splits[name] = [u for u in utterances if u.split.value == name]
    for name, split in splits.items():
        if not split:
            raise EmptySet(f"split {name!r} has no utterances to evaluate")
    return splits


def model_checkpoints(args: DictConfig, workdir: Workdir) -> dict[str, str]:
    models = {f"expert{k}": str(require(workdir.expert(k), "workdir", "expert checkpoint"))
              for k in range(1, args.experts.k + 1)}
    for policy in Policy:
        path = workdir.student(policy.value)
        if path.exists():
            models[f"student_{policy.value}"] = str(path)
    return models


def weighter_rows(
        args: DictConfig,
        workdir: Workdir,
        report: MetricsReport,
        splits: dict[str, list[Utterance]],
) -> None:
    """Weighter quality per held-out split.

    Adds accuracy and weighted WER rows for the weighter, uniform weights and
    oracle weights, all over the transcripts the weighter weighs, and a WER row
    for the ROVER transcripts of the experts.
    """
    reference = args.metrics.weighted_wer_reference
    if reference not in WEIGHTED_WER_REFERENCES:
        raise ConfigError("metrics.weighted_wer_reference", f"expected one of {WEIGHTED_WER_REFERENCES}, got {reference!r}")

    num_experts = weighted_experts(args)
    table = weighter_table(args, workdir, LABELED)
    fused = fuse_table({u: row[:args.experts.k] for u, row in table.items()}, VotingScheme.parse(args.rover.scheme))
    model = load_weighter(workdir, num_experts)
    tokenizer = load_tokenizer(workdir)
    pseudo_expert = None
    if reference == "best_expert":
        wers = expert_wer_table(workdir, args.student.best_expert_split, args.experts.k, args.decode.n_max)
        pseudo_expert = int(np.argmin(wers))

    for name in args.evaluate.splits:
        utterances = [u for u in splits[name] if u.utt_id in table]
        if not utterances:
            raise EmptySet(f"split {name!r} has no decoded utterances for the weighter")
        examples = weighter_examples(utterances, table, tokenizer, with_labels=False)
        predictions = predict_weights(model, examples)
        refs = [tokenize(u.ref_text) for u in utterances]
        hyps = [e.hyps for e in examples]
        candidates = {
            "weighter": list(predictions),
            "uniform_weights": [uniform_weights(num_experts)] * len(examples),
            "oracle_weights": [oracle_weights(r, h) for r, h in zip(refs, hyps)],
        }
        scoring_refs = refs if pseudo_expert is None else [h[pseudo_expert] for h in hyps]
        for label, weights in candidates.items():
            report.add(
                name,
                label,
                accuracy=weighter_accuracy(weights, refs, hyps),
                weighted_wer=_mean_weighted_wer(weights, scoring_refs, hyps),
            )
        report.add(name, ROVER_TRANSCRIPTS, wer=float(corpus_wer(refs, [fused[u.utt_id] for u in utterances])))


def _mean_weighted_wer(
        weights: Sequence[np.ndarray],
        refs: Sequence[TokenSequence],
        hyps: Sequence[Sequence[TokenSequence]],
) -> Optional[float]:
    values = []
    for w, ref, utt_hyps in zip(weights, refs, hyps):
        try:
            values.append(weighted_wer(w, ref, utt_hyps))
        except UndefinedWER:
            # an empty pseudo-reference scores nothing
            continue
    return float(np.mean(values)) if values else None


def evaluate(args: DictConfig) -> MetricsReport:
    """WER of every expert and student on every split, plus weighter quality when a weighter exists."""
    workdir = Workdir.from_args(args)
    utterances = load_utterances(workdir, LABELED)
    splits = evaluation_splits(args, workdir, utterances)
    needed = list({u.utt_id: u for split in splits.values() for u in split}.values())

    report = MetricsReport(
        seeds={"seed": args.seed, "corpus": args.corpus.seed, "pool_speakers": args.pool.speaker_seed},
        config_hash=config_hash(args),
    )
    for name, path in model_checkpoints(args, workdir).items():
        model, tokenizer, _ = load_checkpoint(path)
        texts = transcribe(model, tokenizer, needed, args.decode.max_symbols, args.threads, f"Evaluating {name}")
        if name.startswith("student_"):
            report.policies.append(name[len("student_"):])
        for split, split_utterances in splits.items():
            refs = [tokenize(u.ref_text) for u in split_utterances]
            report.add(split, name, wer=float(corpus_wer(refs, [texts[u.utt_id] for u in split_utterances])))

    if args.evaluate.weighter and workdir.weighter.exists():
        weighter_rows(args, workdir, report, splits)

    for row in report.rows:
        logger.info(f"{row.split:>10} {row.model:>24} wer={row.wer} accuracy={row.accuracy} "
                    f"weighted_wer={row.weighted_wer}")
    return report
