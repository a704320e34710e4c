from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
from accelerate.logging import get_logger
from omegaconf import DictConfig

from ensd.confidence.nbest import NBestList
from ensd.errors import ConfigError
from ensd.fusion import VotingScheme, fuse_table, rover_order_sensitivity
from ensd.metrics.alignment import TokenSequence
from .weighter_training import load_weighter, predict_weights, weighter_examples
from .workdir import Workdir, load_nbest_table, load_tokenizer, load_utterances, write_jsonl

logger = get_logger(__name__)

CONFIDENCE_SOURCES = ("score", "weighter")


def fusion_settings(args: DictConfig) -> dict:
    """Settings that change the fused transcripts, stored with every fused record."""
    source = args.rover.confidence_source
    if source not in CONFIDENCE_SOURCES:
        raise ConfigError("rover.confidence_source", f"expected one of {CONFIDENCE_SOURCES}, got {source!r}")
    return {"scheme": str(VotingScheme.parse(args.rover.scheme)), "confidence_source": source}


def write_fused(path: Path, fused: dict[str, TokenSequence], settings: Optional[dict] = None) -> None:
    records = ({"utt_id": utt_id, "text": " ".join(text), **(settings or {})} for utt_id, text in fused.items())
    write_jsonl(path, records)


def weighter_confidences(workdir: Workdir, corpus: str, table: dict[str, list[NBestList]]) -> dict[str, np.ndarray]:
    model = load_weighter(workdir, len(next(iter(table.values()))) if table else None)
    tokenizer = load_tokenizer(workdir)
    utterances = [u for u in load_utterances(workdir, corpus, guard=True) if u.utt_id in table]
    examples = weighter_examples(utterances, table, tokenizer, with_labels=False)
    weights = predict_weights(model, examples)
    return {e.utt_id: w for e, w in zip(examples, weights)}


def fuse_corpus(args: DictConfig, corpus: str) -> Path:
    """Fuse the expert transcripts of a corpus and write `{utt_id, text, scheme, confidence_source}` JSONL."""
    workdir = Workdir.from_args(args)
    settings = fusion_settings(args)
    scheme = VotingScheme.parse(args.rover.scheme)
    table = load_nbest_table(workdir, corpus, args.experts.k, args.decode.n_max)
    confidences = weighter_confidences(workdir, corpus, table) if settings["confidence_source"] == "weighter" else None

    fused = fuse_table(table, scheme, confidences)
    path = workdir.fused(corpus)
    write_fused(path, fused, settings)
    logger.info(f"Fused {len(fused)} utterances of {corpus} with {scheme} voting into {path}")

    if args.rover.permutations > 0:
        utterances = [[nbest.one_best for nbest in row] for row in table.values()]
        changed = rover_order_sensitivity(utterances, scheme, args.rover.permutations, args.seed)
        logger.info(f"ROVER output changed under expert reordering for {changed:.2%} of utterances")
    return path
