from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence, Union

from ensd.confidence.nbest import DEFAULT_N_MAX, entropy, load_nbest_files, read_nbest_file
from ensd.errors import DataError
from ensd.fusion import VotingScheme, fuse_table
from ensd.metrics import corpus_wer, tokenize, wer
from ensd.metrics.alignment import TokenSequence
from .workdir import read_jsonl


def read_transcripts(path: Union[str, Path]) -> dict[str, TokenSequence]:
    """Transcripts keyed by utt_id from `{utt_id, text}` JSONL, or by line number from plain text."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"transcript file {path} does not exist")
    if path.suffix == ".jsonl":
        return {r["utt_id"]: tokenize(r["text"]) for r in read_jsonl(path)}
    with open(path, encoding="utf-8") as f:
        return {str(i): tokenize(line) for i, line in enumerate(f.read().splitlines())}


def score_files(ref_path: Union[str, Path], hyp_path: Union[str, Path]) -> tuple[Fraction, dict[str, Fraction]]:
    """Corpus WER and per-utterance WER of paired transcript files."""
    refs = read_transcripts(ref_path)
    hyps = read_transcripts(hyp_path)
    missing = sorted(set(refs) - set(hyps))
    if missing:
        raise DataError(f"hypotheses missing for {missing[:5]}")
    ids = list(refs)
    per_utterance = {i: wer(refs[i], hyps[i]) for i in ids if refs[i]}
    return corpus_wer([refs[i] for i in ids], [hyps[i] for i in ids]), per_utterance


def entropy_records(path: Union[str, Path], n_max: int = DEFAULT_N_MAX) -> Iterator[dict]:
    for nbest in read_nbest_file(path, n_max):
        yield {"utt_id": nbest.utt_id, "expert_id": nbest.expert_id, "H": entropy(nbest)}


def fuse_files(paths: Sequence[Union[str, Path]], scheme: VotingScheme, n_max: int = DEFAULT_N_MAX) -> Iterator[dict]:
    """Fused `{utt_id, text}` records from per-expert n-best files, or one file holding all experts."""
    if len(paths) == 1:
        table: dict[str, list] = {}
        for nbest in read_nbest_file(paths[0], n_max):
            table.setdefault(nbest.utt_id, []).append(nbest)
        table = {u: sorted(row, key=lambda nb: nb.expert_id) for u, row in table.items()}
    else:
        table = load_nbest_files(list(paths), n_max)
    for utt_id, text in fuse_table(table, scheme).items():
        yield {"utt_id": utt_id, "text": " ".join(text)}


def dump_jsonl(records: Iterator[dict], out) -> None:
    for record in records:
        out.write(json.dumps(record, sort_keys=True) + "\n")
