from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence, TypeVar

from accelerate.logging import get_logger
from omegaconf import DictConfig
from tqdm import tqdm

from ensd.confidence.nbest import NBestEntry, NBestList, write_nbest_file
from ensd.dataset import Utterance
from ensd.model import TransducerModel, greedy_decode, load_checkpoint, nbest_decode
from ensd.tokenizer import Tokenizer
from .workdir import LABELED, POOL, Workdir, feature_tensor, load_utterances, require

logger = get_logger(__name__)

T = TypeVar("T")


def map_utterances(fn: Callable[[Utterance], T], utterances: Sequence[Utterance], threads: int, desc: str) -> list[T]:
    """Apply fn per utterance in manifest order, on worker threads when threads > 1."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(tqdm(pool.map(fn, utterances), total=len(utterances), desc=desc, smoothing=0.01))
    return [fn(u) for u in tqdm(utterances, desc=desc, smoothing=0.01)]


def decode_utterance(
        model: TransducerModel,
        tokenizer: Tokenizer,
        utterance: Utterance,
        expert_id: int,
        args: DictConfig,
) -> NBestList:
    features = feature_tensor(utterance)
    hyps = nbest_decode(model, features, args.n, args.beam, args.max_symbols)
    greedy = greedy_decode(model, features, args.max_symbols)
    return NBestList(
        utt_id=utterance.utt_id,
        expert_id=expert_id,
        entries=tuple(NBestEntry(tokenizer.decode(h.tokens), h.score) for h in hyps),
        greedy=tokenizer.decode(greedy),
    ).validate(args.n_max)


def transcribe(
        model: TransducerModel,
        tokenizer: Tokenizer,
        utterances: Sequence[Utterance],
        max_symbols: int,
        threads: int = 1,
        desc: str = "Transcribing",
) -> dict[str, tuple[str, ...]]:
    """Greedy 1-best transcript per utterance."""
    def transcribe_one(utterance: Utterance):
        return tokenizer.decode(greedy_decode(model, feature_tensor(utterance), max_symbols))

    texts = map_utterances(transcribe_one, utterances, threads, desc)
    return {u.utt_id: text for u, text in zip(utterances, texts)}


def decode_experts(args: DictConfig) -> dict[str, list[Path]]:
    """Write one n-best file per expert for the labeled held-out splits and the student pool."""
    workdir = Workdir.from_args(args)
    targets = {
        LABELED: load_utterances(workdir, LABELED, splits=args.decode.splits),
        POOL: load_utterances(workdir, POOL, guard=True),
    }

    written: dict[str, list[Path]] = {corpus: [] for corpus in args.decode.corpora}
    for k in range(1, args.experts.k + 1):
        model, tokenizer, _ = load_checkpoint(require(workdir.expert(k), "workdir", "expert checkpoint"))
        for corpus in args.decode.corpora:
            utterances = targets[corpus]

            def decode_one(utterance: Utterance) -> NBestList:
                return decode_utterance(model, tokenizer, utterance, k, args.decode)

            nbests = map_utterances(decode_one, utterances, args.threads, f"Decoding {corpus} with expert {k}")
            path = workdir.nbest(corpus, k)
            write_nbest_file(path, nbests)
            written[corpus].append(path)
            logger.info(f"Wrote {len(nbests)} n-best lists to {path}")
    return written
