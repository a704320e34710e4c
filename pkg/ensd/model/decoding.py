from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np
import torch

from .transducer import TransducerModel, LSTMState

MAX_SYMBOLS_PER_FRAME = 5


@dataclasses.dataclass
class Hypothesis:
    tokens: tuple[int, ...]
    log_prob: float
    pred_out: torch.Tensor
    state: Optional[LSTMState]


@dataclasses.dataclass(frozen=True)
class ScoredHypothesis:
    tokens: tuple[int, ...]
    log_prob: float
    score: float


def normalized_score(log_prob: float, num_frames: int, num_tokens: int) -> float:
    """exp(log P / path length), where a path emits one blank per frame plus one symbol per token."""
    return max(math.exp(log_prob / (num_frames + num_tokens)), np.finfo(np.float64).tiny)


@torch.no_grad()
def greedy_decode(model: TransducerModel, features: torch.Tensor, max_symbols: int = MAX_SYMBOLS_PER_FRAME) -> list[int]:
    """Emit the argmax symbol; blank advances time, and at most max_symbols tokens come out per frame."""
    enc = model.encode(features)
    pred_out, state = model.predict_step(model.blank_id)
    tokens = []

    for t in range(enc.shape[0]):
        for _ in range(max_symbols):
            k = int(torch.argmax(model.join_step(enc[t], pred_out)))
            if k == model.blank_id:
                break
            tokens.append(k)
            pred_out, state = model.predict_step(k, state)

    return tokens


def _merge(pool: dict, hyp: Hypothesis) -> None:
    """Prefixes reached through different alignments share one entry with summed probability."""
    other = pool.get(hyp.tokens)
    if other is None:
        pool[hyp.tokens] = hyp
    else:
        other.log_prob = float(np.logaddexp(other.log_prob, hyp.log_prob))


def _top(pool: dict, beam: int) -> list[Hypothesis]:
    return sorted(pool.values(), key=lambda h: h.log_prob, reverse=True)[:beam]


@torch.no_grad()
def beam_decode(
        model: TransducerModel,
        features: torch.Tensor,
        beam: int,
        max_symbols: int = MAX_SYMBOLS_PER_FRAME,
) -> list[ScoredHypothesis]:
    """Time-synchronous transducer beam search.

    At every frame each live hypothesis either takes the blank, which carries
    it to the next frame, or extends by one of its `beam` best tokens, up to
    max_symbols tokens per frame. Hypotheses with equal token sequences merge.

    Returns:
        hyps: Complete hypotheses sorted by descending length-normalized score.
    """
    enc = model.encode(features)
    num_frames = enc.shape[0]
    pred_out, state = model.predict_step(model.blank_id)
    finished = {(): Hypothesis((), 0.0, pred_out, state)}
    # prediction network outputs depend only on the token prefix
    prefix_cache = {(): (pred_out, state)}

    def extend(hyp: Hypothesis, token: int, log_prob: float) -> Hypothesis:
        tokens = hyp.tokens + (token,)
        if tokens not in prefix_cache:
            prefix_cache[tokens] = model.predict_step(token, hyp.state)
        out, new_state = prefix_cache[tokens]
        return Hypothesis(tokens, log_prob, out, new_state)

    for t in range(num_frames):
        live = list(finished.values())
        finished = {}
        for emitted in range(max_symbols + 1):
            if not live:
                break
            log_probs = torch.log_softmax(model.join_step(enc[t], torch.stack([h.pred_out for h in live])), dim=-1)
            extended = {}
            for hyp, row in zip(live, log_probs):
                _merge(finished, dataclasses.replace(hyp, log_prob=hyp.log_prob + float(row[model.blank_id])))
                if emitted == max_symbols:
                    continue
                values, indices = torch.topk(row[1:], min(beam, row.shape[0] - 1))
                for value, index in zip(values.tolist(), (indices + 1).tolist()):
                    _merge(extended, extend(hyp, index, hyp.log_prob + value))
            live = _top(extended, beam)
            kept = _top(finished, beam)
            if len(kept) == beam and live and live[0].log_prob < kept[-1].log_prob:
                break
        finished = {h.tokens: h for h in _top(finished, beam)}

    scored = [
        ScoredHypothesis(h.tokens, h.log_prob, normalized_score(h.log_prob, num_frames, len(h.tokens)))
        for h in finished.values()
    ]
    return sorted(scored, key=lambda h: h.score, reverse=True)


def nbest_decode(
        model: TransducerModel,
        features: torch.Tensor,
        n: int,
        beam: Optional[int] = None,
        max_symbols: int = MAX_SYMBOLS_PER_FRAME,
) -> list[ScoredHypothesis]:
    """Top-n complete hypotheses of a beam of width max(beam, n)."""
    beam = max(beam or n, n)
    return beam_decode(model, features, beam, max_symbols)[:n]
