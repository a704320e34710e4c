from __future__ import annotations

import dataclasses
from typing import Optional, Sequence

import numpy as np

from ensd.confidence.nbest import NBestList
from ensd.errors import ConfigError
from ensd.metrics.alignment import TokenSequence
from .wtn import NULL, WordTransitionNetwork, Confidence, build_wtn


@dataclasses.dataclass(frozen=True)
class VotingScheme:
    """Per-slot score alpha * count / N + (1 - alpha) * mean confidence.

    Frequency voting is alpha = 1.
    """
    alpha: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("rover.scheme", f"alpha must lie in [0, 1], got {self.alpha}")

    @classmethod
    def frequency(cls) -> "VotingScheme":
        return cls(1.0)

    @classmethod
    def confidence(cls, alpha: float) -> "VotingScheme":
        return cls(alpha)

    @classmethod
    def parse(cls, text: str) -> "VotingScheme":
        """Parse `frequency` or `confidence:<alpha>`."""
        name, _, value = str(text).partition(":")
        if name == "frequency" and not value:
            return cls.frequency()
        if name == "confidence":
            try:
                return cls.confidence(float(value))
            except ValueError:
                pass
        raise ConfigError("rover.scheme", f"expected frequency or confidence:<alpha>, got {text!r}")

    def __str__(self) -> str:
        return "frequency" if self.alpha == 1.0 else f"confidence:{self.alpha:g}"


def vote(wtn: WordTransitionNetwork, scheme: VotingScheme) -> TokenSequence:
    """Pick the best candidate of every slot, dropping NULL winners.

    NULL loses every tie; tied tokens resolve to the lexicographically smallest.
    """
    output = []
    n = wtn.num_hypotheses
    for slot in wtn.slots:
        best_token, best_score = NULL, -np.inf
        for token, entry in slot.items():
            score = scheme.alpha * entry.count / n
            if scheme.alpha < 1.0:
                score += (1.0 - scheme.alpha) * entry.mean_confidence
            if score > best_score:
                best_token, best_score = token, score
            elif score == best_score and token is not NULL and (best_token is NULL or token < best_token):
                best_token = token
        if best_token is not NULL:
            output.append(best_token)
    return tuple(output)


def rover(
        hyps: Sequence[TokenSequence],
        scheme: VotingScheme = VotingScheme(),
        confidences: Optional[Sequence[Optional[Confidence]]] = None,
) -> TokenSequence:
    return vote(build_wtn(hyps, confidences), scheme)


def fuse_table(
        table: dict[str, list[NBestList]],
        scheme: VotingScheme,
        confidences: Optional[dict[str, np.ndarray]] = None,
) -> dict[str, TokenSequence]:
    """ROVER over the experts' 1-best transcripts of every utterance.

    Without explicit confidences each expert's confidence is its top n-best score.
    """
    fused = {}
    for utt_id, row in table.items():
        hyps = [nbest.one_best for nbest in row]
        if confidences is None:
            utt_confidences = [nbest.entries[0].score for nbest in row]
        else:
            utt_confidences = [float(c) for c in confidences[utt_id]]
        fused[utt_id] = rover(hyps, scheme, utt_confidences)
    return fused


def rover_order_sensitivity(
        utterances: Sequence[Sequence[TokenSequence]],
        scheme: VotingScheme,
        permutations: int,
        seed: int,
        confidences: Optional[Sequence[Sequence[Optional[Confidence]]]] = None,
) -> float:
    """Mean fraction of utterances whose fused output changes under a random expert order."""
    if permutations <= 0 or len(utterances) == 0:
        return 0.0

    rng = np.random.default_rng(seed)
    num_experts = len(utterances[0])
    reference = [
        rover(hyps, scheme, None if confidences is None else confidences[i])
        for i, hyps in enumerate(utterances)
    ]

    changed = 0
    for _ in range(permutations):
        order = rng.permutation(num_experts)
        for i, hyps in enumerate(utterances):
            conf = None if confidences is None else [confidences[i][k] for k in order]
            fused = rover([hyps[k] for k in order], scheme, conf)
            changed += fused != reference[i]
    return changed / (permutations * len(utterances))
