from __future__ import annotations

from typing import Iterable, Sequence

from ensd.errors import VocabError


class Tokenizer:
    __slots__ = [
        "tokens",
        "token_ids",
    ]

    def __init__(self, tokens: Iterable[str] = ()):
        """Fixed word vocabulary. Id 0 is the transducer blank, words follow in order."""
        self.tokens: list[str] = list(tokens)
        self.token_ids: dict[str, int] = {}
        for i, token in enumerate(self.tokens):
            if not token or token.split() != [token]:
                raise VocabError(f"invalid vocabulary entry {token!r}")
            if token in self.token_ids:
                raise VocabError(f"duplicate vocabulary entry {token!r}")
            self.token_ids[token] = i + 1

    @property
    def blank_id(self) -> int:
        """Transducer blank, emitted to advance time."""
        return 0

    @property
    def sep_id(self) -> int:
        """Separator placed between expert transcripts in weighter inputs."""
        return len(self.tokens) + 1

    @property
    def pad_id(self) -> int:
        """Padding for weighter transcript batches."""
        return len(self.tokens) + 2

    @property
    def vocab_size(self) -> int:
        """Number of word tokens V."""
        return len(self.tokens)

    @property
    def vocab_size_out(self) -> int:
        """Transducer output classes, blank included."""
        return len(self.tokens) + 1

    @property
    def vocab_size_in(self) -> int:
        """Weighter embedding table size, separator and padding included."""
        return len(self.tokens) + 3

    def encode(self, words: Sequence[str]) -> list[int]:
        """Converts words into token ids."""
        try:
            return [self.token_ids[w] for w in words]
        except KeyError as e:
            raise VocabError(f"token {e.args[0]!r} is not in the vocabulary") from None

    def decode(self, ids: Iterable[int]) -> tuple[str, ...]:
        """Converts token ids into words."""
        words = []
        for i in ids:
            if not 1 <= i <= len(self.tokens):
                raise VocabError(f"id {i} is not mapped to any token")
            words.append(self.tokens[i - 1])
        return tuple(words)

    def state_dict(self):
        return {"tokens": list(self.tokens)}

    def load_state_dict(self, state_dict):
        self.__init__(state_dict["tokens"])
