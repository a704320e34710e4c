from __future__ import annotations

from typing import Generic, Sequence, TypeVar

from torch.utils.data import Dataset

from ensd.errors import EmptyInput

__all__ = ["ExampleDataset"]

T = TypeVar("T")


class ExampleDataset(Dataset, Generic[T]):
    """In-memory training examples, one per utterance."""

    def __init__(self, examples: Sequence[T]):
        if not examples:
            raise EmptyInput("no training examples")
        self.examples = list(examples)

    def __len__(self) -> int:
        return len(self.examples)

    def __getitem__(self, index: int) -> T:
        return self.examples[index]
