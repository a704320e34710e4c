from __future__ import annotations

from typing import Optional, Sequence

import torch
import torch.nn as nn
from omegaconf import DictConfig

from ensd.errors import VocabError, ShapeError, InvalidLattice
from ensd.tokenizer import Tokenizer

LSTMState = tuple[torch.Tensor, torch.Tensor]


class TransducerModel(nn.Module):
    """Recurrent transducer: LSTM encoder, LSTM prediction network, tanh joint network.

    The joint network output for T frames and U target tokens has shape
    (T, U + 1, V + 1) with the blank at index 0. The prediction network starts
    from the blank id, which doubles as the start symbol.
    """

    def __init__(self, args: DictConfig, tokenizer: Tokenizer, feature_dim: int):
        super().__init__()
        self.feature_dim = feature_dim
        self.num_classes = tokenizer.vocab_size_out
        self.blank_id = tokenizer.blank_id

        self.encoder = nn.LSTM(
            feature_dim,
            args.encoder_dim,
            num_layers=args.encoder_layers,
            batch_first=True,
        )
        self.embedding = nn.Embedding(self.num_classes, args.embed_dim)
        self.predictor = nn.LSTM(
            args.embed_dim,
            args.predictor_dim,
            num_layers=args.predictor_layers,
            batch_first=True,
        )
        self.enc_proj = nn.Linear(args.encoder_dim, args.joiner_dim)
        self.pred_proj = nn.Linear(args.predictor_dim, args.joiner_dim, bias=False)
        self.output = nn.Linear(args.joiner_dim, self.num_classes)

    def _check_tokens(self, tokens: torch.Tensor) -> None:
        if tokens.numel() and (tokens.min() < 1 or tokens.max() >= self.num_classes):
            raise VocabError(f"token ids must lie in [1, {self.num_classes - 1}], got {tokens.tolist()}")

    def encode(self, features: torch.Tensor) -> torch.Tensor:
        """features: T x F -> T x H"""
        if features.dim() != 2 or features.shape[1] != self.feature_dim:
            raise ShapeError("encoder", f"expected (T, {self.feature_dim}) features, got {tuple(features.shape)}")
        if features.shape[0] == 0:
            raise InvalidLattice("utterance has no frames")
        out, _ = self.encoder(features.unsqueeze(0))
        return out.squeeze(0)

    def predict(self, tokens: torch.Tensor) -> torch.Tensor:
        """tokens: U -> (U + 1) x H, prefixed with the start symbol."""
        self._check_tokens(tokens)
        start = torch.full((1,), self.blank_id, dtype=torch.long, device=tokens.device)
        inputs = self.embedding(torch.cat([start, tokens.long()]))
        out, _ = self.predictor(inputs.unsqueeze(0))
        return out.squeeze(0)

    def predict_step(self, token: int, state: Optional[LSTMState] = None) -> tuple[torch.Tensor, LSTMState]:
        """Advance the prediction network by one token. Returns (H,) output and the new state."""
        inputs = self.embedding(torch.tensor([[token]], device=self.output.weight.device))
        out, state = self.predictor(inputs, state)
        return out[0, -1], state

    def join(self, enc: torch.Tensor, pred: torch.Tensor) -> torch.Tensor:
        """T x H and (U + 1) x H -> T x (U + 1) x (V + 1) logits."""
        hidden = torch.tanh(self.enc_proj(enc).unsqueeze(1) + self.pred_proj(pred).unsqueeze(0))
        return self.output(hidden)

    def join_step(self, enc_frame: torch.Tensor, pred_out: torch.Tensor) -> torch.Tensor:
        """Logits for a single (frame, prefix) cell."""
        return self.output(torch.tanh(self.enc_proj(enc_frame) + self.pred_proj(pred_out)))

    def forward(self, features: torch.Tensor, tokens: Sequence[int] | torch.Tensor) -> torch.Tensor:
        tokens = torch.as_tensor(tokens, dtype=torch.long, device=features.device)
        return self.join(self.encode(features), self.predict(tokens))


def student_forward(model: TransducerModel, features: torch.Tensor, tokens: Sequence[int]) -> torch.Tensor:
    return model(features, tokens)
