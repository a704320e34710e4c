from __future__ import annotations

from typing import Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F
from omegaconf import DictConfig

from ensd.errors import InvalidArity, ShapeError
from ensd.tokenizer import Tokenizer


class WeighterModel(nn.Module):
    """Gate that weights K expert transcripts of one utterance.

    Audio frames go through an LSTM encoder. Every transcript is embedded
    behind a separator token and run through a shared LSTM; the joined
    sequence (sep t_1 sep t_2 ... sep t_K) passes a transformer decoder layer
    that cross-attends to the audio states. Each transcript segment is pooled
    and scored by a shared feed-forward head, optionally with that expert's
    n-best entropy appended, and a softmax over the K scores yields the weights.
    """

    def __init__(self, args: DictConfig, tokenizer: Tokenizer, feature_dim: int, num_experts: int):
        super().__init__()
        self.feature_dim = feature_dim
        self.num_experts = num_experts
        self.sep_id = tokenizer.sep_id
        self.pooling = args.pooling
        self.use_entropy = args.use_entropy
        d_model = args.d_model

        self.audio_encoder = nn.LSTM(
            feature_dim,
            args.audio_dim,
            num_layers=args.audio_layers,
            batch_first=True,
        )
        self.audio_proj = nn.Linear(args.audio_dim, d_model)
        self.token_embedding = nn.Embedding(tokenizer.vocab_size_in, args.embed_dim, padding_idx=tokenizer.pad_id)
        self.transcript_encoder = nn.LSTM(args.embed_dim, d_model, batch_first=True)
        self.expert_embedding = nn.Embedding(num_experts, d_model) if args.expert_identity else None
        self.decoder = nn.TransformerDecoderLayer(
            d_model,
            args.num_heads,
            dim_feedforward=args.ff_dim,
            dropout=0.0,
            batch_first=True,
        )

        head_in = d_model + (1 if self.use_entropy else 0)
        self.head = nn.Sequential(
            nn.Linear(head_in, args.head_dim),
            nn.ReLU(),
            nn.Linear(args.head_dim, args.head_dim),
            nn.ReLU(),
        )
        self.score = nn.Linear(args.head_dim, 1)
        # final layer to zero so all experts start with equal weight
        nn.init.constant_(self.score.weight, 0)
        nn.init.constant_(self.score.bias, 0)

    def _pool(self, states: torch.Tensor) -> torch.Tensor:
        if self.pooling == "mean":
            return states.mean(dim=0)
        if self.pooling == "max":
            return states.max(dim=0).values
        raise NotImplementedError(f"unknown pooling {self.pooling}")

    def forward(
            self,
            features: torch.Tensor,
            transcripts: Sequence[Sequence[int]],
            entropy_features: Optional[Sequence[float]] = None,
            expert_ids: Optional[Sequence[int]] = None,
    ) -> torch.Tensor:
        """
        features: T x F audio frames
        transcripts: K token id sequences, one per expert
        entropy_features: K n-best entropies, required when the model uses them
        expert_ids: identity of the expert at each position, defaults to 0..K-1
        returns: K weights on the simplex
        """
        if len(transcripts) != self.num_experts:
            raise InvalidArity(f"model weights {self.num_experts} experts, got {len(transcripts)} transcripts")
        if features.dim() != 2 or features.shape[1] != self.feature_dim:
            raise ShapeError("audio_encoder", f"expected (T, {self.feature_dim}) features, got {tuple(features.shape)}")
        device = features.device

        audio, _ = self.audio_encoder(features.unsqueeze(0))
        memory = self.audio_proj(audio)  # (1, T, D)

        if expert_ids is None:
            expert_ids = range(self.num_experts)
        segments = []
        for k, tokens in zip(expert_ids, transcripts):
            ids = torch.tensor([self.sep_id, *tokens], dtype=torch.long, device=device)
            states, _ = self.transcript_encoder(self.token_embedding(ids).unsqueeze(0))
            states = states.squeeze(0)
            if self.expert_embedding is not None:
                states = states + self.expert_embedding.weight[k]
            segments.append(states)

        lengths = [s.shape[0] for s in segments]
        joined = self.decoder(torch.cat(segments, dim=0).unsqueeze(0), memory).squeeze(0)
        pooled = torch.stack([self._pool(s) for s in torch.split(joined, lengths, dim=0)])  # (K, D)

        if self.use_entropy:
            if entropy_features is None:
                raise InvalidArity("model was built with entropy features but none were given")
            if len(entropy_features) != self.num_experts:
                raise InvalidArity(f"{len(entropy_features)} entropy features for {self.num_experts} experts")
            entropy = torch.as_tensor(entropy_features, dtype=pooled.dtype, device=device).unsqueeze(-1)
            pooled = torch.cat([pooled, entropy], dim=-1)

        logits = self.score(self.head(pooled)).squeeze(-1)
        return F.softmax(logits, dim=-1)


def weighter_forward(
        model: WeighterModel,
        features: torch.Tensor,
        transcripts: Sequence[Sequence[int]],
        entropy_features: Optional[Sequence[float]] = None,
        expert_ids: Optional[Sequence[int]] = None,
) -> torch.Tensor:
    return model(features, transcripts, entropy_features, expert_ids)
