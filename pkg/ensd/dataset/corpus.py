from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import numpy.typing as npt
from accelerate.logging import get_logger
from omegaconf import DictConfig, OmegaConf
from tqdm import tqdm

from ensd.errors import ConfigError
from .features import write_features
from .manifest import Split, Utterance, write_manifest

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.jsonl"
CORPUS_INFO_NAME = "corpus.json"

# Fields two corpora must agree on to share prototypes, domains, voice groups and feature shapes
WORLD_FIELDS = (
    "seed", "vocab_size", "num_domains", "domain_skew", "feature_dim", "frames_per_token", "onset_decay",
    "min_tokens", "max_tokens", "num_voice_groups", "group_offset", "voice_scale", "segment_frames",
)


@dataclass(frozen=True)
class CorpusSpec:
    """Parameters of a synthetic speech corpus.

    `seed` fixes the shared world (token prototypes, domain unigrams, voice
    groups); `speaker_seed` draws the speakers, so two corpora with the same
    seed and different speaker seeds share a language but not a speaker.
    """
    name: str = "desk"
    num_speakers: int = 50
    utterances_per_speaker: int = 40
    vocab_size: int = 24
    num_domains: int = 3
    domain_skew: float = 3.0
    domain_affinity: float = 0.8
    feature_dim: int = 16
    noise_sigma: float = 0.3
    frames_per_token: int = 3
    onset_decay: float = 0.2
    min_tokens: int = 3
    max_tokens: int = 8
    num_voice_groups: int = 3
    group_offset: float = 2.0
    voice_scale: float = 0.3
    speaker_spread: float = 0.1
    identity_voices: bool = False
    segment_frames: int = 10
    split_fractions: dict[str, float] = field(default_factory=lambda: {"weighter": 0.1, "dev": 0.1, "test": 0.1})
    default_split: str = "train"
    seed: int = 42
    speaker_seed: int = 42

    @classmethod
    def from_config(cls, args: DictConfig) -> CorpusSpec:
        values = OmegaConf.to_container(args, resolve=True)
        values["split_fractions"] = values.get("split_fractions") or {}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"corpus.{unknown[0]}", "unknown corpus field")
        spec = cls(**values)
        spec.validate()
        return spec

    def validate(self) -> None:
        positive = ["num_speakers", "utterances_per_speaker", "vocab_size", "feature_dim",
                    "frames_per_token", "num_voice_groups", "segment_frames", "min_tokens"]
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"corpus.{name}", f"must be >= 1, got {getattr(self, name)}")
        if self.num_domains < 2:
            raise ConfigError("corpus.num_domains", f"at least 2 domains are needed, got {self.num_domains}")
        non_negative = ["domain_skew", "noise_sigma", "group_offset", "voice_scale", "speaker_spread"]
        for name in non_negative:
            if getattr(self, name) < 0:
                raise ConfigError(f"corpus.{name}", f"must be >= 0, got {getattr(self, name)}")
        if not 0 <= self.domain_affinity <= 1:
            raise ConfigError("corpus.domain_affinity", f"must lie in [0, 1], got {self.domain_affinity}")
        if not 0 <= self.onset_decay < 1:
            raise ConfigError("corpus.onset_decay", f"must lie in [0, 1), got {self.onset_decay}")
        if self.max_tokens < self.min_tokens:
            raise ConfigError("corpus.max_tokens", f"{self.max_tokens} is below min_tokens {self.min_tokens}")
        if self.max_tokens * self.frames_per_token > np.iinfo(np.uint16).max:
            raise ConfigError("corpus.max_tokens", "utterances would exceed the features frame limit")
        try:
            splits = [Split(s) for s in self.split_fractions]
            Split(self.default_split)
        except ValueError as e:
            raise ConfigError("corpus.split_fractions", str(e)) from e
        if any(v < 0 for v in self.split_fractions.values()) or sum(self.split_fractions.values()) >= 1:
            raise ConfigError("corpus.split_fractions", "fractions must be non-negative and sum below 1")
        if Split(self.default_split) in splits:
            raise ConfigError("corpus.default_split", "default split cannot also be a held-out split")

    @property
    def vocab(self) -> list[str]:
        return [f"w{i:02d}" for i in range(self.vocab_size)]

    def world_mismatch(self, other: CorpusSpec) -> Optional[str]:
        """First field whose value keeps `other` from sharing this corpus's language, voices and shapes."""
        for name in WORLD_FIELDS:
            if getattr(self, name) != getattr(other, name):
                return name
        return None


@dataclass(frozen=True)
class World:
    prototypes: npt.NDArray          # V x F
    domain_unigrams: npt.NDArray     # D x V
    group_transforms: npt.NDArray    # G x F x F
    group_offsets: npt.NDArray       # G x F


@dataclass(frozen=True)
class Speaker:
    speaker_id: str
    voice_group: int
    home_domain: int
    transform: npt.NDArray
    offset: npt.NDArray
    split: Split


@dataclass
class Corpus:
    spec: CorpusSpec
    world: World
    speakers: list[Speaker]
    utterances: list[Utterance]


def make_world(spec: CorpusSpec) -> World:
    rng = np.random.default_rng(spec.seed)
    prototypes = rng.standard_normal((spec.vocab_size, spec.feature_dim))
    logits = spec.domain_skew * rng.standard_normal((spec.num_domains, spec.vocab_size))
    unigrams = np.exp(logits - logits.max(axis=1, keepdims=True))
    unigrams /= unigrams.sum(axis=1, keepdims=True)

    eye = np.eye(spec.feature_dim)
    noise = rng.standard_normal((spec.num_voice_groups, spec.feature_dim, spec.feature_dim))
    transforms = eye + spec.voice_scale * noise / np.sqrt(spec.feature_dim)
    offsets = spec.group_offset * rng.standard_normal((spec.num_voice_groups, spec.feature_dim))
    return World(prototypes, unigrams, transforms, offsets)


def assign_splits(spec: CorpusSpec) -> list[Split]:
    """Held-out splits take whole speakers; every other speaker gets the default split."""
    rng = np.random.default_rng([spec.speaker_seed, 1])
    order = rng.permutation(spec.num_speakers)
    splits = [Split(spec.default_split)] * spec.num_speakers
    start = 0
    for name, fraction in spec.split_fractions.items():
        count = int(round(fraction * spec.num_speakers))
        for index in order[start:start + count]:
            splits[index] = Split(name)
        start += count
    return splits


def make_speaker(spec: CorpusSpec, world: World, index: int, split: Split) -> Speaker:
    rng = np.random.default_rng([spec.speaker_seed, 0, index])
    group = int(rng.integers(spec.num_voice_groups))
    if spec.identity_voices:
        transform = np.eye(spec.feature_dim)
        offset = np.zeros(spec.feature_dim)
    else:
        transform = world.group_transforms[group] + spec.speaker_spread * rng.standard_normal(
            (spec.feature_dim, spec.feature_dim)) / np.sqrt(spec.feature_dim)
        offset = world.group_offsets[group] + spec.speaker_spread * rng.standard_normal(spec.feature_dim)
    return Speaker(
        speaker_id=f"{spec.name}-spk{index:04d}",
        voice_group=group,
        home_domain=group % spec.num_domains,
        transform=transform,
        offset=offset,
        split=split,
    )


def render_tokens(spec: CorpusSpec, world: World, tokens: npt.NDArray) -> npt.NDArray:
    """Clean frames for a token sequence, before voice and noise."""
    # each token is held for frames_per_token frames with a decaying onset
    envelope = (1 - spec.onset_decay) ** np.arange(spec.frames_per_token)
    frames = world.prototypes[tokens][:, None, :] * envelope[None, :, None]
    return frames.reshape(-1, spec.feature_dim)


def sample_utterance(
        spec: CorpusSpec,
        world: World,
        speaker: Speaker,
        rng: np.random.Generator,
) -> tuple[int, npt.NDArray, npt.NDArray]:
    if rng.random() < spec.domain_affinity:
        domain = speaker.home_domain
    else:
        domain = int(rng.integers(spec.num_domains))
    length = int(rng.integers(spec.min_tokens, spec.max_tokens + 1))
    tokens = rng.choice(spec.vocab_size, size=length, p=world.domain_unigrams[domain])
    frames = render_tokens(spec, world, tokens) @ speaker.transform.T + speaker.offset
    if spec.noise_sigma > 0:
        frames = frames + spec.noise_sigma * rng.standard_normal(frames.shape)
    return domain, tokens, frames


def generate_corpus(spec: CorpusSpec, out_dir: Union[str, Path]) -> Corpus:
    """Generate a corpus and write its manifest, features files and speaker table.

    Every speaker draws from its own seed stream, so the output does not depend
    on the order in which speakers are generated.
    """
    spec.validate()
    out_dir = Path(out_dir)
    world = make_world(spec)
    splits = assign_splits(spec)
    vocab = spec.vocab

    speakers = []
    utterances = []
    for index in tqdm(range(spec.num_speakers), desc=f"Generating {spec.name}", smoothing=0.01):
        speaker = make_speaker(spec, world, index, splits[index])
        speakers.append(speaker)
        rng = np.random.default_rng([spec.speaker_seed, 2, index])
        for j in range(spec.utterances_per_speaker):
            domain, tokens, frames = sample_utterance(spec, world, speaker, rng)
            utt_id = f"{speaker.speaker_id}-{j:03d}"
            features_path = out_dir / "features" / f"{utt_id}.fea"
            write_features(features_path, frames)
            utterances.append(Utterance(
                utt_id=utt_id,
                speaker_id=speaker.speaker_id,
                domain_id=domain,
                num_frames=len(frames),
                features_path=str(features_path),
                split=speaker.split,
                _ref_text=" ".join(vocab[t] for t in tokens),
            ))

    write_manifest(out_dir / MANIFEST_NAME, utterances)
    info = {
        "spec": dataclasses.asdict(spec),
        "vocab": vocab,
        "speakers": {
            s.speaker_id: {"voice_group": s.voice_group, "home_domain": s.home_domain, "split": s.split.value}
            for s in speakers
        },
    }
    with open(out_dir / CORPUS_INFO_NAME, "w", encoding="utf-8", newline="\n") as f:
        json.dump(info, f, indent=2, sort_keys=True)

    counts = {split.value: sum(s.split == split for s in speakers) for split in Split}
    logger.info(f"Generated {len(utterances)} utterances from {len(speakers)} speakers: "
                + ", ".join(f"{k}={v}" for k, v in counts.items() if v))
    return Corpus(spec, world, speakers, utterances)


def read_corpus_info(corpus_dir: Union[str, Path]) -> dict:
    with open(Path(corpus_dir) / CORPUS_INFO_NAME, encoding="utf-8") as f:
        return json.load(f)


def domain_unigrams(utterances: list[Utterance], vocab: list[str], num_domains: int) -> npt.NDArray:
    """Empirical token distribution per domain."""
    index = {token: i for i, token in enumerate(vocab)}
    counts = np.zeros((num_domains, len(vocab)))
    for utterance in utterances:
        for token in utterance.ref_text.split():
            counts[utterance.domain_id, index[token]] += 1
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
