from pathlib import Path

import pytest
import torch
from accelerate import PartialState
from hydra import compose, initialize_config_dir
from omegaconf import OmegaConf

from ensd.tokenizer import Tokenizer

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

# the accelerate logger refuses to log before the process state exists
PartialState(cpu=True)
torch.set_default_dtype(torch.float64)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs a full pipeline stage on a tiny corpus")
    config.addinivalue_line("markers", "acceptance: seed-averaged experiment outcomes, minutes per test")


@pytest.fixture
def tokenizer():
    return Tokenizer(["a", "b", "c", "d"])


@pytest.fixture
def transducer_args():
    return OmegaConf.create({
        "encoder_dim": 6,
        "encoder_layers": 1,
        "embed_dim": 4,
        "predictor_dim": 5,
        "predictor_layers": 1,
        "joiner_dim": 7,
    })


@pytest.fixture
def weighter_args():
    return OmegaConf.create({
        "pooling": "mean",
        "use_entropy": True,
        "d_model": 8,
        "audio_dim": 6,
        "audio_layers": 1,
        "embed_dim": 4,
        "expert_identity": True,
        "num_heads": 2,
        "ff_dim": 8,
        "head_dim": 6,
    })


TINY_OVERRIDES = [
    "corpus.num_speakers=12",
    "corpus.utterances_per_speaker=4",
    "corpus.vocab_size=6",
    "corpus.feature_dim=4",
    "corpus.max_tokens=4",
    "pool.num_speakers=3",
    "pool.utterances_per_speaker=3",
    "experts.utterances=3",
    "transducer.encoder_dim=8",
    "transducer.encoder_layers=1",
    "transducer.embed_dim=4",
    "transducer.predictor_dim=8",
    "transducer.joiner_dim=8",
    "weighter.d_model=8",
    "weighter.audio_dim=8",
    "weighter.embed_dim=4",
    "weighter.ff_dim=8",
    "weighter.head_dim=8",
    "optim.total_steps=4",
    "optim.batch_size=2",
    "weighter_optim.total_steps=3",
    "weighter_optim.batch_size=2",
    "student_optim.total_steps=3",
    "student_optim.batch_size=2",
    "decode.n=3",
    "decode.beam=3",
    "logging.every_steps=2",
]


def compose_config(config_name: str, overrides=()):
    """Compose a command config without trackers; later overrides of a key replace earlier ones."""
    overrides = ["logging.log_with=none", *overrides]
    last = {o.split("=")[0]: i for i, o in enumerate(overrides)}
    overrides = [o for i, o in enumerate(overrides) if last[o.split("=")[0]] == i]
    with initialize_config_dir(config_dir=str(CONFIG_DIR), version_base="1.1"):
        return compose(config_name=config_name, overrides=overrides)


@pytest.fixture(scope="session")
def config_composer():
    return compose_config


@pytest.fixture
def make_config(tmp_path):
    """Compose a command config writing into a fresh workdir."""

    def make(config_name: str = "pipeline", overrides=(), tiny: bool = True):
        base = [f"workdir={tmp_path / 'work'}"] + (TINY_OVERRIDES if tiny else [])
        return compose_config(config_name, base + list(overrides))

    return make
