from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Union

import numpy as np
import torch
import torch.nn as nn
from omegaconf import OmegaConf, DictConfig

from ensd.errors import DataError
from ensd.tokenizer import Tokenizer

MAGIC = b"ENSD1"
_HEADER_LEN = struct.Struct("<Q")


def save_checkpoint(
        path: Union[str, Path],
        model: nn.Module,
        kind: str,
        arch: dict[str, Any],
        tokenizer: Tokenizer,
        seed: int,
        step: int,
) -> None:
    """Write a model as magic, header length, JSON header, then float64 LE parameter blocks.

    Args:
        path: Output file.
        model: Model whose state_dict is stored in declaration order.
        kind: Model family, `transducer` or `weighter`.
        arch: Architecture hyperparameters needed to rebuild the model.
        tokenizer: Vocabulary the model was trained with.
        seed: Training seed.
        step: Number of optimizer steps taken.
    """
    state = model.state_dict()
    header = {
        "kind": kind,
        "arch": arch,
        "vocab": tokenizer.state_dict()["tokens"],
        "seed": seed,
        "step": step,
        "params": [[name, list(tensor.shape)] for name, tensor in state.items()],
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_HEADER_LEN.pack(len(encoded)))
        f.write(encoded)
        for tensor in state.values():
            f.write(tensor.detach().cpu().to(torch.float64).numpy().astype("<f8").tobytes())


def read_checkpoint(path: Union[str, Path]) -> tuple[dict[str, Any], dict[str, torch.Tensor]]:
    with open(path, "rb") as f:
        data = f.read()

    if data[:len(MAGIC)] != MAGIC:
        raise DataError(f"{path} is not an {MAGIC.decode()} checkpoint")
    offset = len(MAGIC)
    (header_len,) = _HEADER_LEN.unpack_from(data, offset)
    offset += _HEADER_LEN.size
    header = json.loads(data[offset:offset + header_len].decode("utf-8"))
    offset += header_len

    state = {}
    for name, shape in header["params"]:
        count = int(np.prod(shape, dtype=np.int64))
        block = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        state[name] = torch.from_numpy(block.copy().reshape(shape))
        offset += count * 8
    if offset != len(data):
        raise DataError(f"{path} has {len(data) - offset} trailing bytes")
    return header, state


def load_checkpoint(path: Union[str, Path]) -> tuple[nn.Module, Tokenizer, dict[str, Any]]:
    """Rebuild the stored model in eval mode. Returns (model, tokenizer, header)."""
    from ensd.utils.model_utils import build_model, get_tokenizer

    header, state = read_checkpoint(path)
    tokenizer = get_tokenizer(header["vocab"])
    model = build_model(header["kind"], OmegaConf.create(header["arch"]), tokenizer)
    model.load_state_dict(state)
    model.eval()
    return model, tokenizer, header


def arch_dict(args: DictConfig, **extra: Any) -> dict[str, Any]:
    arch = OmegaConf.to_container(args, resolve=True)
    arch.update(extra)
    return arch
