from __future__ import annotations

import hashlib
import json
import os

import numpy as np
import torch
from accelerate.utils import set_seed
from omegaconf import open_dict, DictConfig, OmegaConf

from ensd.confidence.nbest import DEFAULT_N_MAX
from ensd.errors import ConfigError
from ensd.fusion.rover import VotingScheme
from ensd.weighting.policies import Policy

CONFIG_HASH_LENGTH = 16


def _select(args: DictConfig, key: str):
    return OmegaConf.select(args, key, default=None)


def check_args(args: DictConfig) -> None:
    """Reject invalid settings before any work starts, naming the offending key."""
    num_experts = _select(args, "experts.k")
    if num_experts is not None and num_experts < 2:
        raise ConfigError("experts.k", f"at least 2 experts are needed, got {num_experts}")

    policy = _select(args, "student.policy")
    if policy is not None:
        Policy.parse(policy)

    temperature = _select(args, "student.temperature")
    if temperature is not None and temperature <= 0:
        raise ConfigError("student.temperature", f"must be > 0, got {temperature}")

    n = _select(args, "decode.n")
    n_max = _select(args, "decode.n_max") or DEFAULT_N_MAX
    if n is not None and not 1 <= n <= n_max:
        raise ConfigError("decode.n", f"must lie in [1, {n_max}], got {n}")
    beam = _select(args, "decode.beam")
    if beam is not None and n is not None and beam < n:
        raise ConfigError("decode.beam", f"beam {beam} is narrower than n {n}")

    scheme = _select(args, "rover.scheme")
    if scheme is not None:
        try:
            VotingScheme.parse(scheme)
        except ValueError as e:
            raise ConfigError("rover.scheme", str(e)) from e
    if _select(args, "experts.include_rover") and _select(args, "rover.confidence_source") == "weighter":
        raise ConfigError("experts.include_rover", "ROVER with weighter confidences cannot also be a weighted expert")

    threads = _select(args, "threads")
    if threads is not None and threads < 1:
        raise ConfigError("threads", f"must be >= 1, got {threads}")

    for key in ("optim.total_steps", "weighter_optim.total_steps", "student_optim.total_steps"):
        steps = _select(args, key)
        if steps is not None and steps < 1:
            raise ConfigError(key, f"must be >= 1, got {steps}")
    every = _select(args, "logging.every_steps")
    if every is not None and every < 1:
        raise ConfigError("logging.every_steps", f"must be >= 1, got {every}")


def config_hash(args: DictConfig) -> str:
    """Short digest of the resolved config without the hydra node."""
    container = OmegaConf.to_container(args, resolve=True)
    container.pop("hydra", None)
    container.pop("runtime", None)
    canonical = json.dumps(container, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:CONFIG_HASH_LENGTH]


def derive_seed(seed: int, *keys: int) -> int:
    """Independent seed for a sub-task, stable under reordering of other sub-tasks."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def opti_flags(args: DictConfig) -> None:
    torch.set_num_threads(args.threads)
    if args.precision == "double":
        torch.set_default_dtype(torch.float64)
    # bit-reproducible kernels in single-threaded runs
    torch.use_deterministic_algorithms(args.threads == 1, warn_only=True)


def update_args_with_env_info(args: DictConfig) -> None:
    with open_dict(args):
        args.runtime = {
            "working_dir": os.getcwd(),
            "config_hash": config_hash(args),
        }


def setup_args(args: DictConfig) -> None:
    check_args(args)
    update_args_with_env_info(args)
    opti_flags(args)

    if args.seed is not None:
        set_seed(args.seed)
