from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np
import numpy.typing as npt

from ensd.errors import FeatureIOError

FEATURE_MAGIC = b"FEA1"
_HEADER = struct.Struct("<4sHH")


def write_features(path: Union[str, Path], features: npt.NDArray) -> None:
    """Write a (frames x dim) matrix as FEA1 header plus little-endian float32 rows."""
    features = np.asarray(features)
    if features.ndim != 2:
        raise ValueError(f"features must be a matrix, got shape {features.shape}")
    num_frames, dim = features.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(FEATURE_MAGIC, num_frames, dim))
        f.write(np.ascontiguousarray(features, dtype="<f4").tobytes())


def read_features(path: Union[str, Path], utt_id: str = "") -> npt.NDArray:
    """Read a FEA1 features file into a float64 (frames x dim) matrix.

    Raises:
        FeatureIOError: the file is missing, truncated or not a FEA1 file.
    """
    utt_id = utt_id or Path(path).stem
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise FeatureIOError(utt_id, f"cannot read features file {path}: {e.strerror}") from e

    if len(data) < _HEADER.size:
        raise FeatureIOError(utt_id, f"{path} is too short for a features header")
    magic, num_frames, dim = _HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise FeatureIOError(utt_id, f"{path} has magic {magic!r}, expected {FEATURE_MAGIC!r}")
    expected = _HEADER.size + num_frames * dim * 4
    if len(data) != expected:
        raise FeatureIOError(utt_id, f"{path} holds {len(data)} bytes, expected {expected}")

    features = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    return features.reshape(num_frames, dim).astype(np.float64)
