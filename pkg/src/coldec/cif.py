"""Continuous integrate-and-fire: frame embeddings -> token-level embeddings.

Frame weights are read from the input; the weight predictor itself lives in
the (external) ASR encoder.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels


class TailPolicy(str, Enum):
    FIRE_IF_HALF = "fire_if_half"
    DROP = "drop"


@dataclass(frozen=True)
class AcousticSequence:
    frames: np.ndarray  # (T, D)
    weights: np.ndarray  # (T,)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if frames.ndim != 2:
            raise ValueError(f"frames must be a (T, D) matrix, got shape {frames.shape}")
        if weights.shape != (frames.shape[0],):
            raise ValueError(f"{weights.shape[0] if weights.ndim else 0} weights for {frames.shape[0]} frames")
        if not (np.all(np.isfinite(frames)) and np.all(np.isfinite(weights))):
            raise ValueError("acoustic sequence contains non-finite values")
        if np.any(weights < 0):
            raise ValueError("negative CIF weight")
        if np.any(weights > 1):
            raise ValueError("CIF weight above 1")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class TokenAcousticSequence:
    embeddings: np.ndarray  # (I, D)
    integrated: np.ndarray  # (I,) total weight folded into each embedding

    def __len__(self) -> int:
        return self.embeddings.shape[0]


def integrate_and_fire(seq: AcousticSequence, threshold: float = 1.0,
                       tail_policy: TailPolicy | str = TailPolicy.FIRE_IF_HALF) -> TokenAcousticSequence:
    """Compress ``seq`` into token-level embeddings.

    Weights are accumulated frame by frame. When the accumulator reaches
    ``threshold`` the current frame's weight is split: the part that
    completes the accumulation closes the current embedding and the remainder
    starts the next one. A leftover of at least ``threshold / 2`` fires one
    extra embedding under ``fire_if_half``; ``drop`` discards it.
    """
    if threshold <= 0:
        raise ValueError("CIF threshold must be positive")
    policy = TailPolicy(tail_policy)
    emb, integ = kernels.cif_fire(seq.frames, seq.weights, float(threshold),
                                  policy is TailPolicy.FIRE_IF_HALF)
    return TokenAcousticSequence(emb, integ)
