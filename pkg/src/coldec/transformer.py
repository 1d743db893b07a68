"""Self-attention network (SAN) layers used by the CPN encoder and decoders.

Post-norm transformer blocks: ``x = LN(x + MHA(x)); x = LN(x + FFN(x))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import batched_attention, layer_norm

_FIELDS = ("wq", "wk", "wv", "wo", "ff_w1", "ff_b1", "ff_w2", "ff_b2",
           "ln1_g", "ln1_b", "ln2_g", "ln2_b")


@dataclass(frozen=True)
class SanLayer:
    wq: np.ndarray  # (d, d)
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    ff_w1: np.ndarray  # (d_ff, d)
    ff_b1: np.ndarray
    ff_w2: np.ndarray  # (d, d_ff)
    ff_b2: np.ndarray
    ln1_g: np.ndarray
    ln1_b: np.ndarray
    ln2_g: np.ndarray
    ln2_b: np.ndarray
    heads: int = 1

    def __post_init__(self):
        d = self.wq.shape[0]
        for name in ("wq", "wk", "wv", "wo"):
            if getattr(self, name).shape != (d, d):
                raise ValueError(f"SAN {name} must be ({d}, {d}), got {getattr(self, name).shape}")
        if d % self.heads:
            raise ValueError(f"model dim {d} not divisible by {self.heads} heads")
        d_ff = self.ff_w1.shape[0]
        if self.ff_w1.shape != (d_ff, d) or self.ff_w2.shape != (d, d_ff):
            raise ValueError("SAN feed-forward shapes inconsistent with model dim")

    @property
    def dim(self) -> int:
        return self.wq.shape[0]

    def forward(self, x: np.ndarray, causal: bool = False) -> np.ndarray:
        """Apply the block to ``x`` of shape (batch, length, dim)."""
        B, L, d = x.shape
        h = self.heads
        dh = d // h

        def split(t):
            return t.reshape(B, L, h, dh).transpose(0, 2, 1, 3)

        q, k, v = split(x @ self.wq.T), split(x @ self.wk.T), split(x @ self.wv.T)
        mask = np.tril(np.ones((L, L), dtype=bool)) if causal else None
        ctx, _ = batched_attention(q, k, v, mask)
        ctx = ctx.transpose(0, 2, 1, 3).reshape(B, L, d)
        x = layer_norm(x + ctx @ self.wo.T, self.ln1_g, self.ln1_b)
        ff = np.maximum(x @ self.ff_w1.T + self.ff_b1, 0.0) @ self.ff_w2.T + self.ff_b2
        return layer_norm(x + ff, self.ln2_g, self.ln2_b)

    def forward_last(self, hist: np.ndarray) -> np.ndarray:
        """Causal output at the last row of ``hist`` (length, dim) only."""
        L, d = hist.shape
        h = self.heads
        dh = d // h
        q = (hist[-1] @ self.wq.T).reshape(h, 1, dh)
        k = (hist @ self.wk.T).reshape(L, h, dh).transpose(1, 0, 2)
        v = (hist @ self.wv.T).reshape(L, h, dh).transpose(1, 0, 2)
        ctx, _ = batched_attention(q, k, v)
        x = layer_norm(hist[-1] + ctx.reshape(d) @ self.wo.T, self.ln1_g, self.ln1_b)
        ff = np.maximum(x @ self.ff_w1.T + self.ff_b1, 0.0) @ self.ff_w2.T + self.ff_b2
        return layer_norm(x + ff, self.ln2_g, self.ln2_b)

    def arrays(self, prefix: str) -> dict:
        return {f"{prefix}.{name}": getattr(self, name) for name in _FIELDS}

    @classmethod
    def from_arrays(cls, arrays: dict, prefix: str, heads: int) -> "SanLayer":
        return cls(**{name: np.asarray(arrays[f"{prefix}.{name}"], dtype=np.float64)
                      for name in _FIELDS}, heads=heads)

    @classmethod
    def random(cls, rng: np.random.Generator, dim: int, ff_dim: int, heads: int = 1,
               scale: float = 1.0) -> "SanLayer":
        def mat(r, c):
            return rng.normal(0.0, scale / np.sqrt(c), size=(r, c))

        return cls(wq=mat(dim, dim), wk=mat(dim, dim), wv=mat(dim, dim), wo=mat(dim, dim),
                   ff_w1=mat(ff_dim, dim), ff_b1=np.zeros(ff_dim),
                   ff_w2=mat(dim, ff_dim), ff_b2=np.zeros(dim),
                   ln1_g=np.ones(dim), ln1_b=np.zeros(dim),
                   ln2_g=np.ones(dim), ln2_b=np.zeros(dim), heads=heads)

    @classmethod
    def zeros(cls, dim: int, ff_dim: int, heads: int = 1) -> "SanLayer":
        z = np.zeros
        return cls(wq=z((dim, dim)), wk=z((dim, dim)), wv=z((dim, dim)), wo=z((dim, dim)),
                   ff_w1=z((ff_dim, dim)), ff_b1=z(ff_dim), ff_w2=z((dim, ff_dim)),
                   ff_b2=z(dim), ln1_g=z(dim), ln1_b=z(dim), ln2_g=z(dim), ln2_b=z(dim),
                   heads=heads)


def run_stack(layers, x: np.ndarray, causal: bool = False) -> np.ndarray:
    for layer in layers:
        x = layer.forward(x, causal=causal)
    return x


def stack_arrays(layers, prefix: str) -> dict:
    out = {}
    for i, layer in enumerate(layers):
        out.update(layer.arrays(f"{prefix}.layers.{i}"))
    return out


def stack_from_arrays(arrays: dict, prefix: str, count: int, heads: int) -> tuple:
    return tuple(SanLayer.from_arrays(arrays, f"{prefix}.layers.{i}", heads)
                 for i in range(count))
