"""Functional model of blocked attention with local softmax.

``blocked_attention`` consumes the score matrix one key/value block at a
time, applying a local softmax per block and a single normalization at the
end, and must agree with ``dense_attention`` up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class AttentionInput:
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    block_tokens: int
    scale: Optional[float] = None  # None: 1/sqrt(d_head); use 1.0 for unscaled scores

    def __post_init__(self):
        L, dh = self.Q.shape
        if L <= 0 or dh <= 0:
            raise ValueError("Q must be non-empty")
        if self.K.shape != (L, dh) or self.V.shape != (L, dh):
            raise ValueError(f"Q/K/V shapes differ: {self.Q.shape} {self.K.shape} {self.V.shape}")
        if not 1 <= self.block_tokens <= L:
            raise ValueError(f"block size {self.block_tokens} outside [1, {L}]")

    @property
    def score_scale(self) -> float:
        return 1.0 / math.sqrt(self.Q.shape[1]) if self.scale is None else self.scale


def dense_attention(inp: AttentionInput) -> np.ndarray:
    scores = (inp.Q @ inp.K.T) * inp.Q.dtype.type(inp.score_scale)
    scores = scores - scores.max(axis=1, keepdims=True)
    p = np.exp(scores)
    # normalize after the product, the same association the blocked path uses
    return (p @ inp.V) / p.sum(axis=1)[:, None]


def blocked_attention(inp: AttentionInput, order: Optional[Sequence[int]] = None) -> np.ndarray:
    """Attention computed block by block over the key dimension.

    Each block of scores gets a local softmax (shifted by its own row max);
    the running output and denominator are rescaled whenever the running max
    grows. ``order`` permutes the block visitation order.
    """
    Q, K, V = inp.Q, inp.K, inp.V
    dt = Q.dtype.type
    L = K.shape[0]
    bl = inp.block_tokens
    n_blocks = -(-L // bl)
    if order is None:
        order = range(n_blocks)
    elif sorted(order) != list(range(n_blocks)):
        raise ValueError(f"order must be a permutation of range({n_blocks})")

    acc = np.zeros((Q.shape[0], V.shape[1]), dtype=Q.dtype)
    run_max = np.full(Q.shape[0], -np.inf, dtype=Q.dtype)
    denom = np.zeros(Q.shape[0], dtype=Q.dtype)
    for j in order:
        sl = slice(j * bl, min((j + 1) * bl, L))
        s = (Q @ K[sl].T) * dt(inp.score_scale)
        local_max = s.max(axis=1)
        p = np.exp(s - local_max[:, None])  # local softmax numerator
        new_max = np.maximum(run_max, local_max)
        old_w = np.exp(run_max - new_max)
        blk_w = np.exp(local_max - new_max)
        denom = denom * old_w + p.sum(axis=1) * blk_w
        acc = acc * old_w[:, None] + (p @ V[sl]) * blk_w[:, None]
        run_max = new_max
    return acc / denom[:, None]


@dataclass(frozen=True)
class SoftmaxOpCounts:
    exp: int
    sum: int
    rescale: int
    divide: int

    @property
    def total(self) -> int:
        return self.exp + self.sum + self.rescale + self.divide


def softmax_op_counts(L: int, block_tokens: int, d_head: int = 1) -> SoftmaxOpCounts:
    """Per-row element operations of the blocked softmax, worst case.

    exp and sum touch every score once; each block after the first may move
    the running max, costing one rescale per accumulator element; the final
    normalization divides each output element once.
    """
    if L <= 0 or not 1 <= block_tokens <= L:
        raise ValueError(f"invalid L={L}, block={block_tokens}")
    blocks = -(-L // block_tokens)
    return SoftmaxOpCounts(exp=L, sum=L, rescale=(blocks - 1) * d_head, divide=d_head)
