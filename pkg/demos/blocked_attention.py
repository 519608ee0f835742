"""Blocked attention with a running max equals dense softmax attention.

Run: python demos/blocked_attention.py
"""

import numpy as np

from hemlet.numerics import AttentionInput, blocked_attention, dense_attention, softmax_op_counts

rng = np.random.default_rng(0)
L, dh = 197, 64
Q, K, V = (rng.standard_normal((L, dh)).astype(np.float32) for _ in range(3))

for bl in (1, 16, 32, 197):
    inp = AttentionInput(Q, K, V, bl)
    err = np.max(np.abs(blocked_attention(inp) - dense_attention(inp)))
    ops = softmax_op_counts(L, bl, dh)
    print(f"B_L={bl:3d}  max |blocked - dense| = {err:.2e}  softmax ops per row = {ops.total}")
