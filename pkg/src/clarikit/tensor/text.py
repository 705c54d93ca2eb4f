"""Hashed-embedding text encoder.

Token and bigram embeddings live in one shared table of hash buckets; a
sequence is encoded as the mean of its embedding rows (boundary tokens
included) followed by a per-role linear projection.  The hash is a fixed
FNV-1a so encodings are identical across platforms and runs.  Any module
that can map a token sequence to a fixed-dimension vector can stand in
behind the same interface.
"""

from __future__ import annotations

import numpy as np

from ..core import tokenize
from .autodiff import Tensor, embedding_lookup, matmul, mean

BEGIN = "<b>"
SEP = "<s>"
END = "<e>"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a(data: str | bytes) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def hash_token(token: str, buckets: int) -> int:
    return fnv1a(token) % buckets


def hash_bigram(left: str, right: str, buckets: int) -> int:
    return fnv1a(left + "\x1f" + right) % buckets


def boundary_sequence(parts: list[list[str]]) -> list[str]:
    """Join token lists as <b> part <s> part ... <e>."""
    tokens = [BEGIN]
    for i, part in enumerate(parts):
        if i > 0:
            tokens.append(SEP)
        tokens.extend(part)
    tokens.append(END)
    return tokens


def sequence_ids(parts: list[list[str]], buckets: int) -> np.ndarray:
    """Hash bucket ids for every token and adjacent-token bigram of the
    boundary-joined sequence."""
    tokens = boundary_sequence(parts)
    ids = [hash_token(t, buckets) for t in tokens]
    ids.extend(hash_bigram(a, b, buckets) for a, b in zip(tokens, tokens[1:]))
    return np.asarray(ids, dtype=np.int64)


def text_encode(parts: list[list[str]], table: Tensor, projection: Tensor) -> Tensor:
    """Encode token-list parts to a (1, model_dim) vector."""
    ids = sequence_ids(parts, table.shape[0])
    rows = embedding_lookup(table, ids)
    pooled = mean(rows, axis=0, keepdims=True)
    return matmul(pooled, projection)


def encode_text(text: str, table: Tensor, projection: Tensor) -> Tensor:
    return text_encode([tokenize(text)], table, projection)
