"""Watermark construction and checking.

The server stacks every client's public input into one aggregate, hashes
its canonical byte form with SHAKE-256 into an n-bit watermark h, and h is
what federated training embeds into the model.  Clients re-derive the hash
to confirm the server included exactly the K client inputs and nothing
else.  At verification time the extracted (possibly damaged) watermark is
compared to the recomputed hash under a strict near-collision threshold.

Canonical hash input layout:

    "FEDZKP-H1" || u32le(K) || u32le(m) || u32le(l)
                || bits of A_1 .. A_K (row-major, concatenated, packed)
                || bits of y_1 .. y_K (concatenated, packed)

Both bit blocks are packed MSB-first and zero-padded to a byte boundary
only at the end of the block, so the A block is exactly ceil(K*m*l/8)
bytes regardless of per-part alignment.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gf2 import BitVec, hamming_distance
from .lpn import PublicInput

DOMAIN_TAG = b"FEDZKP-H1"
DEFAULT_WATERMARK_BITS = 1024


@dataclass(frozen=True)
class AggregatedInput:
    parts: tuple
    m: int
    l: int
    K: int


@dataclass(frozen=True)
class HashWatermark:
    h: BitVec
    n: int

    def __post_init__(self):
        if self.n <= 0 or len(self.h) != self.n:
            raise ValueError("watermark length must be positive and match n")


class CheckResult:
    """Truthy on success; carries the first failing reason otherwise."""

    __slots__ = ("ok", "reason")

    def __init__(self, ok: bool, reason: Optional[str] = None):
        self.ok = ok
        self.reason = reason

    def __bool__(self) -> bool:
        return self.ok

    def __repr__(self) -> str:
        return "CheckResult(ok)" if self.ok else f"CheckResult({self.reason})"


def aggregate(parts) -> AggregatedInput:
    """Stack client public inputs, preserving client order."""
    parts = tuple(parts)
    if not parts:
        raise ValueError("need at least one client input")
    m, l = parts[0].A.rows, parts[0].A.cols
    for p in parts:
        if p.A.rows != m or p.A.cols != l or len(p.y) != m:
            raise ValueError("client inputs disagree on dimensions")
    return AggregatedInput(parts, m, l, len(parts))


def select_component(agg: AggregatedInput, j: int) -> PublicInput:
    """The j-th client's public input, 0-based."""
    if not 0 <= j < agg.K:
        raise ValueError(f"client index {j} out of range for K={agg.K}")
    return agg.parts[j]


def canonical_bytes(agg: AggregatedInput) -> bytes:
    header = DOMAIN_TAG + agg.K.to_bytes(4, "little") + agg.m.to_bytes(4, "little") + agg.l.to_bytes(4, "little")
    a_bits = np.concatenate([p.A.array.ravel() for p in agg.parts])
    y_bits = np.concatenate([p.y.bits for p in agg.parts])
    return header + np.packbits(a_bits).tobytes() + np.packbits(y_bits).tobytes()


def hash_watermark(agg: AggregatedInput, n: int = DEFAULT_WATERMARK_BITS) -> HashWatermark:
    """n-bit SHAKE-256 digest of the canonical aggregate serialization."""
    if n < 1:
        raise ValueError("watermark length must be at least 1 bit")
    digest = hashlib.shake_256(canonical_bytes(agg)).digest((n + 7) // 8)
    full = np.unpackbits(np.frombuffer(digest, dtype=np.uint8), count=n)
    return HashWatermark(BitVec(full), n)


def client_check(h: HashWatermark, agg: AggregatedInput, own: PublicInput, K: int) -> CheckResult:
    """Client-side audit of the server's published watermark.

    Verifies, in order: the hash really is the hash of the published
    aggregate, the client's own input appears in it, and the aggregate
    holds exactly the K client inputs (no server additions or omissions).
    """
    if hash_watermark(agg, h.n) != h:
        return CheckResult(False, "wrong-hash")
    if not any(p.A == own.A and p.y == own.y for p in agg.parts):
        return CheckResult(False, "missing-own")
    if agg.K != K:
        return CheckResult(False, "wrong-count")
    return CheckResult(True)


def validity_check(h_extracted: BitVec, agg: AggregatedInput, err_n: int) -> bool:
    """True iff the extracted watermark near-collides with the recomputed hash.

    Strictly fewer than err_n differing bits counts as valid.
    """
    n = len(h_extracted)
    if n < 1:
        raise ValueError("extracted watermark is empty")
    if not 0 <= err_n <= n:
        raise ValueError(f"err_n {err_n} out of range for n={n}")
    fresh = hash_watermark(agg, n)
    return hamming_distance(h_extracted, fresh.h) < err_n
