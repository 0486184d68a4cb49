"""Seed splitting.

Every random draw in the package comes from a generator built here, so a run
is a pure function of ``(master_seed, label, index)``.  The split hashes the
three inputs with BLAKE2b (8-byte digest) and uses the result as the key of a
Philox counter-based generator.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_key(master_seed: int, label: str, index: int = 0) -> int:
    """64-bit key for the substream ``label``/``index`` of ``master_seed``."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", int(master_seed) & _MASK64))
    h.update(label.encode("utf-8"))
    h.update(b"\x00")
    h.update(struct.pack("<Q", int(index) & _MASK64))
    return int.from_bytes(h.digest(), "little")


def derive_rng(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, label, index)))


def spawn(rng: np.random.Generator) -> int:
    """Draw a fresh 63-bit seed from ``rng`` (for handing to nested helpers)."""
    return int(rng.integers(0, 2**63 - 1))
