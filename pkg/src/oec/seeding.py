"""Deterministic derivation of named child seeds from one master seed."""
from __future__ import annotations

import hashlib

_MASK = 0xFFFFFFFFFFFFFFFF


def derive_seed(master_seed: int, label: str) -> int:
    """Derive a 64-bit child seed for the stream named by ``label``.

    The child is the first 8 bytes, little-endian, of a keyed blake2b digest
    of the label, with the master seed (reduced mod 2**64) as the key.  The
    mix is platform independent and avalanches: any bit change in the master
    seed or the label yields an unrelated child.  Conventional labels are
    "level:<i>" for per-level color streams, "crs:<t>:<c>" for isolated
    selection draws, "gen" for instance generation and "mc:<block>" for
    Monte Carlo batches.
    """
    key = (master_seed & _MASK).to_bytes(8, "little")
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")
