"""Deterministic seed derivation for nested experiment components.

A single master seed fans out into independent child seeds keyed by a tag
path (for example ``("scene", "20", 3)``).  Children are stable across
platforms and sessions, and adding new tag paths never shifts the seeds of
existing ones.
"""

import hashlib


def derive_seed(master: int, *tags: object) -> int:
    """Derive a 64-bit child seed from ``master`` and a tag path."""
    h = hashlib.blake2s(digest_size=8)
    h.update(str(int(master)).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest(), "big")
