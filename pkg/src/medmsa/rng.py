"""Named, seedable random streams.

A stream is addressed by an integer root seed plus a path of labels
(candidate index, stage name, proposal block, ...). The address is hashed
with blake2b into a 64-bit seed for a stdlib Random, so sibling streams are
statistically independent and any stream can be reconstructed from its
address alone.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(root: int, *path) -> int:
    material = repr((int(root),) + tuple(path)).encode()
    digest = hashlib.blake2b(material, digest_size=8).digest()
    return int.from_bytes(digest, "big")


def stream(root: int, *path) -> random.Random:
    return random.Random(derive_seed(root, *path))
