"""Named, counter-based random streams.

Every consumer asks for a stream by name; the name is hashed into the
SeedSequence spawn key, so adding a new consumer never shifts the draws seen
by existing ones.
"""

import hashlib

import numpy as np


def _name_key(name: str) -> tuple[int, ...]:
    digest = hashlib.sha256(name.encode()).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def stream(seed: "int | np.random.Generator | None", name: str) -> np.random.Generator:
    """Philox generator for ``(seed, name)``."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(seed, spawn_key=_name_key(name))
    return np.random.Generator(np.random.Philox(ss))
