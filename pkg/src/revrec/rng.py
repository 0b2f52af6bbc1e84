"""Deterministic child-seed derivation.

Substreams are derived by hashing a label path, so adding a new consumer
never shifts the draws of an existing one. That is what lets paired policy
arms share process randomness exactly (common random numbers).
"""

from __future__ import annotations

import hashlib
import random


def child_seed(*parts) -> int:
    label = "/".join(str(p) for p in parts)
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def child_rng(*parts) -> random.Random:
    return random.Random(child_seed(*parts))
