"""Score ordering and tie resolution shared by audits and balancing.

Two tie rules exist. "by_entity_id" orders tied scores by the unique
(entity_id, model_id, as_of_date) key and is the default everywhere:
fully deterministic across runs and input permutations. "seeded_random"
hashes that key together with an integer seed, so a recorded seed
replays the same selection later, also independent of input order.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .cohort import Cohort
from .errors import ValidationError

BY_ENTITY_ID = "by_entity_id"
SEEDED_RANDOM = "seeded_random"
TIE_BREAKS = (BY_ENTITY_ID, SEEDED_RANDOM)

DEFAULT_SEED = 0


def validate_tie_break(tie_break: str, seed: int | None) -> int | None:
    if tie_break not in TIE_BREAKS:
        raise ValidationError(
            f"tie_break must be one of {TIE_BREAKS}, got {tie_break!r}"
        )
    if tie_break == SEEDED_RANDOM:
        return DEFAULT_SEED if seed is None else int(seed)
    return None


def _seeded_keys(cohort: Cohort, seed: int) -> np.ndarray:
    keys = np.empty(len(cohort.examples), dtype=np.uint64)
    prefix = f"{seed}|".encode()
    for i, ex in enumerate(cohort.examples):
        digest = hashlib.blake2b(
            prefix + "|".join(ex.key).encode(), digest_size=8
        ).digest()
        keys[i] = int.from_bytes(digest, "big")
    return keys


def tie_key(cohort: Cohort, tie_break: str, seed: int | None) -> np.ndarray:
    """Integer array: smaller key wins among equal scores."""
    seed = validate_tie_break(tie_break, seed)
    rank = cohort._columns["tie_rank"]
    if tie_break == BY_ENTITY_ID:
        return rank
    hashed = _seeded_keys(cohort, seed)
    # Hash collisions fall back to the deterministic rank so the order
    # stays a strict total order under permutation.
    n = len(hashed)
    order = np.lexsort((rank, hashed))
    out = np.empty(n, dtype=np.int64)
    out[order] = np.arange(n, dtype=np.int64)
    return out


def global_order(
    cohort: Cohort, tie_break: str = BY_ENTITY_ID, seed: int | None = None
) -> np.ndarray:
    """Indices of all examples sorted by score descending, ties resolved
    by the requested rule."""
    cols = cohort._columns
    keys = tie_key(cohort, tie_break, seed)
    return np.lexsort((keys, -cols["scores"]))
