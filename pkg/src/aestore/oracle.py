"""Brute-force recoverability oracle.

Every parity edge ``i -> j`` on strand ``X`` gives one xor relation
``P_in(i, X) ^ d_i ^ P_out(i, X) == 0``.  Peeling repeatedly solves any
relation with exactly one unknown until nothing changes.  The result is the
set of blocks any pairwise-xor repair could ever reach, independent of the
order or strategy used.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable

from .lattice import DEFAULT_TUPLE_ORDER, BlockId, LatticeConfig, all_blocks


def _relations(cfg: LatticeConfig) -> list[tuple[BlockId, BlockId, BlockId]]:
    s = cfg.s
    steps = {"H": 0, "RH": 1, "LH": -1}
    rels = []
    for i in range(1, cfg.n_data + 1):
        r, c = (i - 1) % s, (i - 1) // s
        for x in DEFAULT_TUPLE_ORDER:
            origin = (c - 1) * s + (r - steps[x.value]) % s + 1
            rels.append((BlockId.parity(origin, x), BlockId.data(i), BlockId.parity(i, x)))
    return rels


@lru_cache(maxsize=8)
def _index(cfg: LatticeConfig):
    rels = _relations(cfg)
    by_block: dict[BlockId, list[int]] = {}
    for k, rel in enumerate(rels):
        for b in rel:
            by_block.setdefault(b, []).append(k)
    return frozenset(all_blocks(cfg)), rels, by_block


def recoverable(cfg: LatticeConfig, unavailable: Iterable[BlockId]) -> set[BlockId]:
    """All blocks known after peeling, starting from everything not in ``unavailable``."""
    blocks, rels, by_block = _index(cfg)
    known = set(blocks - set(unavailable))
    # only relations touching a missing block can make progress
    queue = sorted({k for b in blocks - known for k in by_block.get(b, ())})
    while queue:
        k = queue.pop()
        unknown = [b for b in rels[k] if b not in known]
        if len(unknown) != 1:
            continue
        b = unknown[0]
        known.add(b)
        queue.extend(by_block[b])
    return known


def file_recoverable(cfg: LatticeConfig, unavailable: Iterable[BlockId]) -> bool:
    known = recoverable(cfg, unavailable)
    return all(BlockId.data(i) in known for i in range(1, cfg.n_data + 1))
