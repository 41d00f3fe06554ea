"""Splitting, entangling and reassembling files as fixed-size blocks."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .lattice import (
    DEFAULT_TUPLE_ORDER,
    BlockId,
    LatticeConfig,
    incoming_parity,
    outgoing_parity,
)

DEFAULT_BLOCK_SIZE = 4096


class EmptyFileError(ValueError):
    pass


class IncompleteInputError(ValueError):
    def __init__(self, missing: Iterable[BlockId]):
        self.missing = sorted(missing)
        super().__init__("missing blocks: " + ", ".join(str(b) for b in self.missing))


@dataclass(frozen=True)
class CodecConfig:
    lattice: LatticeConfig
    block_size: int
    original_length: int

    def __post_init__(self):
        if self.block_size <= 0:
            raise ValueError("block_size must be positive")
        if self.lattice.n_data != n_blocks_for(self.original_length, self.block_size):
            raise ValueError(
                f"n_data={self.lattice.n_data} does not fit "
                f"{self.original_length} bytes in {self.block_size}-byte blocks"
            )

    @classmethod
    def for_length(cls, length: int, block_size: int = DEFAULT_BLOCK_SIZE, s: int = 5, p: int = 5):
        n = n_blocks_for(length, block_size)
        return cls(LatticeConfig(s=s, p=p, n_data=n), block_size, length)


@dataclass(frozen=True)
class Block:
    id: BlockId
    payload: bytes = field(repr=False)


def n_blocks_for(length: int, block_size: int) -> int:
    return max(1, -(-length // block_size))


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} != {len(b)}")
    n = len(a)
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(n, "little")


def split(file_bytes: bytes, cfg: CodecConfig) -> list[Block]:
    if not file_bytes:
        raise EmptyFileError("cannot split an empty file")
    if len(file_bytes) != cfg.original_length:
        raise ValueError("file length does not match codec config")
    bs = cfg.block_size
    blocks = []
    for i in range(cfg.lattice.n_data):
        chunk = file_bytes[i * bs:(i + 1) * bs]
        if len(chunk) < bs:
            chunk = chunk + bytes(bs - len(chunk))
        blocks.append(Block(BlockId.data(i + 1), chunk))
    return blocks


def seed_payloads(data_blocks: list[Block], cfg: CodecConfig) -> dict[BlockId, bytes]:
    """Pseudo-random payloads for the strand seeds, derived from the data.

    Seeds are a pure function of the file contents so encoding stays
    deterministic, but nobody holding only the manifest can recompute them.
    """
    h = hashlib.sha3_256(b"aestore-seed\x00")
    for b in data_blocks:
        h.update(b.payload)
    key = h.digest()
    lat = cfg.lattice
    seeds = {}
    for x in DEFAULT_TUPLE_ORDER:
        for i in range(1, min(lat.s, lat.n_data) + 1):
            sid = incoming_parity(i, x, lat)
            tag = f"{x.value}:{sid.node}".encode()
            seeds[sid] = hashlib.shake_256(key + tag).digest(cfg.block_size)
    return seeds


def _check_complete(data_blocks: Iterable[Block], cfg: CodecConfig) -> dict[int, bytes]:
    by_node = {b.id.node: b.payload for b in data_blocks if b.id.is_data}
    missing = [BlockId.data(i) for i in range(1, cfg.lattice.n_data + 1) if i not in by_node]
    if missing:
        raise IncompleteInputError(missing)
    return by_node


def encode(data_blocks: list[Block], cfg: CodecConfig) -> list[Block]:
    """Compute every parity: the strand seeds, then ``P_out = d XOR P_in`` per node.

    Output order is seeds followed by ``(node, strand)`` order and does not
    depend on how strands are scheduled.
    """
    by_node = _check_complete(data_blocks, cfg)
    lat = cfg.lattice
    seeds = seed_payloads([Block(BlockId.data(i), by_node[i]) for i in sorted(by_node)], cfg)
    parities: dict[BlockId, bytes] = dict(seeds)
    # Nodes are visited in index order, so a node's predecessor on any strand
    # (one column to the left) is always done already.
    for i in range(1, lat.n_data + 1):
        d = by_node[i]
        for x in DEFAULT_TUPLE_ORDER:
            p_in = parities[incoming_parity(i, x, lat)]
            parities[outgoing_parity(i, x)] = xor_bytes(d, p_in)
    out = [Block(sid, seeds[sid]) for sid in seeds]
    out.extend(
        Block(outgoing_parity(i, x), parities[outgoing_parity(i, x)])
        for i in range(1, lat.n_data + 1)
        for x in DEFAULT_TUPLE_ORDER
    )
    return out


def reassemble(data_blocks: Iterable[Block] | Mapping[int, bytes], cfg: CodecConfig) -> bytes:
    if isinstance(data_blocks, Mapping):
        by_node = dict(data_blocks)
        missing = [BlockId.data(i) for i in range(1, cfg.lattice.n_data + 1) if i not in by_node]
        if missing:
            raise IncompleteInputError(missing)
    else:
        by_node = _check_complete(data_blocks, cfg)
    body = b"".join(by_node[i] for i in range(1, cfg.lattice.n_data + 1))
    return body[:cfg.original_length]
