"""Geometry of the AE(3, s, s) entanglement lattice.

Data nodes fill an ``s``-row cylinder column by column.  Node ``i`` (1-based)
sits at row ``(i-1) % s`` and column ``(i-1) // s``.  Every node lies on three
strands:

* ``H``  - horizontal, same row in the next column;
* ``RH`` - right-handed helix, one row down (wrapping) in the next column;
* ``LH`` - left-handed helix, one row up (wrapping) in the next column.

A parity is named by the node it leaves and its strand class, so
``BlockId.parity(7, Strand.H)`` is the edge 7 -> 12 in AE(3,5,5).  Each strand
starts with a *seed parity* whose origin sits in the virtual column -1
(origin index in ``1-s .. 0``); seeds carry no data and are stored like any
other parity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional

ALPHA = 3


class InvalidIndexError(ValueError):
    pass


class Strand(str, enum.Enum):
    H = "H"
    RH = "RH"
    LH = "LH"


# Row step taken when moving one column forward along each strand class.
_ROW_STEP = {Strand.H: 0, Strand.RH: 1, Strand.LH: -1}

DEFAULT_TUPLE_ORDER = (Strand.H, Strand.RH, Strand.LH)


class BlockKind(str, enum.Enum):
    DATA = "data"
    PARITY = "parity"


@dataclass(frozen=True)
class LatticeConfig:
    s: int = 5
    p: int = 5
    n_data: int = 1
    alpha: int = ALPHA

    def __post_init__(self):
        if self.alpha != ALPHA:
            raise ValueError(f"only alpha={ALPHA} is supported, got {self.alpha}")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.p != self.s:
            raise ValueError("only p == s lattices are supported")
        if self.n_data < 1:
            raise ValueError("n_data must be >= 1")

    @property
    def n_seeds(self) -> int:
        return self.alpha * min(self.s, self.n_data)

    @property
    def n_parities(self) -> int:
        """Stored parities: alpha outgoing per data node plus the strand seeds."""
        return self.alpha * self.n_data + self.n_seeds


@dataclass(frozen=True, order=True)
class BlockId:
    kind: BlockKind
    node: int
    strand: Optional[Strand] = None

    def __post_init__(self):
        if self.kind is BlockKind.DATA and self.strand is not None:
            raise ValueError("data blocks carry no strand class")
        if self.kind is BlockKind.PARITY and self.strand is None:
            raise ValueError("parity blocks need a strand class")

    @classmethod
    def data(cls, node: int) -> "BlockId":
        return cls(BlockKind.DATA, node)

    @classmethod
    def parity(cls, origin: int, strand: Strand) -> "BlockId":
        return cls(BlockKind.PARITY, origin, Strand(strand))

    @property
    def is_data(self) -> bool:
        return self.kind is BlockKind.DATA

    @property
    def is_seed(self) -> bool:
        return self.kind is BlockKind.PARITY and self.node <= 0

    def __str__(self) -> str:
        if self.is_data:
            return f"d{self.node}"
        return f"p{self.node}{self.strand.value}"


class GridPosition(NamedTuple):
    row: int
    col: int


def _grid(i: int, s: int) -> GridPosition:
    return GridPosition((i - 1) % s, (i - 1) // s)


def _index(row: int, col: int, s: int) -> int:
    return col * s + row + 1


def grid_position(i: int, cfg: LatticeConfig) -> GridPosition:
    if i < 1:
        raise InvalidIndexError(f"node index must be >= 1, got {i}")
    return _grid(i, cfg.s)


def node_at(pos: GridPosition, cfg: LatticeConfig) -> int:
    if not 0 <= pos.row < cfg.s or pos.col < 0:
        raise InvalidIndexError(f"position {pos} is outside the lattice")
    return _index(pos.row, pos.col, cfg.s)


def _successor(i: int, strand: Strand, s: int) -> int:
    r, c = _grid(i, s)
    return _index((r + _ROW_STEP[strand]) % s, c + 1, s)


def _origin_into(i: int, strand: Strand, s: int) -> int:
    # Column -1 is allowed here: heads get an origin index in 1-s..0.
    r, c = _grid(i, s)
    return _index((r - _ROW_STEP[strand]) % s, c - 1, s)


def strand_successor(i: int, strand: Strand, cfg: LatticeConfig) -> int:
    if i < 1:
        raise InvalidIndexError(f"node index must be >= 1, got {i}")
    return _successor(i, Strand(strand), cfg.s)


def strand_predecessor(i: int, strand: Strand, cfg: LatticeConfig) -> Optional[int]:
    """Data node preceding ``i`` on ``strand``, or None for column 0."""
    if i < 1:
        raise InvalidIndexError(f"node index must be >= 1, got {i}")
    pred = _origin_into(i, Strand(strand), cfg.s)
    return pred if pred >= 1 else None


def incoming_parity(i: int, strand: Strand, cfg: LatticeConfig) -> BlockId:
    """The parity edge entering data node ``i`` (a seed when ``i`` is a head)."""
    return BlockId.parity(_origin_into(i, Strand(strand), cfg.s), strand)


def outgoing_parity(i: int, strand: Strand) -> BlockId:
    return BlockId.parity(i, strand)


def parity_target(pid: BlockId, cfg: LatticeConfig) -> int:
    """Data node a parity edge points into."""
    return _successor(pid.node, pid.strand, cfg.s)


def exists(b: BlockId, cfg: LatticeConfig) -> bool:
    """Whether ``b`` is a block the encoder actually emits for this lattice."""
    if b.is_data:
        return 1 <= b.node <= cfg.n_data
    if b.node >= 1:
        return b.node <= cfg.n_data
    target = _successor(b.node, b.strand, cfg.s)
    return 1 <= target <= cfg.n_data and target <= cfg.s


def repair_pairs(b: BlockId, cfg: LatticeConfig) -> list[tuple[BlockId, BlockId]]:
    """Block pairs whose xor reconstructs ``b``.

    A data block has one pair per strand class, ``(incoming, outgoing)``, in
    ``H, RH, LH`` order.  A parity ``i -> j`` has a backward pair
    ``(d_i, incoming(i))`` and a forward pair ``(d_j, outgoing(j))``; seeds
    have no data behind them and only get the forward pair.  Pairs may name
    blocks past the end of the lattice; callers filter with :func:`exists`.
    """
    if b.is_data:
        return [
            (incoming_parity(b.node, x, cfg), outgoing_parity(b.node, x))
            for x in DEFAULT_TUPLE_ORDER
        ]
    pairs = []
    if b.node >= 1:
        pairs.append((BlockId.data(b.node), incoming_parity(b.node, b.strand, cfg)))
    j = _successor(b.node, b.strand, cfg.s)
    pairs.append((BlockId.data(j), outgoing_parity(j, b.strand)))
    return pairs


def data_blocks(cfg: LatticeConfig) -> Iterator[BlockId]:
    for i in range(1, cfg.n_data + 1):
        yield BlockId.data(i)


def parity_blocks(cfg: LatticeConfig) -> Iterator[BlockId]:
    """Every stored parity: seeds first, then outgoing edges by node."""
    for x in DEFAULT_TUPLE_ORDER:
        for i in range(1, min(cfg.s, cfg.n_data) + 1):
            yield incoming_parity(i, x, cfg)
    for i in range(1, cfg.n_data + 1):
        for x in DEFAULT_TUPLE_ORDER:
            yield outgoing_parity(i, x)


def all_blocks(cfg: LatticeConfig) -> Iterator[BlockId]:
    yield from data_blocks(cfg)
    yield from parity_blocks(cfg)
