"""Redundancy arithmetic for replication, MDS m-of-n codes and AE codes."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

from .lattice import ALPHA, BlockId, LatticeConfig, exists, outgoing_parity, repair_pairs, DEFAULT_TUPLE_ORDER


@dataclass(frozen=True)
class Replication:
    r: int

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("R must be >= 1")

    @property
    def label(self) -> str:
        return f"R={self.r}"


@dataclass(frozen=True)
class MDS:
    """m data fragments plus k redundant fragments, any m of n = m + k suffice."""

    m: int
    k: int

    def __post_init__(self):
        if self.m < 1 or self.k < 0:
            raise ValueError("need m >= 1 and k >= 0")

    @property
    def n(self) -> int:
        return self.m + self.k

    @property
    def label(self) -> str:
        return f"{self.m}-of-{self.n}"


@dataclass(frozen=True)
class AE:
    alpha: int = ALPHA
    s: int = 5
    p: int = 5
    shards: int = 1  # the block is split into this many independently entangled pieces

    def __post_init__(self):
        if self.alpha != ALPHA:
            raise ValueError(f"only alpha={ALPHA} is supported")
        if self.shards < 1:
            raise ValueError("shards must be >= 1")

    @property
    def label(self) -> str:
        base = f"AE({self.alpha},{self.s},{self.p})"
        return base if self.shards == 1 else f"{base} x{self.shards}"


Scheme = Union[Replication, MDS, AE]


def storage_overhead(scheme: Scheme) -> float:
    if isinstance(scheme, Replication):
        return float(scheme.r)
    if isinstance(scheme, MDS):
        return (scheme.m + scheme.k) / scheme.m
    return float(1 + scheme.alpha)


def fault_tolerance(scheme: Scheme) -> int:
    """Failures tolerated for every pattern.

    For AE codes tolerance depends on *which* blocks fail; only the single
    failure is guaranteed, so 1 is returned.  Use
    :func:`aestore.oracle.file_recoverable` for a concrete pattern.
    """
    if isinstance(scheme, Replication):
        return scheme.r - 1
    if isinstance(scheme, MDS):
        return scheme.k
    return 1


def repair_peers(scheme: Scheme) -> int:
    if isinstance(scheme, Replication):
        return 1
    if isinstance(scheme, MDS):
        return scheme.m
    return 2


def repair_read_cost(scheme: Scheme, peer_capacity: int) -> int:
    """Bytes read from other peers to rebuild everything a failed peer held."""
    if peer_capacity <= 0:
        raise ValueError("peer capacity must be positive")
    return repair_peers(scheme) * peer_capacity


def shard_size(scheme: Scheme) -> Fraction:
    """Fragment size as a fraction of the information block B."""
    if isinstance(scheme, MDS):
        return Fraction(1, scheme.m)
    if isinstance(scheme, AE):
        return Fraction(1, scheme.shards)
    return Fraction(1)


def byzantine_tolerance(n: int) -> int:
    if n < 1:
        raise ValueError("need at least one peer")
    return (n - 1) // 3


def lockss_regime(n: int, f: int) -> tuple[bool, int]:
    """Whether ``n`` exceeds the ``3f + 1`` agreement bound, and by how much."""
    margin = n - (3 * f + 1)
    return margin > 0, margin


def repair_neighborhood(cfg: LatticeConfig, b: BlockId, depth: int,
                        convention: str = "full") -> set[BlockId]:
    """Blocks reachable from ``b`` and its outgoing parities in ``depth`` repair rounds.

    ``full`` expands every repair pair of every frontier block.  ``upstream``
    expands everything in the first round and afterwards follows only the
    backward pair of frontier parities, i.e. it tracks the helpers that a
    repair of the first-round parities would pull from earlier in each
    strand.  Blocks past the end of the lattice are ignored.
    """
    if convention not in ("full", "upstream"):
        raise ValueError(f"unknown convention {convention!r}")
    start = {b}
    if b.is_data:
        start |= {outgoing_parity(b.node, x) for x in DEFAULT_TUPLE_ORDER}
    seen = set(start)
    frontier = set(start)
    for rnd in range(depth):
        found = set()
        for x in frontier:
            pairs = repair_pairs(x, cfg)
            if rnd > 0 and convention == "upstream":
                if x.is_data or x.is_seed:
                    continue
                pairs = pairs[:1]
            for pair in pairs:
                found.update(m for m in pair if exists(m, cfg))
        frontier = found - seen
        seen |= frontier
    return seen - start


def _interior(scheme: AE) -> tuple[LatticeConfig, BlockId]:
    cfg = LatticeConfig(s=scheme.s, p=scheme.p, n_data=scheme.s * 9)
    return cfg, BlockId.data(scheme.s * 4 + 1 + scheme.s // 2)


def dissemination_width(scheme: Scheme, depth: int = 2, convention: str = "upstream") -> int:
    """Peers holding fragments relevant to repairing one information block.

    For AE this is the block, its alpha parities and the entangled helpers
    reachable within ``depth`` repair rounds, once per shard.
    """
    if isinstance(scheme, Replication):
        return scheme.r
    if isinstance(scheme, MDS):
        return scheme.n
    cfg, node = _interior(scheme)
    per_shard = 1 + scheme.alpha + len(repair_neighborhood(cfg, node, depth, convention))
    return per_shard * scheme.shards


REFERENCE_SCHEMES: tuple = (
    Replication(4),
    MDS(4, 3),
    MDS(8, 6),
    MDS(4, 12),
    AE(3, 5, 5),
)


@dataclass(frozen=True)
class Row:
    scheme: str
    shard_size: str
    overhead: float
    tolerated_failures: Optional[int]
    repair_peers: int
    dissemination_width: int


COLUMNS = ("scheme", "shard_size", "overhead", "tolerated_failures", "repair_peers",
           "dissemination_width")


def _fmt_shard(frac: Fraction) -> str:
    return "B" if frac == 1 else f"B/{frac.denominator}" if frac.numerator == 1 else f"{frac}B"


def comparison_table(schemes: Iterable[Scheme] = REFERENCE_SCHEMES) -> list[Row]:
    rows = []
    for sc in schemes:
        rows.append(Row(
            scheme=sc.label,
            shard_size=_fmt_shard(shard_size(sc)),
            overhead=storage_overhead(sc),
            tolerated_failures=None if isinstance(sc, AE) else fault_tolerance(sc),
            repair_peers=repair_peers(sc),
            dissemination_width=dissemination_width(sc),
        ))
    return rows


def _cell(v) -> str:
    if v is None:
        return "per-pattern"
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def render_text(rows: list[Row]) -> str:
    table = [COLUMNS] + [tuple(_cell(getattr(r, c)) for c in COLUMNS) for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(COLUMNS))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_cell(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()
