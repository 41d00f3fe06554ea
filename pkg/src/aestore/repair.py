"""File retrieval with entanglement repair.

:func:`download` fetches every data block named in a manifest and rebuilds the
missing ones from parity pairs.  Two strategies are available:

hierarchical
    Walk the strand pairs in ``tuple_order``; fetch both parities of a pair
    and, if one is missing, repair that parity recursively before moving on.

round_robin
    Probe every pair with direct fetches first and only fall back to
    recursive parity repair when each pair has a hole.

Recursion is guarded by the set of blocks currently under repair (a block
cannot be used to rebuild itself) and by ``max_depth``.  Blocks proven
unrecoverable without hitting either guard are remembered for the rest of the
download, which keeps the search polynomial on typical failure sets.
"""

from __future__ import annotations

import enum
import threading
import time
from concurrent.futures import FIRST_COMPLETED, Executor, Future, ThreadPoolExecutor, wait
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, TypeVar

from .codec import Block, CodecConfig, encode, reassemble, split, xor_bytes
from .lattice import (
    DEFAULT_TUPLE_ORDER,
    BlockId,
    Strand,
    exists,
    incoming_parity,
    outgoing_parity,
    repair_pairs,
)
from .manifest import ManifestIndex, file_digest
from .store import ChunkStore, CorruptChunkError, StoreUnavailableError, address_of

T = TypeVar("T")


class IntegrityError(Exception):
    pass


class Strategy(str, enum.Enum):
    HIERARCHICAL = "hierarchical"
    ROUND_ROBIN = "round_robin"


@dataclass(frozen=True)
class RepairConfig:
    strategy: Strategy = Strategy.HIERARCHICAL
    tuple_order: tuple = DEFAULT_TUPLE_ORDER
    max_depth: Optional[int] = 8  # None: unbounded
    hedge_delay: Optional[float] = None  # seconds; None disables hedging
    fetch_timeout: Optional[float] = None
    max_in_flight: int = 32
    deterministic: bool = True

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        order = tuple(Strand(x) for x in self.tuple_order)
        if sorted(order) != sorted(DEFAULT_TUPLE_ORDER):
            raise ValueError(f"tuple_order must be a permutation of H, RH, LH: {self.tuple_order}")
        object.__setattr__(self, "tuple_order", order)
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    @property
    def hedging(self) -> bool:
        return not self.deterministic and self.hedge_delay is not None


@dataclass
class FetchReport:
    total_blocks_requested: int = 0
    failed_data_blocks: int = 0
    parity_requests_per_failure: list[int] = field(default_factory=list)
    wall_time: float = 0.0
    irrecoverable: list[BlockId] = field(default_factory=list)
    corrupted: list[BlockId] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return not self.irrecoverable

    @property
    def outcome(self) -> str:
        return "success" if self.success else "irrecoverable"


def hedged_fetch(
    attempts: Sequence[Callable[[], Optional[T]]],
    hedge_delay: float,
    executor: Executor,
    on_launch: Optional[Callable[[int], None]] = None,
    timeout: Optional[float] = None,
) -> tuple[Optional[T], int]:
    """Race ``attempts``, starting the next one each time ``hedge_delay`` passes.

    An attempt that returns ``None`` (or raises) is a negative reply and does
    not trigger a hedge by itself.  Returns the first usable result and the
    number of attempts launched; ``(None, n)`` once every launched attempt
    has failed or ``timeout`` expires.
    """
    if not attempts:
        return None, 0
    pending: set[Future] = set()
    launched = 0

    def launch():
        nonlocal launched
        if on_launch is not None:
            on_launch(launched)
        pending.add(executor.submit(attempts[launched]))
        launched += 1

    start = time.monotonic()
    launch()
    next_hedge = start + hedge_delay
    while pending:
        now = time.monotonic()
        waits = []
        if launched < len(attempts):
            waits.append(max(0.0, next_hedge - now))
        if timeout is not None:
            waits.append(max(0.0, start + timeout - now))
        done, _ = wait(pending, timeout=min(waits) if waits else None, return_when=FIRST_COMPLETED)
        for f in done:
            pending.discard(f)
            try:
                result = f.result()
            except Exception:
                result = None
            if result is not None:
                return result, launched
        now = time.monotonic()
        if timeout is not None and now >= start + timeout:
            break
        if pending and launched < len(attempts) and now >= next_hedge:
            launch()
            next_hedge = now + hedge_delay
    return None, launched


class _Episode:
    """Parity blocks requested while repairing one data block."""

    def __init__(self):
        self.parities: set[BlockId] = set()
        self._lock = threading.Lock()

    def note(self, blocks) -> None:
        with self._lock:
            self.parities.update(b for b in blocks if not b.is_data)

    def merge(self, other: "_Episode") -> None:
        self.note(other.parities)


class _Session:
    """Per-download block resolver: fetch dedup, cache and request accounting."""

    def __init__(self, manifest: ManifestIndex, store: ChunkStore, cfg: RepairConfig,
                 pool: Optional[Executor]):
        self.entries = manifest.entries
        self.store = store
        self.cfg = cfg
        self.pool = pool
        self.cache: dict[bytes, bytes] = {}
        self.missing: set[bytes] = set()
        self.corrupt: set[bytes] = set()
        self.inflight: dict[bytes, Future] = {}
        self.requests = 0
        self.lock = threading.Lock()

    def _request(self, addr: bytes) -> Optional[bytes]:
        try:
            payload = self.store.get(addr)
        except CorruptChunkError:
            with self.lock:
                self.corrupt.add(addr)
            payload = None
        except (StoreUnavailableError, OSError):
            payload = None
        with self.lock:
            if payload is None:
                self.missing.add(addr)
            else:
                self.cache[addr] = payload
            self.inflight.pop(addr, None)
        return payload

    def _lookup(self, b: BlockId):
        """Return (done, payload, addr); done is False when a request is needed."""
        addr = self.entries.get(b)
        if addr is None:
            return True, None, None
        addr = bytes(addr)
        payload = self.cache.get(addr)
        if payload is not None:
            return True, payload, addr
        if addr in self.missing:
            return True, None, addr
        return False, None, addr

    def submit(self, b: BlockId) -> Future:
        done, payload, addr = self._lookup(b)
        if done:
            f: Future = Future()
            f.set_result(payload)
            return f
        with self.lock:
            if addr in self.cache or addr in self.missing:
                f = Future()
                f.set_result(self.cache.get(addr))
                return f
            fut = self.inflight.get(addr)
            if fut is None:
                self.requests += 1
                fut = self.pool.submit(self._request, addr)
                self.inflight[addr] = fut
        return fut

    def _result(self, fut: Future, addr: Optional[bytes]) -> Optional[bytes]:
        try:
            return fut.result(timeout=self.cfg.fetch_timeout)
        except FutureTimeout:
            with self.lock:
                if addr is not None and addr not in self.cache:
                    self.missing.add(addr)
            return None

    def fetch(self, b: BlockId) -> Optional[bytes]:
        done, payload, addr = self._lookup(b)
        if done:
            return payload
        if self.pool is None:
            self.requests += 1
            return self._request(addr)
        return self._result(self.submit(b), addr)

    def fetch_many(self, blocks: Sequence[BlockId]) -> list[Optional[bytes]]:
        if self.pool is None:
            return [self.fetch(b) for b in blocks]
        futs = [(self.submit(b), self.entries.get(b)) for b in blocks]
        return [self._result(f, bytes(a) if a is not None else None) for f, a in futs]

    def remember(self, b: BlockId, payload: bytes) -> bool:
        """Cache a repaired block after checking it against the manifest address."""
        addr = self.entries[b]
        if address_of(payload) != addr:
            return False
        with self.lock:
            self.cache[bytes(addr)] = payload
        return True

    def has(self, b: BlockId) -> bool:
        addr = self.entries.get(b)
        return addr is not None and bytes(addr) in self.cache


class _Repairer:
    def __init__(self, session: _Session, manifest: ManifestIndex, cfg: RepairConfig,
                 hedge_pool: Optional[Executor] = None):
        self.s = session
        self.lat = manifest.lattice
        self.cfg = cfg
        self.hedge_pool = hedge_pool
        self.dead: set[BlockId] = set()
        self.costs: dict[BlockId, int] = {}
        self.lock = threading.Lock()

    def _too_deep(self, depth: int) -> bool:
        return self.cfg.max_depth is not None and depth >= self.cfg.max_depth

    def _mark_dead(self, b: BlockId) -> None:
        with self.lock:
            self.dead.add(b)

    def _data_pairs(self, b: BlockId) -> list[tuple[BlockId, BlockId]]:
        return [(incoming_parity(b.node, x, self.lat), outgoing_parity(b.node, x))
                for x in self.cfg.tuple_order]

    def _direct(self, pair, ep: _Episode) -> list[Optional[bytes]]:
        ep.note(pair)
        return self.s.fetch_many(pair)

    def _recover(self, m: BlockId, depth: int, stack: frozenset, ep: _Episode):
        """Repair a block that could not be fetched. Returns (payload, tainted)."""
        if self.s.has(m):
            return self.s.cache[bytes(self.s.entries[m])], False
        if not exists(m, self.lat):
            return None, False
        if m in stack:
            return None, True
        if m in self.dead:
            return None, False
        if m.is_data:
            return self._nested_data(m, depth, stack, ep)
        return self.repair_parity(m, depth, stack, ep)

    def _nested_data(self, m: BlockId, depth: int, stack: frozenset, ep: _Episode):
        if self._too_deep(depth):
            return None, True
        sub = _Episode()
        payload, tainted = self.repair_data(m, depth, stack, sub)
        if payload is not None:
            with self.lock:
                self.costs.setdefault(m, len(sub.parities))
        else:
            ep.merge(sub)
        return payload, tainted

    def _complete(self, pair, vals, depth, stack, ep):
        """Fill the holes in a fetched pair; returns (xor or None, tainted)."""
        tainted = False
        vals = list(vals)
        for k, m in enumerate(pair):
            if vals[k] is None:
                v, t = self._recover(m, depth, stack, ep)
                tainted |= t
                if v is None:
                    return None, tainted
                vals[k] = v
        return xor_bytes(vals[0], vals[1]), tainted

    def _finish(self, b: BlockId, payload: bytes) -> Optional[bytes]:
        return payload if self.s.remember(b, payload) else None

    def _hedged(self, b: BlockId, pairs, ep: _Episode) -> Optional[bytes]:
        def attempt(pair):
            def run():
                vals = self.s.fetch_many(pair)
                if any(v is None for v in vals):
                    return None
                return xor_bytes(vals[0], vals[1])
            return run

        payload, _ = hedged_fetch(
            [attempt(p) for p in pairs],
            self.cfg.hedge_delay,
            self.hedge_pool,
            on_launch=lambda k: ep.note(pairs[k]),
        )
        return None if payload is None else self._finish(b, payload)

    def repair_data(self, b: BlockId, depth: int, stack: frozenset, ep: _Episode):
        """Rebuild data block ``b``. Returns (payload, tainted)."""
        stack = stack | {b}
        pairs = self._data_pairs(b)
        if self.cfg.hedging:
            payload = self._hedged(b, pairs, ep)
            if payload is not None:
                return payload, False
        if self.cfg.strategy is Strategy.ROUND_ROBIN:
            payload, tainted = self._round_robin(b, pairs, depth, stack, ep)
        else:
            payload, tainted = self._hierarchical(b, pairs, depth, stack, ep)
        if payload is None and not tainted:
            self._mark_dead(b)
        return payload, tainted

    def _hierarchical(self, b, pairs, depth, stack, ep):
        tainted = False
        for pair in pairs:
            vals = self._direct(pair, ep)
            x, t = self._complete(pair, vals, depth, stack, ep)
            tainted |= t
            if x is not None and self._finish(b, x) is not None:
                return x, False
        return None, tainted

    def _round_robin(self, b, pairs, depth, stack, ep):
        probes = []
        for pair in pairs:
            vals = self._direct(pair, ep)
            if all(v is not None for v in vals):
                x = self._finish(b, xor_bytes(vals[0], vals[1]))
                if x is not None:
                    return x, False
            probes.append(vals)
        tainted = False
        for pair, vals in zip(pairs, probes):
            x, t = self._complete(pair, vals, depth, stack, ep)
            tainted |= t
            if x is not None and self._finish(b, x) is not None:
                return x, False
        return None, tainted

    def repair_parity(self, pid: BlockId, depth: int, stack: frozenset, ep: _Episode):
        """Rebuild a parity from its backward, then forward, identity."""
        if self._too_deep(depth):
            return None, True
        stack = stack | {pid}
        tainted = False
        for pair in repair_pairs(pid, self.lat):
            if not all(exists(m, self.lat) for m in pair):
                continue
            vals = self._direct(pair, ep)
            x, t = self._complete(pair, vals, depth + 1, stack, ep)
            tainted |= t
            if x is not None and self._finish(pid, x) is not None:
                return x, False
        if not tainted:
            self._mark_dead(pid)
        return None, tainted

    def repair_top(self, b: BlockId) -> Optional[bytes]:
        if self.s.has(b):
            with self.lock:
                self.costs.setdefault(b, 0)
            return self.s.cache[bytes(self.s.entries[b])]
        ep = _Episode()
        payload, _ = self.repair_data(b, 0, frozenset(), ep)
        with self.lock:
            self.costs.setdefault(b, len(ep.parities))
        return payload


def download(manifest: ManifestIndex, repair: RepairConfig, store: ChunkStore):
    """Fetch and, where needed, repair every data block of ``manifest``.

    Returns ``(file_bytes, report)``; ``file_bytes`` is None when some data
    block could not be recovered (listed in ``report.irrecoverable``).
    """
    report = FetchReport()
    t0 = time.perf_counter()
    data_ids = [BlockId.data(i) for i in range(1, manifest.lattice.n_data + 1)]
    if repair.deterministic:
        session = _Session(manifest, store, repair, None)
        repairer = _Repairer(session, manifest, repair)
        payloads = session.fetch_many(data_ids)
        failed = [b for b, p in zip(data_ids, payloads) if p is None]
        recovered = {b: repairer.repair_top(b) for b in failed}
    else:
        with ThreadPoolExecutor(repair.max_in_flight, thread_name_prefix="fetch") as fetch_pool, \
                ThreadPoolExecutor(repair.max_in_flight, thread_name_prefix="repair") as repair_pool:
            session = _Session(manifest, store, repair, fetch_pool)
            repairer = _Repairer(session, manifest, repair, hedge_pool=repair_pool)
            payloads = session.fetch_many(data_ids)
            failed = [b for b, p in zip(data_ids, payloads) if p is None]
            # Each repair episode runs in its own thread so hedged attempts
            # have room in repair_pool.
            with ThreadPoolExecutor(repair.max_in_flight, thread_name_prefix="episode") as ep_pool:
                recovered = dict(zip(failed, ep_pool.map(repairer.repair_top, failed)))
    report.wall_time = time.perf_counter() - t0

    report.total_blocks_requested = session.requests
    report.failed_data_blocks = len(failed)
    report.parity_requests_per_failure = [repairer.costs.get(b, 0) for b in failed]
    addr_to_blocks: dict[bytes, list[BlockId]] = {}
    for b, a in manifest.entries.items():
        addr_to_blocks.setdefault(bytes(a), []).append(b)
    report.corrupted = sorted(b for a in session.corrupt for b in addr_to_blocks.get(a, []))
    report.irrecoverable = [b for b in failed if recovered.get(b) is None]
    if report.irrecoverable:
        return None, report

    blocks = {b.node: p for b, p in zip(data_ids, payloads) if p is not None}
    blocks.update((b.node, p) for b, p in recovered.items())
    data = reassemble(blocks, manifest.codec)
    if manifest.source_digest is not None and file_digest(data) != manifest.source_digest:
        raise IntegrityError("reassembled file does not match the manifest digest")
    return data, report


def repair_block(manifest: ManifestIndex, block: BlockId, repair: RepairConfig,
                 store: ChunkStore) -> tuple[Optional[bytes], int]:
    """Rebuild one block from its neighbours without fetching it first.

    Runs sequentially. Returns the payload (None if unrecoverable) and the
    number of chunk requests made.
    """
    if block not in manifest.entries:
        raise KeyError(f"{block} is not part of this manifest")
    session = _Session(manifest, store, repair, None)
    repairer = _Repairer(session, manifest, repair)
    ep = _Episode()
    if block.is_data:
        payload, _ = repairer.repair_data(block, 0, frozenset(), ep)
    else:
        payload, _ = repairer.repair_parity(block, 0, frozenset(), ep)
    return payload, session.requests


def entangle(data: bytes, store: ChunkStore, block_size: int = 4096, s: int = 5,
             p: int = 5) -> ManifestIndex:
    """Split, encode and upload ``data``; returns the manifest."""
    codec = CodecConfig.for_length(len(data), block_size, s=s, p=p)
    blocks: list[Block] = split(data, codec)
    blocks += encode(blocks, codec)
    entries = {b.id: store.put(b.payload) for b in blocks}
    return ManifestIndex(codec, entries, source_digest=file_digest(data))
