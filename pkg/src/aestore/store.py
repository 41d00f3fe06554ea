"""Content-addressed chunk storage.

A chunk address is ``Keccak-256(len(payload) as u64 little-endian || payload)``.
Backends return ``None`` from :meth:`ChunkStore.get` when a chunk is not
available and raise :class:`CorruptChunkError` when the bytes they hold do not
hash to the requested address.
"""

from __future__ import annotations

import math
import os
import random
import tempfile
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import requests
from Crypto.Hash import keccak

MAX_CHUNK_SIZE = 4096
ADDRESS_SIZE = 32


class ChunkTooLargeError(ValueError):
    pass


class CorruptChunkError(Exception):
    def __init__(self, address: "ChunkAddress"):
        self.address = address
        super().__init__(f"chunk {address.hex()} failed its address check")


class StoreUnavailableError(IOError):
    pass


class PermanentRejectionError(Exception):
    pass


class ChunkAddress(bytes):
    """A 32-byte chunk digest."""

    def __new__(cls, digest: bytes):
        if len(digest) != ADDRESS_SIZE:
            raise ValueError(f"address must be {ADDRESS_SIZE} bytes, got {len(digest)}")
        return super().__new__(cls, digest)

    @classmethod
    def from_hex(cls, text: str) -> "ChunkAddress":
        return cls(bytes.fromhex(text))

    def __str__(self) -> str:
        return self.hex()

    def __repr__(self) -> str:
        return f"ChunkAddress({self.hex()[:16]}...)"


def keccak256(data: bytes) -> bytes:
    return keccak.new(digest_bits=256, data=data).digest()


def address_of(payload: bytes) -> ChunkAddress:
    n = len(payload)
    if n > MAX_CHUNK_SIZE:
        raise ChunkTooLargeError(f"chunk of {n} bytes exceeds {MAX_CHUNK_SIZE}")
    if n == 0:
        raise ValueError("empty chunk")
    return ChunkAddress(keccak256(n.to_bytes(8, "little") + payload))


def verify(addr: bytes, payload: bytes) -> bytes:
    if address_of(payload) != addr:
        raise CorruptChunkError(ChunkAddress(addr))
    return payload


class ChunkStore:
    """put/get contract shared by every backend and decorator."""

    def put(self, payload: bytes) -> ChunkAddress:
        raise NotImplementedError

    def get(self, addr: ChunkAddress) -> Optional[bytes]:
        raise NotImplementedError


class MemoryStore(ChunkStore):
    def __init__(self):
        self._chunks: dict[bytes, bytes] = {}
        self._lock = threading.Lock()

    def put(self, payload: bytes) -> ChunkAddress:
        addr = address_of(payload)
        with self._lock:
            self._chunks.setdefault(bytes(addr), bytes(payload))
        return addr

    def get(self, addr: ChunkAddress) -> Optional[bytes]:
        payload = self._chunks.get(bytes(addr))
        if payload is None:
            return None
        return verify(addr, payload)

    def delete(self, addr: ChunkAddress) -> None:
        with self._lock:
            self._chunks.pop(bytes(addr), None)

    def __contains__(self, addr) -> bool:
        return bytes(addr) in self._chunks

    def __len__(self) -> int:
        return len(self._chunks)


class DiskStore(ChunkStore):
    """One file per chunk at ``root/<hex[:2]>/<hex>``."""

    def __init__(self, root):
        self.root = os.fspath(root)
        os.makedirs(self.root, exist_ok=True)

    def path_for(self, addr: ChunkAddress) -> str:
        h = addr.hex()
        return os.path.join(self.root, h[:2], h)

    def put(self, payload: bytes) -> ChunkAddress:
        addr = address_of(payload)
        path = self.path_for(addr)
        if os.path.exists(path):
            return addr
        try:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-")
            with os.fdopen(fd, "wb") as f:
                f.write(payload)
            os.replace(tmp, path)
        except OSError as e:
            raise StoreUnavailableError(f"cannot write chunk {addr.hex()}: {e}") from e
        return addr

    def get(self, addr: ChunkAddress) -> Optional[bytes]:
        try:
            with open(self.path_for(ChunkAddress(addr)), "rb") as f:
                payload = f.read()
        except FileNotFoundError:
            return None
        return verify(addr, payload)

    def delete(self, addr: ChunkAddress) -> None:
        try:
            os.remove(self.path_for(addr))
        except FileNotFoundError:
            pass

    def __contains__(self, addr) -> bool:
        return os.path.exists(self.path_for(ChunkAddress(addr)))

    def __len__(self) -> int:
        n = 0
        for _, _, files in os.walk(self.root):
            n += sum(1 for f in files if not f.startswith(".tmp-"))
        return n


class GatewayStore(ChunkStore):
    """Client for a simple HTTP chunk gateway.

    ``GET <base>/chunk/<hex>`` returns the raw payload or 404;
    ``POST <base>/chunk`` with the raw payload returns the hex address.
    Timeouts, connection errors, 404 and 5xx all mean "unavailable" and are
    retried ``retries`` times with a fixed ``backoff`` between attempts.
    """

    def __init__(self, base_url: str, timeout: float = 10.0, retries: int = 3,
                 backoff: float = 0.5, session: Optional[requests.Session] = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.session = session or requests.Session()

    def _attempts(self):
        for i in range(self.retries + 1):
            if i:
                time.sleep(self.backoff)
            yield i

    def get(self, addr: ChunkAddress) -> Optional[bytes]:
        url = f"{self.base_url}/chunk/{addr.hex()}"
        for _ in self._attempts():
            try:
                r = self.session.get(url, timeout=self.timeout)
            except requests.RequestException:
                continue
            if r.status_code == 200:
                return verify(addr, r.content)
            if r.status_code == 404 or r.status_code >= 500:
                continue
            raise PermanentRejectionError(f"GET {url}: HTTP {r.status_code}")
        return None

    def put(self, payload: bytes) -> ChunkAddress:
        addr = address_of(payload)
        url = f"{self.base_url}/chunk"
        last = None
        for _ in self._attempts():
            try:
                r = self.session.post(url, data=payload, timeout=self.timeout,
                                      headers={"Content-Type": "application/octet-stream"})
            except requests.RequestException as e:
                last = e
                continue
            if r.status_code >= 500:
                last = f"HTTP {r.status_code}"
                continue
            if r.status_code != 200:
                raise PermanentRejectionError(f"POST {url}: HTTP {r.status_code}")
            returned = r.text.strip()
            if returned != addr.hex():
                raise StoreUnavailableError(f"gateway returned address {returned}, expected {addr.hex()}")
            return addr
        raise StoreUnavailableError(f"upload to {url} failed: {last}")


def gateway_get(base_url: str, addr: ChunkAddress, **kw) -> Optional[bytes]:
    return GatewayStore(base_url, **kw).get(addr)


def gateway_put(base_url: str, payload: bytes, **kw) -> ChunkAddress:
    return GatewayStore(base_url, **kw).put(payload)


def _address_draw(seed: int, addr: bytes) -> random.Random:
    prefix = int.from_bytes(bytes(addr[:8]), "little")
    return random.Random((seed ^ prefix) & 0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class FailurePolicy:
    """Which chunks to withhold.

    ``mode`` is ``"none"``, ``"bernoulli"`` (each address independently
    unavailable with probability ``rate``) or ``"blocklist"``.  The verdict is
    a pure function of the policy and the address.
    """

    mode: str = "none"
    rate: float = 0.0
    blocklist: frozenset = field(default_factory=frozenset)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("none", "bernoulli", "blocklist"):
            raise ValueError(f"unknown failure mode {self.mode!r}")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must be in [0, 1]")
        object.__setattr__(self, "blocklist", frozenset(bytes(a) for a in self.blocklist))

    @classmethod
    def bernoulli(cls, rate: float, seed: int = 0) -> "FailurePolicy":
        return cls("bernoulli", rate=rate, seed=seed)

    @classmethod
    def blocked(cls, addresses) -> "FailurePolicy":
        return cls("blocklist", blocklist=frozenset(addresses))

    def is_available(self, addr: bytes) -> bool:
        if self.mode == "none":
            return True
        if self.mode == "blocklist":
            return bytes(addr) not in self.blocklist
        if self.rate <= 0.0:
            return True
        if self.rate >= 1.0:
            return False
        return _address_draw(self.seed, addr).random() >= self.rate


class FailureInjectingStore(ChunkStore):
    """Withholds chunks according to a :class:`FailurePolicy`; never alters them."""

    def __init__(self, inner: ChunkStore, policy: FailurePolicy):
        self.inner = inner
        self.policy = policy

    def put(self, payload: bytes) -> ChunkAddress:
        return self.inner.put(payload)

    def get(self, addr: ChunkAddress) -> Optional[bytes]:
        if not self.policy.is_available(addr):
            return None
        return self.inner.get(addr)


class LatencyModel:
    """Seeded log-normal request latency, a pure function of (seed, address)."""

    def __init__(self, median: float = 0.02, sigma: float = 1.0, seed: int = 0):
        self.median = median
        self.sigma = sigma
        self.seed = seed

    def __call__(self, addr: bytes) -> float:
        if self.sigma == 0:
            return self.median
        z = _address_draw(self.seed ^ 0x5A5A5A5A, addr).gauss(0.0, 1.0)
        return self.median * math.exp(self.sigma * z)


class DelayedStore(ChunkStore):
    """Sleeps ``latency(addr)`` seconds before every get; for local benchmarks."""

    def __init__(self, inner: ChunkStore, latency: Callable[[bytes], float]):
        self.inner = inner
        self.latency = latency

    def put(self, payload: bytes) -> ChunkAddress:
        return self.inner.put(payload)

    def get(self, addr: ChunkAddress) -> Optional[bytes]:
        delay = self.latency(addr)
        if delay > 0:
            time.sleep(delay)
        return self.inner.get(addr)


class CountingStore(ChunkStore):
    """Records every get, in order.  Thread-safe."""

    def __init__(self, inner: ChunkStore):
        self.inner = inner
        self.gets: list[bytes] = []
        self._lock = threading.Lock()

    def put(self, payload: bytes) -> ChunkAddress:
        return self.inner.put(payload)

    def get(self, addr: ChunkAddress) -> Optional[bytes]:
        with self._lock:
            self.gets.append(bytes(addr))
        return self.inner.get(addr)
