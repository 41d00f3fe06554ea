import random
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from aestore.store import (
    MAX_CHUNK_SIZE,
    ChunkAddress,
    ChunkTooLargeError,
    CorruptChunkError,
    CountingStore,
    DelayedStore,
    DiskStore,
    FailureInjectingStore,
    FailurePolicy,
    GatewayStore,
    LatencyModel,
    MemoryStore,
    PermanentRejectionError,
    address_of,
)

from keccak_ref import keccak256 as ref_keccak

# Frozen after cross-checking against the reference implementation in keccak_ref.
VECTORS = {
    b"A": "7e7f5629cecb161408edf5a9229739e198ab29f25faafb7ff6d0d2dc3e7571cf",
    b"AA": "6b0187ec9e71fec2b34fa54e3afdf4ab401c444faab486ea1a2eecbad429ac2d",
    b"hello world": "38bf972e93a5443047f56e3b27b99b024d4673aa164de4d64070578e4ee06cb3",
    bytes(4096): "411dd45de7246e94589ff5888362c41e85bd3e582a92d0fda8f0e90b76439bec",
}


def test_reference_keccak_empty_string():
    assert ref_keccak(b"").hex() == "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"


@pytest.mark.parametrize("payload, want", list(VECTORS.items()))
def test_address_vectors(payload, want):
    assert address_of(payload).hex() == want
    assert ref_keccak(len(payload).to_bytes(8, "little") + payload).hex() == want


def test_address_matches_reference_on_random_payloads():
    rng = random.Random(11)
    for n in (1, 135, 136, 137, 1000, 4096):
        p = rng.randbytes(n)
        assert address_of(p) == ref_keccak(n.to_bytes(8, "little") + p)


def test_length_prefix_separates_addresses():
    assert address_of(b"A") != address_of(b"AA")
    assert address_of(b"\x00") != address_of(b"\x00\x00")


def test_chunk_size_bounds():
    address_of(bytes(MAX_CHUNK_SIZE))
    with pytest.raises(ChunkTooLargeError):
        address_of(bytes(MAX_CHUNK_SIZE + 1))
    with pytest.raises(ValueError):
        address_of(b"")


def test_chunk_address_type():
    a = address_of(b"x")
    assert ChunkAddress.from_hex(a.hex()) == a
    with pytest.raises(ValueError):
        ChunkAddress(b"short")


@pytest.fixture(params=["memory", "disk"])
def store(request, tmp_path):
    return MemoryStore() if request.param == "memory" else DiskStore(tmp_path / "chunks")


def test_put_get_round_trip(store):
    rng = random.Random(1)
    chunks = [rng.randbytes(rng.randint(1, 4096)) for _ in range(50)]
    addrs = [store.put(c) for c in chunks]
    assert all(store.get(a) == c for a, c in zip(addrs, chunks))
    assert store.get(address_of(b"never stored")) is None


def test_put_idempotent(store):
    a1 = store.put(b"same")
    a2 = store.put(b"same")
    assert a1 == a2
    assert len(store) == 1


def test_disk_layout(tmp_path):
    s = DiskStore(tmp_path)
    a = s.put(b"layout")
    h = a.hex()
    assert (tmp_path / h[:2] / h).read_bytes() == b"layout"
    assert not [p for p in tmp_path.rglob(".tmp-*")]


def test_corrupt_chunk_detected(tmp_path):
    mem = MemoryStore()
    a = mem.put(b"good")
    mem._chunks[bytes(a)] = b"evil"
    with pytest.raises(CorruptChunkError):
        mem.get(a)
    disk = DiskStore(tmp_path)
    a = disk.put(b"good")
    with open(disk.path_for(a), "wb") as f:
        f.write(b"evil")
    with pytest.raises(CorruptChunkError):
        disk.get(a)


def test_no_collisions_on_random_chunks():
    rng = random.Random(7)
    addrs = {address_of(rng.randbytes(32)) for _ in range(100_000)}
    assert len(addrs) == 100_000


@pytest.fixture(scope="module")
def populated():
    rng = random.Random(3)
    mem = MemoryStore()
    addrs = [mem.put(rng.randbytes(16)) for _ in range(10_000)]
    return mem, addrs


@pytest.mark.parametrize("rate, lo, hi", [(0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (0.15, 0.14, 0.16)])
def test_bernoulli_rate(populated, rate, lo, hi):
    mem, addrs = populated
    s = FailureInjectingStore(mem, FailurePolicy.bernoulli(rate, seed=5))
    missing = sum(s.get(a) is None for a in addrs) / len(addrs)
    assert lo <= missing <= hi


def test_bernoulli_deterministic_and_seeded(populated):
    mem, addrs = populated
    def pattern(seed):
        s = FailureInjectingStore(mem, FailurePolicy.bernoulli(0.3, seed))
        return [s.get(a) is None for a in addrs[:2000]]
    assert pattern(1) == pattern(1)
    assert pattern(1) != pattern(2)


def test_injector_never_corrupts(populated):
    mem, addrs = populated
    s = FailureInjectingStore(mem, FailurePolicy.bernoulli(0.5, seed=9))
    for a in addrs[:2000]:
        got = s.get(a)
        assert got is None or got == mem.get(a)


def test_blocklist():
    mem = MemoryStore()
    a, b = mem.put(b"a"), mem.put(b"b")
    s = FailureInjectingStore(mem, FailurePolicy.blocked({a}))
    assert s.get(a) is None
    assert s.get(b) == b"b"


def test_failure_policy_validation():
    with pytest.raises(ValueError):
        FailurePolicy("sometimes")
    with pytest.raises(ValueError):
        FailurePolicy.bernoulli(1.5)


def test_latency_model_is_seeded():
    m = LatencyModel(median=0.01, sigma=1.0, seed=4)
    a = address_of(b"x")
    assert m(a) == LatencyModel(0.01, 1.0, 4)(a)
    assert LatencyModel(0.01, 0.0)(a) == 0.01
    draws = sorted(m(address_of(bytes([i]))) for i in range(1, 256))
    assert 0.005 < draws[len(draws) // 2] < 0.02


def test_delayed_and_counting_stores():
    mem = MemoryStore()
    a = mem.put(b"slow")
    c = CountingStore(DelayedStore(mem, lambda _: 0.02))
    t = time.monotonic()
    assert c.get(a) == b"slow"
    assert time.monotonic() - t >= 0.02
    assert c.gets == [bytes(a)]


class _Gateway:
    """Threaded in-process stand-in for an HTTP chunk gateway."""

    def __init__(self):
        self.chunks = {}
        self.delay = 0.0
        self.status = None  # forced status for GET
        self.fail_first = 0  # answer 503 this many times first
        self.hits = 0
        gw = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *a):
                pass

            def _send(self, code, body=b""):
                self.send_response(code)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                gw.hits += 1
                if gw.delay:
                    time.sleep(gw.delay)
                if gw.fail_first > 0:
                    gw.fail_first -= 1
                    return self._send(503)
                if gw.status:
                    return self._send(gw.status)
                h = self.path.rsplit("/", 1)[-1]
                body = gw.chunks.get(h)
                self._send(404) if body is None else self._send(200, body)

            def do_POST(self):
                body = self.rfile.read(int(self.headers["Content-Length"]))
                h = address_of(body).hex()
                gw.chunks[h] = body
                self._send(200, h.encode())

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"
        threading.Thread(target=self.server.serve_forever, daemon=True).start()


@pytest.fixture
def gateway():
    gw = _Gateway()
    yield gw
    gw.server.shutdown()
    gw.server.server_close()


def test_gateway_round_trip(gateway):
    s = GatewayStore(gateway.url, timeout=2, retries=0)
    a = s.put(b"over the wire")
    assert a == address_of(b"over the wire")
    assert s.get(a) == b"over the wire"


def test_gateway_missing_is_none(gateway):
    s = GatewayStore(gateway.url, timeout=2, retries=1, backoff=0)
    assert s.get(address_of(b"nope")) is None
    assert gateway.hits == 2


def test_gateway_timeout_is_none(gateway):
    s = GatewayStore(gateway.url, timeout=0.1, retries=0)
    a = s.put(b"late")
    gateway.delay = 0.5
    assert s.get(a) is None


def test_gateway_permanent_rejection(gateway):
    s = GatewayStore(gateway.url, timeout=2, retries=3, backoff=0)
    gateway.status = 400
    with pytest.raises(PermanentRejectionError):
        s.get(address_of(b"x"))
    assert gateway.hits == 1


def test_gateway_retries_server_errors(gateway):
    s = GatewayStore(gateway.url, timeout=2, retries=2, backoff=0)
    a = s.put(b"eventually")
    gateway.fail_first = 2
    assert s.get(a) == b"eventually"
    assert gateway.hits == 3


def test_gateway_corruption_detected(gateway):
    s = GatewayStore(gateway.url, timeout=2, retries=0)
    a = s.put(b"honest")
    gateway.chunks[a.hex()] = b"liar"
    with pytest.raises(CorruptChunkError):
        s.get(a)
