import random

import pytest

from aestore.repair import entangle
from aestore.store import FailureInjectingStore, FailurePolicy, MemoryStore

_ACCEPTANCE = []


def make_file(n, seed=0):
    return random.Random(seed).randbytes(n)


def entangled(n_bytes, block_size=64, seed=0, s=5):
    """(data, store, manifest) for a seeded random file."""
    data = make_file(n_bytes, seed)
    store = MemoryStore()
    manifest = entangle(data, store, block_size=block_size, s=s, p=s)
    return data, store, manifest


def without(store, manifest, blocks):
    addrs = {manifest.entries[b] for b in blocks}
    return FailureInjectingStore(store, FailurePolicy.blocked(addrs))


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(label, passed, detail=""):
        _ACCEPTANCE.append((label, bool(passed), detail))
        assert passed, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
