import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aestore.codec import (
    CodecConfig,
    EmptyFileError,
    IncompleteInputError,
    encode,
    n_blocks_for,
    reassemble,
    split,
    xor_bytes,
)
from aestore.lattice import BlockId, Strand, incoming_parity, outgoing_parity

from conftest import make_file

H, RH, LH = Strand.H, Strand.RH, Strand.LH


def _encode(data, block_size=64, s=5):
    cfg = CodecConfig.for_length(len(data), block_size, s=s, p=s)
    blocks = split(data, cfg)
    return cfg, blocks, {b.id: b.payload for b in blocks + encode(blocks, cfg)}


@pytest.mark.parametrize("length, n", [(1 << 20, 256), (1, 1), (4096, 1), (4097, 2), (8192, 2)])
def test_split_counts(length, n):
    assert n_blocks_for(length, 4096) == n
    cfg = CodecConfig.for_length(length, 4096)
    blocks = split(bytes(length), cfg)
    assert len(blocks) == n
    assert all(len(b.payload) == 4096 for b in blocks)
    assert [b.id.node for b in blocks] == list(range(1, n + 1))


def test_last_block_zero_padded():
    cfg = CodecConfig.for_length(4097, 4096)
    blocks = split(b"\xff" * 4097, cfg)
    assert blocks[1].payload == b"\xff" + bytes(4095)


def test_empty_file_rejected():
    cfg = CodecConfig.for_length(0, 4096)
    with pytest.raises(EmptyFileError):
        split(b"", cfg)


def test_codec_config_checks_block_count():
    from aestore.lattice import LatticeConfig

    with pytest.raises(ValueError):
        CodecConfig(LatticeConfig(n_data=3), 4096, 4096)


def test_xor_length_mismatch():
    with pytest.raises(ValueError):
        xor_bytes(b"ab", b"abc")


def test_parity_chain_identity():
    data = make_file(64 * 37 + 5, seed=3)
    cfg, _, blocks = _encode(data)
    for i in range(1, cfg.lattice.n_data + 1):
        d = blocks[BlockId.data(i)]
        for x in Strand:
            p_in = blocks[incoming_parity(i, x, cfg.lattice)]
            p_out = blocks[outgoing_parity(i, x)]
            assert xor_bytes(p_in, p_out) == d


def test_worked_example_by_hand():
    data = make_file(64 * 20, seed=9)
    _, _, blocks = _encode(data)
    d7, p2 = blocks[BlockId.data(7)], blocks[BlockId.parity(2, H)]
    want = bytes(a ^ b for a, b in zip(d7, p2))
    assert blocks[BlockId.parity(7, H)] == want


def test_seeds_nonzero_and_distinct():
    data = bytes(64 * 30)  # all-zero file: seeds must still differ
    cfg, _, blocks = _encode(data)
    seeds = [p for b, p in blocks.items() if b.is_seed]
    assert len(seeds) == 15
    assert len(set(seeds)) == 15
    assert all(any(p) for p in seeds)
    # on random content no two blocks share a payload, hence an address
    _, _, rnd = _encode(make_file(64 * 30, seed=5))
    assert len(set(rnd.values())) == len(rnd)


def test_seeds_follow_content():
    a = _encode(make_file(640, seed=1))[2]
    b = _encode(make_file(640, seed=2))[2]
    seed_ids = [k for k in a if k.is_seed]
    assert all(a[k] != b[k] for k in seed_ids)


def test_encode_deterministic():
    data = make_file(5000, seed=4)
    assert _encode(data)[2] == _encode(data)[2]


@pytest.mark.parametrize("n", [1, 3, 5, 6, 40])
def test_storage_count(n):
    data = make_file(64 * n, seed=n)
    cfg, blocks, allb = _encode(data)
    parities = [b for b in allb if not b.is_data]
    assert len(parities) == 3 * n + 3 * min(5, n) == cfg.lattice.n_parities


def test_encode_needs_every_data_block():
    data = make_file(64 * 6)
    cfg = CodecConfig.for_length(len(data), 64)
    blocks = split(data, cfg)
    with pytest.raises(IncompleteInputError) as e:
        encode(blocks[:2] + blocks[3:], cfg)
    assert e.value.missing == [BlockId.data(3)]
    with pytest.raises(IncompleteInputError):
        reassemble({1: blocks[0].payload}, cfg)


@settings(max_examples=60, deadline=None)
@given(st.binary(min_size=1, max_size=3000), st.sampled_from([1, 7, 64, 512]), st.integers(1, 7))
def test_round_trip(data, block_size, s):
    cfg, blocks, _ = _encode(data, block_size, s)
    assert reassemble(blocks, cfg) == data
    assert reassemble({b.id.node: b.payload for b in blocks}, cfg) == data
