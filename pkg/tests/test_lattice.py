import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aestore.lattice import (
    BlockId,
    GridPosition,
    InvalidIndexError,
    LatticeConfig,
    Strand,
    all_blocks,
    exists,
    grid_position,
    incoming_parity,
    node_at,
    parity_target,
    repair_pairs,
    strand_predecessor,
    strand_successor,
)

AE355 = LatticeConfig(s=5, p=5, n_data=100)
H, RH, LH = Strand.H, Strand.RH, Strand.LH
P = BlockId.parity
D = BlockId.data


@pytest.mark.parametrize("i, pos", [(1, (0, 0)), (7, (1, 1)), (5, (4, 0))])
def test_grid_position(i, pos):
    assert grid_position(i, AE355) == GridPosition(*pos)


def test_grid_position_rejects_zero():
    with pytest.raises(InvalidIndexError):
        grid_position(0, AE355)


@pytest.mark.parametrize("strand, succ", [(H, 12), (RH, 13), (LH, 11)])
def test_successor_of_7(strand, succ):
    assert strand_successor(7, strand, AE355) == succ


@pytest.mark.parametrize("i, strand, pred", [(12, H, 7), (3, RH, None), (11, LH, 7), (13, RH, 7)])
def test_predecessor(i, strand, pred):
    assert strand_predecessor(i, strand, AE355) == pred


def test_config_invariants():
    with pytest.raises(ValueError):
        LatticeConfig(s=5, p=4, n_data=10)
    with pytest.raises(ValueError):
        LatticeConfig(s=5, p=5, n_data=10, alpha=2)
    with pytest.raises(ValueError):
        LatticeConfig(s=0, p=0, n_data=10)
    with pytest.raises(ValueError):
        LatticeConfig(s=5, p=5, n_data=0)


def test_block_id_invariants():
    with pytest.raises(ValueError):
        BlockId(D(1).kind, 1, H)
    with pytest.raises(ValueError):
        BlockId(P(1, H).kind, 1, None)


def test_repair_pairs_interior_data_node():
    assert repair_pairs(D(7), AE355) == [
        (P(2, H), P(7, H)),
        (P(1, RH), P(7, RH)),
        (P(3, LH), P(7, LH)),
    ]


def test_repair_pairs_head_uses_seed_parities():
    pairs = repair_pairs(D(1), AE355)
    assert len(pairs) == 3
    for (p_in, p_out), x in zip(pairs, (H, RH, LH)):
        assert p_in.is_seed and p_in.strand is x
        assert parity_target(p_in, AE355) == 1
        assert p_out == P(1, x)
    # H seed of row 0 lives at virtual column -1, row 0.
    assert pairs[0][0] == P(-4, H)


def test_repair_pairs_parity():
    assert repair_pairs(P(7, H), AE355) == [(D(7), P(2, H)), (D(12), P(12, H))]


def test_seed_has_only_forward_pair():
    seed = incoming_parity(3, RH, AE355)
    assert repair_pairs(seed, AE355) == [(D(3), P(3, RH))]


def test_block_census():
    cfg = LatticeConfig(s=5, p=5, n_data=256)
    blocks = list(all_blocks(cfg))
    assert len(blocks) == len(set(blocks)) == 256 + 3 * 256 + 15
    assert cfg.n_parities == 783
    assert all(exists(b, cfg) for b in blocks)
    assert not exists(D(257), cfg)
    assert not exists(P(257, H), cfg)
    small = LatticeConfig(s=5, p=5, n_data=2)
    assert small.n_seeds == 6
    assert exists(P(-4, H), small)
    assert not exists(P(-2, H), small)  # would feed node 3


@settings(max_examples=300)
@given(st.integers(1, 10**6), st.integers(1, 12))
def test_grid_bijection(i, s):
    cfg = LatticeConfig(s=s, p=s, n_data=1)
    assert node_at(grid_position(i, cfg), cfg) == i


@settings(max_examples=300)
@given(st.integers(1, 10**6), st.sampled_from(list(Strand)), st.integers(1, 12))
def test_predecessor_inverts_successor(i, x, s):
    cfg = LatticeConfig(s=s, p=s, n_data=1)
    assert strand_predecessor(strand_successor(i, x, cfg), x, cfg) == i


@settings(max_examples=100)
@given(st.integers(1, 10**5), st.integers(2, 9))
def test_strand_membership(start, s):
    cfg = LatticeConfig(s=s, p=s, n_data=1)
    invariant = {
        H: lambda r, c: r,
        RH: lambda r, c: (r - c) % s,
        LH: lambda r, c: (r + c) % s,
    }
    for x, f in invariant.items():
        i = start
        r, c = grid_position(i, cfg)
        want = f(r, c)
        for _ in range(100):
            i = strand_successor(i, x, cfg)
            r, c = grid_position(i, cfg)
            assert f(r, c) == want


@settings(max_examples=200)
@given(st.integers(1, 400), st.sampled_from([None, *Strand]))
def test_repair_pair_shape(node, strand):
    cfg = LatticeConfig(s=5, p=5, n_data=400)
    b = D(node) if strand is None else P(node, strand)
    pairs = repair_pairs(b, cfg)
    assert len(pairs) == (3 if b.is_data else 2)
    for pair in pairs:
        assert len(pair) == 2
        assert b not in pair
