import numpy as np
import pytest
from hypothesis import given, strategies as st

from lshrendezvous.chalgos import (
    ChannelMultiset,
    HopAlgorithm,
    RingIndex,
    lsh2_hop,
    lsh3_hop,
    lsh4_build_multiset,
    lsh4_hop,
    lsh_hop,
    random_hop,
    synmac_hop,
)
from lshrendezvous.core import ChannelSet, Permutation, PrivateRandomness, SharedRandomness

from conftest import instances

C = ChannelSet.of(10, [2, 5, 9])
ID10 = Permutation.identity(10)
REV10 = Permutation.from_array([9 - x for x in range(10)])


def perms(seed, n):
    s = SharedRandomness(seed)
    return s.permutation("pi1", n), s.permutation("pi2", n)


class TestHopAlgorithm:
    def test_parse(self):
        assert HopAlgorithm.parse("lsh4:20:0.75") == HopAlgorithm("lsh4", 20, 0.75)
        assert HopAlgorithm.parse("LSH2").name == "lsh2"
        assert HopAlgorithm("lsh4", 20, 0.5).name == "lsh4:20:0.5"
        assert HopAlgorithm.parse(HopAlgorithm("lsh4", 20, 0.75).name) == HopAlgorithm("lsh4", 20, 0.75)

    @pytest.mark.parametrize("bad", ["nope", "lsh4", "lsh4:0:0.5", "lsh4:5:1.5", "lsh2:3"])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            HopAlgorithm.parse(bad)


class TestLsh:
    @pytest.mark.parametrize("u,want", [(6, 9), (5, 5), (0, 2)])
    def test_examples(self, u, want):
        assert lsh_hop(C, u) == want

    @pytest.mark.parametrize("u", [-1, 10])
    def test_out_of_range(self, u):
        with pytest.raises(ValueError):
            lsh_hop(C, u)


class TestLsh2:
    def test_identity_examples(self):
        assert lsh2_hop(C, ID10, ID10, 3) == 5
        assert lsh2_hop(C, ID10, ID10, 9) == 9

    def test_slot_beyond_period(self):
        with pytest.raises(ValueError):
            lsh2_hop(C, ID10, ID10, 10)

    @pytest.mark.parametrize("seed", range(5))
    def test_full_set_hits_preimage(self, seed):
        full = ChannelSet.of(10, range(10))
        pi1, pi2 = perms(seed, 10)
        for t in range(10):
            assert lsh2_hop(full, pi1, pi2, t) == pi1.inv(pi2(t))

    @given(instances(max_n=64), st.integers(0, 2**32))
    def test_collision_guarantee(self, inst, seed):
        pi1, pi2 = perms(seed, inst.n_total)
        for c in set(inst.c1) & set(inst.c2):
            t = int(pi2.inv(pi1(c)))
            assert lsh2_hop(inst.c1, pi1, pi2, t) == c == lsh2_hop(inst.c2, pi1, pi2, t)


class TestLsh3:
    def test_examples(self):
        assert lsh3_hop(C, ID10, 6) == 9
        assert lsh3_hop(C, REV10, 0) == 9

    @given(instances(), st.integers(0, 2**32))
    def test_exact_match(self, inst, seed):
        pi1, _ = perms(seed, inst.n_total)
        for c in inst.c1:
            assert lsh3_hop(inst.c1, pi1, int(pi1(c))) == c

    @pytest.mark.parametrize("n", range(2, 17))
    def test_identity_reduces_to_lsh(self, n):
        ident = Permutation.identity(n)
        rng = np.random.default_rng(n)
        for _ in range(10):
            c = ChannelSet.of(n, rng.choice(n, rng.integers(1, n + 1), replace=False))
            for u in range(n):
                assert lsh3_hop(c, ident, u) == lsh_hop(c, u)


class TestMultiset:
    def test_single_entry(self):
        pi1, pi2 = perms(3, 10)
        assert list(lsh4_build_multiset(C, pi1, pi2, 1)) == [lsh2_hop(C, pi1, pi2, 0)]

    def test_identity_example(self):
        assert list(lsh4_build_multiset(C, ID10, ID10, 4)) == [2, 2, 2, 5]

    def test_full_set_is_permutation(self):
        pi1, pi2 = perms(8, 12)
        full = ChannelSet.of(12, range(12))
        assert sorted(lsh4_build_multiset(full, pi1, pi2, 12)) == list(range(12))

    def test_bounds(self):
        with pytest.raises(ValueError):
            lsh4_build_multiset(C, ID10, ID10, 11)
        with pytest.raises(ValueError):
            lsh4_build_multiset(C, ID10, ID10, 0)

    @given(instances(max_n=40), st.integers(0, 2**32), st.data())
    def test_deterministic_members(self, inst, seed, data):
        t0 = data.draw(st.integers(1, inst.n_total))
        pi1, pi2 = perms(seed, inst.n_total)
        a = lsh4_build_multiset(inst.c1, pi1, pi2, t0)
        b = lsh4_build_multiset(inst.c1, pi1, pi2, t0)
        assert list(a) == list(b) and a.t0 == t0
        assert all(x in inst.c1 for x in a)
        assert list(a) == [lsh2_hop(inst.c1, pi1, pi2, t) for t in range(t0)]


class TestPrivateHops:
    def test_random_singleton(self):
        assert random_hop(ChannelSet.of(10, [7]), PrivateRandomness(0), 4) == 7

    def test_random_frequency(self):
        c = ChannelSet.of(4, [0, 1])
        priv = PrivateRandomness(11)
        draws = np.array([random_hop(c, priv, i) for i in range(100_000)])
        frac = (draws == 0).mean()
        assert abs(frac - 0.5) < 3 * np.sqrt(0.25 / 100_000)

    def test_random_reproducible(self):
        a = [random_hop(C, PrivateRandomness(4), i) for i in range(50)]
        b = [random_hop(C, PrivateRandomness(4), i) for i in range(50)]
        assert a == b

    def test_synmac_examples(self):
        priv = PrivateRandomness(0)
        assert synmac_hop(C, 5, priv, 0) == 5
        assert synmac_hop(C, 12, priv, 0) == 2

    def test_synmac_patch_uniform(self):
        priv = PrivateRandomness(2)
        n = 30_000
        draws = np.array([synmac_hop(C, 3, priv, i) for i in range(n)])
        for ch in (2, 5, 9):
            frac = (draws == ch).mean()
            assert abs(frac - 1 / 3) < 3 * np.sqrt((1 / 3) * (2 / 3) / n)

    def test_lsh4_p0_is_random(self):
        priv = PrivateRandomness(9)
        ms = ChannelMultiset(np.array([9, 9, 9]))
        for i in range(500):
            assert lsh4_hop(C, ms, 0.0, priv, i) == random_hop(C, priv, i)

    def test_lsh4_p1_constant(self):
        ms = ChannelMultiset(np.array([7, 7, 7]))
        c = ChannelSet.of(10, [1, 7])
        priv = PrivateRandomness(1)
        assert {lsh4_hop(c, ms, 1.0, priv, i) for i in range(200)} == {7}


class TestMembershipAndRing:
    @given(instances(max_n=32), st.integers(0, 2**32), st.integers(0, 10_000))
    def test_every_hop_is_a_member(self, inst, seed, t):
        n = inst.n_total
        s = SharedRandomness(seed)
        pi1, pi2 = s.permutation("pi1", n), s.permutation("pi2", n)
        priv = PrivateRandomness(seed)
        u = s.uniform(t, n)
        ms = lsh4_build_multiset(inst.c1, pi1, pi2, min(n, 5))
        for ch in (
            lsh_hop(inst.c1, u),
            lsh2_hop(inst.c1, pi1, pi2, t % n),
            lsh3_hop(inst.c1, pi1, u),
            random_hop(inst.c1, priv, t),
            synmac_hop(inst.c1, t, priv, t),
            lsh4_hop(inst.c1, ms, 0.5, priv, t),
        ):
            assert ch in inst.c1

    @given(instances(max_n=32), st.integers(0, 2**32))
    def test_ring_index_matches_scalar(self, inst, seed):
        pi1 = SharedRandomness(seed).permutation("pi1", inst.n_total)
        u = np.arange(inst.n_total)
        assert RingIndex(inst.c2, pi1).hops(u).tolist() == [lsh3_hop(inst.c2, pi1, int(x)) for x in u]
        assert RingIndex(inst.c2).hops(u).tolist() == [lsh_hop(inst.c2, int(x)) for x in u]
