import numpy as np
import pytest

from lcpmatch.errors import TooFewPoints
from lcpmatch.geometry import triangle_key
from lcpmatch.index import (
    KDTree,
    VoteTable,
    build_pair_dict,
    build_triplet_index,
    ordered_triplets_and_keys,
)

from conftest import random_points


def brute_pairs(P):
    out = []
    for i in range(len(P)):
        for j in range(i + 1, len(P)):
            out.append(((i, j), float(np.linalg.norm(P[i] - P[j]))))
    return out


UNIT_CUBE = np.array(
    [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float
)


class TestPairDict:
    def test_three_points(self):
        d = build_pair_dict(np.eye(3))
        assert len(d) == 3

    def test_cube_lengths(self):
        d = build_pair_dict(UNIT_CUBE)
        assert len(d) == 28
        values, counts = np.unique(np.round(d.lengths, 12), return_counts=True)
        assert np.allclose(values, [1.0, np.sqrt(2), np.sqrt(3)])
        assert list(counts) == [12, 12, 4]

    def test_matches_bruteforce_enumeration(self, rng):
        P = random_points(rng, 12)
        d = build_pair_dict(P)
        stored = {tuple(int(x) for x in p): l for p, l in zip(d.pairs, d.lengths)}
        brute = dict(brute_pairs(P))
        assert stored.keys() == brute.keys()
        for pair, length in brute.items():
            assert stored[pair] == pytest.approx(length, abs=1e-12)

    def test_query_exact_hit_and_miss(self, rng):
        P = random_points(rng, 6)
        d = build_pair_dict(P)
        target = float(d.lengths[2])
        assert tuple(d.pairs[2]) in d.query_range(target, 0.0)
        assert d.query_range(float(d.lengths.min()) - 1.0, 0.5) == []

    def test_query_matches_linear_scan(self, rng):
        P = random_points(rng, 15)
        d = build_pair_dict(P)
        brute = brute_pairs(P)
        for _ in range(300):
            center = rng.uniform(0, d.lengths.max() * 1.1)
            slack = rng.uniform(0, 2.0)
            expected = sorted(p for p, l in brute if center - slack <= l <= center + slack)
            assert sorted(d.query_range(center, slack)) == expected

    def test_too_few(self):
        with pytest.raises(TooFewPoints):
            build_pair_dict([[0, 0, 0]])


class TestTripletIndex:
    def test_three_points_six_orderings(self):
        idx = build_triplet_index(np.eye(3))
        assert len(idx) == 6

    def test_four_points_24(self, rng):
        idx = build_triplet_index(random_points(rng, 4))
        assert len(idx) == 24

    def test_keys_match_definition(self, rng):
        P = random_points(rng, 6)
        trips, keys = ordered_triplets_and_keys(P)
        for t, k in zip(trips, keys):
            assert np.allclose(k, triangle_key(P[t[0]], P[t[1]], P[t[2]]))

    def test_box_query_exact_hit(self, rng):
        P = random_points(rng, 7)
        idx = build_triplet_index(P)
        row = 17
        hits = idx.query_box(idx.keys[row], 0.0)
        assert tuple(idx.triplets[row]) in hits

    def test_box_query_miss(self, rng):
        P = random_points(rng, 7)
        idx = build_triplet_index(P)
        assert idx.query_box(np.array([-100.0, -100.0, -100.0]), 1.0) == []

    def test_box_query_matches_linear_scan(self, rng):
        P = random_points(rng, 9)
        idx = build_triplet_index(P)
        for _ in range(1000):
            center = rng.uniform(0, idx.keys.max() * 1.1, size=3)
            slack = float(rng.uniform(0, 3.0))
            mask = (np.abs(idx.keys - center) <= slack).all(axis=1)
            expected = sorted(map(tuple, idx.triplets[mask]))
            assert sorted(idx.query_box(center, slack)) == expected


class TestKDTree:
    def test_counted_query_visits_fewer_nodes_than_scan(self, rng):
        pts = rng.uniform(0, 1, size=(4000, 3))
        tree = KDTree(pts, leaf_size=16)
        hits, visited = tree.query_box_counted([0.1] * 3, [0.2] * 3)
        mask = ((pts >= 0.1) & (pts <= 0.2)).all(axis=1)
        assert sorted(hits) == sorted(np.flatnonzero(mask))
        assert visited < len(pts) // 2

    def test_duplicate_coordinates(self):
        pts = np.zeros((50, 3))
        tree = KDTree(pts, leaf_size=4)
        assert len(tree.query_box([-0.1] * 3, [0.1] * 3)) == 50


class TestVoteTable:
    def test_single_vote(self):
        t = VoteTable()
        assert t.add((0, 1), (2, 3))
        assert t.votes((0, 1)) == 1

    def test_k_distinct_votes(self):
        t = VoteTable()
        for q in range(5):
            t.add((0, 1), (q + 2, q))
        assert t.votes((0, 1)) == 5
        assert len(t.matched((0, 1))) == 5

    def test_duplicate_ignored(self):
        t = VoteTable()
        pairs = [(2, 3), (4, 5), (2, 3), (2, 3), (4, 5)]
        for p in pairs:
            t.add((0, 1), p)
        # Set semantics: distinct pairs only.
        assert t.votes((0, 1)) == len(set(pairs))
        assert sorted(t.matched((0, 1))) == sorted(set(pairs))
