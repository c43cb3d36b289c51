import numpy as np
import pytest

from lcpmatch.errors import NoCongruentTriplets
from lcpmatch.exact import (
    ExactParams,
    alignment,
    geometric_hashing,
    ght,
    ght_pair_based,
    motion_key,
    pose_clustering,
)
from lcpmatch.geometry import RigidMotion, is_collinear, motion_from_bases
from lcpmatch.oracle import GenSpec, exact_lcp_bruteforce, generate_instance, random_rotation

from conftest import random_points

UNIT_CUBE = np.array(
    [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float
)


def five_point_instance():
    """Five common points plus distractors on both sides, exactly congruent.

    Mirrors the classic picture: the planted motion is discoverable through
    any pair of the common set and collects k - 2 = 3 votes per base pair.
    """
    common = np.array(
        [[0, 0, 0], [4, 0, 0], [0, 5, 0], [1, 2, 7], [6, 3, 2]], dtype=float
    )
    p_extra = np.array([[20, 1, 3], [25, 7, 1], [22, 13, 9]], dtype=float)
    q_extra = np.array([[-30, 5, 2], [-28, -9, 4]], dtype=float)
    P = np.vstack([common, p_extra])
    rot = random_rotation(np.random.default_rng(424242))
    mu = RigidMotion(rot, np.array([3.0, -17.0, 6.0]))
    Q = np.vstack([mu.apply(common), q_extra])
    return P, Q, mu


def count_identity_triplet_votes(P, tau=1e-9):
    """Oracle recount: ordered non-collinear triplet pairs mapping via identity."""
    from itertools import permutations

    count = 0
    for t in permutations(range(len(P)), 3):
        if not is_collinear(P[t[0]], P[t[1]], P[t[2]]):
            count += 1
    return count


class TestPoseClustering:
    def test_cube_identity_votes(self):
        res = pose_clustering(UNIT_CUBE, UNIT_CUBE)
        assert res.size == 8
        assert np.abs(res.motion.rotation - np.eye(3)).max() <= 1e-9
        assert res.votes == count_identity_triplet_votes(UNIT_CUBE)

    def test_planted_motion_recovered(self, rng):
        P = random_points(rng, 9)
        mu_true = RigidMotion(random_rotation(rng), rng.uniform(-5, 5, 3))
        Q = mu_true.inverse().apply(P[2:8])
        res = pose_clustering(P, Q)
        rec = res.motion
        assert np.abs(rec.rotation - mu_true.inverse().rotation.T).max() <= 1e-6
        assert res.size == 6

    def test_five_point_vote_count(self):
        P, Q, _ = five_point_instance()
        res = pose_clustering(P, Q)
        assert res.size == 5
        assert res.votes == 5 * 4 * 3  # C(5,3) * 3! ordered matches


class TestAlignment:
    def test_identical_sets_vote_count(self, rng):
        P = random_points(rng, 8)
        res = alignment(P, P)
        assert res.votes == len(P) - 3
        assert res.size == len(P)

    def test_no_congruent_triplets(self, rng):
        P = random_points(rng, 4, span=1.0)
        Q = P * 10.0
        with pytest.raises(NoCongruentTriplets):
            alignment(P, Q)

    def test_agrees_with_pose_clustering(self):
        P, Q, _ = five_point_instance()
        assert alignment(P, Q).size == pose_clustering(P, Q).size


class TestGht:
    def test_equivalent_to_pose_clustering(self):
        for seed in range(10):
            inst = generate_instance(
                GenSpec(m=9, n=8, k=5, eps=0.0, exact=True), seed=seed
            )
            a = pose_clustering(inst.P, inst.Q)
            b = ght(inst.P, inst.Q)
            assert a.size == b.size
            assert a.votes == b.votes

    def test_five_point(self):
        P, Q, _ = five_point_instance()
        res = ght(P, Q)
        assert res.size == 5


class TestGeometricHashing:
    def test_equivalent_to_alignment(self):
        for seed in range(6):
            inst = generate_instance(
                GenSpec(m=8, n=7, k=5, eps=0.0, exact=True), seed=seed
            )
            a = alignment(inst.P, inst.Q)
            b = geometric_hashing(inst.P, inst.Q)
            assert a.size == b.size

    def test_five_point(self):
        P, Q, _ = five_point_instance()
        res = geometric_hashing(P, Q)
        assert res.size == 5
        assert res.votes == 2  # k - 3 further points


class TestGhtPairBased:
    def test_five_point_three_votes(self):
        P, Q, _ = five_point_instance()
        res = ght_pair_based(P, Q)
        assert res.votes == 3  # k - 2 through any common pair
        assert res.size == 5

    def test_identity_on_equal_sets(self, rng):
        P = random_points(rng, 7)
        res = ght_pair_based(P, P)
        assert res.size == 7
        assert res.votes == 5

    def test_pigeonhole_matches_all_pairs(self):
        from lcpmatch.sampling import Pigeonhole

        for seed in range(5):
            inst = generate_instance(
                GenSpec(m=12, n=12, k=7, eps=0.0, exact=True), seed=seed
            )
            full = ght_pair_based(inst.P, inst.Q)
            sampled = ght_pair_based(inst.P, inst.Q, pairs=Pigeonhole(4))
            assert full.size == sampled.size  # k > n/alpha = 3


class TestVoteAccounting:
    @pytest.mark.parametrize("k", [3, 4, 6])
    def test_pair_based_winner_gets_k_minus_2(self, k):
        inst = generate_instance(
            GenSpec(m=10, n=9, k=k, eps=0.0, exact=True), seed=100 + k
        )
        res = ght_pair_based(inst.P, inst.Q)
        assert res.votes == k - 2
        assert res.size == k


class TestEquivalenceMini:
    def test_all_algorithms_agree_with_oracle(self):
        from lcpmatch.da import da_exact

        for seed in range(20):
            inst = generate_instance(
                GenSpec(m=10, n=9, k=4 + seed % 5, eps=0.0, exact=True), seed=seed
            )
            truth = exact_lcp_bruteforce(inst.P, inst.Q).lcp_size
            assert truth >= 3
            sizes = {
                "pose": pose_clustering(inst.P, inst.Q).size,
                "align": alignment(inst.P, inst.Q).size,
                "ght": ght(inst.P, inst.Q).size,
                "ghash": geometric_hashing(inst.P, inst.Q).size,
                "ght_pair": ght_pair_based(inst.P, inst.Q).size,
                "da_exact": da_exact(inst.P, inst.Q).size,
            }
            assert set(sizes.values()) == {truth}, (seed, truth, sizes)


class TestMotionKey:
    def test_equal_for_same_motion(self, rng):
        mu = RigidMotion(random_rotation(rng), rng.uniform(-5, 5, 3))
        trip = random_points(rng, 3)
        rebuilt = motion_from_bases(trip, mu.apply(trip))
        assert motion_key(mu, 1e-6) == motion_key(rebuilt, 1e-6)

    def test_distinct_planted_motions_never_collide(self):
        keys = set()
        for seed in range(40):
            rot = random_rotation(np.random.default_rng(seed))
            tr = np.random.default_rng(seed + 1000).uniform(-20, 20, 3)
            keys.add(motion_key(RigidMotion(rot, tr), 1e-6))
        assert len(keys) == 40

    def test_grid_must_be_positive(self):
        with pytest.raises(ValueError):
            ExactParams(tau=1e-9, motion_grid=0.0)
