import math
from itertools import combinations

import numpy as np
import pytest

from lcpmatch.errors import OverlappingSets, TooLarge
from lcpmatch.sampling import (
    AllPairs,
    Expander,
    ExpanderGraph,
    Pigeonhole,
    diam_k,
    edges_between,
    estimate_lambda,
    materialize_pairs,
    pigeonhole_pairs,
    pigeonhole_triplets,
    random_regular_graph,
)

from conftest import random_points


# ---------------------------------------------------------------------------
# pigeonhole schemes
# ---------------------------------------------------------------------------


class TestPigeonholePairs:
    def test_n12_alpha3_counts(self):
        pairs = pigeonhole_pairs(12, 3)
        assert len(pairs) == 12  # 4 blocks of 3, C(3,2) each

    def test_alpha1_degenerate(self):
        assert pigeonhole_pairs(9, 1) == []

    @pytest.mark.parametrize("n", range(2, 13))
    @pytest.mark.parametrize("alpha", [2, 3])
    def test_exhaustive_covering(self, n, alpha):
        pairs = set(pigeonhole_pairs(n, alpha))
        threshold = n / alpha
        for size in range(max(2, math.floor(threshold) + 1), n + 1):
            if size <= threshold:
                continue
            for subset in combinations(range(n), size):
                inside = set(subset)
                assert any(a in inside and b in inside for a, b in pairs), (n, alpha, subset)

    def test_count_bound(self):
        for n in range(2, 41):
            for alpha in (1, 1.5, 2, 2.5, 3, 4):
                assert len(pigeonhole_pairs(n, alpha)) <= alpha * n + alpha**2


class TestPigeonholeTriplets:
    def test_n12_alpha2_counts(self):
        trips = pigeonhole_triplets(12, 2)
        assert len(trips) == 12  # 3 blocks of 4, C(4,3) each

    def test_alpha1_blocks_of_two(self):
        assert pigeonhole_triplets(6, 1) == []

    @pytest.mark.parametrize("n", range(3, 11))
    def test_exhaustive_covering_alpha2(self, n):
        alpha = 2
        trips = set(pigeonhole_triplets(n, alpha))
        threshold = n / alpha
        for size in range(max(3, math.floor(threshold) + 1), n + 1):
            if size <= threshold:
                continue
            for subset in combinations(range(n), size):
                inside = set(subset)
                assert any(
                    a in inside and b in inside and c in inside for a, b, c in trips
                ), (n, subset)

    def test_count_bound(self):
        for n in range(3, 41):
            for alpha in (1, 1.5, 2, 2.5, 3, 4):
                bound = (4 / 3) * alpha**2 * n + (2 * alpha) ** 3
                assert len(pigeonhole_triplets(n, alpha)) <= bound


# ---------------------------------------------------------------------------
# expander graphs
# ---------------------------------------------------------------------------


def dense_lambda(g: ExpanderGraph) -> float:
    """Oracle: full eigendecomposition, drop one copy of the trivial eigenvalue."""
    eig = np.sort(np.linalg.eigvalsh(g.adjacency()))[::-1]
    assert eig[0] == pytest.approx(g.d, abs=1e-8)
    return float(np.abs(eig[1:]).max())


class TestRandomRegularGraph:
    def test_k4_forced(self):
        g = random_regular_graph(4, 3, seed=1)
        assert sorted(g.edges) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        assert g.lambda_est == pytest.approx(1.0, abs=1e-3)

    def test_parity_error(self):
        with pytest.raises(ValueError):
            random_regular_graph(5, 3, seed=0)

    def test_degree_bound(self):
        with pytest.raises(ValueError):
            random_regular_graph(4, 4, seed=0)

    def test_spectral_acceptance(self):
        g = random_regular_graph(100, 16, seed=7)
        assert g.lambda_est <= 2 * math.sqrt(16)
        degrees = np.zeros(100, int)
        for a, b in g.edges:
            degrees[a] += 1
            degrees[b] += 1
        assert (degrees == 16).all()

    def test_seeded_determinism(self):
        g1 = random_regular_graph(40, 6, seed=3)
        g2 = random_regular_graph(40, 6, seed=3)
        assert g1.edges == g2.edges


class TestEstimateLambda:
    def test_k4_known_spectrum(self):
        g = ExpanderGraph.from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
        assert g.lambda_est == pytest.approx(1.0, abs=1e-3)

    def test_c6_cycle(self):
        # Eigenvalues 2*cos(2*pi*k/6): the -2 branch dominates after deflation.
        edges = [(i, (i + 1) % 6) for i in range(6)]
        g = ExpanderGraph.from_edges(6, edges)
        assert g.lambda_est == pytest.approx(2.0, abs=1e-3)

    def test_matches_dense_oracle_small(self):
        for seed in range(8):
            n, d = 12, 4
            g = random_regular_graph(n, d, seed=seed)
            exact = dense_lambda(g)
            assert estimate_lambda(g) == pytest.approx(exact, rel=2e-3, abs=1e-6)

    def test_disconnected_reports_degree(self):
        edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
        g = ExpanderGraph(6, 2, tuple(edges), 0.0)
        assert estimate_lambda(g) == 2.0


class TestEdgesBetween:
    def test_empty_sets(self):
        g = random_regular_graph(10, 3, seed=2)
        assert edges_between(g, [], [1, 2]) == 0

    def test_k4_bipartition(self):
        g = ExpanderGraph.from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
        assert edges_between(g, [0, 1], [2, 3]) == 4

    def test_overlap_raises(self):
        g = random_regular_graph(10, 3, seed=2)
        with pytest.raises(OverlappingSets):
            edges_between(g, [0, 1], [1, 2])

    def test_mixing_inequality_with_exact_lambda(self, rng):
        g = random_regular_graph(48, 8, seed=5)
        lam = dense_lambda(g)
        n, d = g.n, g.d
        for _ in range(100):
            size_u = int(rng.integers(1, n // 2))
            size_w = int(rng.integers(1, n - size_u))
            perm = rng.permutation(n)
            U, W = perm[:size_u], perm[size_u : size_u + size_w]
            e_uw = edges_between(g, U, W)
            assert abs(e_uw - d * size_u * size_w / n) <= lam * math.sqrt(size_u * size_w) + 1e-9

    def test_corollary_edge_between_large_sets(self, rng):
        g = random_regular_graph(64, 16, seed=9)
        lam = dense_lambda(g)
        floor_size = int(math.floor(lam * g.n / g.d)) + 1
        if 2 * floor_size > g.n:
            pytest.skip("corollary threshold exceeds n/2 for this graph")
        for _ in range(1000):
            perm = rng.permutation(g.n)
            U, W = perm[:floor_size], perm[floor_size : 2 * floor_size]
            assert edges_between(g, U, W) >= 1


# ---------------------------------------------------------------------------
# pair sources
# ---------------------------------------------------------------------------


class TestPairSources:
    def test_all_pairs(self):
        pairs = materialize_pairs(AllPairs(), 5)
        assert len(pairs) == 10

    def test_pigeonhole_source(self):
        assert materialize_pairs(Pigeonhole(3), 12) == pigeonhole_pairs(12, 3)

    def test_expander_source_distinct_sorted(self):
        pairs = materialize_pairs(Expander(6, seed=4), 30)
        assert len(pairs) == 30 * 6 // 2
        assert all(i < j for i, j in pairs)
        assert pairs == sorted(pairs)

    def test_expander_saturates_to_complete(self):
        pairs = materialize_pairs(Expander(10**6, seed=0), 20)
        assert len(pairs) == 190


# ---------------------------------------------------------------------------
# diam_k
# ---------------------------------------------------------------------------


def diam_k_recursive(points, k):
    """Second, independent brute force: recursive single-point removals."""
    pts = [np.asarray(p, float) for p in points]
    if k == 0:
        return max(
            float(np.linalg.norm(a - b)) for a, b in combinations(pts, 2)
        )
    best = math.inf
    for drop in range(len(pts)):
        rest = pts[:drop] + pts[drop + 1 :]
        best = min(best, diam_k_recursive(rest, k - 1))
    return best


class TestDiamK:
    def test_k0_is_diameter(self, rng):
        S = random_points(rng, 9)
        d = S[:, None, :] - S[None, :, :]
        assert diam_k(S, 0) == pytest.approx(float(np.sqrt((d * d).sum(-1)).max()))

    def test_collinear_line(self):
        S = [[i, 0, 0] for i in range(10)]
        assert diam_k(S, 2) == pytest.approx(7.0)

    def test_matches_recursive_oracle(self, rng):
        S = random_points(rng, 12)
        assert diam_k(S, 3) == pytest.approx(diam_k_recursive(S, 3))

    def test_too_large_guard(self):
        S = np.random.default_rng(0).uniform(size=(40, 3))
        with pytest.raises(TooLarge):
            diam_k(S, 12)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            diam_k(np.eye(3), 3)
