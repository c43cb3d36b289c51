"""Deterministic pair/triplet sampling schemes and expander pair sources.

Pigeonhole sampling partitions the index set into consecutive blocks and
emits all within-block pairs (or triplets): any unknown subset larger than
n/alpha must put two (three) points into one block, so some emitted pair
(triplet) lands inside it. Blocks are balanced to sizes >= ceil(alpha)
(>= ceil(2*alpha) for triplets); keeping the block count at most
floor(n / block_size) is what makes the covering guarantee hold for ragged n.

Expander pair sources realize "well-spread pairs" as random regular graphs
whose second eigenvalue is estimated and verified a posteriori; generation
retries with derived seeds until the estimate clears 2*sqrt(d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConstructionFailed, OverlappingSets, TooFewPoints, TooLarge
from .geometry import as_points, pairwise_distances


# ---------------------------------------------------------------------------
# Pair sources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AllPairs:
    """Every index pair (i < j)."""


@dataclass(frozen=True)
class Pigeonhole:
    """Within-block pairs of a balanced block partition."""

    alpha: float


@dataclass(frozen=True)
class Expander:
    """Edge set of a verified random regular graph (complete graph if d >= n-1)."""

    degree: int
    seed: int


PairSource = AllPairs | Pigeonhole | Expander


def materialize_pairs(source: PairSource, n: int) -> list[tuple[int, int]]:
    """Concrete (i < j) index pairs over {0, ..., n-1} for a pair source."""
    if isinstance(source, AllPairs):
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    if isinstance(source, Pigeonhole):
        return pigeonhole_pairs(n, source.alpha)
    if isinstance(source, Expander):
        if source.degree >= n - 1:
            # A nominal degree at or past n-1 degenerates to the complete graph.
            return [(i, j) for i in range(n) for j in range(i + 1, n)]
        g = random_regular_graph(n, source.degree, source.seed)
        return sorted((int(a), int(b)) for a, b in g.edges)
    raise TypeError(f"unknown pair source: {source!r}")


# ---------------------------------------------------------------------------
# Pigeonhole partitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """Consecutive index blocks covering {0, ..., n-1}."""

    blocks: tuple[tuple[int, ...], ...]


def _balanced_partition(n: int, block_size: int) -> Partition:
    """At most floor(n / block_size) blocks of near-equal size >= block_size."""
    if n <= 0:
        return Partition(())
    count = max(1, n // block_size)
    bounds = [round(i * n / count) for i in range(count + 1)]
    blocks = tuple(tuple(range(bounds[i], bounds[i + 1])) for i in range(count))
    return Partition(blocks)


def pigeonhole_partition(n: int, alpha: float, arity: int = 2) -> Partition:
    """Block partition backing the pair (arity=2) or triplet (arity=3) scheme."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    size = math.ceil(alpha) if arity == 2 else math.ceil(2 * alpha)
    return _balanced_partition(n, max(1, size))


def pigeonhole_pairs(n: int, alpha: float) -> list[tuple[int, int]]:
    """All within-block pairs; any I with |I| > n/alpha contains one of them."""
    if n < 1:
        raise ValueError("n must be >= 1")
    part = pigeonhole_partition(n, alpha, arity=2)
    out: list[tuple[int, int]] = []
    for block in part.blocks:
        out.extend(combinations(block, 2))
    return out


def pigeonhole_triplets(n: int, alpha: float) -> list[tuple[int, int, int]]:
    """All within-block triplets; any I with |I| > n/alpha holds three in a block."""
    if n < 1:
        raise ValueError("n must be >= 1")
    part = pigeonhole_partition(n, alpha, arity=3)
    out: list[tuple[int, int, int]] = []
    for block in part.blocks:
        out.extend(combinations(block, 3))
    return out


# ---------------------------------------------------------------------------
# Random regular graphs and spectral estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExpanderGraph:
    """Simple d-regular graph with an estimated second eigenvalue."""

    n: int
    d: int
    edges: tuple[tuple[int, int], ...]
    lambda_est: float

    @classmethod
    def from_edges(cls, n: int, edges, lambda_est: float | None = None) -> "ExpanderGraph":
        es = tuple(sorted((min(a, b), max(a, b)) for a, b in edges))
        deg = np.zeros(n, dtype=np.int64)
        for a, b in es:
            if a == b:
                raise ValueError("self-loop in edge list")
            deg[a] += 1
            deg[b] += 1
        if len(set(es)) != len(es):
            raise ValueError("duplicate edge in edge list")
        degrees = set(int(x) for x in deg)
        if len(degrees) != 1:
            raise ValueError(f"graph is not regular: degrees {sorted(degrees)}")
        d = degrees.pop()
        g = cls(n, d, es, 0.0)
        lam = estimate_lambda(g) if lambda_est is None else lambda_est
        return cls(n, d, es, lam)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a


def _pairing_attempt(n: int, d: int, rng: np.random.Generator) -> set[tuple[int, int]] | None:
    """One run of the stub-pairing model, rejecting loops and repeats locally.

    Stubs that would create a self-loop or a duplicate edge are thrown back
    and re-shuffled; returns None when the leftover stubs cannot possibly be
    paired, so the caller restarts.
    """
    edges: set[tuple[int, int]] = set()
    stubs = list(range(n)) * d
    passes = 0
    while stubs:
        passes += 1
        if passes > 200 * max(d, 1):
            return None
        rng.shuffle(stubs)
        leftover: list[int] = []
        it = iter(stubs)
        for s1, s2 in zip(it, it):
            if s1 > s2:
                s1, s2 = s2, s1
            if s1 == s2 or (s1, s2) in edges:
                leftover.extend((s1, s2))
            else:
                edges.add((s1, s2))
        if len(leftover) == len(stubs):
            uniq = sorted(set(leftover))
            rescuable = any(
                (a, b) not in edges
                for k, a in enumerate(uniq)
                for b in uniq[k + 1 :]
            )
            if not rescuable:
                return None
        stubs = leftover
    return edges


def random_regular_graph(n: int, d: int, seed: int, max_retries: int = 32) -> ExpanderGraph:
    """Seeded simple d-regular graph with verified spectral estimate.

    Regenerates from derived seeds until lambda_est <= 2*sqrt(d); raises
    ConstructionFailed past the retry cap.
    """
    if not 0 <= d < n:
        raise ValueError("degree must satisfy 0 <= d < n")
    if (n * d) % 2 != 0:
        raise ValueError("n * d must be even for a d-regular graph")
    bound = 2.0 * math.sqrt(d)
    for attempt in range(max_retries):
        rng = np.random.default_rng([seed, attempt])
        edges = None
        for _ in range(64):
            edges = _pairing_attempt(n, d, rng)
            if edges is not None:
                break
        if edges is None:
            continue
        g = ExpanderGraph(n, d, tuple(sorted(edges)), 0.0)
        lam = estimate_lambda(g)
        if lam <= bound:
            return ExpanderGraph(n, d, g.edges, lam)
    raise ConstructionFailed(
        f"no {d}-regular graph on {n} vertices with lambda <= {bound:.3f} in {max_retries} tries"
    )


def _connected(n: int, edges) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                stack.append(w)
    return bool(seen.all())


def estimate_lambda(g: ExpanderGraph, rel_tol: float = 1e-4) -> float:
    """Largest |eigenvalue| of the adjacency matrix excluding the trivial one.

    For a connected d-regular graph the top eigenpair is (d, all-ones), which
    is deflated exactly; power iteration then runs on the squared deflated
    operator so paired +/- eigenvalues cannot stall convergence. Disconnected
    graphs report d (their true second eigenvalue, and a failure signal for
    the 2*sqrt(d) acceptance loop whenever d > 4).
    """
    n, d = g.n, g.d
    if n <= 1:
        return 0.0
    if not _connected(n, g.edges):
        return float(d)
    a = g.adjacency()

    def deflated(v: np.ndarray) -> np.ndarray:
        return a @ v - d * v.mean()

    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(n)
    v -= v.mean()
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return 0.0
    v /= norm
    est = 0.0
    max_steps = int(10 * n * max(math.log(n), 1.0)) // 2 + 25
    for _ in range(max_steps):
        w = deflated(deflated(v))
        w -= w.mean()
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        new_est = math.sqrt(nw)
        v = w / nw
        if abs(new_est - est) <= rel_tol * max(new_est, 1e-30):
            return new_est
        est = new_est
    return est


def edges_between(g: ExpanderGraph, U, W) -> int:
    """Exact |e(U, W)| for disjoint vertex sets, by edge-list scan."""
    su = set(int(x) for x in U)
    sw = set(int(x) for x in W)
    if su & sw:
        raise OverlappingSets("U and W must be disjoint")
    count = 0
    for a, b in g.edges:
        if (a in su and b in sw) or (a in sw and b in su):
            count += 1
    return count


# ---------------------------------------------------------------------------
# diam_k
# ---------------------------------------------------------------------------


def diam_k(S, k: int) -> float:
    """Minimum diameter of S after deleting k points, by brute force.

    Exact over all C(|S|, k) removals; guarded so the enumeration stays at
    desk scale.
    """
    pts = as_points(S)
    n = len(pts)
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < |S|")
    if n - k < 2:
        raise TooFewPoints("at least two points must remain")
    if math.comb(n, k) > 10**6:
        raise TooLarge(f"C({n}, {k}) removals exceed the brute-force cap")
    d = pairwise_distances(pts)
    if k == 0:
        return float(d.max())
    best = math.inf
    idx = np.arange(n)
    for removed in combinations(range(n), k):
        keep = np.setdiff1d(idx, removed, assume_unique=True)
        diam = float(d[np.ix_(keep, keep)].max())
        if diam < best:
            best = diam
    return best
