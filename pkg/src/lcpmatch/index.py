"""Preprocessing dictionaries: pair lengths, triplet-key kd-tree, vote table.

The pair dictionary answers "which pairs of P have length within a slack of
L" by binary search on a sorted length array. The triplet index stores the
triangle key of every ordered triplet of P in a kd-tree with axis-cycling
splits and answers axis-aligned box range queries. Both are immutable after
construction and safe for concurrent readers; a VoteTable is private to one
recognition task.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from numpy.typing import NDArray

from .errors import TooFewPoints
from .geometry import FloatArray, as_points

IntArray = NDArray[np.int64]


def ordered_pairs_and_lengths(P) -> tuple[IntArray, FloatArray]:
    """All index pairs (i < j) of P with their lengths, in index order."""
    pts = as_points(P)
    i, j = np.triu_indices(len(pts), k=1)
    lengths = np.linalg.norm(pts[i] - pts[j], axis=1)
    return np.column_stack([i, j]).astype(np.int64), lengths


def ordered_triplets_and_keys(P) -> tuple[IntArray, FloatArray]:
    """All ordered triplets (i, j, k) of distinct indices with triangle keys.

    Triplets come out in lexicographic order; the key of (i, j, k) is
    (|p_i p_j|, |p_i p_k|, |p_j p_k|).
    """
    pts = as_points(P)
    m = len(pts)
    if m < 3:
        raise TooFewPoints("triplet enumeration needs at least 3 points")
    trips = np.fromiter(
        (x for t in permutations(range(m), 3) for x in t),
        dtype=np.int64,
    ).reshape(-1, 3)
    diff = pts[:, None, :] - pts[None, :, :]
    dists = np.sqrt((diff * diff).sum(axis=2))
    keys = np.column_stack(
        [
            dists[trips[:, 0], trips[:, 1]],
            dists[trips[:, 0], trips[:, 2]],
            dists[trips[:, 1], trips[:, 2]],
        ]
    )
    return trips, keys


@dataclass(frozen=True, eq=False)
class PairDict:
    """Sorted pair-length dictionary over all pairs (i < j) of P."""

    lengths: FloatArray
    pairs: IntArray

    def __len__(self) -> int:
        return len(self.lengths)

    def query_range(self, length: float, slack: float) -> list[tuple[int, int]]:
        """Exactly the pairs with length in [length - slack, length + slack]."""
        lo = int(np.searchsorted(self.lengths, length - slack, side="left"))
        hi = int(np.searchsorted(self.lengths, length + slack, side="right"))
        return [(int(i), int(j)) for i, j in self.pairs[lo:hi]]

    def any_in_range(self, length: float, slack: float) -> bool:
        lo = int(np.searchsorted(self.lengths, length - slack, side="left"))
        hi = int(np.searchsorted(self.lengths, length + slack, side="right"))
        return hi > lo


def build_pair_dict(P) -> PairDict:
    pts = as_points(P)
    if len(pts) < 2:
        raise TooFewPoints("pair dictionary needs at least 2 points")
    pairs, lengths = ordered_pairs_and_lengths(pts)
    order = np.argsort(lengths, kind="stable")
    return PairDict(lengths[order], pairs[order])


class KDTree:
    """Static kd-tree with axis-cycling splits and vectorized bucket leaves.

    Supports exact axis-aligned box range queries over float keys of any
    dimension. Built once; queries allocate nothing shared, so concurrent
    readers are safe.
    """

    __slots__ = ("points", "leaf_size", "_nodes", "_root")

    def __init__(self, points, leaf_size: int = 32):
        self.points = np.asarray(points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError("KDTree expects a 2-D key array")
        self.leaf_size = leaf_size
        # Node: (axis, split, left, right) for internal, (-1, indices, None, None) for leaf.
        self._nodes: list[tuple] = []
        self._root = self._build(np.arange(len(self.points), dtype=np.int64), 0)

    def _build(self, idx: IntArray, depth: int) -> int:
        node_id = len(self._nodes)
        self._nodes.append(())
        if len(idx) <= self.leaf_size:
            self._nodes[node_id] = (-1, idx, None, None)
            return node_id
        axis = depth % self.points.shape[1]
        vals = self.points[idx, axis]
        h = len(idx) // 2
        order = np.argpartition(vals, h)
        idx = idx[order]
        split = float(self.points[idx[h], axis])
        left = self._build(idx[:h], depth + 1)
        right = self._build(idx[h:], depth + 1)
        self._nodes[node_id] = (axis, split, left, right)
        return node_id

    def query_box(self, lo, hi) -> IntArray:
        """Indices of stored keys inside the closed box [lo, hi] per coordinate."""
        hits, _ = self._query(lo, hi)
        return hits

    def query_box_counted(self, lo, hi) -> tuple[IntArray, int]:
        """Box query plus the number of tree nodes visited (for benchmarks)."""
        return self._query(lo, hi)

    def _query(self, lo, hi) -> tuple[IntArray, int]:
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        out: list[IntArray] = []
        stack = [self._root]
        visited = 0
        while stack:
            node_id = stack.pop()
            visited += 1
            axis, a, b, c = self._nodes[node_id]
            if axis == -1:
                idx = a
                pts = self.points[idx]
                mask = ((pts >= lo) & (pts <= hi)).all(axis=1)
                if mask.any():
                    out.append(idx[mask])
                continue
            if lo[axis] <= a:
                stack.append(b)
            if hi[axis] >= a:
                stack.append(c)
        if not out:
            return np.empty(0, dtype=np.int64), visited
        hits = np.concatenate(out)
        hits.sort()
        return hits, visited


@dataclass(frozen=True, eq=False)
class TripletIndex:
    """Triangle-key kd-tree over every ordered triplet of P.

    Degenerate (collinear) triplets are stored too: interval voting matches
    points near the base axis through them, and callers that need a motion
    basis filter collinear entries themselves. A sorted view of the first
    key coordinate supports the recognition loop, where one slab of pair
    lengths is shared by many box queries.
    """

    tree: KDTree
    triplets: IntArray
    keys: FloatArray
    first_order: IntArray
    first_sorted: FloatArray

    def __len__(self) -> int:
        return len(self.triplets)

    def query_box(self, key, slack: float) -> list[tuple[int, int, int]]:
        """Stored triplets whose key lies in the box key +- slack per coordinate."""
        k = np.asarray(key, dtype=np.float64)
        hits = self.tree.query_box(k - slack, k + slack)
        return [(int(a), int(b), int(c)) for a, b, c in self.triplets[hits]]

    def query_box_indices(self, key, slack: float) -> IntArray:
        """Row indices variant of query_box, for vectorized callers."""
        k = np.asarray(key, dtype=np.float64)
        return self.tree.query_box(k - slack, k + slack)

    def slab_rows(self, lo: float, hi: float) -> IntArray:
        """Row indices with first key coordinate in [lo, hi], by binary search."""
        a = int(np.searchsorted(self.first_sorted, lo, side="left"))
        b = int(np.searchsorted(self.first_sorted, hi, side="right"))
        return self.first_order[a:b]


def build_triplet_index(P, leaf_size: int = 32) -> TripletIndex:
    pts = as_points(P)
    if len(pts) < 3:
        raise TooFewPoints("triplet index needs at least 3 points")
    trips, keys = ordered_triplets_and_keys(pts)
    order = np.argsort(keys[:, 0], kind="stable")
    return TripletIndex(
        KDTree(keys, leaf_size=leaf_size), trips, keys, order, keys[order, 0]
    )


@dataclass
class VoteTable:
    """Votes per candidate base pair with the matched (q, p) lists.

    A duplicate (q, p) entry for the same base is ignored, so the vote count
    always equals the number of distinct matched pairs.
    """

    _lists: dict[tuple[int, int], list[tuple[int, int]]] = field(default_factory=dict)
    _seen: dict[tuple[int, int], set[tuple[int, int]]] = field(default_factory=dict)

    def add(self, base: tuple[int, int], matched: tuple[int, int]) -> bool:
        seen = self._seen.setdefault(base, set())
        if matched in seen:
            return False
        seen.add(matched)
        self._lists.setdefault(base, []).append(matched)
        return True

    def votes(self, base: tuple[int, int]) -> int:
        return len(self._lists.get(base, ()))

    def matched(self, base: tuple[int, int]) -> list[tuple[int, int]]:
        return self._lists.get(base, [])

    def items(self) -> list[tuple[tuple[int, int], list[tuple[int, int]]]]:
        return sorted(self._lists.items())

    def __len__(self) -> int:
        return len(self._lists)
