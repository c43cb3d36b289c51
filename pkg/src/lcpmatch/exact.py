"""The classic voting algorithms for exact matching of 3D point sets.

All five share the same skeleton: propose rigid motions from congruent
bases, vote, and verify the winner. They differ in the voting space and in
how candidates are found:

- pose_clustering: brute-force triplet pairs, votes per quantized motion.
- alignment: brute-force triplet pairs, votes by verifying remaining points.
- ght: pose clustering accelerated by the triangle-key index.
- geometric_hashing: alignment accelerated by a quad-key dictionary.
- ght_pair_based: motions voted per common base pair, so a k-matching wins
  k - 2 votes through any pair inside it.

"Exact" is realized in floating point: congruence within an absolute
tolerance tau, and motion votes on a quantization grid. Collinear bases are
skipped since they do not pin down a motion.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from math import floor

import numpy as np

from .errors import NoCongruentTriplets, TooFewPoints
from .geometry import (
    RigidMotion,
    as_points,
    collinear_mask,
    motion_from_bases,
    pairwise_distances,
)
from .index import build_triplet_index, ordered_triplets_and_keys
from .result import MatchResult, build_match_result
from .sampling import AllPairs, PairSource, materialize_pairs


@dataclass(frozen=True)
class ExactParams:
    """Floating-point realization of exact matching.

    tau: absolute congruence/match tolerance (a length).
    motion_grid: quantization step for motion votes.
    collinear_rel: relative threshold for skipping degenerate bases.
    """

    tau: float = 1e-9
    motion_grid: float = 1e-6
    collinear_rel: float = 1e-9

    def __post_init__(self):
        if self.tau <= 0 or self.motion_grid <= 0:
            raise ValueError("tau and motion_grid must be positive")


def motion_key(motion: RigidMotion, grid: float) -> tuple[int, ...]:
    """Quantized 12-tuple of the motion; equal for motions that agree on a basis."""
    return tuple(int(round(v / grid)) for v in motion.flatten())


def _require_sizes(P, Q, min_p: int, min_q: int):
    if len(P) < min_p or len(Q) < min_q:
        raise TooFewPoints(f"need at least {min_p} model and {min_q} scene points")


def _noncollinear_ordered_triplets(pts, rel: float):
    trips, keys = ordered_triplets_and_keys(pts)
    keep = ~collinear_mask(pts, trips, rel=rel)
    return trips[keep], keys[keep]


def _congruent_triplet_pairs(q_keys, p_keys, tau: float):
    """Yield (q_row, p_row) index pairs with keys equal within tau, in lex order."""
    chunk = max(1, 2_000_000 // max(len(p_keys), 1))
    for lo in range(0, len(q_keys), chunk):
        hi = min(lo + chunk, len(q_keys))
        close = (np.abs(q_keys[lo:hi, None, :] - p_keys[None, :, :]) <= tau).all(axis=2)
        for qi, pi in zip(*np.nonzero(close)):
            yield lo + int(qi), int(pi)


def _matched_count(P, Q, motion, tau, exclude):
    img = motion.apply(Q)
    diff = img[:, None, :] - P[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    ok = d.min(axis=1) <= tau
    ok[list(exclude)] = False
    return int(ok.sum())


def pose_clustering(P, Q, params: ExactParams = ExactParams()) -> MatchResult:
    """Vote each congruent triplet pair's motion in a quantized motion space."""
    pp, qq = as_points(P), as_points(Q)
    _require_sizes(pp, qq, 3, 3)
    q_trips, q_keys = _noncollinear_ordered_triplets(qq, params.collinear_rel)
    p_trips, p_keys = _noncollinear_ordered_triplets(pp, params.collinear_rel)
    votes: dict[tuple, list] = {}
    for qi, pi in _congruent_triplet_pairs(q_keys, p_keys, params.tau):
        tq, tp = q_trips[qi], p_trips[pi]
        mu = motion_from_bases(qq[tq], pp[tp])
        key = motion_key(mu, params.motion_grid)
        rec = votes.get(key)
        if rec is None:
            votes[key] = [1, tuple(int(x) for x in tq), tuple(int(x) for x in tp), mu]
        else:
            rec[0] += 1
    if not votes:
        raise NoCongruentTriplets("no congruent triplet pair")
    key, rec = min(votes.items(), key=lambda it: (-it[1][0], it[1][1], it[1][2], it[0]))
    return build_match_result(pp, qq, rec[3], params.tau, votes=rec[0])


def alignment(P, Q, params: ExactParams = ExactParams()) -> MatchResult:
    """Score each congruent triplet pair's motion by verifying remaining points."""
    pp, qq = as_points(P), as_points(Q)
    _require_sizes(pp, qq, 3, 3)
    q_trips, q_keys = _noncollinear_ordered_triplets(qq, params.collinear_rel)
    p_trips, p_keys = _noncollinear_ordered_triplets(pp, params.collinear_rel)
    best = None
    for qi, pi in _congruent_triplet_pairs(q_keys, p_keys, params.tau):
        tq, tp = q_trips[qi], p_trips[pi]
        mu = motion_from_bases(qq[tq], pp[tp])
        count = _matched_count(pp, qq, mu, params.tau, exclude=tq)
        cand = (-count, tuple(int(x) for x in tq), tuple(int(x) for x in tp))
        if best is None or cand < best[0]:
            best = (cand, mu)
    if best is None:
        raise NoCongruentTriplets("no congruent triplet pair")
    return build_match_result(pp, qq, best[1], params.tau, votes=-best[0][0])


def ght(P, Q, params: ExactParams = ExactParams()) -> MatchResult:
    """Pose clustering with candidates found through the triangle-key index."""
    pp, qq = as_points(P), as_points(Q)
    _require_sizes(pp, qq, 3, 3)
    q_trips, q_keys = _noncollinear_ordered_triplets(qq, params.collinear_rel)
    idx = build_triplet_index(pp)
    p_ok = ~collinear_mask(pp, idx.triplets, rel=params.collinear_rel)
    votes: dict[tuple, list] = {}
    for row in range(len(q_trips)):
        tq = q_trips[row]
        hits = idx.query_box_indices(q_keys[row], params.tau)
        for h in hits:
            if not p_ok[h]:
                continue
            tp = idx.triplets[h]
            mu = motion_from_bases(qq[tq], pp[tp])
            key = motion_key(mu, params.motion_grid)
            rec = votes.get(key)
            if rec is None:
                votes[key] = [1, tuple(int(x) for x in tq), tuple(int(x) for x in tp), mu]
            else:
                rec[0] += 1
    if not votes:
        raise NoCongruentTriplets("no congruent triplet pair")
    key, rec = min(votes.items(), key=lambda it: (-it[1][0], it[1][1], it[1][2], it[0]))
    return build_match_result(pp, qq, rec[3], params.tau, votes=rec[0])


class _GridDict:
    """Tolerance-aware dictionary over float key vectors plus a discrete tag.

    Keys are hashed by grid cell; queries probe neighbor cells only along
    coordinates within tau of a cell boundary, then filter exactly.
    """

    def __init__(self, dim: int, cell: float = 1e-6):
        self.dim = dim
        self.cell = cell
        self._cells: dict[tuple, list] = {}

    def insert(self, vec, tag, payload):
        v = tuple(float(x) for x in vec)
        cell_idx = tuple(int(floor(x / self.cell)) for x in v) + (tag,)
        self._cells.setdefault(cell_idx, []).append((v, payload))

    def query(self, vec, tag, tau: float):
        v = tuple(float(x) for x in vec)
        axes = []
        for x in v:
            c = int(floor(x / self.cell))
            cells = [c]
            if x - c * self.cell <= tau:
                cells.append(c - 1)
            if (c + 1) * self.cell - x <= tau:
                cells.append(c + 1)
            axes.append(cells)
        out = []
        dims = range(self.dim)
        for combo in _product(axes):
            bucket = self._cells.get(tuple(combo) + (tag,))
            if not bucket:
                continue
            for stored, payload in bucket:
                if all(abs(stored[i] - v[i]) <= tau for i in dims):
                    out.append(payload)
        return out


def _product(axes):
    if not axes:
        yield ()
        return
    for head in axes[0]:
        for rest in _product(axes[1:]):
            yield (head, *rest)


def _collinear_triplet_set(pts, rel: float) -> set[tuple[int, int, int]]:
    """Unordered collinear triples (i < j < k), for cheap membership tests."""
    m = len(pts)
    trips = np.array(
        [(i, j, k) for i in range(m) for j in range(i + 1, m) for k in range(j + 1, m)],
        dtype=np.int64,
    )
    if len(trips) == 0:
        return set()
    mask = collinear_mask(pts, trips, rel=rel)
    return {tuple(int(x) for x in t) for t in trips[mask]}


def _is_collinear_in(coll: set, trip) -> bool:
    return tuple(sorted(int(x) for x in trip)) in coll


def _quad_key_rows(pts, coll: set, rel: float):
    """Vectorized quad keys for every (non-collinear ordered triplet, extra point).

    Rows are lexicographic in (triplet, fourth point). Returns the index rows,
    the 6-vector keys (base sides then fourth-point distances), and the
    orientation signs with the rel * scale^3 zero band.
    """
    m = len(pts)
    d = pairwise_distances(pts)
    rows = np.array(
        [
            (i, j, k, p)
            for i, j, k in permutations(range(m), 3)
            if not _is_collinear_in(coll, (i, j, k))
            for p in range(m)
            if p not in (i, j, k)
        ],
        dtype=np.int64,
    )
    if len(rows) == 0:
        return rows, np.empty((0, 6)), np.empty(0, dtype=np.int64)
    i, j, k, p = rows.T
    keys = np.column_stack([d[i, j], d[i, k], d[j, k], d[p, i], d[p, j], d[p, k]])
    a = pts[i]
    det = np.einsum("ij,ij->i", np.cross(pts[j] - a, pts[k] - a), pts[p] - a)
    scale = keys.max(axis=1)
    signs = np.sign(det).astype(np.int64)
    signs[np.abs(det) < rel * scale**3] = 0
    return rows, keys, signs


def geometric_hashing(P, Q, params: ExactParams = ExactParams()) -> MatchResult:
    """Alignment accelerated by hashing quad keys of (triplet, fourth point)."""
    pp, qq = as_points(P), as_points(Q)
    _require_sizes(pp, qq, 4, 4)
    coll_p = _collinear_triplet_set(pp, params.collinear_rel)
    coll_q = _collinear_triplet_set(qq, params.collinear_rel)
    p_rows, p_keys, p_signs = _quad_key_rows(pp, coll_p, params.collinear_rel)
    if len(p_rows) == 0:
        raise NoCongruentTriplets("no usable model triplet")
    table = _GridDict(dim=6)
    for r in range(len(p_rows)):
        i, j, k, p4 = (int(x) for x in p_rows[r])
        table.insert(p_keys[r], int(p_signs[r]), ((i, j, k), p4))
    q_rows, q_keys, q_signs = _quad_key_rows(qq, coll_q, params.collinear_rel)
    best = None
    r = 0
    while r < len(q_rows):
        tq = tuple(int(x) for x in q_rows[r, :3])
        tally: dict[tuple, int] = {}
        while r < len(q_rows) and tuple(int(x) for x in q_rows[r, :3]) == tq:
            for tp, _p4 in table.query(q_keys[r], int(q_signs[r]), params.tau):
                tally[tp] = tally.get(tp, 0) + 1
            r += 1
        for tp, count in sorted(tally.items()):
            cand = (-count, tq, tp)
            if best is None or cand < best:
                best = cand
    if best is None:
        raise NoCongruentTriplets("no congruent quad match")
    count, tq, tp = -best[0], best[1], best[2]
    mu = motion_from_bases(qq[list(tq)], pp[list(tp)])
    return build_match_result(pp, qq, mu, params.tau, votes=count)


def ght_pair_based(
    P,
    Q,
    params: ExactParams = ExactParams(),
    pairs: PairSource | list[tuple[int, int]] = AllPairs(),
) -> MatchResult:
    """Pair-based voting: motions are tallied per common base pair.

    A k-matching identified through a pair inside it collects exactly k - 2
    votes, one per further matched point. The best motion over all source
    pairs wins.
    """
    pp, qq = as_points(P), as_points(Q)
    _require_sizes(pp, qq, 3, 3)
    n = len(qq)
    pair_list = pairs if isinstance(pairs, list) else materialize_pairs(pairs, n)
    idx = build_triplet_index(pp)
    p_ok = ~collinear_mask(pp, idx.triplets, rel=params.collinear_rel)
    coll_q = _collinear_triplet_set(qq, params.collinear_rel)
    dq = pairwise_distances(qq)
    best = None  # (-votes, q_pair, p_pair, key) -> motion
    for a, b in pair_list:
        local: dict[tuple, list] = {}
        for q in range(n):
            if q == a or q == b:
                continue
            if _is_collinear_in(coll_q, (a, b, q)):
                continue
            key3 = np.array([dq[a, b], dq[a, q], dq[b, q]])
            for h in idx.query_box_indices(key3, params.tau):
                if not p_ok[h]:
                    continue
                tp = idx.triplets[h]
                mu = motion_from_bases(qq[[a, b, q]], pp[tp])
                mkey = motion_key(mu, params.motion_grid)
                rec = local.get(mkey)
                if rec is None:
                    local[mkey] = [1, (int(tp[0]), int(tp[1])), mu]
                else:
                    rec[0] += 1
        for mkey, rec in local.items():
            cand = (-rec[0], (a, b), rec[1], mkey)
            if best is None or cand < best[0]:
                best = (cand, rec[2])
    if best is None:
        raise NoCongruentTriplets("no congruent triplet through any source pair")
    (neg_votes, q_pair, p_pair, _), mu = best
    return build_match_result(
        pp, qq, mu, params.tau, votes=-neg_votes, base_pair=(q_pair, p_pair)
    )
