"""Matching surface: turn the min cut into per-(reference, test frame) shift
choices and a global best match per test frame."""

import csv
from dataclasses import dataclass

import numpy as np

from .costvol import CostVolume
from .maxflow import CutSet

NO_MATCH = -(10**9)  # sentinel shift for cells without a usable match


class SurfaceCoverageError(RuntimeError):
    """Raised when some (i, j) chain has no cut shift arc: the cut and the
    network contradict each other."""


class MatchCsvError(ValueError):
    """Raised on malformed match CSV input."""


@dataclass
class MatchSurface:
    """Chosen shift and its cost per (reference i, test frame j).

    valid[i, j] is False where the chosen shift points outside the
    reference sequence; k_hat holds NO_MATCH there and match_cost the
    volume's pad cost.
    """

    k_hat: np.ndarray
    match_cost: np.ndarray
    valid: np.ndarray


@dataclass
class GlobalMatch:
    """Per test frame: the best match across all references.

    best_ref[j] = -1 marks frames where every reference came up empty;
    ref_frame[j] = j + best_shift[j] elsewhere.
    """

    best_ref: np.ndarray
    best_shift: np.ndarray
    best_cost: np.ndarray
    ref_frame: np.ndarray
    valid: np.ndarray

    @property
    def n_test(self) -> int:
        return self.best_ref.shape[0]


def extract_surface(cut: CutSet, vol: CostVolume) -> MatchSurface:
    """Pick one shift per (i, j) from the cut's shift arcs.

    Candidates at (i, j) are the tail shifts of cut arcs along that chain;
    the lowest-cost candidate wins, ties going to the smaller shift. A
    winner pointing outside the reference marks the cell no-match. A chain
    with no candidate at all means the cut is not a valid alignment
    surface, which is an internal-consistency failure.
    """
    N, m, k_max = vol.n_refs, vol.n_test, vol.k_max
    K = 2 * k_max + 1

    tails = np.asarray(cut.cut_tails)
    heads = np.asarray(cut.cut_heads)
    mesh = (tails >= 2) & (heads >= 2)
    shifty = mesh & (heads == tails + 1) & ((tails - 2) % K != K - 1)
    t = tails[shifty] - 2
    ii, rem = np.divmod(t, m * K)
    jj, kk = np.divmod(rem, K)
    ks = kk - k_max

    cost = vol.costs[ii, jj, kk]
    # order candidates per chain by (cost, k); first hit per chain wins
    order = np.lexsort((ks, cost, jj, ii))
    ii, jj, ks, cost = ii[order], jj[order], ks[order], cost[order]
    chain = ii * m + jj
    first = np.ones(chain.shape[0], dtype=bool)
    first[1:] = chain[1:] != chain[:-1]

    covered = np.zeros(N * m, dtype=bool)
    covered[chain[first]] = True
    if not covered.all():
        missing = np.nonzero(~covered)[0][0]
        raise SurfaceCoverageError(
            f"no cut shift arc for reference {missing // m}, test frame {missing % m}"
        )

    k_hat = np.full((N, m), NO_MATCH, dtype=np.int64)
    match_cost = np.full((N, m), vol.pad_cost, dtype=np.float64)
    valid = np.zeros((N, m), dtype=bool)
    ci, cj, ck = ii[first], jj[first], ks[first]
    usable = vol.valid[ci, cj, ck + k_max]
    k_hat[ci[usable], cj[usable]] = ck[usable]
    match_cost[ci[usable], cj[usable]] = vol.costs[ci[usable], cj[usable], ck[usable] + k_max]
    valid[ci[usable], cj[usable]] = True
    return MatchSurface(k_hat, match_cost, valid)


def global_best(surf: MatchSurface, vol: CostVolume) -> GlobalMatch:
    """Reduce the surface to one best reference per test frame.

    The lowest match cost wins; ties go to the smaller reference index.
    Frames where no reference has a usable match become no-match.
    """
    N, m = surf.k_hat.shape
    if (N, m) != (vol.n_refs, vol.n_test):
        raise ValueError(f"surface shape {(N, m)} does not match volume "
                         f"{(vol.n_refs, vol.n_test)}")
    cost = np.where(surf.valid, surf.match_cost, np.inf)
    best_ref = np.argmin(cost, axis=0).astype(np.int64)  # first min: smaller i
    cols = np.arange(m)
    valid = surf.valid[best_ref, cols]
    best_ref = np.where(valid, best_ref, -1)
    best_shift = np.where(valid, surf.k_hat[best_ref, cols], NO_MATCH)
    best_cost = np.where(valid, surf.match_cost[best_ref, cols], vol.pad_cost)
    ref_frame = np.where(valid, cols + best_shift, -1)
    return GlobalMatch(best_ref, best_shift, best_cost, ref_frame, valid)


def write_matches(surf: MatchSurface, match: GlobalMatch, sink) -> None:
    """Write the per-(i,j) surface plus global-best flags as CSV.

    Columns: j,i,k_hat,ref_frame,cost,is_global_best. No-match rows leave
    k_hat and ref_frame empty and carry the pad cost.
    """
    N, m = surf.k_hat.shape
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["j", "i", "k_hat", "ref_frame", "cost", "is_global_best"])
    for j in range(m):
        for i in range(N):
            flag = 1 if bool(match.valid[j]) and int(match.best_ref[j]) == i else 0
            if surf.valid[i, j]:
                k = int(surf.k_hat[i, j])
                writer.writerow([j, i, k, j + k,
                                 format(float(surf.match_cost[i, j]), ".12g"), flag])
            else:
                writer.writerow([j, i, "", "",
                                 format(float(surf.match_cost[i, j]), ".12g"), flag])


def read_matches(source):
    """Inverse of write_matches; returns (MatchSurface, GlobalMatch)."""
    rows = list(csv.reader(source))
    if not rows or rows[0] != ["j", "i", "k_hat", "ref_frame", "cost", "is_global_best"]:
        raise MatchCsvError("missing or wrong match CSV header")
    body = rows[1:]
    if not body:
        raise MatchCsvError("match CSV has no data rows")
    try:
        js = np.array([int(r[0]) for r in body])
        is_ = np.array([int(r[1]) for r in body])
        costs = np.array([float(r[4]) for r in body])
        flags = np.array([int(r[5]) for r in body])
    except (ValueError, IndexError) as exc:
        raise MatchCsvError(f"malformed match CSV row: {exc}") from exc
    N = int(is_.max()) + 1
    m = int(js.max()) + 1
    if len(body) != N * m:
        raise MatchCsvError(f"expected {N * m} rows for {N} references x {m} frames, "
                            f"found {len(body)}")
    pad = float(costs.max(initial=2.0))
    k_hat = np.full((N, m), NO_MATCH, dtype=np.int64)
    match_cost = np.full((N, m), pad, dtype=np.float64)
    valid = np.zeros((N, m), dtype=bool)
    best_ref = np.full(m, -1, dtype=np.int64)
    best_shift = np.full(m, NO_MATCH, dtype=np.int64)
    best_cost = np.full(m, pad, dtype=np.float64)
    ref_frame = np.full(m, -1, dtype=np.int64)
    gvalid = np.zeros(m, dtype=bool)
    for r, row in enumerate(body):
        j, i = int(js[r]), int(is_[r])
        match_cost[i, j] = costs[r]
        if row[2] != "":
            k_hat[i, j] = int(row[2])
            valid[i, j] = True
        if flags[r]:
            if not valid[i, j]:
                raise MatchCsvError(f"global flag on no-match row j={j} i={i}")
            best_ref[j] = i
            best_shift[j] = k_hat[i, j]
            best_cost[j] = costs[r]
            ref_frame[j] = j + int(k_hat[i, j])
            gvalid[j] = True
    return (MatchSurface(k_hat, match_cost, valid),
            GlobalMatch(best_ref, best_shift, best_cost, ref_frame, gvalid))
