"""Cost volume: per-candidate matching costs over (reference, test frame, shift)."""

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


class CvolFormatError(ValueError):
    """Raised on malformed CVOL cache files."""


@dataclass
class SequenceSet:
    """A test descriptor sequence plus N reference sequences.

    test has shape (m, dim); refs[i] has shape (m_i, dim). All sequences
    share one descriptor dimension; every sequence holds at least 2 frames.
    """

    test: np.ndarray
    refs: list

    def __post_init__(self):
        self.test = np.asarray(self.test, dtype=np.float64)
        self.refs = [np.asarray(r, dtype=np.float64) for r in self.refs]
        if self.test.ndim != 2 or self.test.shape[0] < 2:
            raise ValueError(f"test sequence needs >= 2 frames, got shape {self.test.shape}")
        if not self.refs:
            raise ValueError("need at least one reference sequence")
        dim = self.test.shape[1]
        for i, r in enumerate(self.refs):
            if r.ndim != 2 or r.shape[0] < 2:
                raise ValueError(f"reference {i} needs >= 2 frames, got shape {r.shape}")
            if r.shape[1] != dim:
                raise ValueError(
                    f"reference {i} dimension {r.shape[1]} != test dimension {dim}"
                )

    @property
    def n_refs(self) -> int:
        return len(self.refs)

    @property
    def n_test(self) -> int:
        return self.test.shape[0]

    def ref_lengths(self) -> list:
        return [r.shape[0] for r in self.refs]


@dataclass
class CostVolume:
    """Dense N x m x (2*k_max+1) volume of matching costs.

    costs[i, j, k + k_max] is the cost of matching test frame j against
    frame j+k of reference i; entries with j+k outside the reference are
    invalid and hold pad_cost.
    """

    n_refs: int
    n_test: int
    k_max: int
    costs: np.ndarray
    valid: np.ndarray
    pad_cost: float
    ref_lengths: list

    def __post_init__(self):
        K = 2 * self.k_max + 1
        shape = (self.n_refs, self.n_test, K)
        if self.costs.shape != shape or self.valid.shape != shape:
            raise ValueError(f"volume arrays must have shape {shape}")

    @property
    def n_shifts(self) -> int:
        return 2 * self.k_max + 1

    def k_index(self, k: int) -> int:
        """Map a shift k in [-k_max, +k_max] to its last-axis index."""
        if not -self.k_max <= k <= self.k_max:
            raise IndexError(f"shift {k} outside [-{self.k_max}, {self.k_max}]")
        return k + self.k_max

    def cost(self, i: int, j: int, k: int) -> float:
        return float(self.costs[i, j, self.k_index(k)])

    def is_valid(self, i: int, j: int, k: int) -> bool:
        return bool(self.valid[i, j, self.k_index(k)])


def resolve_k_max(requested, seqs: SequenceSet) -> int:
    """Turn a k_max setting into a concrete value.

    None or "auto" picks half the shortest reference length (at least 1).
    An explicit value above that bound is clamped to it with a warning.
    """
    bound = max(1, min(seqs.ref_lengths()) // 2)
    if requested is None or requested == "auto":
        return bound
    k_max = int(requested)
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    if k_max > bound:
        log.warning("k_max %d exceeds half the shortest reference (%d); clamped", k_max, bound)
        return bound
    return k_max


def build_cost_volume(seqs: SequenceSet, k_max: int, pad_cost: float = 2.0) -> CostVolume:
    """Fill the cost volume with cosine matching costs.

    Valid entries get 1 - cos(test[j], refs[i][j+k]); descriptors with zero
    norm cost the worst value 2.0; out-of-range entries get pad_cost.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    if pad_cost < 2.0:
        raise ValueError(f"pad_cost must be >= 2.0, got {pad_cost}")
    m = seqs.n_test
    N = seqs.n_refs
    K = 2 * k_max + 1
    costs = np.full((N, m, K), pad_cost, dtype=np.float64)
    valid = np.zeros((N, m, K), dtype=bool)

    t_norm = np.linalg.norm(seqs.test, axis=1)
    t_unit = np.divide(seqs.test, t_norm[:, None], where=t_norm[:, None] > 0)
    for i, ref in enumerate(seqs.refs):
        m_i = ref.shape[0]
        r_norm = np.linalg.norm(ref, axis=1)
        r_unit = np.divide(ref, r_norm[:, None], where=r_norm[:, None] > 0)
        full = 1.0 - t_unit @ r_unit.T  # (m, m_i) all-pairs cost
        full[t_norm == 0, :] = 2.0
        full[:, r_norm == 0] = 2.0
        np.clip(full, 0.0, 2.0, out=full)
        for k in range(-k_max, k_max + 1):
            j_lo = max(0, -k)
            j_hi = min(m, m_i - k)
            if j_lo >= j_hi:
                continue
            js = np.arange(j_lo, j_hi)
            costs[i, js, k + k_max] = full[js, js + k]
            valid[i, js, k + k_max] = True
    return CostVolume(N, m, k_max, costs, valid, pad_cost, seqs.ref_lengths())


def write_cvol(vol: CostVolume, sink) -> None:
    """Serialize a volume as text: "CVOL <N> <m> <k_max> <pad_cost>" then one
    line of 2*k_max+1 costs per (i, j), i-major."""
    lines = [
        f"CVOL {vol.n_refs} {vol.n_test} {vol.k_max} {format(vol.pad_cost, '.12g')}"
    ]
    for i in range(vol.n_refs):
        for j in range(vol.n_test):
            lines.append(" ".join(format(c, ".12g") for c in vol.costs[i, j]))
    sink.write(("\n".join(lines) + "\n").encode("ascii"))


def read_cvol(source) -> CostVolume:
    """Inverse of write_cvol.

    The file format carries no validity mask; entries are marked invalid
    exactly when they equal pad_cost. A valid entry whose cost happens to
    equal pad_cost (antipodal descriptors) is therefore read back as
    invalid; round-trips are lossless whenever valid costs stay below
    pad_cost. Reference lengths are reconstructed from the mask, so they
    cap at m + k_max; frames beyond that horizon are unreachable by any
    shift and do not affect alignment.
    """
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("ascii")
    lines = [ln for ln in data.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("CVOL"):
        raise CvolFormatError("missing CVOL header")
    parts = lines[0].split()
    if len(parts) != 5:
        raise CvolFormatError(f"malformed header: {lines[0]!r}")
    try:
        N, m, k_max = int(parts[1]), int(parts[2]), int(parts[3])
        pad_cost = float(parts[4])
    except ValueError as exc:
        raise CvolFormatError(f"non-numeric header field in {lines[0]!r}") from exc
    K = 2 * k_max + 1
    if len(lines) - 1 != N * m:
        raise CvolFormatError(f"expected {N * m} cost rows, found {len(lines) - 1}")
    costs = np.empty((N, m, K), dtype=np.float64)
    for idx, line in enumerate(lines[1:]):
        toks = line.split()
        if len(toks) != K:
            raise CvolFormatError(f"row {idx}: expected {K} costs, found {len(toks)}")
        try:
            costs[idx // m, idx % m] = [float(t) for t in toks]
        except ValueError as exc:
            raise CvolFormatError(f"row {idx}: non-numeric cost") from exc
    valid = costs != pad_cost
    ref_lengths = []
    ks = np.arange(-k_max, k_max + 1)
    for i in range(N):
        js, kidx = np.nonzero(valid[i])
        ref_lengths.append(int((js + ks[kidx]).max()) + 1 if js.size else 0)
    return CostVolume(N, m, k_max, costs, valid, pad_cost, ref_lengths)
