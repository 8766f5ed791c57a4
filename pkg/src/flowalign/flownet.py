"""Directed 3D flow network with integer capacities built from a cost volume.

Nodes are numbered source=0, sink=1, then mesh node (i, j, k) maps to
2 + i*(m*K) + j*K + (k + k_max) with K = 2*k_max + 1. Arcs are stored in
compressed adjacency form with explicit paired reverse arcs so a solver can
work directly on the residual representation.
"""

from dataclasses import dataclass

import numpy as np

from .costvol import CostVolume

SOURCE = 0
SINK = 1

# capacities stay well below 2^62 so excess sums cannot overflow int64
_CAP_LIMIT = 1 << 62


class CapacityOverflowError(OverflowError):
    """Raised when scaled capacities could overflow 64-bit arithmetic."""


@dataclass
class FlowNetwork:
    """Adjacency-compressed arc store with paired reverse arcs.

    Arc a runs tail[a] -> head[a] with integer capacity cap[a]; rev[a] is
    the index of its zero-capacity twin. adj_start[v]:adj_start[v+1] slices
    the arcs leaving node v. is_forward marks original (non-residual) arcs.
    """

    node_count: int
    adj_start: np.ndarray
    head: np.ndarray
    tail: np.ndarray
    cap: np.ndarray
    rev: np.ndarray
    is_forward: np.ndarray
    scale: int
    cap_inf: int
    # mesh geometry (0 values for non-alignment networks, e.g. DIMACS input)
    n_refs: int = 0
    n_test: int = 0
    k_max: int = 0

    @property
    def arc_count(self) -> int:
        return int(self.head.shape[0])

    def node_of(self, i: int, j: int, k: int) -> int:
        """Mesh node id for reference i, test frame j, shift k."""
        K = 2 * self.k_max + 1
        if not (0 <= i < self.n_refs and 0 <= j < self.n_test and -self.k_max <= k <= self.k_max):
            raise IndexError(f"mesh index ({i}, {j}, {k}) out of range")
        return 2 + i * (self.n_test * K) + j * K + (k + self.k_max)

    def mesh_index(self, node: int) -> tuple:
        """Inverse of node_of; raises for source/sink."""
        if node < 2 or node >= self.node_count:
            raise IndexError(f"node {node} is not a mesh node")
        K = 2 * self.k_max + 1
        r = node - 2
        i, r = divmod(r, self.n_test * K)
        j, kk = divmod(r, K)
        return i, j, kk - self.k_max


def shift_capacity(vol: CostVolume, i: int, j: int, k: int) -> float:
    """Real capacity of the shift arc (i,j,k) -> (i,j,k+1): mean of the two
    endpoint costs."""
    if not -vol.k_max <= k <= vol.k_max - 1:
        raise IndexError(f"shift arc tail {k} outside [-{vol.k_max}, {vol.k_max - 1}]")
    return (vol.cost(i, j, k) + vol.cost(i, j, k + 1)) / 2.0


def occlusion_capacity(vol: CostVolume, u: tuple, v: tuple, eta: float) -> float:
    """Real capacity of an occlusion arc u -> v: eta times the mean endpoint
    cost. u and v must differ by +1 in exactly the i or the j coordinate."""
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    ui, uj, uk = u
    vi, vj, vk = v
    di, dj, dk = vi - ui, vj - uj, vk - uk
    if not ((di, dj, dk) == (0, 1, 0) or (di, dj, dk) == (1, 0, 0)):
        raise ValueError(f"nodes {u} and {v} are not occlusion-adjacent")
    return eta * (vol.cost(ui, uj, uk) + vol.cost(vi, vj, vk)) / 2.0


def _scaled(real_caps: np.ndarray, scale: int) -> np.ndarray:
    return np.rint(real_caps * scale).astype(np.int64)


def build_network(vol: CostVolume, eta: float = 0.01, scale: int = 1_000_000) -> FlowNetwork:
    """Assemble the alignment network from a cost volume.

    Per mesh node (i,j,k): a shift arc to (i,j,k+1) for k < k_max with
    capacity (cost(u)+cost(v))/2, occlusion arcs to (i,j+1,k) and (i+1,j,k)
    with eta times that mean, all scaled to integers. Source feeds every
    k=-k_max node and every k=+k_max node drains to the sink through
    unsaturatable cap_inf arcs. Every arc gets a zero-capacity reverse twin.
    """
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if scale < 1:
        raise ValueError(f"scale must be >= 1, got {scale}")
    N, m, k_max = vol.n_refs, vol.n_test, vol.k_max
    K = 2 * k_max + 1
    n_nodes = 2 + N * m * K

    ids = np.arange(N * m * K, dtype=np.int64).reshape(N, m, K) + 2

    tails = []
    heads = []
    caps = []

    # shift arcs along k
    u = ids[:, :, :-1].ravel()
    v = ids[:, :, 1:].ravel()
    c = _scaled((vol.costs[:, :, :-1] + vol.costs[:, :, 1:]).ravel() / 2.0, scale)
    tails.append(u)
    heads.append(v)
    caps.append(c)

    # occlusion arcs along j
    if m > 1:
        u = ids[:, :-1, :].ravel()
        v = ids[:, 1:, :].ravel()
        c = _scaled(eta * (vol.costs[:, :-1, :] + vol.costs[:, 1:, :]).ravel() / 2.0, scale)
        tails.append(u)
        heads.append(v)
        caps.append(c)

    # occlusion arcs along i
    if N > 1:
        u = ids[:-1, :, :].ravel()
        v = ids[1:, :, :].ravel()
        c = _scaled(eta * (vol.costs[:-1, :, :] + vol.costs[1:, :, :]).ravel() / 2.0, scale)
        tails.append(u)
        heads.append(v)
        caps.append(c)

    finite_caps = np.concatenate(caps)
    if np.any(finite_caps < 0):
        raise CapacityOverflowError("scaled capacity overflowed to negative")
    # float pre-check so the exact int64 sum below cannot wrap
    if float(finite_caps.sum(dtype=np.float64)) >= float(_CAP_LIMIT):
        raise CapacityOverflowError(
            f"scaled capacities too large for 64-bit flow arithmetic at scale {scale}"
        )
    total = int(finite_caps.sum())
    cap_inf = total + 1
    n_terminal = N * m  # per (i, j): one source arc and one sink arc
    if total + 2 * n_terminal * cap_inf >= _CAP_LIMIT:
        raise CapacityOverflowError(
            f"total capacity {total} too large for 64-bit flow arithmetic at scale {scale}"
        )

    # source -> (i, j, -k_max) and (i, j, +k_max) -> sink
    first = ids[:, :, 0].ravel()
    last = ids[:, :, K - 1].ravel()
    tails.append(np.full(n_terminal, SOURCE, dtype=np.int64))
    heads.append(first)
    caps.append(np.full(n_terminal, cap_inf, dtype=np.int64))
    tails.append(last)
    heads.append(np.full(n_terminal, SINK, dtype=np.int64))
    caps.append(np.full(n_terminal, cap_inf, dtype=np.int64))

    tail = np.concatenate(tails)
    head = np.concatenate(heads)
    cap = np.concatenate(caps)
    net = _assemble(n_nodes, tail, head, cap, scale, cap_inf)
    net.n_refs, net.n_test, net.k_max = N, m, k_max
    return net


def _assemble(n_nodes: int, tail: np.ndarray, head: np.ndarray, cap: np.ndarray,
              scale: int, cap_inf: int) -> FlowNetwork:
    """Pair every arc with a zero-capacity reverse twin and sort into CSR."""
    e = tail.shape[0]
    full_tail = np.empty(2 * e, dtype=np.int64)
    full_head = np.empty(2 * e, dtype=np.int64)
    full_cap = np.zeros(2 * e, dtype=np.int64)
    full_fwd = np.zeros(2 * e, dtype=bool)
    full_tail[0::2] = tail
    full_head[0::2] = head
    full_cap[0::2] = cap
    full_fwd[0::2] = True
    full_tail[1::2] = head
    full_head[1::2] = tail

    order = np.argsort(full_tail, kind="stable")
    slot = np.empty(2 * e, dtype=np.int64)
    slot[order] = np.arange(2 * e, dtype=np.int64)

    pair = np.arange(2 * e, dtype=np.int64) ^ 1  # twin of pre-sort arc x is x^1
    rev = np.empty(2 * e, dtype=np.int64)
    rev[slot] = slot[pair]

    adj_start = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(adj_start, full_tail + 1, 1)
    np.cumsum(adj_start, out=adj_start)

    return FlowNetwork(
        node_count=n_nodes,
        adj_start=adj_start,
        head=full_head[order],
        tail=full_tail[order],
        cap=full_cap[order],
        rev=rev,
        is_forward=full_fwd[order],
        scale=scale,
        cap_inf=cap_inf,
    )


def network_from_arcs(n_nodes: int, arcs: list, scale: int = 1, cap_inf=None) -> FlowNetwork:
    """Build a network from explicit (tail, head, capacity) triples.

    Test/benchmark helper for non-alignment graphs; capacities are taken as
    already-scaled integers.
    """
    if not arcs:
        tail = np.zeros(0, dtype=np.int64)
        head = np.zeros(0, dtype=np.int64)
        cap = np.zeros(0, dtype=np.int64)
    else:
        arr = np.asarray(arcs, dtype=np.int64)
        tail, head, cap = arr[:, 0], arr[:, 1], arr[:, 2]
    if np.any(cap < 0):
        raise ValueError("negative capacity")
    if cap_inf is None:
        cap_inf = int(cap.sum()) + 1
    return _assemble(n_nodes, tail, head, cap, scale, cap_inf)


def write_dimacs(net: FlowNetwork, sink_stream) -> None:
    """Dump the forward arcs in DIMACS max-flow text format (1-based ids)."""
    fwd = np.nonzero(net.is_forward)[0]
    lines = [f"p max {net.node_count} {fwd.size}"]
    lines.append(f"n {SOURCE + 1} s")
    lines.append(f"n {SINK + 1} t")
    for a in fwd:
        lines.append(f"a {net.tail[a] + 1} {net.head[a] + 1} {net.cap[a]}")
    sink_stream.write(("\n".join(lines) + "\n").encode("ascii"))
