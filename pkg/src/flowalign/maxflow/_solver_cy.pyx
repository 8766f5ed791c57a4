# cython: language_level=3
"""Compiled push-relabel kernel: highest-label selection, gap heuristic,
periodic global relabeling. Same contract and same arc ordering as the
pure-Python twin, so residuals come out bit-identical.
"""

import numpy as np


def solve(n, adj_start, head, cap, rev, source, sink):
    """Run push-relabel to completion; return (flow_value, residual)."""
    cdef long long[::1] adj = np.ascontiguousarray(adj_start, dtype=np.int64)
    cdef long long[::1] hd = np.ascontiguousarray(head, dtype=np.int64)
    cdef long long[::1] rv = np.ascontiguousarray(rev, dtype=np.int64)
    res_arr = np.array(cap, dtype=np.int64, copy=True)
    cdef long long[::1] res = res_arr

    cdef Py_ssize_t nn = n
    cdef Py_ssize_t src = source
    cdef Py_ssize_t snk = sink
    cdef Py_ssize_t limit = 2 * nn
    cdef Py_ssize_t E = hd.shape[0]

    height_arr = np.zeros(nn, dtype=np.int64)
    excess_arr = np.zeros(nn, dtype=np.int64)
    cur_arr = np.empty(nn, dtype=np.int64)
    count_arr = np.zeros(limit + 2, dtype=np.int64)
    bucket_arr = np.full(limit + 2, -1, dtype=np.int64)   # head of stack per height
    nxt_arr = np.full(nn, -1, dtype=np.int64)             # stack links
    inb_arr = np.zeros(nn, dtype=np.uint8)                # queued flag
    dist_arr = np.empty(nn, dtype=np.int64)
    queue_arr = np.empty(nn, dtype=np.int64)

    cdef long long[::1] height = height_arr
    cdef long long[::1] excess = excess_arr
    cdef long long[::1] cur = cur_arr
    cdef long long[::1] count = count_arr
    cdef long long[::1] bucket = bucket_arr
    cdef long long[::1] nxt = nxt_arr
    cdef unsigned char[::1] inb = inb_arr
    cdef long long[::1] dist = dist_arr
    cdef long long[::1] queue = queue_arr

    cdef Py_ssize_t v, w, x, a, qh, qt, h
    cdef long long delta, old, new_h, d, hi
    cdef long long work = 0
    cdef long long relabel_budget = 6 * nn + E // 2

    for v in range(nn):
        cur[v] = adj[v]
    height[src] = nn
    count[0] = nn - 1
    count[nn] += 1

    # saturate source arcs
    for a in range(adj[src], adj[src + 1]):
        delta = res[a]
        if delta > 0:
            w = hd[a]
            res[a] = 0
            res[rv[a]] += delta
            excess[w] += delta
            excess[src] -= delta

    hi = limit + 1

    while True:
        # global relabel: exact residual distances to sink, then to source
        for v in range(nn):
            dist[v] = -1
        dist[snk] = 0
        queue[0] = snk
        qh = 0
        qt = 1
        while qh < qt:
            w = queue[qh]
            qh += 1
            d = dist[w] + 1
            for a in range(adj[w], adj[w + 1]):
                if res[rv[a]] > 0:
                    x = hd[a]
                    if dist[x] == -1:
                        dist[x] = d
                        queue[qt] = x
                        qt += 1
        for h in range(limit + 2):
            count[h] = 0
            bucket[h] = -1
        for v in range(nn):
            if dist[v] != -1 and v != src:
                height[v] = dist[v]
            else:
                height[v] = -1  # fill from source pass
        for v in range(nn):
            dist[v] = -1
        dist[src] = 0
        queue[0] = src
        qh = 0
        qt = 1
        while qh < qt:
            w = queue[qh]
            qh += 1
            d = dist[w] + 1
            for a in range(adj[w], adj[w + 1]):
                if res[rv[a]] > 0:
                    x = hd[a]
                    if dist[x] == -1:
                        dist[x] = d
                        queue[qt] = x
                        qt += 1
        for v in range(nn):
            if height[v] == -1:
                if v == src:
                    height[v] = nn
                elif dist[v] != -1:
                    height[v] = nn + dist[v]
                else:
                    height[v] = limit  # isolated, never carries excess
            count[height[v]] += 1
            cur[v] = adj[v]
            inb[v] = 0
        for v in range(nn):
            if v != src and v != snk and excess[v] > 0:
                h = height[v]
                nxt[v] = bucket[h]
                bucket[h] = v
                inb[v] = 1
        work = 0
        hi = limit + 1

        # --- main highest-label loop ---------------------------------
        while hi >= 0:
            if bucket[hi] == -1:
                hi -= 1
                continue
            v = bucket[hi]
            bucket[hi] = nxt[v]
            inb[v] = 0
            if v == src or v == snk or excess[v] <= 0:
                continue
            if height[v] != hi:
                # re-route an entry left stale by a gap lift
                h = height[v]
                if inb[v] == 0:
                    nxt[v] = bucket[h]
                    bucket[h] = v
                    inb[v] = 1
                    if h > hi:
                        hi = h
                continue
            # discharge v
            while excess[v] > 0:
                if cur[v] >= adj[v + 1]:
                    old = height[v]
                    new_h = limit + 1
                    for a in range(adj[v], adj[v + 1]):
                        if res[a] > 0 and height[hd[a]] + 1 < new_h:
                            new_h = height[hd[a]] + 1
                    work += adj[v + 1] - adj[v]
                    count[old] -= 1
                    count[new_h] += 1
                    height[v] = new_h
                    cur[v] = adj[v]
                    if new_h > limit:
                        break  # no residual arc; impossible on valid input
                    if count[old] == 0 and old < nn:
                        # gap: nothing below can reach the sink anymore
                        for w in range(nn):
                            h = height[w]
                            if old < h < nn:
                                count[h] -= 1
                                count[nn + 1] += 1
                                height[w] = nn + 1
                                cur[w] = adj[w]
                                if (inb[w] == 0 and w != src and w != snk
                                        and excess[w] > 0):
                                    nxt[w] = bucket[nn + 1]
                                    bucket[nn + 1] = w
                                    inb[w] = 1
                        hi = limit + 1
                    if height[v] > hi:
                        hi = height[v]
                    if inb[v] == 0:
                        h = height[v]
                        nxt[v] = bucket[h]
                        bucket[h] = v
                        inb[v] = 1
                    break
                a = cur[v]
                if res[a] > 0 and height[v] == height[hd[a]] + 1:
                    w = hd[a]
                    delta = excess[v]
                    if res[a] < delta:
                        delta = res[a]
                    res[a] -= delta
                    res[rv[a]] += delta
                    excess[v] -= delta
                    excess[w] += delta
                    if (inb[w] == 0 and w != src and w != snk
                            and excess[w] > 0):
                        h = height[w]
                        nxt[w] = bucket[h]
                        bucket[h] = w
                        inb[w] = 1
                    work += 1
                else:
                    cur[v] += 1
            if work > relabel_budget:
                break  # leave to the outer loop for a global relabel
        if hi < 0:
            break

    return int(excess[snk]), res_arr
