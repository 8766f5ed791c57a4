"""Pure-Python push-relabel kernel: highest-label selection, gap heuristic,
periodic global relabeling. Fallback for environments without the compiled
extension. Control flow mirrors _solver_cy.pyx statement for statement so
both backends produce identical residuals.
"""

import numpy as np


def solve(n, adj_start, head, cap, rev, source, sink):
    """Run push-relabel to completion and return (flow_value, residual).

    The residual array gives remaining capacity per arc; flow on a forward
    arc a is cap[a] - residual[a]. Heights run to 2n so excess trapped
    behind the min cut drains back and the result is a conserving maximum
    flow, not just a preflow.
    """
    adj = adj_start.tolist()
    hd = head.tolist()
    rv = rev.tolist()
    res = cap.tolist()
    nn = int(n)
    src = int(source)
    snk = int(sink)
    limit = 2 * nn
    E = len(hd)

    height = [0] * nn
    excess = [0] * nn
    cur = adj[:nn]
    count = [0] * (limit + 2)
    bucket = [-1] * (limit + 2)   # head of active stack per height
    nxt = [-1] * nn               # stack links
    inb = [False] * nn            # queued flag
    height[src] = nn
    count[0] = nn - 1
    count[nn] += 1

    work = 0
    relabel_budget = 6 * nn + E // 2

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
        dist = [-1] * nn
        dist[snk] = 0
        queue = [snk]
        qh = 0
        while qh < len(queue):
            w = queue[qh]
            qh += 1
            d = dist[w] + 1
            for a in range(adj[w], adj[w + 1]):
                if res[rv[a]] > 0:  # residual arc head[a] -> w
                    x = hd[a]
                    if dist[x] == -1:
                        dist[x] = d
                        queue.append(x)
        for h in range(limit + 2):
            count[h] = 0
            bucket[h] = -1
        for v in range(nn):
            if dist[v] != -1 and v != src:
                height[v] = dist[v]
            else:
                height[v] = -1  # fill from source pass
        dist = [-1] * nn
        dist[src] = 0
        queue = [src]
        qh = 0
        while qh < len(queue):
            w = queue[qh]
            qh += 1
            d = dist[w] + 1
            for a in range(adj[w], adj[w + 1]):
                if res[rv[a]] > 0:
                    x = hd[a]
                    if dist[x] == -1:
                        dist[x] = d
                        queue.append(x)
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
            inb[v] = False
        for v in range(nn):
            if v != src and v != snk and excess[v] > 0:
                h = height[v]
                nxt[v] = bucket[h]
                bucket[h] = v
                inb[v] = True
        work = 0
        hi = limit + 1

        # main highest-label loop
        while hi >= 0:
            if bucket[hi] == -1:
                hi -= 1
                continue
            v = bucket[hi]
            bucket[hi] = nxt[v]
            inb[v] = False
            if v == src or v == snk or excess[v] <= 0:
                continue
            if height[v] != hi:
                # re-route an entry left stale by a gap lift
                h = height[v]
                if not inb[v]:
                    nxt[v] = bucket[h]
                    bucket[h] = v
                    inb[v] = True
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
                                if (not inb[w] and w != src and w != snk
                                        and excess[w] > 0):
                                    nxt[w] = bucket[nn + 1]
                                    bucket[nn + 1] = w
                                    inb[w] = True
                        hi = limit + 1
                    if height[v] > hi:
                        hi = height[v]
                    if not inb[v]:
                        h = height[v]
                        nxt[v] = bucket[h]
                        bucket[h] = v
                        inb[v] = True
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
                    if (not inb[w] and w != src and w != snk
                            and excess[w] > 0):
                        h = height[w]
                        nxt[w] = bucket[h]
                        bucket[h] = w
                        inb[w] = True
                    work += 1
                else:
                    cur[v] += 1
            if work > relabel_budget:
                break  # back out for a global relabel
        if hi < 0:
            break

    return excess[snk], np.asarray(res, dtype=np.int64)
