"""Pure-Python kernels; the reference the compiled module must match.

Every function here has a twin in ``_kernels.pyx`` performing the same
floating-point operations in the same order, so both backends return
identical tours and values.
"""

import math


def held_karp(w, nodes, tol):
    """Minimum-weight directed cycle through ``nodes`` (starting at nodes[0]).

    Backward subset DP: ``b[S][k]`` is the cheapest path that starts at
    remaining node ``k``, visits every node of bitmask ``S`` and returns to
    the origin.  The forward reconstruction picks, at each step, the
    lowest-position successor whose completion is within ``tol`` of optimal,
    so among tied tours the lexicographically smallest one is returned.
    """
    nodes = [int(v) for v in nodes]
    o = nodes[0]
    rest = nodes[1:]
    m = len(rest)
    if m == 0:
        raise ValueError("need at least two nodes")
    full = (1 << m) - 1
    inf = math.inf
    b = [[inf] * m for _ in range(1 << m)]
    for k in range(m):
        b[0][k] = w[rest[k]][o]
    for s in range(1, 1 << m):
        row = b[s]
        for k in range(m):
            if s >> k & 1:
                continue
            wk = w[rest[k]]
            best = inf
            for l in range(m):
                if s >> l & 1:
                    c = wk[rest[l]] + b[s ^ (1 << l)][l]
                    if c < best:
                        best = c
            row[k] = best
    target = inf
    for l in range(m):
        c = w[o][rest[l]] + b[full ^ (1 << l)][l]
        if c < target:
            target = c
    tour = [o]
    s = full
    cur_w = w[o]
    while s:
        for l in range(m):
            if s >> l & 1 and cur_w[rest[l]] + b[s ^ (1 << l)][l] <= target + tol:
                break
        s ^= 1 << l
        target = b[s][l]
        tour.append(rest[l])
        cur_w = w[rest[l]]
    return tour_cost(w, tour), tour


def tour_cost(w, tour):
    n = len(tour)
    total = 0.0
    for k in range(n):
        total += w[tour[k]][tour[(k + 1) % n]]
    return total


def nearest_neighbor(w, nodes, start):
    """Greedy tour from ``start``; ties go to the earliest entry of ``nodes``."""
    left = [int(v) for v in nodes if v != start]
    tour = [int(start)]
    cur = int(start)
    while left:
        row = w[cur]
        bi = 0
        bc = row[left[0]]
        for q in range(1, len(left)):
            c = row[left[q]]
            if c < bc:
                bc = c
                bi = q
        cur = left.pop(bi)
        tour.append(cur)
    return tour


def _prefix(w, t, n):
    fwd = [0.0] * (n + 1)
    bwd = [0.0] * (n + 1)
    for k in range(n):
        a, b = t[k], t[(k + 1) % n]
        fwd[k + 1] = fwd[k] + w[a][b]
        bwd[k + 1] = bwd[k] + w[b][a]
    return fwd, bwd


def _two_opt_pass(w, t, n, fwd, bwd, tol):
    for i in range(n - 2):
        a = t[i]
        c = t[i + 1]
        for j in range(i + 2, n):
            d = t[j]
            e = t[(j + 1) % n]
            old = w[a][c] + w[d][e] + (fwd[j] - fwd[i + 1])
            new = w[a][d] + w[c][e] + (bwd[j] - bwd[i + 1])
            if new - old < -tol:
                t[i + 1:j + 1] = t[i + 1:j + 1][::-1]
                return True
    return False


def _or_opt_pass(w, t, n, fwd, bwd, tol):
    for seg in (1, 2, 3):
        if seg > n - 3:
            break
        for s in range(1, n - seg + 1):
            e = s + seg - 1
            first, last = t[s], t[e]
            prev = t[s - 1]
            nxt = t[(e + 1) % n]
            removed = w[prev][first] + w[last][nxt] - w[prev][nxt]
            inner_f = fwd[e] - fwd[s]
            inner_b = bwd[e] - bwd[s]
            for p in range(n):
                if s - 1 <= p <= e:
                    continue
                c = t[p]
                d = t[(p + 1) % n]
                base = w[c][d]
                add_f = w[c][first] + w[last][d] - base
                add_r = w[c][last] + w[first][d] - base + (inner_b - inner_f)
                rev = add_r < add_f
                add = add_r if rev else add_f
                if add - removed < -tol:
                    block = t[s:e + 1]
                    if rev:
                        block.reverse()
                    rest = t[:s] + t[e + 1:]
                    q = p if p < s else p - seg
                    t[:] = rest[:q + 1] + block + rest[q + 1:]
                    return True
    return False


def local_search(w, tour, tol, max_passes):
    """2-opt and or-opt to a local optimum under first improvement.

    Position 0 stays fixed.  Deltas use forward/backward prefix sums so
    reversals are priced correctly for asymmetric weights.
    """
    t = [int(v) for v in tour]
    n = len(t)
    if n == 3:
        r = [t[0], t[2], t[1]]
        if tour_cost(w, r) < tour_cost(w, t) - tol:
            t = r
        return tour_cost(w, t), t
    passes = 0
    while n > 3 and (max_passes <= 0 or passes < max_passes):
        passes += 1
        fwd, bwd = _prefix(w, t, n)
        if _two_opt_pass(w, t, n, fwd, bwd, tol):
            continue
        if _or_opt_pass(w, t, n, fwd, bwd, tol):
            continue
        break
    return tour_cost(w, t), t


def erp(match, same, gap_a, gap_b, tol):
    """Edit distance with real penalty; returns (value, edits on one optimal path).

    Backtracking prefers match, then delete (drop an element of the first
    sequence), then insert.  Matches of identical elements are not edits.
    """
    m = len(gap_a)
    n = len(gap_b)
    D = [[0.0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        D[i][0] = D[i - 1][0] + gap_a[i - 1]
    for j in range(1, n + 1):
        D[0][j] = D[0][j - 1] + gap_b[j - 1]
    for i in range(1, m + 1):
        Di, Dp = D[i], D[i - 1]
        mi = match[i - 1]
        ga = gap_a[i - 1]
        for j in range(1, n + 1):
            c = Dp[j - 1] + mi[j - 1]
            c2 = Dp[j] + ga
            if c2 < c:
                c = c2
            c2 = Di[j - 1] + gap_b[j - 1]
            if c2 < c:
                c = c2
            Di[j] = c
    edits = 0
    i, j = m, n
    while i > 0 or j > 0:
        here = D[i][j] + tol
        if i > 0 and j > 0 and D[i - 1][j - 1] + match[i - 1][j - 1] <= here:
            if not same[i - 1][j - 1]:
                edits += 1
            i -= 1
            j -= 1
        elif i > 0 and D[i - 1][j] + gap_a[i - 1] <= here:
            edits += 1
            i -= 1
        else:
            edits += 1
            j -= 1
    return D[m][n], edits
