"""Forward routing solvers, used for prediction and for the augmented problem.

The R-TSP solver offers an exact subset DP (Held-Karp) and a local search
(nearest neighbour, then 2-opt and or-opt with restarts).  The capacitated
and time-windowed VRP solvers are exact enumerations over customer subsets,
capped at desk-scale instance sizes.  All solvers accept negative weights.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ._backend import get_backend
from .core import (
    CostVector,
    InfeasibleError,
    NodeUniverse,
    PenaltyMatrix,
    RouteBinary,
    Signal,
    SignalResponseExample,
    augment_weights,
    routes_to_binary,
    tour_to_binary,
    vrptw_route_schedule,
)

log = logging.getLogger(__name__)

SCVRP_MAX_CUSTOMERS = 10
VRPTW_MAX_CUSTOMERS = 8


class SolverLimitError(ValueError):
    """Instance exceeds what the requested solver handles."""


@dataclass(frozen=True)
class SolverChoice:
    """Which R-TSP algorithm to run and with what budget.

    ``exact-dp`` above ``exact_cutoff`` nodes falls back to local search with a
    warning, or raises :class:`SolverLimitError` when ``strict``.
    """

    kind: str = "exact-dp"
    exact_cutoff: int = 16
    restarts: int = 5
    max_passes: int = 0
    seed: int = 0
    strict: bool = False

    def __post_init__(self):
        if self.kind not in ("exact-dp", "local-search"):
            raise ValueError(f"unknown solver kind {self.kind!r}")
        if self.exact_cutoff < 3:
            raise ValueError("exact_cutoff must be at least 3")
        if self.restarts < 1:
            raise ValueError("need at least one local-search run")


EXACT = SolverChoice()
LOCAL = SolverChoice(kind="local-search")


def _tol(w: np.ndarray, idx: Sequence[int]) -> float:
    sub = w[np.ix_(idx, idx)]
    return 1e-10 * max(1.0, float(np.max(np.abs(sub))) if sub.size else 1.0)


def _canonical(tour: list[int]) -> list[int]:
    k = tour.index(min(tour))
    return tour[k:] + tour[:k]


def _double_bridge(tour: list[int], rng: np.random.Generator) -> list[int]:
    n = len(tour)
    if n < 8:
        rest = tour[1:]
        rng.shuffle(rest)
        return [tour[0], *rest]
    a, b, c = sorted(rng.choice(np.arange(1, n), size=3, replace=False).tolist())
    return tour[:a] + tour[b:c] + tour[a:b] + tour[c:]


def rtsp_tour(weights: np.ndarray, nodes: Sequence[int], choice: SolverChoice = EXACT) -> tuple[float, list[int]]:
    """Best cycle over node indices ``nodes``; tour begins at the lowest index."""
    idx = sorted(int(v) for v in nodes)
    if len(idx) < 2:
        raise ValueError("an R-TSP needs at least two required nodes")
    be = get_backend()
    tol = _tol(weights, idx)
    if len(idx) <= 3:
        return be.held_karp(weights, idx, tol)
    kind = choice.kind
    if kind == "exact-dp" and len(idx) > choice.exact_cutoff:
        msg = f"{len(idx)} nodes exceeds exact cutoff {choice.exact_cutoff}"
        if choice.strict:
            raise SolverLimitError(msg)
        warnings.warn(msg + "; using local search", RuntimeWarning, stacklevel=3)
        kind = "local-search"
    if kind == "exact-dp":
        return be.held_karp(weights, idx, tol)

    start = be.nearest_neighbor(weights, idx, idx[0])
    best_c, best_t = be.local_search(weights, start, tol, choice.max_passes)
    best_t = _canonical(best_t)
    for r in range(1, choice.restarts):
        rng = np.random.default_rng([choice.seed, r])
        c, t = be.local_search(weights, _double_bridge(best_t, rng), tol, choice.max_passes)
        t = _canonical(t)
        if c < best_c - tol or (abs(c - best_c) <= tol and t < best_t):
            best_c, best_t = c, t
    return best_c, best_t


def solve_rtsp(weights: np.ndarray, required: Sequence[str], universe: NodeUniverse,
               start: str | None = None, choice: SolverChoice = EXACT) -> RouteBinary:
    """Minimum-weight cycle over exactly the required nodes.

    Nodes outside ``required`` are ignored.  ``start`` only fixes where the
    decoded tour begins; the cycle itself does not depend on it.
    """
    if len(required) < 2:
        raise ValueError("an R-TSP needs at least two required nodes")
    if start is not None and start not in required:
        raise ValueError("start must be a required node")
    _, tour = rtsp_tour(np.asarray(weights, dtype=float), universe.indices(required), choice)
    return tour_to_binary([universe.nodes[i] for i in tour], universe)


# --------------------------------------------------------------------------
# capacitated VRP (symmetric, mirrored encoding)


def _better(c: float, best: float) -> bool:
    """Strict improvement beyond a relative tie tolerance (first found wins ties)."""
    return c < best and (best == float("inf") or c < best - 1e-12 * max(1.0, abs(best)))


def _popcount(s: int) -> int:
    return bin(s).count("1")


def _submasks_with_low(s: int):
    low = s & -s
    rest = s ^ low
    sub = rest
    while True:
        yield sub | low
        if sub == 0:
            break
        sub = (sub - 1) & rest


def _partition_dp(route_cost: dict[int, float], full: int, max_routes: int, exact: bool):
    """Cheapest cover of ``full`` by disjoint masks from ``route_cost``."""
    inf = float("inf")
    F = [{0: (0.0, None)}]
    for k in range(1, max_routes + 1):
        layer = {}
        for s in range(1, full + 1):
            if s & full != s:
                continue
            best, arg = inf, None
            for t in _submasks_with_low(s):
                rc = route_cost.get(t)
                if rc is None:
                    continue
                prev = F[k - 1].get(s ^ t)
                if prev is None:
                    continue
                c = rc + prev[0]
                if _better(c, best):
                    best, arg = c, t
            if arg is not None:
                layer[s] = (best, arg)
        F.append(layer)
    ks = [max_routes] if exact else range(1, max_routes + 1)
    best, bk = inf, None
    for k in ks:
        if full in F[k] and _better(F[k][full][0], best):
            best, bk = F[k][full][0], k
    if bk is None:
        return None
    masks, s = [], full
    for k in range(bk, 0, -1):
        t = F[k][s][1]
        masks.append(t)
        s ^= t
    return best, masks


def solve_scvrp_exact(weights: np.ndarray, signal: Signal, universe: NodeUniverse) -> RouteBinary:
    """Optimal K-route solution of the capacitated VRP, mirrored encoding.

    Each used undirected edge {i, j} is recorded as both (i, j) and (j, i), so
    the minimized objective is sum over used edges of w_ij + w_ji.  A
    single-customer route uses its depot edge once.  Exactly ``n_vehicles``
    nonempty routes are formed, each within capacity.
    """
    if signal.kind != "scvrp":
        raise ValueError("not a scvrp signal")
    cust = list(signal.customers)
    n = len(cust)
    K, cap = signal.n_vehicles, signal.capacity
    if n > SCVRP_MAX_CUSTOMERS:
        raise SolverLimitError(f"{n} customers exceeds exact scvrp limit {SCVRP_MAX_CUSTOMERS}")
    dem = [signal.demands.get(v, 0.0) for v in cust]
    if sum(dem) > K * cap + 1e-9 or n < K:
        raise InfeasibleError("capacity or vehicle count cannot serve the demand")
    w = np.asarray(weights, dtype=float)
    d = universe.index(signal.start_node)
    ci = universe.indices(cust)
    s_w = w + w.T  # cost of using an undirected edge once

    inf = float("inf")
    size = 1 << n
    g = [[inf] * n for _ in range(size)]
    parent = [[-1] * n for _ in range(size)]
    for j in range(n):
        g[1 << j][j] = s_w[d, ci[j]]
    for s in range(1, size):
        for j in range(n):
            if not s >> j & 1 or g[s][j] == inf:
                continue
            base = g[s][j]
            for k in range(n):
                if s >> k & 1:
                    continue
                t = s | (1 << k)
                c = base + s_w[ci[j], ci[k]]
                if _better(c, g[t][k]):
                    g[t][k] = c
                    parent[t][k] = j
    route_cost, route_end = {}, {}
    for s in range(1, size):
        load = sum(dem[j] for j in range(n) if s >> j & 1)
        if load > cap + 1e-9:
            continue
        if _popcount(s) == 1:
            j = s.bit_length() - 1
            route_cost[s], route_end[s] = s_w[d, ci[j]], j
            continue
        best, bj = inf, -1
        for j in range(n):
            if s >> j & 1 and _better(g[s][j] + s_w[ci[j], d], best):
                best, bj = g[s][j] + s_w[ci[j], d], j
        route_cost[s], route_end[s] = best, bj
    sol = _partition_dp(route_cost, size - 1, K, exact=True)
    if sol is None:
        raise InfeasibleError("no feasible scvrp solution")
    routes = []
    for mask in sol[1]:
        path, s, j = [], mask, route_end[mask]
        while j != -1:
            path.append(cust[j])
            pj = parent[s][j] if _popcount(s) > 1 else -1
            s ^= 1 << j
            j = pj
        routes.append(path[::-1])
    return routes_to_binary(routes, signal.start_node, universe, mirrored=True)


# --------------------------------------------------------------------------
# VRP with time windows (directed encoding)


def solve_vrptw_exact(weights: np.ndarray, signal: Signal, universe: NodeUniverse) -> RouteBinary:
    """Optimal route set using at most ``n_vehicles`` vehicles.

    Routes leave the depot at the start of its window (default 0), wait when
    early and must arrive no later than each customer's latest time.  Per
    customer subset, Pareto labels (cost, departure time) give the cheapest
    feasible ordering; a subset-partition DP then assigns vehicles.
    """
    if signal.kind != "vrptw":
        raise ValueError("not a vrptw signal")
    cust = list(signal.customers)
    n = len(cust)
    if n > VRPTW_MAX_CUSTOMERS:
        raise SolverLimitError(f"{n} customers exceeds exact vrptw limit {VRPTW_MAX_CUSTOMERS}")
    w = np.asarray(weights, dtype=float)
    tt = signal.travel_times
    d = universe.index(signal.start_node)
    ci = universe.indices(cust)
    inf = float("inf")
    e0, l0 = signal.time_windows.get(signal.start_node, (0.0, inf))
    win = [signal.time_windows.get(v, (0.0, inf)) for v in cust]
    svc = [signal.service_times.get(v, 0.0) for v in cust]

    size = 1 << n
    # labels[s][j]: list of (cost, departure time, path)
    labels: list[list[list]] = [[[] for _ in range(n)] for _ in range(size)]

    def push(bucket, cost, t, path):
        for c2, t2, _ in bucket:
            if c2 <= cost and t2 <= t:
                return
        bucket[:] = [lb for lb in bucket if not (cost <= lb[0] and t <= lb[1])]
        bucket.append((cost, t, path))

    for j in range(n):
        arr = e0 + tt[d, ci[j]]
        if arr <= win[j][1]:
            push(labels[1 << j][j], w[d, ci[j]], max(arr, win[j][0]) + svc[j], (j,))
    for s in range(1, size):
        for j in range(n):
            for cost, t, path in labels[s][j]:
                for k in range(n):
                    if s >> k & 1:
                        continue
                    arr = t + tt[ci[j], ci[k]]
                    if arr > win[k][1]:
                        continue
                    push(labels[s | (1 << k)][k], cost + w[ci[j], ci[k]],
                         max(arr, win[k][0]) + svc[k], path + (k,))
    route_cost, route_path = {}, {}
    for s in range(1, size):
        best, bp = inf, None
        for j in range(n):
            for cost, t, path in labels[s][j]:
                if t + tt[ci[j], d] <= l0 and _better(cost + w[ci[j], d], best):
                    best, bp = cost + w[ci[j], d], path
        if bp is not None:
            route_cost[s], route_path[s] = best, bp
    sol = _partition_dp(route_cost, size - 1, signal.n_vehicles, exact=False)
    if sol is None:
        raise InfeasibleError("time windows admit no feasible schedule")
    routes = [[cust[j] for j in route_path[m]] for m in sol[1]]
    return routes_to_binary(routes, signal.start_node, universe)


# --------------------------------------------------------------------------
# dispatch


def solve_fop(weights: np.ndarray, signal: Signal, universe: NodeUniverse,
              choice: SolverChoice = EXACT) -> RouteBinary:
    """Minimize sum_ij weights_ij x_ij over the signal's feasible set."""
    if signal.kind == "rtsp":
        return solve_rtsp(weights, signal.required_nodes, universe, signal.start_node, choice)
    if signal.kind == "scvrp":
        return solve_scvrp_exact(weights, signal, universe)
    return solve_vrptw_exact(weights, signal, universe)


def predict(theta: CostVector, signal: Signal, m: PenaltyMatrix | None = None,
            choice: SolverChoice = EXACT) -> RouteBinary:
    """Route the model produces: the forward problem under theta + M."""
    w = theta.weights if m is None else theta.weights + m.entries
    return solve_fop(w, signal, theta.universe, choice)


def solve_afop(theta: CostVector, example: SignalResponseExample, m: PenaltyMatrix | None = None,
               choice: SolverChoice = EXACT) -> RouteBinary:
    """Forward problem under the augmented weights theta + 2 xhat - 1 + M."""
    w = augment_weights(theta, example.response, m)
    return solve_fop(w, example.signal, theta.universe, choice)


# --------------------------------------------------------------------------
# brute-force enumeration (oracle use only)


def _set_partitions(items: list, max_blocks: int) -> Iterator[list[list]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest, max_blocks):
        for i in range(len(part)):
            yield part[:i] + [[first, *part[i]]] + part[i + 1:]
        if len(part) < max_blocks:
            yield [[first], *part]


def enumerate_solutions(signal: Signal, universe: NodeUniverse, limit: int = 8) -> Iterator[RouteBinary]:
    """Every feasible encoding for small signals, each yielded once."""
    if signal.kind == "rtsp":
        req = sorted(signal.required_nodes, key=universe.index)
        if len(req) > limit:
            raise SolverLimitError(f"enumeration limited to {limit} required nodes")
        first = req[0]
        for perm in itertools.permutations(req[1:]):
            yield tour_to_binary([first, *perm], universe)
        return
    cust = list(signal.customers)
    if len(cust) > limit:
        raise SolverLimitError(f"enumeration limited to {limit} customers")
    seen = set()
    d = universe.index(signal.start_node)
    for part in _set_partitions(cust, signal.n_vehicles):
        if signal.kind == "scvrp":
            if len(part) != signal.n_vehicles:
                continue
            if any(sum(signal.demands.get(v, 0.0) for v in blk) > signal.capacity + 1e-9 for blk in part):
                continue
        for orders in itertools.product(*[itertools.permutations(b) for b in part]):
            if signal.kind == "vrptw" and any(
                vrptw_route_schedule(universe.indices(r), d, signal, universe) is None for r in orders
            ):
                continue
            x = routes_to_binary(orders, signal.start_node, universe, mirrored=signal.kind == "scvrp")
            if x.edges not in seen:
                seen.add(x.edges)
                yield x
