"""Graph, cost-vector and route types shared by every module.

All edge-indexed quantities (cost vectors, penalties, route incidence
vectors) use one dense convention: entry ``[i, j]`` of an ``(n, n)`` array is
the directed edge from ``universe.nodes[i]`` to ``universe.nodes[j]``.  The
diagonal is not an edge and is kept at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

KINDS = ("rtsp", "scvrp", "vrptw")


class RouteEncodingError(ValueError):
    """A tour or edge set does not describe the expected route structure."""


class InfeasibleError(ValueError):
    """A route violates its constraint set, or no feasible route exists."""


# --------------------------------------------------------------------------
# node universe and edge-indexed vectors


@dataclass(frozen=True)
class NodeUniverse:
    """Ordered node identifiers, optionally with (lat, lng) coordinates."""

    nodes: tuple[str, ...]
    coordinates: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        nodes = tuple(str(v) for v in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError("node identifiers must be unique")
        if self.coordinates is not None:
            coords = tuple((float(a), float(b)) for a, b in self.coordinates)
            if len(coords) != len(nodes):
                raise ValueError("need one coordinate pair per node")
            if not np.all(np.isfinite(coords)):
                raise ValueError("coordinates must be finite")
            object.__setattr__(self, "coordinates", coords)

    @classmethod
    def from_coords(cls, coords: Mapping[str, tuple[float, float]]) -> "NodeUniverse":
        return cls(tuple(coords), tuple(coords.values()))

    @cached_property
    def _rank(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.nodes)}

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node) -> bool:
        return node in self._rank

    def index(self, node: str) -> int:
        try:
            return self._rank[node]
        except KeyError:
            raise KeyError(f"node {node!r} not in universe") from None

    def indices(self, nodes: Iterable[str]) -> list[int]:
        return [self.index(v) for v in nodes]

    def coords_array(self) -> np.ndarray:
        if self.coordinates is None:
            raise ValueError("universe has no coordinates")
        return np.asarray(self.coordinates, dtype=float)

    @property
    def n_edges(self) -> int:
        n = len(self.nodes)
        return n * (n - 1)


def _edge_array(universe: NodeUniverse, values) -> np.ndarray:
    n = len(universe)
    arr = np.array(values, dtype=float)
    if arr.shape != (n, n):
        raise ValueError(f"expected a ({n}, {n}) array, got {arr.shape}")
    np.fill_diagonal(arr, 0.0)
    return arr


def offdiag_mask(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


@dataclass(frozen=True, eq=False)
class CostVector:
    """Nonnegative weight for every directed edge of a universe."""

    universe: NodeUniverse
    weights: np.ndarray

    def __post_init__(self):
        arr = _edge_array(self.universe, self.weights)
        if not np.all(np.isfinite(arr)):
            raise ValueError("cost vector entries must be finite")
        if np.any(arr < 0):
            raise ValueError("cost vector entries must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    @classmethod
    def uniform(cls, universe: NodeUniverse, value: float = 1.0) -> "CostVector":
        n = len(universe)
        return cls(universe, np.full((n, n), float(value)))

    @classmethod
    def from_flat(cls, universe: NodeUniverse, flat: Sequence[float]) -> "CostVector":
        n = len(universe)
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (n * (n - 1),):
            raise ValueError(f"flat weights need length {n * (n - 1)}")
        arr = np.zeros((n, n))
        arr[offdiag_mask(n)] = flat
        return cls(universe, arr)

    def flat(self) -> np.ndarray:
        """Off-diagonal entries in row-major order, length n(n-1)."""
        return self.weights[offdiag_mask(len(self.universe))]

    def __getitem__(self, edge: tuple[str, str]) -> float:
        i, j = self.universe.index(edge[0]), self.universe.index(edge[1])
        if i == j:
            raise KeyError("self-loops are not edges")
        return float(self.weights[i, j])

    def __eq__(self, other):
        if not isinstance(other, CostVector):
            return NotImplemented
        return self.universe == other.universe and np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"CostVector(n={len(self.universe)}, sum={self.weights.sum():.6g})"


@dataclass(frozen=True, eq=False)
class PenaltyMatrix:
    """Per-edge constants of the affine term; may be any finite real."""

    universe: NodeUniverse
    entries: np.ndarray

    def __post_init__(self):
        arr = _edge_array(self.universe, self.entries)
        if not np.all(np.isfinite(arr)):
            raise ValueError("penalty entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def zeros(cls, universe: NodeUniverse) -> "PenaltyMatrix":
        n = len(universe)
        return cls(universe, np.zeros((n, n)))

    @classmethod
    def from_pairs(cls, universe: NodeUniverse, pairs: Mapping[tuple[str, str], float]) -> "PenaltyMatrix":
        n = len(universe)
        arr = np.zeros((n, n))
        for (a, b), v in pairs.items():
            arr[universe.index(a), universe.index(b)] = v
        return cls(universe, arr)

    def __getitem__(self, edge: tuple[str, str]) -> float:
        return float(self.entries[self.universe.index(edge[0]), self.universe.index(edge[1])])


@dataclass(frozen=True)
class RouteBinary:
    """Set of directed edges (as index pairs) used by a route or route set."""

    universe: NodeUniverse
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        n = len(self.universe)
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j or not (0 <= i < n and 0 <= j < n):
                raise RouteEncodingError(f"invalid edge index pair {(i, j)}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_matrix(cls, universe: NodeUniverse, x) -> "RouteBinary":
        x = np.asarray(x)
        if not np.all((x == 0) | (x == 1)):
            raise RouteEncodingError("incidence entries must be 0 or 1")
        i, j = np.nonzero(x)
        return cls(universe, frozenset(zip(i.tolist(), j.tolist())))

    @classmethod
    def from_named(cls, universe: NodeUniverse, edges: Iterable[tuple[str, str]]) -> "RouteBinary":
        return cls(universe, frozenset((universe.index(a), universe.index(b)) for a, b in edges))

    @cached_property
    def matrix(self) -> np.ndarray:
        n = len(self.universe)
        x = np.zeros((n, n), dtype=float)
        for i, j in self.edges:
            x[i, j] = 1.0
        x.setflags(write=False)
        return x

    def named_edges(self) -> list[tuple[str, str]]:
        nodes = self.universe.nodes
        return sorted((nodes[i], nodes[j]) for i, j in self.edges)

    def __len__(self) -> int:
        return len(self.edges)

    def cost(self, weights: np.ndarray) -> float:
        """Linear objective sum_ij w_ij x_ij."""
        return float(sum(weights[i, j] for i, j in sorted(self.edges)))

    def l1(self, other: "RouteBinary") -> int:
        return len(self.edges ^ other.edges)


# --------------------------------------------------------------------------
# signals and examples


def _frozen_map(d, cast=float):
    return {str(k): cast(v) for k, v in (d or {}).items()}


@dataclass(frozen=True, eq=False)
class Signal:
    """What the expert sees before routing: required nodes and problem data.

    ``rtsp`` uses ``required_nodes`` only.  ``scvrp`` adds ``demands``,
    ``capacity`` and ``n_vehicles`` with ``start_node`` the depot.  ``vrptw``
    adds ``time_windows``, ``service_times``, ``travel_times`` (universe
    indexed, seconds) and ``n_vehicles``.
    """

    kind: str
    required_nodes: tuple[str, ...]
    start_node: str | None = None
    demands: dict = field(default_factory=dict)
    capacity: float | None = None
    n_vehicles: int = 1
    time_windows: dict = field(default_factory=dict)
    service_times: dict = field(default_factory=dict)
    travel_times: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}")
        req = tuple(str(v) for v in self.required_nodes)
        if not req:
            raise ValueError("required_nodes must be nonempty")
        if len(set(req)) != len(req):
            raise ValueError("required_nodes contains duplicates")
        object.__setattr__(self, "required_nodes", req)
        if self.start_node is not None and self.start_node not in req:
            raise ValueError("start_node must be one of the required nodes")
        if int(self.n_vehicles) < 1:
            raise ValueError("vehicle count must be at least 1")
        object.__setattr__(self, "n_vehicles", int(self.n_vehicles))
        demands = _frozen_map(self.demands)
        if any(d < 0 for d in demands.values()):
            raise ValueError("demands must be nonnegative")
        object.__setattr__(self, "demands", demands)
        windows = {str(k): (float(e), float(l)) for k, (e, l) in (self.time_windows or {}).items()}
        if any(e > l for e, l in windows.values()):
            raise ValueError("time windows need earliest <= latest")
        object.__setattr__(self, "time_windows", windows)
        object.__setattr__(self, "service_times", _frozen_map(self.service_times))
        if self.kind in ("scvrp", "vrptw") and self.start_node is None:
            raise ValueError(f"{self.kind} signals need a depot start_node")
        if self.kind == "scvrp":
            if self.capacity is None or self.capacity <= 0:
                raise ValueError("scvrp needs a positive capacity")
            if demands.get(self.start_node, 0.0) != 0.0:
                raise ValueError("depot must have no demand")
        if self.kind == "vrptw":
            if self.travel_times is None:
                raise ValueError("vrptw needs a travel time matrix")
            tt = np.array(self.travel_times, dtype=float)
            if np.any(tt < 0):
                raise ValueError("travel times must be nonnegative")
            tt.setflags(write=False)
            object.__setattr__(self, "travel_times", tt)

    @classmethod
    def rtsp(cls, required: Sequence[str], start: str | None = None) -> "Signal":
        return cls("rtsp", tuple(required), start_node=start)

    @classmethod
    def scvrp(cls, depot: str, demands: Mapping[str, float], capacity: float, n_vehicles: int) -> "Signal":
        return cls("scvrp", (depot, *demands), start_node=depot, demands=dict(demands),
                   capacity=capacity, n_vehicles=n_vehicles)

    @classmethod
    def vrptw(cls, depot: str, time_windows: Mapping[str, tuple[float, float]],
              travel_times, n_vehicles: int, service_times: Mapping[str, float] | None = None,
              depot_window: tuple[float, float] | None = None) -> "Signal":
        windows = dict(time_windows)
        if depot_window is not None:
            windows[depot] = depot_window
        customers = [v for v in time_windows if v != depot]
        return cls("vrptw", (depot, *customers), start_node=depot, n_vehicles=n_vehicles,
                   time_windows=windows, service_times=dict(service_times or {}),
                   travel_times=travel_times)

    @property
    def customers(self) -> tuple[str, ...]:
        return tuple(v for v in self.required_nodes if v != self.start_node)


@dataclass(frozen=True)
class SignalResponseExample:
    """An observed (signal, route) pair; feasibility is checked on creation."""

    signal: Signal
    response: RouteBinary
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if self.check:
            check_feasible(self.signal, self.response)

    @property
    def universe(self) -> NodeUniverse:
        return self.response.universe


# --------------------------------------------------------------------------
# encodings


def tour_to_binary(tour: Sequence[str], universe: NodeUniverse) -> RouteBinary:
    """Encode a closed tour ``tour[0] -> ... -> tour[-1] -> tour[0]``."""
    if len(tour) < 2:
        raise RouteEncodingError("a tour needs at least two nodes")
    if len(set(tour)) != len(tour):
        raise RouteEncodingError(f"duplicate node in tour {list(tour)}")
    for v in tour:
        if v not in universe:
            raise RouteEncodingError(f"node {v!r} not in universe")
    idx = universe.indices(tour)
    return RouteBinary(universe, frozenset(zip(idx, idx[1:] + idx[:1])))


def _successors(x: RouteBinary) -> dict[int, int]:
    succ: dict[int, int] = {}
    for i, j in x.edges:
        if i in succ:
            raise RouteEncodingError(f"node {x.universe.nodes[i]!r} has out-degree > 1")
        succ[i] = j
    return succ


def binary_to_tour(x: RouteBinary, start: str) -> list[str]:
    """Decode a single directed cycle, beginning at ``start``."""
    nodes = x.universe.nodes
    succ = _successors(x)
    indeg: dict[int, int] = {}
    for _, j in x.edges:
        indeg[j] = indeg.get(j, 0) + 1
    if any(d != 1 for d in indeg.values()) or set(indeg) != set(succ):
        raise RouteEncodingError("edge set is not a union of cycles (degree != 1)")
    s = x.universe.index(start)
    if s not in succ:
        raise RouteEncodingError(f"start {start!r} is not on the cycle")
    tour = [s]
    cur = succ[s]
    while cur != s:
        tour.append(cur)
        cur = succ[cur]
    if len(tour) != len(x.edges):
        raise RouteEncodingError("edge set contains subtours")
    return [nodes[i] for i in tour]


def routes_to_binary(routes: Iterable[Sequence[str]], depot: str, universe: NodeUniverse,
                     mirrored: bool = False) -> RouteBinary:
    """Encode vehicle routes, each a customer list served from ``depot``.

    With ``mirrored`` every used edge is recorded in both directions, which is
    the encoding of undirected (symmetric) route sets.
    """
    d = universe.index(depot)
    edges = set()
    for route in routes:
        if not route:
            continue
        path = [d, *universe.indices(route), d]
        for a, b in zip(path, path[1:]):
            edges.add((a, b))
            if mirrored:
                edges.add((b, a))
    return RouteBinary(universe, frozenset(edges))


def binary_to_routes(x: RouteBinary, depot: str, mirrored: bool = False) -> list[list[str]]:
    """Decompose a depot-based route set into customer lists.

    Mirrored sets are walked as undirected graphs; a customer whose only
    neighbour is the depot forms a single-customer route.  Routes are
    returned in a canonical orientation (first customer of lower rank than
    the last) and sorted.
    """
    u = x.universe
    nodes = u.nodes
    d = u.index(depot)
    if not mirrored:
        succ: dict[int, int] = {}
        for i, j in x.edges:
            if i == d:
                continue
            if i in succ:
                raise RouteEncodingError(f"customer {nodes[i]!r} has out-degree > 1")
            succ[i] = j
        indeg: dict[int, int] = {}
        for _, j in x.edges:
            indeg[j] = indeg.get(j, 0) + 1
        for v in set(succ) | set(indeg):
            if v != d and (indeg.get(v, 0) != 1 or v not in succ):
                raise RouteEncodingError(f"customer {nodes[v]!r} has in/out degree != 1")
        starts = sorted(j for i, j in x.edges if i == d)
        if indeg.get(d, 0) != len(starts):
            raise RouteEncodingError("depot in-degree differs from out-degree")
        routes, seen = [], set()
        for s in starts:
            route, cur = [], s
            while cur != d:
                if cur in seen:
                    raise RouteEncodingError("routes share a customer")
                seen.add(cur)
                route.append(nodes[cur])
                cur = succ[cur]
            routes.append(route)
        if seen != set(succ):
            raise RouteEncodingError("edge set contains subtours not through the depot")
        return sorted(routes)

    adj: dict[int, set[int]] = {}
    for i, j in x.edges:
        if (j, i) not in x.edges:
            raise RouteEncodingError("mirrored encoding must be symmetric")
        adj.setdefault(i, set()).add(j)
    for v, nb in adj.items():
        if v == d:
            continue
        if not (len(nb) == 2 or (len(nb) == 1 and d in nb)):
            raise RouteEncodingError(f"customer {nodes[v]!r} has invalid degree {len(nb)}")
    routes, seen = [], set()
    for s in sorted(adj.get(d, ())):
        if s in seen:
            continue
        route, prev, cur = [], d, s
        while cur != d:
            seen.add(cur)
            route.append(cur)
            nxt = [w for w in adj[cur] if w != prev]
            if not nxt:  # single-customer route
                break
            prev, cur = cur, nxt[0]
        if len(route) > 1 and route[0] > route[-1]:
            route.reverse()
        routes.append(route)
    if seen != (set(adj) - {d}):
        raise RouteEncodingError("edge set contains subtours not through the depot")
    return sorted([nodes[v] for v in r] for r in routes)


# --------------------------------------------------------------------------
# feasibility


def vrptw_route_schedule(route: Sequence[int], depot: int, signal: Signal,
                         universe: NodeUniverse) -> float | None:
    """Return the time the vehicle is back at the depot, or None if late."""
    tt = signal.travel_times
    nodes = universe.nodes
    windows, service = signal.time_windows, signal.service_times
    e0, l0 = windows.get(nodes[depot], (0.0, np.inf))
    t, prev = e0, depot
    for v in route:
        t += tt[prev, v]
        e, l = windows.get(nodes[v], (0.0, np.inf))
        if t > l:
            return None
        t = max(t, e) + service.get(nodes[v], 0.0)
        prev = v
    t += tt[prev, depot]
    return t if t <= l0 else None


def check_feasible(signal: Signal, x: RouteBinary) -> None:
    """Raise :class:`InfeasibleError` unless ``x`` lies in the signal's set."""
    u = x.universe
    for v in signal.required_nodes:
        if v not in u:
            raise InfeasibleError(f"required node {v!r} not in universe")
    req = set(u.indices(signal.required_nodes))
    for i, j in x.edges:
        if i not in req or j not in req:
            raise InfeasibleError("route uses an edge outside the required nodes")
    try:
        if signal.kind == "rtsp":
            if len(req) < 2:
                raise InfeasibleError("an R-TSP needs at least two required nodes")
            start = signal.start_node or signal.required_nodes[0]
            tour = binary_to_tour(x, start)
            if set(u.indices(tour)) != req:
                raise InfeasibleError("tour does not cover the required nodes")
            return
        depot = signal.start_node
        routes = binary_to_routes(x, depot, mirrored=(signal.kind == "scvrp"))
    except RouteEncodingError as exc:
        raise InfeasibleError(str(exc)) from None
    served = [v for r in routes for v in r]
    if sorted(served) != sorted(signal.customers):
        raise InfeasibleError("routes do not serve every customer exactly once")
    if signal.kind == "scvrp":
        if len(routes) != signal.n_vehicles:
            raise InfeasibleError(f"expected {signal.n_vehicles} routes, got {len(routes)}")
        for r in routes:
            load = sum(signal.demands.get(v, 0.0) for v in r)
            if load > signal.capacity + 1e-9:
                raise InfeasibleError(f"route {r} exceeds capacity ({load} > {signal.capacity})")
    else:
        if len(routes) > signal.n_vehicles:
            raise InfeasibleError(f"uses {len(routes)} vehicles, only {signal.n_vehicles} available")
        d = u.index(depot)
        for r in routes:
            if vrptw_route_schedule(u.indices(r), d, signal, u) is None:
                raise InfeasibleError(f"route {r} violates its time windows")


def is_feasible(signal: Signal, x: RouteBinary) -> bool:
    try:
        check_feasible(signal, x)
    except InfeasibleError:
        return False
    return True


def augment_weights(theta: CostVector, xhat: RouteBinary, m: PenaltyMatrix | None = None) -> np.ndarray:
    """Edge weights ``theta + 2 xhat - 1 + M`` of the loss-augmented problem."""
    if xhat.universe != theta.universe or (m is not None and m.universe != theta.universe):
        raise ValueError("cost vector, route and penalties index different universes")
    w = theta.weights + 2.0 * xhat.matrix - 1.0
    if m is not None:
        w = w + m.entries
    np.fill_diagonal(w, 0.0)
    return w
