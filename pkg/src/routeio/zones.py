"""Zone-level routing: zone ids, zone sequences, penalties, and stop expansion.

Stops are grouped into zones; each zone becomes a single node (a hypernode)
of a small graph that also contains the station.  A cost vector over that
graph is learned from historical zone sequences, prediction solves an R-TSP
over the zones of a new route, and the predicted zone order is turned into a
stop order by a penalized stop-level R-TSP.
"""

from __future__ import annotations

import math
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    CostVector,
    NodeUniverse,
    PenaltyMatrix,
    Signal,
    SignalResponseExample,
    binary_to_tour,
    tour_to_binary,
)
from .learn import TrainConfig, TrainTrace, train
from .solvers import EXACT, SolverChoice, solve_rtsp

STATION = "STATION"
WEIGHT_DOMINANCE_LIMIT = 0.1

_ZONE_RE = re.compile(r"^([A-Z])-(\d+)\.(\d+)([A-Z])$")


# --------------------------------------------------------------------------
# zone ids


@dataclass(frozen=True)
class ZoneId:
    """Parsed ``W-x.yZ`` zone identifier."""

    raw: str
    W: str
    x: int
    y: int
    Z: str

    @property
    def area(self) -> str:
        return f"{self.W}-{self.x}.{self.Z}"

    @property
    def region(self) -> str:
        return f"{self.W}-{self.x}"

    def render(self) -> str:
        return f"{self.W}-{self.x}.{self.y}{self.Z}"

    def __str__(self):
        return self.raw


def parse_zone_id(raw: str) -> ZoneId:
    m = _ZONE_RE.match(raw) if isinstance(raw, str) else None
    if m is None:
        raise ValueError(f"malformed zone id {raw!r}; expected W-x.yZ")
    W, x, y, Z = m.groups()
    return ZoneId(raw, W, int(x), int(y), Z)


def is_zone_id(raw) -> bool:
    return isinstance(raw, str) and _ZONE_RE.match(raw) is not None


def zone_diff(z1: ZoneId, z2: ZoneId) -> int:
    """Field-wise distance; letters compare by character code."""
    return (abs(ord(z1.W) - ord(z2.W)) + abs(z1.x - z2.x) + abs(z1.y - z2.y)
            + abs(ord(z1.Z) - ord(z2.Z)))


def build_penalties(zones: NodeUniverse, station: str = STATION) -> PenaltyMatrix:
    """Area, region and id-distance penalties between every pair of zones.

    The station node, if present, has zero penalty to and from every zone.
    """
    nodes = zones.nodes
    parsed = {v: parse_zone_id(v) for v in nodes if v != station}
    n = len(nodes)
    m = np.zeros((n, n))
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            if i == j or a == station or b == station:
                continue
            za, zb = parsed[a], parsed[b]
            m[i, j] = (za.area != zb.area) + (za.region != zb.region) + zone_diff(za, zb)
    return PenaltyMatrix(zones, m)


# --------------------------------------------------------------------------
# stops and routes


@dataclass(frozen=True)
class Stop:
    id: str
    lat: float
    lng: float
    zone: str | None = None
    kind: str = "delivery"

    def __post_init__(self):
        if self.kind not in ("delivery", "station"):
            raise ValueError(f"unknown stop kind {self.kind!r}")
        if not (math.isfinite(self.lat) and math.isfinite(self.lng)):
            raise ValueError(f"stop {self.id}: coordinates must be finite")
        if self.zone is not None:
            parse_zone_id(self.zone)


@dataclass(frozen=True, eq=False)
class RouteRecord:
    """One historical route.

    ``times[i, j]`` is the travel time in seconds from ``stop_ids[i]`` to
    ``stop_ids[j]``.  ``sequence`` is the driven stop order, station first.
    """

    route_id: str
    depot: str
    sequence: tuple[str, ...]
    stops: Mapping[str, Stop]
    stop_ids: tuple[str, ...]
    times: np.ndarray

    def __post_init__(self):
        seq = tuple(self.sequence)
        ids = tuple(self.stop_ids)
        object.__setattr__(self, "sequence", seq)
        object.__setattr__(self, "stop_ids", ids)
        object.__setattr__(self, "stops", dict(self.stops))
        if set(ids) != set(self.stops) or len(ids) != len(self.stops):
            raise ValueError(f"route {self.route_id}: travel times do not cover exactly its stops")
        if sorted(seq) != sorted(ids):
            raise ValueError(f"route {self.route_id}: sequence is not a permutation of its stops")
        stations = [s.id for s in self.stops.values() if s.kind == "station"]
        if len(stations) != 1:
            raise ValueError(f"route {self.route_id}: need exactly one station stop")
        if seq[0] != stations[0]:
            raise ValueError(f"route {self.route_id}: sequence must start at the station")
        t = np.array(self.times, dtype=float)
        if t.shape != (len(ids), len(ids)) or not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValueError(f"route {self.route_id}: travel times must be a finite nonnegative square matrix")
        np.fill_diagonal(t, 0.0)
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @property
    def station(self) -> str:
        return self.sequence[0]

    def zone_of(self, stop_id: str) -> str:
        s = self.stops[stop_id]
        if s.kind == "station":
            return STATION
        if s.zone is None:
            raise ValueError(f"route {self.route_id}: stop {stop_id} has no zone")
        return s.zone

    def zones(self) -> set[str]:
        return {self.zone_of(s) for s in self.stop_ids if self.stops[s].kind != "station"}

    def zone_centers(self) -> dict[str, tuple[float, float]]:
        return zone_centers([self])


def zone_centers(routes: Iterable[RouteRecord]) -> dict[str, tuple[float, float]]:
    """Mean (lat, lng) of all stops per zone; the station gets the mean station location."""
    acc: dict[str, list[tuple[float, float]]] = {}
    for r in routes:
        for sid in r.stop_ids:
            acc.setdefault(r.zone_of(sid), []).append((r.stops[sid].lat, r.stops[sid].lng))
    return {z: tuple(np.mean(pts, axis=0).tolist()) for z, pts in acc.items()}


# --------------------------------------------------------------------------
# step 1: stop sequence -> zone sequence


def collapse_runs(labels: Sequence[str]) -> list[str]:
    """Each label once, placed at its longest consecutive run (earliest run on ties)."""
    best: dict[str, tuple[int, int]] = {}
    k = 0
    while k < len(labels):
        j = k
        while j + 1 < len(labels) and labels[j + 1] == labels[k]:
            j += 1
        length = j - k + 1
        if labels[k] not in best or length > best[labels[k]][0]:
            best[labels[k]] = (length, k)
        k = j + 1
    return sorted(best, key=lambda z: best[z][1])


def extract_zone_sequence(route: RouteRecord, sequence: Sequence[str] | None = None) -> list[str]:
    """Zone order of a stop sequence (the route's own by default), station excluded."""
    seq = route.sequence if sequence is None else sequence
    return collapse_runs([route.zone_of(s) for s in seq if route.stops[s].kind != "station"])


def assign_missing_zone(stop: Stop, centers: Mapping[str, tuple[float, float]]) -> str:
    """Zone whose center is nearest to the stop; lexically smallest id on ties."""
    cands = sorted(z for z in centers if z != STATION)
    if not cands:
        raise ValueError("no zones with centers to assign from")
    d = [math.hypot(stop.lat - centers[z][0], stop.lng - centers[z][1]) for z in cands]
    return cands[int(np.argmin(d))]


# --------------------------------------------------------------------------
# zone graph model


def _center_distances(nodes: Sequence[str], centers: Mapping[str, tuple[float, float]]) -> np.ndarray:
    missing = [v for v in nodes if v not in centers]
    if missing:
        raise ValueError(f"no center for zones {missing}")
    xy = np.array([centers[v] for v in nodes], dtype=float)
    return np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=-1)


def init_weights_euclidean(centers: Mapping[str, tuple[float, float]], nodes: Sequence[str] | None = None,
                           warn: bool = True) -> CostVector:
    """Center-to-center Euclidean distances as initial weights."""
    nodes = tuple(sorted(centers) if nodes is None else nodes)
    if len(nodes) < 2:
        raise ValueError("need at least two zones")
    w = _center_distances(nodes, centers)
    if warn and w.size and w.max() > WEIGHT_DOMINANCE_LIMIT:
        warnings.warn(f"initial weights reach {w.max():.3g} > {WEIGHT_DOMINANCE_LIMIT}; "
                      "unit zone penalties may no longer dominate", RuntimeWarning, stacklevel=2)
    u = NodeUniverse(nodes, tuple(tuple(centers[v]) for v in nodes))
    return CostVector(u, w)


@dataclass(eq=False)
class ZoneGraphModel:
    depot: str
    theta: CostVector
    centers: dict[str, tuple[float, float]]
    penalties: PenaltyMatrix = field(default=None)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [v for v in self.universe.nodes if v not in self.centers]
        if missing:
            raise ValueError(f"zones without a center: {missing}")
        if self.penalties is None:
            self.penalties = build_penalties(self.universe)

    @property
    def universe(self) -> NodeUniverse:
        return self.theta.universe


def _zone_universe(routes: Sequence[RouteRecord], centers) -> NodeUniverse:
    zones = sorted(set().union(*(r.zones() for r in routes)))
    nodes = (STATION, *zones)
    return NodeUniverse(nodes, tuple(tuple(centers[v]) for v in nodes))


def zone_examples(routes: Sequence[RouteRecord], universe: NodeUniverse) -> list[SignalResponseExample]:
    """One R-TSP example per route: required = station + its zones, response = its zone cycle."""
    out = []
    for r in routes:
        seq = [STATION, *extract_zone_sequence(r)]
        sig = Signal.rtsp(seq, start=STATION)
        out.append(SignalResponseExample(sig, tour_to_binary(seq, universe)))
    return out


def fit_zone_model(routes: Sequence[RouteRecord], config: TrainConfig = TrainConfig(),
                   init: str = "euclidean", depot: str | None = None) -> tuple[ZoneGraphModel, TrainTrace]:
    """Learn zone weights for one depot from its historical routes."""
    if not routes:
        raise ValueError("no routes to train on")
    depot = depot or routes[0].depot
    centers = zone_centers(routes)
    u = _zone_universe(routes, centers)
    theta0 = init_weights_euclidean(centers, u.nodes)
    if init == "uniform":
        off = theta0.weights[~np.eye(len(u), dtype=bool)]
        theta0 = CostVector.uniform(u, float(off.mean()) if off.size else 1.0)
    elif init != "euclidean":
        raise ValueError(f"unknown init {init!r}")
    m = build_penalties(u)
    trace = train(zone_examples(routes, u), theta0, config, m)
    cfg = {"init": init, "epochs": config.epochs, "step": config.step, "step_c": config.step_c,
           "update": config.update, "sampling": config.sampling, "aggregate": config.aggregate,
           "seed": config.seed, "solver": config.solver.kind}
    return ZoneGraphModel(depot, trace.final, centers, m, cfg), trace


def fit_zone_models(routes_by_depot: Mapping[str, Sequence[RouteRecord]], config: TrainConfig = TrainConfig(),
                    init: str = "euclidean", workers: int | None = None) -> dict[str, ZoneGraphModel]:
    """Independent model per depot; results keyed in sorted depot order."""
    depots = sorted(routes_by_depot)

    def one(d):
        return fit_zone_model(routes_by_depot[d], config, init, d)[0]

    with ThreadPoolExecutor(workers) as pool:
        models = list(pool.map(one, depots))
    return dict(zip(depots, models))


# --------------------------------------------------------------------------
# steps 3 and 4: prediction


def predict_zone_sequence(model: ZoneGraphModel, zones_to_visit: Iterable[str], start_zone: str = STATION,
                          centers: Mapping[str, tuple[float, float]] | None = None,
                          choice: SolverChoice = EXACT) -> list[str]:
    """Cheapest zone cycle under theta + M, rotated to begin at ``start_zone``.

    Zones unknown to the model are added with Euclidean center distances (from
    ``centers``) as their weights.
    """
    visit = sorted(set(zones_to_visit) | {start_zone})
    if len(visit) < 2:
        raise ValueError("need at least one zone besides the start")
    known = set(model.universe.nodes)
    extra = [z for z in visit if z not in known]
    allc = dict(model.centers)
    for z in extra:
        if centers is None or z not in centers:
            raise ValueError(f"unseen zone {z} has no center")
        allc[z] = tuple(centers[z])
    nodes = model.universe.nodes + tuple(extra)
    u = NodeUniverse(nodes, tuple(tuple(allc[v]) for v in nodes))
    n0 = len(model.universe)
    w = _center_distances(nodes, allc)
    w[:n0, :n0] = model.theta.weights
    m = model.penalties.entries if not extra else build_penalties(u).entries
    x = solve_rtsp(w + m, visit, u, start_zone, choice)
    return binary_to_tour(x, start_zone)


def default_R(route: RouteRecord) -> float:
    return 10.0 * len(route.stop_ids) * float(route.times.max())


def penalized_times(zone_seq: Sequence[str], route: RouteRecord, R: float) -> np.ndarray:
    """Stop-level weights: c, c + R toward the next zone in the cycle, c + 2R otherwise."""
    seq = list(zone_seq)
    if not seq or seq[0] != STATION:
        seq = [STATION, *seq]
    if len(set(seq)) != len(seq):
        raise ValueError("zone sequence repeats a zone")
    if set(seq) != route.zones() | {STATION}:
        raise ValueError(f"route {route.route_id}: zone sequence does not match its stops' zones")
    nxt = {a: seq[(k + 1) % len(seq)] for k, a in enumerate(seq)}
    z = [route.zone_of(s) for s in route.stop_ids]
    n = len(z)
    pen = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            pen[i, j] = 0.0 if z[i] == z[j] else (R if nxt[z[i]] == z[j] else 2.0 * R)
    return route.times + pen


def expand_to_stops(zone_seq: Sequence[str], route: RouteRecord, R: float | None = None,
                    choice: SolverChoice = EXACT) -> list[str]:
    """Stop tour from the station following ``zone_seq`` (binding for large ``R``)."""
    R = default_R(route) if R is None else float(R)
    if R < 0:
        raise ValueError("R must be nonnegative")
    w = penalized_times(zone_seq, route, R)
    if len(route.stop_ids) == 2:
        return list(route.sequence)
    u = NodeUniverse(route.stop_ids)
    x = solve_rtsp(w, route.stop_ids, u, route.station, choice)
    return binary_to_tour(x, route.station)


def predict_route(model: ZoneGraphModel, route: RouteRecord, R: float | None = None,
                  choice: SolverChoice = EXACT) -> tuple[list[str], list[str]]:
    """Zone sequence (station first) and stop sequence for one route."""
    zseq = predict_zone_sequence(model, route.zones(), STATION, route.zone_centers(), choice)
    return zseq, expand_to_stops(zseq, route, R, choice)
