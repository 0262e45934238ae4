"""Dataset ingestion, model persistence and the bundled route fixture.

A dataset directory holds three JSON files:

``routes.json``
    route_id -> {"station_code", "stops": stop_id -> {"lat", "lng", "zone_id", "type"}}
``travel_times.json``
    route_id -> from_stop -> to_stop -> seconds
``sequences.json``
    route_id -> stop_id -> 0-based position in the driven order

``type`` is ``"Station"`` for the depot stop and anything else (typically
``"Dropoff"``) for deliveries.  Missing or malformed zone ids are imputed
from the nearest zone center of the same route.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import CostVector, NodeUniverse, RouteBinary, Signal, SignalResponseExample
from .zones import (
    STATION,
    RouteRecord,
    Stop,
    ZoneGraphModel,
    assign_missing_zone,
    build_penalties,
    expand_to_stops,
    is_zone_id,
    predict_zone_sequence,
)

log = logging.getLogger(__name__)

ROUTES_FILE = "routes.json"
TIMES_FILE = "travel_times.json"
SEQUENCES_FILE = "sequences.json"

MODEL_FORMAT = "routeio-model"
MODEL_VERSION = 1
EXAMPLES_FORMAT = "routeio-examples"
_EXAMPLE_KEYS = {"signal", "response"}
_FILE_KEYS = {"format", "version", "nodes", "coordinates", "examples"}


class SchemaError(ValueError):
    """A data file is missing a required field or has the wrong shape."""


@dataclass
class DatasetBundle:
    routes: dict[str, list[RouteRecord]]
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return sum(len(v) for v in self.routes.values())

    def all_routes(self) -> list[RouteRecord]:
        """Every route, ordered by route id."""
        return sorted((r for rs in self.routes.values() for r in rs), key=lambda r: r.route_id)

    def route(self, route_id: str) -> RouteRecord:
        for rs in self.routes.values():
            for r in rs:
                if r.route_id == route_id:
                    return r
        raise KeyError(route_id)


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be an object")
    return data


def _need(d, key, where):
    if not isinstance(d, dict) or key not in d:
        raise SchemaError(f"{where}: missing field {key!r}")
    return d[key]


def _build_route(rid, rdata, tdata, sdata, where) -> RouteRecord:
    station_code = _need(rdata, "station_code", where)
    raw = _need(rdata, "stops", where)
    stops = {}
    for sid, s in raw.items():
        w = f"{where} stop {sid}"
        lat, lng = float(_need(s, "lat", w)), float(_need(s, "lng", w))
        kind = "station" if s.get("type") == "Station" else "delivery"
        zone = s.get("zone_id")
        stops[sid] = Stop(sid, lat, lng, zone if is_zone_id(zone) else None, kind)
    known = [s for s in stops.values() if s.kind == "delivery" and s.zone is not None]
    if any(s.kind == "delivery" and s.zone is None for s in stops.values()):
        if not known:
            raise ValueError("no stop with a valid zone to impute from")
        acc: dict[str, list] = {}
        for s in known:
            acc.setdefault(s.zone, []).append((s.lat, s.lng))
        centers = {z: tuple(np.mean(v, axis=0)) for z, v in acc.items()}
        stops = {sid: (Stop(sid, s.lat, s.lng, assign_missing_zone(s, centers), s.kind)
                       if s.kind == "delivery" and s.zone is None else s)
                 for sid, s in stops.items()}
    ids = tuple(sorted(stops))
    times = np.zeros((len(ids), len(ids)))
    for i, a in enumerate(ids):
        row = tdata.get(a)
        if row is None:
            raise ValueError(f"no travel times from stop {a}")
        for j, b in enumerate(ids):
            if i != j:
                if b not in row:
                    raise ValueError(f"no travel time {a} -> {b}")
                times[i, j] = float(row[b])
    unknown = [s for s in sdata if s not in stops]
    if unknown:
        raise ValueError(f"sequence references unknown stops {unknown}")
    pos = sorted(sdata.items(), key=lambda kv: kv[1])
    if sorted(int(v) for _, v in pos) != list(range(len(stops))):
        raise ValueError("sequence positions are not 0..n-1")
    return RouteRecord(rid, station_code, tuple(s for s, _ in pos), stops, ids, times)


def load_dataset(route_path, times_path, sequences_path) -> DatasetBundle:
    """Read the three files; bad routes are skipped and tallied in ``provenance``."""
    routes = _read_json(route_path)
    times = _read_json(times_path)
    seqs = _read_json(sequences_path)
    grouped: dict[str, list[RouteRecord]] = {}
    skipped: Counter = Counter()
    imputed = 0
    for rid in sorted(routes):
        where = f"{route_path}: route {rid}"
        if rid not in times or rid not in seqs:
            skipped["missing travel times or sequence"] += 1
            log.warning("%s: skipped, no travel times or sequence", where)
            continue
        try:
            r = _build_route(rid, routes[rid], times[rid], seqs[rid], where)
        except SchemaError:
            raise
        except ValueError as exc:
            skipped[str(exc).split(" [")[0]] += 1
            log.warning("%s: skipped, %s", where, exc)
            continue
        raw = routes[rid]["stops"]
        imputed += sum(1 for sid, s in raw.items() if s.get("type") != "Station" and not is_zone_id(s.get("zone_id")))
        grouped.setdefault(r.depot, []).append(r)
    prov = {"routes_file": str(route_path), "times_file": str(times_path),
            "sequences_file": str(sequences_path), "n_routes": sum(len(v) for v in grouped.values()),
            "n_skipped": sum(skipped.values()), "skipped": dict(skipped), "n_imputed_zones": imputed}
    return DatasetBundle(grouped, prov)


def load_dataset_dir(path) -> DatasetBundle:
    p = Path(path)
    return load_dataset(p / ROUTES_FILE, p / TIMES_FILE, p / SEQUENCES_FILE)


def dataset_to_json(bundle: DatasetBundle) -> tuple[dict, dict, dict]:
    routes, times, seqs = {}, {}, {}
    for r in bundle.all_routes():
        routes[r.route_id] = {"station_code": r.depot, "stops": {
            sid: {"lat": s.lat, "lng": s.lng, "zone_id": s.zone,
                  "type": "Station" if s.kind == "station" else "Dropoff"}
            for sid, s in sorted(r.stops.items())}}
        times[r.route_id] = {a: {b: float(r.times[i, j]) for j, b in enumerate(r.stop_ids)}
                             for i, a in enumerate(r.stop_ids)}
        seqs[r.route_id] = {s: k for k, s in enumerate(r.sequence)}
    return routes, times, seqs


def save_dataset(bundle: DatasetBundle, path) -> None:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    for name, obj in zip((ROUTES_FILE, TIMES_FILE, SEQUENCES_FILE), dataset_to_json(bundle)):
        with open(p / name, "w") as fh:
            json.dump(obj, fh, indent=1, sort_keys=True)


def fraction_subset(bundle: DatasetBundle, fraction: float, seed: int = 0) -> DatasetBundle:
    """Seeded random share of the routes of every depot (at least one each)."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    out = {}
    for k, d in enumerate(sorted(bundle.routes)):
        rs = bundle.routes[d]
        rng = np.random.default_rng([seed, k])
        n = max(1, int(round(fraction * len(rs))))
        pick = sorted(rng.choice(len(rs), size=n, replace=False).tolist())
        out[d] = [rs[i] for i in pick]
    prov = dict(bundle.provenance, fraction=fraction, fraction_seed=seed)
    return DatasetBundle(out, prov)


# --------------------------------------------------------------------------
# sequences


def write_sequences(seqs: Mapping[str, Sequence[str]], path) -> None:
    with open(path, "w") as fh:
        json.dump({rid: {s: k for k, s in enumerate(seq)} for rid, seq in sorted(seqs.items())},
                  fh, indent=1, sort_keys=True)


def read_sequences(path) -> dict[str, list[str]]:
    data = _read_json(path)
    return {rid: [s for s, _ in sorted(d.items(), key=lambda kv: kv[1])] for rid, d in data.items()}


# --------------------------------------------------------------------------
# models


def _universe_json(u: NodeUniverse) -> dict:
    return {"nodes": list(u.nodes),
            "coordinates": [list(c) for c in u.coordinates] if u.coordinates is not None else None}


def _cost_vector_json(theta: CostVector) -> dict:
    return {"kind": "cost-vector", **_universe_json(theta.universe), "weights": theta.flat().tolist()}


def _model_json(m: ZoneGraphModel) -> dict:
    return {"kind": "zone-graph", "depot": m.depot, **_universe_json(m.universe),
            "weights": m.theta.flat().tolist(),
            "centers": {z: list(c) for z, c in sorted(m.centers.items())}, "config": m.config}


def _remap(nodes: Sequence[str], weights: np.ndarray, universe: NodeUniverse | None) -> tuple[NodeUniverse | None, np.ndarray]:
    if universe is None:
        return None, weights
    if len(set(nodes)) != len(nodes) or set(nodes) != set(universe.nodes):
        raise ValueError("stored node list conflicts with the given universe")
    perm = [nodes.index(v) for v in universe.nodes]
    return universe, weights[np.ix_(perm, perm)]


def _cost_vector_from(d: dict, universe: NodeUniverse | None) -> CostVector:
    nodes = list(_need(d, "nodes", "model"))
    coords = d.get("coordinates")
    u0 = NodeUniverse(tuple(nodes), tuple(map(tuple, coords)) if coords else None)
    n = len(nodes)
    flat = np.asarray(_need(d, "weights", "model"), dtype=float)
    if flat.shape != (n * (n - 1),):
        raise SchemaError(f"model: expected {n * (n - 1)} weights, found {flat.size}")
    if np.any(flat < 0):
        raise ValueError("model file contains negative weights")
    w = np.zeros((n, n))
    w[~np.eye(n, dtype=bool)] = flat
    u, w = _remap(nodes, w, universe)
    return CostVector(u or u0, w)


def _model_from(d: dict, universe: NodeUniverse | None) -> ZoneGraphModel | CostVector:
    kind = _need(d, "kind", "model")
    theta = _cost_vector_from(d, universe)
    if kind == "cost-vector":
        return theta
    if kind != "zone-graph":
        raise SchemaError(f"unknown model kind {kind!r}")
    centers = {z: tuple(c) for z, c in _need(d, "centers", "model").items()}
    return ZoneGraphModel(_need(d, "depot", "model"), theta, centers, build_penalties(theta.universe),
                          d.get("config", {}))


def _check_header(data: dict, fmt: str):
    if data.get("format") != fmt:
        raise SchemaError(f"not a {fmt} file")
    if data.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported file version {data.get('version')!r} (expected {MODEL_VERSION})")


def save_model(model: ZoneGraphModel | CostVector, path) -> None:
    body = _model_json(model) if isinstance(model, ZoneGraphModel) else _cost_vector_json(model)
    with open(path, "w") as fh:
        json.dump({"format": MODEL_FORMAT, "version": MODEL_VERSION, "models": [body]}, fh, indent=1)


def load_model(path, universe: NodeUniverse | None = None) -> ZoneGraphModel | CostVector:
    """Restore one model; with ``universe`` the weights are reordered to its node order."""
    models = _load_models_raw(path)
    if len(models) != 1:
        raise SchemaError(f"{path}: holds {len(models)} models; use load_models")
    return _model_from(models[0], universe)


def save_models(models: Mapping[str, ZoneGraphModel], path) -> None:
    with open(path, "w") as fh:
        json.dump({"format": MODEL_FORMAT, "version": MODEL_VERSION,
                   "models": [_model_json(models[d]) for d in sorted(models)]}, fh, indent=1)


def _load_models_raw(path) -> list[dict]:
    data = _read_json(path)
    _check_header(data, MODEL_FORMAT)
    return list(_need(data, "models", str(path)))


def load_models(path) -> dict[str, ZoneGraphModel]:
    out = {}
    for d in _load_models_raw(path):
        m = _model_from(d, None)
        if not isinstance(m, ZoneGraphModel):
            raise SchemaError(f"{path}: expected zone-graph models")
        out[m.depot] = m
    return out


# --------------------------------------------------------------------------
# signal-response examples


def _signal_json(s: Signal) -> dict:
    d = {"kind": s.kind, "required_nodes": list(s.required_nodes), "start_node": s.start_node}
    if s.kind == "scvrp":
        d.update(demands=dict(s.demands), capacity=s.capacity, n_vehicles=s.n_vehicles)
    if s.kind == "vrptw":
        d.update(time_windows={k: list(v) for k, v in s.time_windows.items()},
                 service_times=dict(s.service_times), n_vehicles=s.n_vehicles,
                 travel_times=np.asarray(s.travel_times).tolist())
    return d


def _signal_from(d: dict) -> Signal:
    kind = d["kind"]
    if kind == "rtsp":
        return Signal.rtsp(d["required_nodes"], d.get("start_node"))
    if kind == "scvrp":
        return Signal.scvrp(d["start_node"], d["demands"], d["capacity"], d["n_vehicles"])
    if kind == "vrptw":
        tw = {k: tuple(v) for k, v in d["time_windows"].items()}
        depot_window = tw.pop(d["start_node"], None)
        kw = {"depot_window": depot_window} if depot_window is not None else {}
        return Signal.vrptw(d["start_node"], tw, np.asarray(d["travel_times"], dtype=float),
                            d["n_vehicles"], d.get("service_times") or None, **kw)
    raise SchemaError(f"unknown signal kind {kind!r}")


def save_examples(examples: Sequence[SignalResponseExample], path) -> None:
    """Signals and responses only; the file schema has no slot for hidden weights."""
    if not examples:
        raise ValueError("no examples")
    u = examples[0].universe
    doc = {"format": EXAMPLES_FORMAT, "version": MODEL_VERSION, **_universe_json(u),
           "examples": [{"signal": _signal_json(ex.signal),
                         "response": [list(e) for e in ex.response.named_edges()]} for ex in examples]}
    _validate_examples_doc(doc)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def _validate_examples_doc(doc: dict):
    extra = set(doc) - _FILE_KEYS
    if extra:
        raise SchemaError(f"unexpected top-level fields {sorted(extra)}")
    for ex in doc["examples"]:
        if set(ex) != _EXAMPLE_KEYS:
            raise SchemaError(f"example fields must be exactly {sorted(_EXAMPLE_KEYS)}")


def load_examples(path) -> list[SignalResponseExample]:
    doc = _read_json(path)
    _check_header(doc, EXAMPLES_FORMAT)
    _validate_examples_doc(doc)
    coords = doc.get("coordinates")
    u = NodeUniverse(tuple(doc["nodes"]), tuple(map(tuple, coords)) if coords else None)
    return [SignalResponseExample(_signal_from(ex["signal"]),
                                  RouteBinary.from_named(u, [tuple(e) for e in ex["response"]]))
            for ex in doc["examples"]]


# --------------------------------------------------------------------------
# bundled fixture


def make_fixture(n_routes: int = 10, seed: int = 0, depot: str = "DXY1", zones_per_route: tuple[int, int] = (4, 6),
                 stops_per_zone: tuple[int, int] = (1, 2), noise: float = 0.3
                 ) -> tuple[DatasetBundle, ZoneGraphModel, dict[str, list[str]]]:
    """Routes whose driven order follows a planted zone-level model.

    Zones ``A-x.yZ`` sit on a grid of 0.01 degree cells; the planted weights
    are center distances times a lognormal factor.  Each route's zone order
    is the planted model's prediction and its stop order the penalized
    expansion of that zone order.  Returns the bundle, the planted model and
    the planted zone sequences (station first).
    """
    rng = np.random.default_rng(seed)
    base = (47.60, -122.33)
    zone_ids, centers = [], {}
    for x in (1, 2):
        for y in (1, 2, 3):
            for zi, Z in enumerate("AB"):
                z = f"A-{x}.{y}{Z}"
                zone_ids.append(z)
                centers[z] = (base[0] + 0.01 * (2 * (x - 1) + zi), base[1] + 0.01 * y)
    centers[STATION] = (base[0] - 0.02, base[1])
    nodes = (STATION, *sorted(zone_ids))
    u = NodeUniverse(nodes, tuple(centers[v] for v in nodes))
    xy = u.coords_array()
    w = np.linalg.norm(xy[:, None] - xy[None, :], axis=-1) * np.exp(rng.normal(0, noise, (len(u), len(u))))
    planted = ZoneGraphModel(depot, CostVector(u, w), dict(centers))
    routes, zseqs = [], {}
    for k in range(n_routes):
        rid = f"R{k:03d}"
        nz = int(rng.integers(zones_per_route[0], zones_per_route[1] + 1))
        zs = sorted(rng.choice(zone_ids, size=nz, replace=False).tolist())
        stops = {f"{rid}-S": Stop(f"{rid}-S", *centers[STATION], None, "station")}
        for z in zs:
            for q in range(int(rng.integers(stops_per_zone[0], stops_per_zone[1] + 1))):
                sid = f"{rid}-{z}-{q}"
                lat, lng = np.asarray(centers[z]) + rng.normal(0, 0.002, 2)
                stops[sid] = Stop(sid, float(lat), float(lng), z)
        ids = tuple(sorted(stops))
        p = np.array([[stops[s].lat, stops[s].lng] for s in ids])
        secs = np.linalg.norm(p[:, None] - p[None, :], axis=-1) * 111_000 / 8.0
        secs = np.round(secs * rng.uniform(1.0, 1.2, secs.shape), 1)
        np.fill_diagonal(secs, 0.0)
        draft = RouteRecord(rid, depot, ids[ids.index(f"{rid}-S"):] + ids[:ids.index(f"{rid}-S")],
                            stops, ids, secs)
        zseq = predict_zone_sequence(planted, zs, STATION)
        seq = expand_to_stops(zseq, draft)
        routes.append(RouteRecord(rid, depot, tuple(seq), stops, ids, secs))
        zseqs[rid] = zseq
    prov = {"generator": "make_fixture", "seed": seed, "n_routes": n_routes}
    return DatasetBundle({depot: routes}, prov), planted, zseqs
