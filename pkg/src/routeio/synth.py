"""Synthetic signal-response datasets generated from hidden edge weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CostVector, InfeasibleError, NodeUniverse, Signal, SignalResponseExample
from .solvers import EXACT, SolverChoice, solve_fop


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for a synthetic dataset.

    ``hidden`` is ``euclidean`` (distances times a lognormal factor with
    sigma ``noise``; ``noise=0`` gives plain distances) or
    ``uniform-random`` (iid U(0, 1) per directed edge).  Node 0 is the depot
    for the VRP kinds.
    """

    kind: str = "rtsp"
    n_nodes: int = 12
    n_train: int = 50
    n_test: int = 50
    hidden: str = "euclidean"
    noise: float = 0.5
    seed: int = 0
    # inclusive range of required-set sizes; rtsp default n//2 .. n, the
    # VRP kinds count customers and default to all of them
    subset_min: int | None = None
    subset_max: int | None = None
    # scvrp; capacity None means demand_max * ceil(customers / vehicles)
    n_vehicles: int = 2
    capacity: float | None = None
    demand_max: int = 2
    # vrptw: windows [e, e + width], e ~ U(0, horizon)
    horizon: float = 2.0
    width_min: float = 0.5
    width_max: float = 1.5
    max_retries: int = 100

    def __post_init__(self):
        if self.kind not in ("rtsp", "scvrp", "vrptw"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("example counts must be >= 1")
        if self.hidden not in ("euclidean", "uniform-random"):
            raise ValueError(f"unknown hidden-weight generator {self.hidden!r}")
        if self.n_nodes < 3:
            raise ValueError("need at least 3 nodes")
        if self.kind == "scvrp" and self.n_nodes - 1 > 10:
            raise ValueError("scvrp generation is exact; at most 10 customers")
        if self.kind == "vrptw" and self.n_nodes - 1 > 8:
            raise ValueError("vrptw generation is exact; at most 8 customers")


@dataclass
class SyntheticData:
    universe: NodeUniverse
    train: list[SignalResponseExample]
    test: list[SignalResponseExample]


def euclidean_weights(universe: NodeUniverse) -> np.ndarray:
    xy = universe.coords_array()
    return np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=-1)


def _hidden(cfg: SynthConfig, universe: NodeUniverse, rng: np.random.Generator) -> CostVector:
    n = len(universe)
    if cfg.hidden == "uniform-random":
        return CostVector(universe, rng.random((n, n)))
    w = euclidean_weights(universe)
    if cfg.noise > 0:
        w = w * np.exp(rng.normal(0.0, cfg.noise, size=(n, n)))
    return CostVector(universe, w)


def _make_signal(cfg: SynthConfig, universe: NodeUniverse, rng, tt, base_windows) -> Signal:
    nodes = universe.nodes
    if cfg.kind == "rtsp":
        lo = cfg.subset_min or max(3, len(nodes) // 2)
        hi = min(cfg.subset_max or len(nodes), len(nodes))
        k = int(rng.integers(lo, hi + 1))
        req = sorted(rng.choice(len(nodes), size=k, replace=False).tolist())
        return Signal.rtsp([nodes[i] for i in req])
    depot, cust = nodes[0], list(nodes[1:])
    if cfg.subset_min is not None or cfg.subset_max is not None:
        lo = max(cfg.n_vehicles, cfg.subset_min or 1) if cfg.kind == "scvrp" else (cfg.subset_min or 1)
        hi = min(cfg.subset_max or len(cust), len(cust))
        k = int(rng.integers(lo, hi + 1))
        cust = [cust[i] for i in sorted(rng.choice(len(cust), size=k, replace=False).tolist())]
    if cfg.kind == "scvrp":
        dem = {v: float(rng.integers(1, cfg.demand_max + 1)) for v in cust}
        cap = cfg.capacity or cfg.demand_max * -(-(len(nodes) - 1) // cfg.n_vehicles)
        return Signal.scvrp(depot, dem, cap, cfg.n_vehicles)
    perm = rng.permutation(len(base_windows))
    windows = {v: base_windows[p] for v, p in zip(cust, perm)}
    return Signal.vrptw(depot, windows, tt, cfg.n_vehicles)


def generate_synthetic(cfg: SynthConfig, choice: SolverChoice = EXACT) -> tuple[SyntheticData, CostVector]:
    """Draw signals and answer each under the hidden weights.

    Responses come from ``choice`` (exact by default; local search for large
    R-TSP instances, where they are then only locally optimal).

    The hidden cost vector is returned separately and never stored in the
    examples.  Infeasible draws (capacity or windows) are redrawn up to
    ``max_retries`` times per example.
    """
    if cfg.kind == "rtsp" and choice.kind == "exact-dp" and (cfg.subset_max or cfg.n_nodes) > choice.exact_cutoff:
        raise ValueError(f"exact rtsp generation handles at most {choice.exact_cutoff} required nodes")
    rng = np.random.default_rng(cfg.seed)
    coords = rng.random((cfg.n_nodes, 2))
    names = ["depot" if (i == 0 and cfg.kind != "rtsp") else f"n{i}" for i in range(cfg.n_nodes)]
    universe = NodeUniverse(tuple(names), tuple(map(tuple, coords)))
    hidden = _hidden(cfg, universe, rng)
    tt = euclidean_weights(universe) if cfg.kind == "vrptw" else None
    base_windows = None
    if cfg.kind == "vrptw":
        starts = rng.uniform(0.0, cfg.horizon, size=cfg.n_nodes - 1)
        widths = rng.uniform(cfg.width_min, cfg.width_max, size=cfg.n_nodes - 1)
        base_windows = [(float(e), float(e + w)) for e, w in zip(starts, widths)]

    def draw():
        for _ in range(cfg.max_retries):
            sig = _make_signal(cfg, universe, rng, tt, base_windows)
            try:
                x = solve_fop(hidden.weights, sig, universe, choice)
            except InfeasibleError:
                continue
            return SignalResponseExample(sig, x)
        raise InfeasibleError(f"no feasible instance after {cfg.max_retries} draws")

    train = [draw() for _ in range(cfg.n_train)]
    test = [draw() for _ in range(cfg.n_test)]
    return SyntheticData(universe, train, test), hidden


def fig2_config(seed: int = 3) -> SynthConfig:
    """Five unit-demand customers, two vehicles of capacity three, Euclidean weights."""
    return SynthConfig(kind="scvrp", n_nodes=6, n_train=1, n_test=1, hidden="euclidean",
                       noise=0.0, seed=seed, n_vehicles=2, capacity=3.0, demand_max=1)


def route_edge_error(theta: CostVector, examples, m=None, choice: SolverChoice = EXACT) -> float:
    """Mean of ||x_model - x_true||_1 / |x_true| over examples."""
    from .solvers import predict

    errs = [predict(theta, ex.signal, m, choice).l1(ex.response) / len(ex.response) for ex in examples]
    return float(np.mean(errs))
