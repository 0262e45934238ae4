"""Reshuffled stochastic subgradient training of nonnegative cost vectors."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import CostVector, PenaltyMatrix, SignalResponseExample
from .loss import loss_from_minimizer, subgradient_from_minimizer
from .solvers import EXACT, SolverChoice, solve_afop

UNDERFLOW_FLOOR = 1e-300

_UPDATE_ALIASES = {"exp": "exponentiated", "exponentiated": "exponentiated",
                   "std": "standard", "standard": "standard"}
STEP_SCHEDULES = ("const", "inv_t", "inv_sqrt_t")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; defaults are standard updates, T=5, eta_t = 0.0005/t."""

    epochs: int = 5
    step: str = "inv_t"
    step_c: float = 0.0005
    update: str = "standard"
    sampling: str = "reshuffled"
    aggregate: str = "last"
    seed: int = 0
    solver: SolverChoice = EXACT
    early_stop: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.step not in STEP_SCHEDULES:
            raise ValueError(f"step must be one of {STEP_SCHEDULES}")
        if not self.step_c > 0:
            raise ValueError("step constant must be positive")
        if self.update not in _UPDATE_ALIASES:
            raise ValueError(f"unknown update mode {self.update!r}")
        object.__setattr__(self, "update", _UPDATE_ALIASES[self.update])
        if self.sampling not in ("reshuffled", "uniform"):
            raise ValueError(f"unknown sampling {self.sampling!r}")
        if self.aggregate not in ("last", "mean", "weighted"):
            raise ValueError(f"unknown aggregation {self.aggregate!r}")

    def eta(self, t: int) -> float:
        if self.step == "const":
            return self.step_c
        if self.step == "inv_t":
            return self.step_c / t
        return self.step_c / math.sqrt(t)


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float | None
    mean_subgrad_l1: float | None
    wall_time: float
    metric: float | None = None


@dataclass
class TrainTrace:
    thetas: list[CostVector]
    records: list[EpochRecord]
    final: CostVector
    init_metric: float | None = None
    visits: list[np.ndarray] = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.thetas)


def update_step(theta: CostVector, g: np.ndarray, eta: float, mode: str = "standard") -> CostVector:
    """One projected (standard) or multiplicative (exponentiated) step."""
    if not eta > 0:
        raise ValueError("step size must be positive")
    mode = _UPDATE_ALIASES[mode]
    if mode == "exponentiated":
        w = theta.weights * np.exp(-eta * g)
        w[w < UNDERFLOW_FLOOR] = 0.0
    else:
        w = np.maximum(0.0, theta.weights - eta * g)
    return CostVector(theta.universe, w)


def aggregate(thetas: Sequence[CostVector], mode: str = "last") -> CostVector:
    """Last iterate, plain average, or the 2/(T(T+1)) sum t*theta_t average."""
    if not thetas:
        raise ValueError("trace is empty")
    u = thetas[0].universe
    if mode == "last":
        return thetas[-1]
    T = len(thetas)
    if mode == "mean":
        return CostVector(u, sum(th.weights for th in thetas) / T)
    if mode == "weighted":
        acc = sum(t * th.weights for t, th in enumerate(thetas, start=1))
        return CostVector(u, 2.0 * acc / (T * (T + 1)))
    raise ValueError(f"unknown aggregation {mode!r}")


def epoch_order(n: int, seed: int, epoch: int, sampling: str) -> np.ndarray:
    """Visit order of one epoch from a counter-based RNG keyed on (seed, epoch)."""
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, epoch], dtype=np.uint64)))
    if sampling == "reshuffled":
        return gen.permutation(n)
    return gen.integers(0, n, size=n)


def train(dataset: Sequence[SignalResponseExample], init: CostVector,
          config: TrainConfig = TrainConfig(), m: PenaltyMatrix | None = None,
          validate: Callable[[CostVector], float] | None = None) -> TrainTrace:
    """Run the epoch loop; one augmented-problem solve per visited example.

    ``validate`` (if given) is evaluated on the initial point and after
    every epoch; with ``config.early_stop`` set, training stops once two
    consecutive metrics differ by less than that threshold.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    for ex in dataset:
        if ex.universe != init.universe:
            raise ValueError("example and cost vector universes differ")
    theta = init
    N = len(dataset)
    thetas, records, visits = [], [], []
    prev_metric = init_metric = validate(theta) if validate else None
    for t in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        eta = config.eta(t)
        order = epoch_order(N, config.seed, t, config.sampling)
        losses, norms = [], []
        for i in order:
            ex = dataset[i]
            try:
                x_star = solve_afop(theta, ex, m, config.solver)
            except Exception as exc:
                raise RuntimeError(f"solver failed at epoch {t}, example {i}: {exc}") from exc
            losses.append(loss_from_minimizer(theta, ex, x_star, m))
            g = subgradient_from_minimizer(ex.response, x_star)
            norms.append(float(np.abs(g).sum()))
            if norms[-1]:
                theta = update_step(theta, g, eta, config.update)
        thetas.append(theta)
        visits.append(np.bincount(order, minlength=N))
        metric = validate(theta) if validate else None
        records.append(EpochRecord(t, float(np.mean(losses)), float(np.mean(norms)),
                                   time.perf_counter() - t0, metric))
        if (config.early_stop is not None and metric is not None and prev_metric is not None
                and abs(metric - prev_metric) < config.early_stop):
            break
        prev_metric = metric
    return TrainTrace(thetas, records, aggregate(thetas, config.aggregate), init_metric, visits)


def write_trace(trace: TrainTrace, path) -> None:
    """Newline-delimited JSON, one record per epoch (epoch 0 = initial point)."""
    with open(path, "w") as fh:
        if trace.init_metric is not None:
            fh.write(json.dumps({"epoch": 0, "mean_loss": None, "mean_subgrad_l1": None,
                                 "wall_time": 0.0, "metric": trace.init_metric}) + "\n")
        for rec in trace.records:
            fh.write(json.dumps(asdict(rec)) + "\n")


def read_trace(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
