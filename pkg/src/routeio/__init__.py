"""Inverse optimization of routing cost vectors from observed routes."""

from ._backend import AVAILABLE as BACKENDS, get_backend, set_backend
from .core import (
    CostVector,
    InfeasibleError,
    NodeUniverse,
    PenaltyMatrix,
    RouteBinary,
    RouteEncodingError,
    Signal,
    SignalResponseExample,
    binary_to_routes,
    binary_to_tour,
    check_feasible,
    routes_to_binary,
    tour_to_binary,
)
from .learn import TrainConfig, TrainTrace, aggregate, train, update_step
from .loss import asl_bruteforce, eval_loss, subgradient, total_loss
from .solvers import EXACT, LOCAL, SolverChoice, SolverLimitError, predict, solve_afop, solve_fop, solve_rtsp

__version__ = "0.1.0"

__all__ = [
    "BACKENDS", "get_backend", "set_backend",
    "CostVector", "InfeasibleError", "NodeUniverse", "PenaltyMatrix", "RouteBinary", "RouteEncodingError",
    "Signal", "SignalResponseExample", "binary_to_routes", "binary_to_tour", "check_feasible",
    "routes_to_binary", "tour_to_binary",
    "TrainConfig", "TrainTrace", "aggregate", "train", "update_step",
    "asl_bruteforce", "eval_loss", "subgradient", "total_loss",
    "EXACT", "LOCAL", "SolverChoice", "SolverLimitError", "predict", "solve_afop", "solve_fop", "solve_rtsp",
]
