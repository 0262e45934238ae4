"""Tailored inverse-optimization loss and its subgradient.

For an example (s, xhat) and cost vector theta with affine term <M, x>,

    loss = <theta + M, xhat> - min_x { <theta + 2 xhat - 1 + M, x> - <1, xhat> }

over the feasible set of s.  For binary x this equals the augmented
suboptimality loss with l1 distance (see :func:`asl_bruteforce`), and
``xhat - x*`` is a subgradient in theta, where x* attains the inner minimum.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import CostVector, PenaltyMatrix, RouteBinary, SignalResponseExample, augment_weights
from .solvers import EXACT, SolverChoice, SolverLimitError, enumerate_solutions, solve_afop

ASL_ORACLE_LIMIT = 8


@dataclass(frozen=True)
class LossValue:
    value: float
    minimizer: RouteBinary


def loss_from_minimizer(theta: CostVector, example: SignalResponseExample, x_star: RouteBinary,
                        m: PenaltyMatrix | None = None) -> float:
    xhat = example.response
    w = theta.weights if m is None else theta.weights + m.entries
    inner = x_star.cost(augment_weights(theta, xhat, m)) - len(xhat)
    return xhat.cost(w) - inner


def eval_loss(theta: CostVector, example: SignalResponseExample, m: PenaltyMatrix | None = None,
              choice: SolverChoice = EXACT) -> LossValue:
    """Loss value together with the augmented-problem solution that produced it."""
    x_star = solve_afop(theta, example, m, choice)
    return LossValue(loss_from_minimizer(theta, example, x_star, m), x_star)


def subgradient_from_minimizer(xhat: RouteBinary, x_star: RouteBinary) -> np.ndarray:
    return xhat.matrix - x_star.matrix


def subgradient(theta: CostVector, example: SignalResponseExample, m: PenaltyMatrix | None = None,
                choice: SolverChoice = EXACT) -> np.ndarray:
    """``xhat - x*`` as an edge-indexed array with entries in {-1, 0, 1}."""
    x_star = solve_afop(theta, example, m, choice)
    return subgradient_from_minimizer(example.response, x_star)


def total_loss(theta: CostVector, dataset: Sequence[SignalResponseExample],
               m: PenaltyMatrix | None = None, choice: SolverChoice = EXACT,
               workers: int | None = None) -> float:
    """Mean loss over the dataset; ``workers`` > 1 solves examples concurrently."""
    if not dataset:
        raise ValueError("dataset is empty")
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(lambda ex: eval_loss(theta, ex, m, choice).value, dataset))
    else:
        values = [eval_loss(theta, ex, m, choice).value for ex in dataset]
    return float(sum(values) / len(values))


def asl_bruteforce(theta: CostVector, example: SignalResponseExample,
                   m: PenaltyMatrix | None = None) -> float:
    """Augmented suboptimality loss with l1 distance, by full enumeration.

    ``<theta + M, xhat> - min_x { <theta + M, x> - ||xhat - x||_1 }``.  Only
    for test-sized signals (at most 8 required nodes / customers).
    """
    sig = example.signal
    size = len(sig.required_nodes) if sig.kind == "rtsp" else len(sig.customers)
    if size > ASL_ORACLE_LIMIT:
        raise SolverLimitError(f"brute-force oracle limited to {ASL_ORACLE_LIMIT} nodes")
    xhat = example.response
    w = theta.weights if m is None else theta.weights + m.entries
    inner = min(x.cost(w) - xhat.l1(x) for x in enumerate_solutions(sig, theta.universe, ASL_ORACLE_LIMIT))
    return xhat.cost(w) - inner
