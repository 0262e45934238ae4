"""Route similarity: sequence deviation, edit distance with real penalty, and the composite score.

Stop sequences are compared without the station, which serves as the gap
element of the edit-distance alignment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._backend import get_backend


@dataclass(frozen=True, eq=False)
class TravelTimes:
    """Square travel-time table over named stops."""

    stop_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        ids = tuple(self.stop_ids)
        v = np.array(self.values, dtype=float)
        if v.shape != (len(ids), len(ids)):
            raise ValueError("travel-time table must be square over its stops")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("travel times must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "stop_ids", ids)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_index", {s: k for k, s in enumerate(ids)})

    def index(self, stop: str) -> int:
        try:
            return self._index[stop]
        except KeyError:
            raise KeyError(f"no travel times for stop {stop!r}") from None


@dataclass(frozen=True)
class ScoreReport:
    sd: float
    erp_norm: float
    erp_edits: int
    score: float
    zone_error_count: int = 0
    zone_seq_len: int = 0

    @property
    def zone_error_pct(self) -> float:
        return 100.0 * self.zone_error_count / self.zone_seq_len if self.zone_seq_len else 0.0


def _strip(seq: Sequence[str], station: str | None) -> list[str]:
    return [s for s in seq if s != station]


def sequence_deviation(actual: Sequence[str], proposed: Sequence[str], station: str | None = None) -> float:
    """Mean extra displacement between consecutive proposed stops, measured in the actual order.

    ``(2 / (n(n-1))) * sum_i (|pos(B_i) - pos(B_{i-1})| - 1)`` over the n
    non-station stops.  Zero iff the orders agree; zero for n < 2.
    """
    A, B = _strip(actual, station), _strip(proposed, station)
    if sorted(A) != sorted(B) or len(set(A)) != len(A):
        raise ValueError("sequences are not permutations of the same stops")
    n = len(A)
    if n < 2:
        return 0.0
    pos = {s: k for k, s in enumerate(A)}
    p = np.array([pos[s] for s in B])
    return float(2.0 * np.sum(np.abs(np.diff(p)) - 1) / (n * (n - 1)))


def normalize_travel_times(times: TravelTimes) -> TravelTimes:
    """Divide by the mean off-diagonal entry."""
    v = times.values.copy()
    n = v.shape[0]
    off = v[~np.eye(n, dtype=bool)]
    if off.size == 0 or off.mean() == 0:
        raise ValueError("travel times are all zero")
    v = v / off.mean()
    np.fill_diagonal(v, 0.0)
    return TravelTimes(times.stop_ids, v)


def erp(actual: Sequence[str], proposed: Sequence[str], norm_times: TravelTimes,
        gap: str) -> tuple[float, int]:
    """Edit distance with real penalty and its edit count.

    Substituting ``a`` by ``b`` costs ``t(a, b)``; inserting or deleting ``x``
    costs ``t(x, gap)``.  Matches of identical stops are not counted as edits.
    """
    ia = [norm_times.index(s) for s in actual]
    ib = [norm_times.index(s) for s in proposed]
    g = norm_times.index(gap)
    t = norm_times.values
    match = np.ascontiguousarray(t[np.ix_(ia, ib)]) if ia and ib else np.zeros((len(ia), len(ib)))
    same = (np.array(ia)[:, None] == np.array(ib)[None, :]).astype(np.uint8) if ia and ib \
        else np.zeros((len(ia), len(ib)), dtype=np.uint8)
    gap_a = np.ascontiguousarray(t[ia, g]) if ia else np.zeros(0)
    gap_b = np.ascontiguousarray(t[ib, g]) if ib else np.zeros(0)
    scale = max(1.0, float(t.max()) if t.size else 1.0) * (len(ia) + len(ib) + 1)
    return get_backend().erp(match, same, gap_a, gap_b, 1e-12 * scale)


def challenge_score(actual: Sequence[str], proposed: Sequence[str], times: TravelTimes,
                    station: str | None = None) -> ScoreReport:
    """``sd * erp / edits``, or 0 when the alignment needs no edits.

    ``station`` defaults to the first actual stop; it is excluded from both
    sequences and used as the gap element.
    """
    station = actual[0] if station is None else station
    sd = sequence_deviation(actual, proposed, station)
    value, edits = erp(_strip(actual, station), _strip(proposed, station),
                       normalize_travel_times(times), station)
    score = sd * value / edits if edits > 0 else 0.0
    return ScoreReport(sd, float(value), int(edits), float(score))


def zone_prediction_error(predicted: Sequence[str], actual: Sequence[str]) -> tuple[int, int]:
    """Positions where the two zone sequences disagree, and the actual length."""
    if len(predicted) != len(actual) or set(predicted) != set(actual):
        raise ValueError("zone sequences cover different zones")
    return sum(a != b for a, b in zip(predicted, actual)), len(actual)


def zone_error_percentage(counts: Sequence[tuple[int, int]]) -> float:
    """``100 * sum(errors) / sum(lengths)``."""
    total = sum(L for _, L in counts)
    return 100.0 * sum(e for e, _ in counts) / total if total else 0.0


def score_routes(actual: Mapping[str, Sequence[str]], proposed: Mapping[str, Sequence[str]],
                 times: Mapping[str, TravelTimes], zone_of: Mapping[str, Mapping[str, str]] | None = None
                 ) -> dict[str, ScoreReport]:
    """Score every route of ``actual`` (sorted by id); zone error when ``zone_of`` is given."""
    from .zones import collapse_runs

    out = {}
    for rid in sorted(actual):
        if rid not in proposed:
            raise KeyError(f"no proposed sequence for route {rid}")
        A, B = list(actual[rid]), list(proposed[rid])
        rep = challenge_score(A, B, times[rid])
        if zone_of is not None:
            z = zone_of[rid]
            za = collapse_runs([z[s] for s in A[1:]])
            zb = collapse_runs([z[s] for s in B if s != A[0]])
            e, L = zone_prediction_error(zb, za)
            rep = ScoreReport(rep.sd, rep.erp_norm, rep.erp_edits, rep.score, e, L)
        out[rid] = rep
    return out
