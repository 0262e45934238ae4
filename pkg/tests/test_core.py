import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from routeio.core import (
    CostVector,
    InfeasibleError,
    NodeUniverse,
    PenaltyMatrix,
    RouteBinary,
    RouteEncodingError,
    Signal,
    SignalResponseExample,
    augment_weights,
    binary_to_routes,
    binary_to_tour,
    check_feasible,
    is_feasible,
    routes_to_binary,
    tour_to_binary,
)

U4 = NodeUniverse(("A", "B", "C", "D"))


def test_universe_rejects_duplicates():
    with pytest.raises(ValueError):
        NodeUniverse(("A", "A"))


def test_universe_index():
    assert U4.index("C") == 2
    assert U4.indices(["D", "A"]) == [3, 0]
    with pytest.raises(KeyError):
        U4.index("Z")


def test_cost_vector_nonnegative_and_diagonal():
    with pytest.raises(ValueError):
        CostVector(U4, -np.ones((4, 4)))
    th = CostVector(U4, np.full((4, 4), 2.0))
    assert np.all(np.diag(th.weights) == 0)
    assert th.flat().shape == (12,)
    with pytest.raises(ValueError):
        th.weights[0, 1] = 5.0


def test_cost_vector_flat_roundtrip():
    rng = np.random.default_rng(0)
    flat = rng.random(12)
    th = CostVector.from_flat(U4, flat)
    assert np.array_equal(th.flat(), flat)
    assert th["A", "B"] == flat[0]


def test_tour_to_binary_examples():
    assert tour_to_binary(["A", "B", "C"], U4).named_edges() == [("A", "B"), ("B", "C"), ("C", "A")]
    assert tour_to_binary(["A", "B"], U4).named_edges() == [("A", "B"), ("B", "A")]
    with pytest.raises(RouteEncodingError):
        tour_to_binary(["A", "B", "A"], U4)
    with pytest.raises(RouteEncodingError):
        tour_to_binary(["A", "Z"], U4)


def test_binary_to_tour_examples():
    x = RouteBinary.from_named(U4, [("A", "B"), ("B", "C"), ("C", "A")])
    assert binary_to_tour(x, "B") == ["B", "C", "A"]
    two = RouteBinary.from_named(U4, [("A", "B"), ("B", "A"), ("C", "D"), ("D", "C")])
    with pytest.raises(RouteEncodingError):
        binary_to_tour(two, "A")
    assert binary_to_tour(RouteBinary.from_named(U4, [("A", "B"), ("B", "A")]), "A") == ["A", "B"]
    with pytest.raises(RouteEncodingError):
        binary_to_tour(x, "D")


@settings(max_examples=100, deadline=None)
@given(st.permutations(list(range(10))), st.integers(2, 10))
def test_tour_roundtrip_is_rotation(perm, k):
    u = NodeUniverse(tuple(f"v{i}" for i in range(10)))
    tour = [f"v{i}" for i in perm[:k]]
    x = tour_to_binary(tour, u)
    assert len(x) == k
    back = binary_to_tour(x, tour[0])
    assert back == tour
    m = x.matrix
    idx = u.indices(tour)
    assert np.all(m[idx].sum(axis=1) == 1) and np.all(m[:, idx].sum(axis=0) == 1)
    assert m.sum() == k


def test_augment_weights_examples():
    u = NodeUniverse(("A", "B", "C"))
    theta = CostVector(u, np.array([[0, 1, 0.5], [1, 0, 1], [1, 1, 0]], float))
    xhat = tour_to_binary(["A", "B", "C"], u)
    m = PenaltyMatrix.from_pairs(u, {("A", "C"): 2.0})
    w = augment_weights(theta, xhat, m)
    assert w[0, 1] == 2.0          # theta 1, used
    assert w[1, 0] == 0.0          # theta 1, unused
    assert w[0, 2] == 1.5          # theta 0.5, unused, M 2
    other = NodeUniverse(("A", "B", "D"))
    with pytest.raises(ValueError):
        augment_weights(theta, tour_to_binary(["A", "B", "D"], other))


@settings(max_examples=1000, deadline=None)
@given(st.integers(1, 50).flatmap(lambda n: st.tuples(st.lists(st.booleans(), min_size=n, max_size=n),
                                                      st.lists(st.booleans(), min_size=n, max_size=n))))
def test_l1_identity(pair):
    xh, x = (np.array(v, dtype=np.int64) for v in pair)
    assert np.abs(xh - x).sum() == (1 - 2 * xh) @ x + xh.sum()


def test_mirrored_routes_roundtrip():
    u = NodeUniverse(("d", "a", "b", "c"))
    x = routes_to_binary([["a", "b"], ["c"]], "d", u, mirrored=True)
    assert ("d", "c") in x.named_edges() and ("c", "d") in x.named_edges()
    assert len(x) == 8
    assert binary_to_routes(x, "d", mirrored=True) == [["a", "b"], ["c"]]


def test_directed_routes_roundtrip():
    u = NodeUniverse(("d", "a", "b", "c"))
    x = routes_to_binary([["b", "a"], ["c"]], "d", u)
    assert len(x) == 5
    assert binary_to_routes(x, "d") == [["b", "a"], ["c"]]


def test_scvrp_feasibility():
    u = NodeUniverse(("d", "a", "b", "c"))
    sig = Signal.scvrp("d", {"a": 1, "b": 1, "c": 1}, 2, 2)
    check_feasible(sig, routes_to_binary([["a", "b"], ["c"]], "d", u, mirrored=True))
    assert not is_feasible(sig, routes_to_binary([["a", "b", "c"]], "d", u, mirrored=True))
    sig3 = Signal.scvrp("d", {"a": 1, "b": 1, "c": 1}, 3, 2)
    assert not is_feasible(sig3, routes_to_binary([["a", "b", "c"]], "d", u, mirrored=True))


def test_vrptw_feasibility():
    u = NodeUniverse(("d", "a", "b"))
    tt = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], float)
    sig = Signal.vrptw("d", {"a": (0, 1.5), "b": (0, 1.5)}, tt, 2)
    assert not is_feasible(sig, routes_to_binary([["a", "b"]], "d", u))
    assert is_feasible(sig, routes_to_binary([["a"], ["b"]], "d", u))
    sig1 = Signal.vrptw("d", {"a": (0, 1.5), "b": (0, 1.5)}, tt, 1)
    assert not is_feasible(sig1, routes_to_binary([["a"], ["b"]], "d", u))


def test_waiting_is_allowed():
    u = NodeUniverse(("d", "a", "b"))
    tt = np.ones((3, 3))
    sig = Signal.vrptw("d", {"a": (5, 6), "b": (6, 7)}, tt, 1)
    assert is_feasible(sig, routes_to_binary([["a", "b"]], "d", u))


def test_example_checks_feasibility():
    sig = Signal.rtsp(["A", "B", "C"])
    with pytest.raises(InfeasibleError):
        SignalResponseExample(sig, tour_to_binary(["A", "B", "D"], U4))
    ex = SignalResponseExample(sig, tour_to_binary(["A", "B", "D"], U4), check=False)
    assert ex.universe is U4


def test_signal_validation():
    with pytest.raises(ValueError):
        Signal.rtsp([])
    with pytest.raises(ValueError):
        Signal.scvrp("d", {"a": -1}, 2, 1)
    with pytest.raises(ValueError):
        Signal.vrptw("d", {"a": (3, 1)}, np.zeros((2, 2)), 1)
    with pytest.raises(ValueError):
        Signal.scvrp("d", {"a": 1}, 2, 0)
