
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from routeio import _backend
from routeio.core import (
    CostVector,
    InfeasibleError,
    NodeUniverse,
    Signal,
    SignalResponseExample,
    augment_weights,
    binary_to_routes,
    binary_to_tour,
    check_feasible,
    tour_to_binary,
)
from routeio.solvers import (
    LOCAL,
    SolverChoice,
    SolverLimitError,
    enumerate_solutions,
    rtsp_tour,
    solve_afop,
    solve_fop,
    solve_rtsp,
    solve_scvrp_exact,
    solve_vrptw_exact,
)


def universe(n, prefix="v"):
    return NodeUniverse(tuple(f"{prefix}{i}" for i in range(n)))


@pytest.fixture(params=_backend.AVAILABLE)
def backend(request):
    prev = _backend.set_backend(request.param)
    yield request.param
    _backend._active = prev


# --------------------------------------------------------------------------
# R-TSP


def test_three_nodes_picks_cheaper_orientation(backend):
    u = universe(3)
    w = np.array([[0, 1, 5], [5, 0, 1], [1, 5, 0]], float)
    assert binary_to_tour(solve_rtsp(w, u.nodes, u), "v0") == ["v0", "v1", "v2"]
    assert binary_to_tour(solve_rtsp(w.T.copy(), u.nodes, u), "v0") == ["v0", "v2", "v1"]


def test_equal_weights_any_cycle():
    u = universe(6)
    x = solve_rtsp(np.full((6, 6), 2.0), u.nodes, u)
    assert x.cost(np.full((6, 6), 2.0)) == 12.0


@pytest.mark.parametrize("seed", range(100))
def test_exact_matches_permutation_oracle(seed, backend):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    w = rng.uniform(-1, 1, (n, n))
    c, t = rtsp_tour(w, range(n))
    assert sorted(t) == list(range(n))
    assert c == pytest.approx(oracles.brute_rtsp(w, list(range(n))), abs=1e-12)


def test_required_subset_ignores_other_nodes():
    rng = np.random.default_rng(1)
    u = universe(9)
    w = rng.random((9, 9))
    req = ["v1", "v4", "v5", "v8"]
    x = solve_rtsp(w, req, u)
    assert {u.nodes[i] for e in x.edges for i in e} == set(req)
    assert x.cost(w) == pytest.approx(oracles.brute_rtsp(w, u.indices(req)))


def test_tie_break_lexicographic():
    u = universe(5)
    x = solve_rtsp(np.ones((5, 5)), u.nodes, u)
    assert binary_to_tour(x, "v0") == ["v0", "v1", "v2", "v3", "v4"]


def test_backends_agree():
    if len(_backend.AVAILABLE) < 2:
        pytest.skip("compiled kernels not built")
    comp, py = _backend.Backend("compiled"), _backend.Backend("python")
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(3, 12))
        w = rng.uniform(-1, 1, (n, n))
        assert comp.held_karp(w, range(n), 1e-10) == py.held_karp(w, range(n), 1e-10)
        t = comp.nearest_neighbor(w, range(n), 0)
        assert t == py.nearest_neighbor(w, range(n), 0)
        assert comp.local_search(w, t, 1e-10, 0) == py.local_search(w, t, 1e-10, 0)


@pytest.mark.parametrize("seed", range(30))
def test_local_search_not_worse_than_construction(seed, backend):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 40))
    w = rng.uniform(-1, 1, (n, n))
    be = _backend.get_backend()
    nn = be.nearest_neighbor(w, range(n), 0)
    c, t = be.local_search(w, nn, 1e-10, 0)
    assert sorted(t) == list(range(n))
    assert c <= be.tour_cost(w, nn) + 1e-12
    c2, t2 = rtsp_tour(w, range(n), LOCAL)
    assert c2 <= be.tour_cost(w, nn) + 1e-12
    assert rtsp_tour(w, range(n), LOCAL) == (c2, t2)


def test_local_search_reaches_optimum_often():
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        w = rng.random((8, 8))
        hits += rtsp_tour(w, range(8), LOCAL)[0] <= oracles.brute_rtsp(w, list(range(8))) + 1e-12
    assert hits >= 15


def test_exact_above_cutoff_warns_or_raises():
    rng = np.random.default_rng(0)
    w = rng.random((20, 20))
    with pytest.warns(RuntimeWarning):
        rtsp_tour(w, range(20), SolverChoice(exact_cutoff=16))
    with pytest.raises(SolverLimitError):
        rtsp_tour(w, range(20), SolverChoice(exact_cutoff=16, strict=True))


def test_too_few_nodes():
    u = universe(3)
    with pytest.raises(ValueError):
        solve_rtsp(np.ones((3, 3)), ["v0"], u)


def test_solver_choice_validation():
    with pytest.raises(ValueError):
        SolverChoice(exact_cutoff=2)
    with pytest.raises(ValueError):
        SolverChoice(kind="lkh")


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 7), st.integers(0, 10**6))
def test_negative_weights_give_feasible_cycles(n, seed):
    rng = np.random.default_rng(seed)
    w = -rng.random((n, n))
    for choice in (SolverChoice(), LOCAL):
        _, t = rtsp_tour(w, range(n), choice)
        assert sorted(t) == list(range(n))


# --------------------------------------------------------------------------
# capacitated VRP


def scvrp_case(seed, n_cust=6):
    rng = np.random.default_rng(seed)
    u = NodeUniverse(("d", *[f"c{i}" for i in range(n_cust)]), tuple(map(tuple, rng.random((n_cust + 1, 2)))))
    K = int(rng.integers(1, 4))
    dem = {f"c{i}": float(rng.integers(1, 3)) for i in range(n_cust)}
    cap = float(np.ceil(sum(dem.values()) / K) + rng.integers(0, 2))
    return u, Signal.scvrp("d", dem, cap, K), rng


@pytest.mark.parametrize("seed", range(50))
def test_scvrp_matches_oracle(seed):
    u, sig, rng = scvrp_case(seed)
    w = rng.uniform(-0.5, 1, (len(u), len(u)))
    try:
        x = solve_scvrp_exact(w, sig, u)
    except InfeasibleError:
        assert oracles.brute_scvrp(w, 0, range(1, len(u)), {u.index(k): v for k, v in sig.demands.items()},
                                   sig.capacity, sig.n_vehicles) == np.inf
        return
    check_feasible(sig, x)
    ref = oracles.brute_scvrp(w, 0, range(1, len(u)), {u.index(k): v for k, v in sig.demands.items()},
                              sig.capacity, sig.n_vehicles)
    assert x.cost(w) == pytest.approx(ref, abs=1e-12)


def test_scvrp_forced_partition():
    u = NodeUniverse(("d", "a", "b"))
    sig = Signal.scvrp("d", {"a": 1, "b": 1}, 1, 2)
    x = solve_scvrp_exact(np.ones((3, 3)), sig, u)
    assert binary_to_routes(x, "d", mirrored=True) == [["a"], ["b"]]


def test_scvrp_infeasible_and_limits():
    u = universe(12)
    sig = Signal.scvrp("v0", {f"v{i}": 1 for i in range(1, 12)}, 100, 1)
    with pytest.raises(SolverLimitError):
        solve_scvrp_exact(np.ones((12, 12)), sig, u)
    u = universe(4)
    sig = Signal.scvrp("v0", {"v1": 2, "v2": 2, "v3": 2}, 2, 2)
    with pytest.raises(InfeasibleError):
        solve_scvrp_exact(np.ones((4, 4)), sig, u)


def test_fig2_instance_matches_oracle():
    from routeio.synth import euclidean_weights, fig2_config, generate_synthetic

    data, hidden = generate_synthetic(fig2_config())
    ex = data.train[0]
    u = data.universe
    assert len(ex.signal.customers) == 5 and ex.signal.n_vehicles == 2 and ex.signal.capacity == 3
    assert set(ex.signal.demands.values()) == {1.0}
    w = euclidean_weights(u)
    ref = oracles.brute_scvrp(w, 0, range(1, 6), {i: 1 for i in range(1, 6)}, 3, 2)
    assert ex.response.cost(w) == pytest.approx(ref)
    assert len(binary_to_routes(ex.response, "depot", mirrored=True)) == 2


# --------------------------------------------------------------------------
# VRPTW


def vrptw_case(seed, n_cust=5):
    rng = np.random.default_rng(seed)
    n = n_cust + 1
    xy = rng.random((n, 2))
    u = NodeUniverse(("d", *[f"c{i}" for i in range(n_cust)]), tuple(map(tuple, xy)))
    tt = np.linalg.norm(xy[:, None] - xy[None], axis=-1)
    windows = {}
    for i in range(n_cust):
        e = float(rng.uniform(0, 1.5))
        windows[f"c{i}"] = (e, e + float(rng.uniform(0.3, 1.5)))
    K = int(rng.integers(1, 4))
    return u, Signal.vrptw("d", windows, tt, K), rng


@pytest.mark.parametrize("seed", range(25))
def test_vrptw_matches_oracle(seed):
    u, sig, rng = vrptw_case(seed)
    w = rng.uniform(-0.5, 1, (len(u), len(u)))
    win = {u.index(k): v for k, v in sig.time_windows.items()}
    ref = oracles.brute_vrptw(w, 0, range(1, len(u)), sig.travel_times, win, sig.n_vehicles)
    if ref == np.inf:
        with pytest.raises(InfeasibleError):
            solve_vrptw_exact(w, sig, u)
        return
    x = solve_vrptw_exact(w, sig, u)
    check_feasible(sig, x)
    assert x.cost(w) == pytest.approx(ref, abs=1e-12)


def test_vrptw_single_customer():
    u = NodeUniverse(("d", "a"))
    sig = Signal.vrptw("d", {"a": (0, 10)}, np.ones((2, 2)), 1)
    x = solve_vrptw_exact(np.ones((2, 2)), sig, u)
    assert x.named_edges() == [("a", "d"), ("d", "a")]


def test_vrptw_disjoint_windows_force_two_routes():
    u = NodeUniverse(("d", "a", "b"))
    tt = np.array([[0, 1, 1], [1, 0, 5], [1, 5, 0]], float)
    sig = Signal.vrptw("d", {"a": (0, 1), "b": (0, 1)}, tt, 2)
    x = solve_vrptw_exact(np.zeros((3, 3)), sig, u)
    assert binary_to_routes(x, "d") == [["a"], ["b"]]
    with pytest.raises(InfeasibleError):
        solve_vrptw_exact(np.zeros((3, 3)), Signal.vrptw("d", {"a": (0, 1), "b": (0, 1)}, tt, 1), u)


# --------------------------------------------------------------------------
# augmented problem


@pytest.mark.parametrize("seed", range(20))
def test_afop_with_zero_theta_returns_farthest_tour(seed):
    # theta = 0, M = 0: augmented weights are +1 on xhat, -1 elsewhere, so the
    # minimizer is the feasible tour sharing the fewest edges with xhat
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 8))
    u = universe(n)
    tour = [u.nodes[i] for i in rng.permutation(n)]
    ex = SignalResponseExample(Signal.rtsp(u.nodes), tour_to_binary(tour, u))
    x = solve_afop(CostVector(u, np.zeros((n, n))), ex)
    xh = {(u.index(a), u.index(b)) for a, b in ex.response.named_edges()}
    far = max(len(e ^ xh) for _, e in oracles.all_tours(list(range(n))))
    assert x.l1(ex.response) == far


def test_afop_singleton_feasible_set():
    u = universe(2)
    ex = SignalResponseExample(Signal.rtsp(u.nodes), tour_to_binary(["v0", "v1"], u))
    assert solve_afop(CostVector.uniform(u, 3.0), ex) == ex.response


@pytest.mark.parametrize("kind", ["rtsp", "scvrp", "vrptw"])
def test_afop_optimality(kind):
    from routeio.synth import SynthConfig, generate_synthetic

    n = {"rtsp": 7, "scvrp": 6, "vrptw": 6}[kind]
    data, hidden = generate_synthetic(SynthConfig(kind=kind, n_nodes=n, n_train=10, n_test=1, seed=3))
    for ex in data.train:
        x = solve_afop(hidden, ex)
        w = augment_weights(hidden, ex.response)
        assert x.cost(w) <= ex.response.cost(w) + 1e-12
        brute = min(y.cost(w) for y in enumerate_solutions(ex.signal, data.universe))
        assert x.cost(w) == pytest.approx(brute, abs=1e-12)


def test_enumerate_solutions_counts():
    u = universe(5)
    assert len(list(enumerate_solutions(Signal.rtsp(u.nodes), u))) == 24
    u = NodeUniverse(("d", "a", "b", "c"))
    sig = Signal.scvrp("d", {"a": 1, "b": 1, "c": 1}, 2, 2)
    # 3 ways to split {a,b,c} into a pair and a singleton, one undirected route each
    assert len(list(enumerate_solutions(sig, u))) == 3


def test_solve_fop_dispatch_matches_direct():
    u, sig, rng = scvrp_case(4)
    w = rng.random((len(u), len(u)))
    assert solve_fop(w, sig, u) == solve_scvrp_exact(w, sig, u)
