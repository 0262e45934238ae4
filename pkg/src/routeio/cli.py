"""Command-line entry point: ``routeio {train,predict,score,demo,experiment,fixture}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import data as D
from .core import CostVector, binary_to_routes
from .learn import TrainConfig, train, update_step, write_trace
from .loss import subgradient_from_minimizer
from .scoring import TravelTimes, score_routes, zone_error_percentage
from .solvers import SolverChoice, solve_afop, solve_fop
from .synth import SynthConfig, euclidean_weights, fig2_config, generate_synthetic, route_edge_error
from .zones import fit_zone_model, predict_route

log = logging.getLogger("routeio")

_DEFAULT_NODES = {"rtsp": 12, "scvrp": 8, "vrptw": 7}


def _solver(args) -> SolverChoice:
    return SolverChoice(kind=args.solver, seed=args.seed)


def _config(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, step=args.step, step_c=args.step_c, update=args.update,
                       sampling=args.sampling, aggregate=args.aggregate, seed=args.seed, solver=_solver(args))


def _add_train_flags(p, step_c=0.0005, update="std"):
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--step", choices=("const", "inv_t", "inv_sqrt_t"), default="inv_t")
    p.add_argument("--step-c", type=float, default=step_c)
    p.add_argument("--update", choices=("exp", "std"), default=update)
    p.add_argument("--aggregate", choices=("last", "mean", "weighted"), default="last")
    p.add_argument("--sampling", choices=("reshuffled", "uniform"), default="reshuffled")
    p.add_argument("--solver", choices=("exact-dp", "local-search"), default="exact-dp")
    p.add_argument("--seed", type=int, default=0)


# --------------------------------------------------------------------------


def cmd_train(args) -> int:
    bundle = D.load_dataset_dir(args.dataset)
    if args.fraction < 1:
        bundle = D.fraction_subset(bundle, args.fraction, args.seed)
    depots = sorted(bundle.routes) if args.depot == "all" else [args.depot]
    missing = [d for d in depots if d not in bundle.routes]
    if missing:
        raise SystemExit(f"no routes for depot(s) {missing}")
    cfg = _config(args)
    models, traces = {}, {}
    for d in depots:
        t0 = time.perf_counter()
        models[d], traces[d] = fit_zone_model(bundle.routes[d], cfg, args.init, d)
        models[d].config.update(fraction=args.fraction, n_routes=len(bundle.routes[d]))
        print(f"depot {d}: {len(bundle.routes[d])} routes, {len(models[d].universe) - 1} zones, "
              f"final mean loss {traces[d].records[-1].mean_loss:.6g} ({time.perf_counter() - t0:.2f}s)")
    D.save_models(models, args.out)
    if args.trace:
        Path(args.trace).mkdir(parents=True, exist_ok=True)
        for d, tr in traces.items():
            write_trace(tr, Path(args.trace) / f"{d}.ndjson")
    print(f"wrote {args.out}")
    return 0


def cmd_predict(args) -> int:
    models = D.load_models(args.model)
    bundle = D.load_dataset_dir(args.dataset)
    choice = _solver(args)
    stops, zones = {}, {}
    for r in bundle.all_routes():
        if r.depot not in models:
            raise SystemExit(f"route {r.route_id}: no model for depot {r.depot}")
        zones[r.route_id], stops[r.route_id] = predict_route(models[r.depot], r, args.R, choice)
    D.write_sequences(stops, args.out)
    zpath = Path(args.out).with_suffix(".zones.json")
    with open(zpath, "w") as fh:
        json.dump({rid: z[1:] for rid, z in sorted(zones.items())}, fh, indent=1)
    print(f"predicted {len(stops)} routes -> {args.out} (zone sequences in {zpath})")
    return 0


def cmd_score(args) -> int:
    bundle = D.load_dataset_dir(args.dataset)
    pred = D.read_sequences(args.pred)
    routes = bundle.all_routes()
    actual = {r.route_id: list(r.sequence) for r in routes}
    times = {r.route_id: TravelTimes(r.stop_ids, r.times) for r in routes}
    zone_of = {r.route_id: {s: r.zone_of(s) for s in r.stop_ids} for r in routes}
    reports = score_routes(actual, pred, times, zone_of)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["route_id", "sd", "erp_norm", "erp_edits", "score", "zone_error_pct"])
        for rid, rep in reports.items():
            w.writerow([rid, repr(rep.sd), repr(rep.erp_norm), rep.erp_edits, repr(rep.score),
                        repr(rep.zone_error_pct)])
    mean = float(np.mean([r.score for r in reports.values()]))
    pct = zone_error_percentage([(r.zone_error_count, r.zone_seq_len) for r in reports.values()])
    print(f"{len(reports)} routes: mean score {mean:.6f}, zone position error {pct:.2f}%")
    return 0


def cmd_demo(args) -> int:
    data, _ = generate_synthetic(fig2_config(args.seed))
    ex = data.train[0]
    u = data.universe
    depot = ex.signal.start_node
    theta = CostVector.uniform(u, 1.0)
    print(f"observed routes: {binary_to_routes(ex.response, depot, mirrored=True)}")
    for it in range(1, args.max_iter + 1):
        x_star = solve_afop(theta, ex, None)
        g = subgradient_from_minimizer(ex.response, x_star)
        plus = [(u.nodes[i], u.nodes[j]) for i, j in zip(*np.nonzero(g > 0))]
        minus = [(u.nodes[i], u.nodes[j]) for i, j in zip(*np.nonzero(g < 0))]
        print(f"iteration {it}")
        print(f"  augmented-problem routes: {binary_to_routes(x_star, depot, mirrored=True)}")
        print(f"  subgradient +1 on {plus}")
        print(f"  subgradient -1 on {minus}")
        theta = update_step(theta, g, args.eta, "exponentiated")
        with np.printoptions(precision=6, suppress=True, linewidth=120):
            print("  weights:\n" + "\n".join("    " + line for line in str(theta.weights).splitlines()))
        pred = solve_fop(theta.weights, ex.signal, u)
        if pred == ex.response:
            print(f"forward problem reproduces the observed routes after {it} iteration(s)")
            return 0
    print(f"no exact match within {args.max_iter} iterations")
    return 1


def run_synth(cfg: SynthConfig, tcfg: TrainConfig, samplers=("reshuffled", "uniform")):
    """Train each sampler on one synthetic dataset; returns per-epoch rows and the data."""
    data, _hidden = generate_synthetic(cfg, tcfg.solver)
    init = CostVector(data.universe, euclidean_weights(data.universe))
    rows = []
    for s in samplers:
        c = TrainConfig(**{**tcfg.__dict__, "sampling": s})
        tr = train(data.train, init, c, validate=lambda th: route_edge_error(th, data.test, None, tcfg.solver))
        rows.append({"seed": cfg.seed, "sampling": s, "epoch": 0, "mean_loss": None,
                     "test_error": tr.init_metric, "wall_time": 0.0})
        for rec in tr.records:
            rows.append({"seed": cfg.seed, "sampling": s, "epoch": rec.epoch, "mean_loss": rec.mean_loss,
                         "test_error": rec.metric, "wall_time": rec.wall_time})
    return rows, data


def cmd_experiment(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tcfg = _config(args)
    rows = []
    t0 = time.perf_counter()
    for k in range(args.seeds):
        seed = args.seed + k
        cfg = SynthConfig(kind=args.kind, n_nodes=args.nodes or _DEFAULT_NODES[args.kind], n_train=args.train,
                          n_test=args.test, hidden=args.hidden, noise=args.noise, seed=seed)
        r, data = run_synth(cfg, TrainConfig(**{**tcfg.__dict__, "seed": seed}))
        rows += r
        if k == 0:
            D.save_examples(data.train, out / "train.json")
            D.save_examples(data.test, out / "test.json")
    with open(out / "series.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    last = max(r["epoch"] for r in rows)
    for s in ("reshuffled", "uniform"):
        e0 = np.mean([r["test_error"] for r in rows if r["sampling"] == s and r["epoch"] == 0])
        eT = np.mean([r["test_error"] for r in rows if r["sampling"] == s and r["epoch"] == last])
        print(f"{s:>10}: test edge error {e0:.4f} -> {eT:.4f}")
    print(f"series -> {out / 'series.csv'} ({time.perf_counter() - t0:.1f}s)")
    return 0


def cmd_fixture(args) -> int:
    bundle, _planted, zseqs = D.make_fixture(args.routes, args.seed)
    D.save_dataset(bundle, args.out)
    with open(Path(args.out) / "planted_zone_sequences.json", "w") as fh:
        json.dump({rid: z[1:] for rid, z in sorted(zseqs.items())}, fh, indent=1)
    print(f"wrote {len(bundle)} routes to {args.out}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="routeio", description="Learn routing cost vectors from observed routes.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn per-depot zone models from a dataset directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--depot", default="all")
    _add_train_flags(p)
    p.add_argument("--init", choices=("euclidean", "uniform"), default="euclidean")
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="directory for per-epoch series (one file per depot)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="zone and stop sequences for every route of a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--R", type=float, default=None, help="penalization constant (default 10 * stops * max time)")
    p.add_argument("--solver", choices=("exact-dp", "local-search"), default="exact-dp")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("score", help="challenge score and zone error of predicted sequences")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("demo", help="walk through a small example")
    p.add_argument("problem", choices=("scvrp",))
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--eta", type=float, default=0.0002)
    p.add_argument("--max-iter", type=int, default=10)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("experiment", help="synthetic learning-curve experiments")
    p.add_argument("which", choices=("synth",))
    p.add_argument("--kind", choices=("rtsp", "scvrp", "vrptw"), default="rtsp")
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--train", type=int, default=50)
    p.add_argument("--test", type=int, default=50)
    p.add_argument("--hidden", choices=("euclidean", "uniform-random"), default="euclidean")
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run")
    _add_train_flags(p, step_c=1.5, update="exp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("fixture", help="write the synthetic zone-planted route fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--routes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fixture)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
