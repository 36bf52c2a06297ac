"""Command-line entry point: ``mfrecon <subcommand> ...``.

Worker budget: ``--workers`` or the ``MFRECON_WORKERS`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from mfrecon import io, seeds
from mfrecon.config import load_config, make_config
from mfrecon.dynamics import (
    PAPER_RATES,
    pinched_states,
    random_system,
    sample_pinch_magnitudes,
    system_from_params,
)
from mfrecon.errors import MfreconError
from mfrecon.experiments import RUNNERS, PC_HEADER, pc_row, sweep, config_echo
from mfrecon.graph import generate_er, max_out_degree, read_graph, write_graph
from mfrecon.identification import (
    build_dictionary_matrix,
    fit_coefficients,
    linear_library,
    oracle_dictionary,
    regression_pairs,
    sparse_regression,
    stack_targets,
)
from mfrecon.measurement import (
    er_bound_check,
    gaussian_matrix,
    is_full_spark,
    measure_family,
    rip_constant_exact,
    spark,
    strc_gaussian_bound,
    wtrc_check,
)
from mfrecon.recovery import (
    RecoveryConfig,
    basis_pursuit_batch,
    basis_pursuit_denoise,
    l0_oracle,
    threshold_support,
)
from mfrecon.topology import evaluate_reconstruction, reconstruct_topology


def _emit(obj, out=None):
    text = io.dumps_json(obj)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _sidecar(path) -> Path:
    return Path(str(path) + ".json")


def cmd_gen_graph(a):
    g = generate_er(a.n, a.p, seeds.stream(a.seed, "graph", 0), directed=a.directed)
    write_graph(g, a.out)
    _emit({"n": g.n, "edges": g.n_edges, "directed": g.directed, "max_out_degree": max_out_degree(g)})


def cmd_simulate(a):
    g = read_graph(a.graph)
    sys_ = random_system(g, a.dynamics, a.coupling, sign=a.sign, rates=a.rates,
                         symmetric=not g.directed, seed=seeds.stream(a.seed, "dynamics", 0))
    eps = sample_pinch_magnitudes(g.n, a.pinch_low, a.pinch_high, seed=seeds.stream(a.seed, "pinch", 0))
    fam = pinched_states(sys_, eps, a.horizon)
    meta = {"n": g.n, "horizon": a.horizon, "eps": eps, "system": sys_.params(), "seeds": seeds.describe(a.seed)}
    io.write_states(a.out, fam, comment={"seed": a.seed, "horizon": a.horizon})
    io.write_json(_sidecar(a.out), meta)


def _load_states(path, n=None, horizon=None):
    side = _sidecar(path)
    if side.exists():
        meta = io.read_json(side)
        n = n or meta.get("n")
        horizon = horizon if horizon is not None else meta.get("horizon")
    return io.read_states(path, n, horizon)


def cmd_measure(a):
    fam, qs = _load_states(a.states, a.n)
    n = fam.shape[1]
    if a.phi:
        m = io.read_matrix(a.phi)
    elif a.P:
        m = gaussian_matrix(a.P, n, seeds.stream(a.seed, "matrix", 0, a.P))
    else:
        raise MfreconError("need --phi or --P")
    if m.N != n:
        raise MfreconError(f"matrix has {m.N} columns, states have {n} entries")
    times = range(1, fam.shape[0]) if a.skip_initial else None
    mf = measure_family(fam, m, times=times)
    io.write_meanfields(a.out, mf, comment={"P": m.P, "N": m.N, "provenance": m.provenance})
    if a.phi_out:
        io.write_matrix(a.phi_out, m)


def cmd_certify(a):
    rep = {}
    if a.phi:
        m = io.read_matrix(a.phi)
        rep.update({"P": m.P, "N": m.N})
        if a.spark:
            rep["spark"] = spark(m)
            rep["full_spark"] = is_full_spark(m)
        for s in a.rip or []:
            rep[f"rip_delta_{s}"] = rip_constant_exact(m, s)
        if a.delta is not None:
            rep["wtrc"] = wtrc_check(m.P, a.delta)
            rep["strc_gaussian_bound"] = strc_gaussian_bound(m.N, m.P, a.c1)
            rep["strc_gaussian_bound_ok"] = rep["strc_gaussian_bound"] >= a.delta + 1
            k = 2 * (a.delta + 1)
            if a.rip_strc and k <= m.P:
                d = rip_constant_exact(m, k)
                rep[f"rip_delta_{k}"] = d
                rep["strc"] = d < np.sqrt(2) - 1
    if a.edge_p is not None:
        N, P = a.N or rep.get("N"), a.P or rep.get("P")
        if N is None or P is None:
            raise MfreconError("--edge-p needs --phi or both --N and --P")
        rep["er_bound_ok"] = er_bound_check(N, a.edge_p, P, a.c1)
    _emit(rep, a.out)


def _recovery_cfg(a) -> RecoveryConfig:
    opts = {"backend": a.backend, "feasibility_tol": a.tol, "support_threshold": a.tau}
    if a.max_iter:
        opts["max_iterations"] = a.max_iter
    return RecoveryConfig(**opts)


def cmd_recover(a):
    m = io.read_matrix(a.phi)
    mf = io.read_meanfields(a.meanfields, m)
    cfg = _recovery_cfg(a)
    keys = sorted(mf.records)
    if a.method == "bp":
        results = basis_pursuit_batch(m, np.column_stack([mf.records[k] for k in keys]), cfg) if keys else []
    elif a.method == "bpdn":
        results = [basis_pursuit_denoise(m, mf.records[k], a.xi, cfg) for k in keys]
    else:
        results = [l0_oracle(m, mf.records[k], a.s_max, cfg) for k in keys]
    stem = Path(a.out)
    rows, supports, diags = [], {}, []
    for (q, t), r in zip(keys, results):
        for i in np.flatnonzero(r.x_hat):
            rows.append((q, t, int(i) + 1, r.x_hat[i]))
        supports[(q, t)] = threshold_support(r.x_hat, a.tau)
        diags.append({"q": q, "t": t, **r.diagnostics()})
    comment = {"method": a.method, "tau": a.tau, "solver": vars(cfg)}
    io.write_csv(stem, ("q", "t", "i", "x_hat"), rows, comment)
    io.write_supports(stem.with_name(stem.stem + "_support.csv"), supports, comment)
    io.write_json(stem.with_name(stem.stem + "_diagnostics.json"), {"settings": comment, "records": diags})


def cmd_topology(a):
    sup = io.read_supports(a.supports)
    n = a.n
    sets = [sup.get((q, a.t), set()) for q in range(1, n + 1)]
    g_hat = reconstruct_topology(sets, directed=a.directed)
    write_graph(g_hat, a.out)
    rep = {"n": n, "edges": g_hat.n_edges, "t": a.t}
    if a.truth:
        rep["mcc"] = evaluate_reconstruction(read_graph(a.truth), g_hat)
    _emit(rep, a.report)


def cmd_pc_search(a):
    cfg = load_config(a.config, profile=a.profile)
    if a.workers:
        cfg = cfg.replace(workers=a.workers)
    pts = sweep(cfg, a.workers)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo = config_echo(cfg)
    io.write_csv(out / "pc_search.csv", PC_HEADER, [pc_row(cfg, pt, tau) for pt in pts for tau in cfg.taus], echo)
    io.write_csv(out / "pc_search_mcc.csv", ("regime", "eps", "p", "P", "tau", "mcc"),
                 [(pt.regime, pt.eps, pt.p, P, tau, s[tau]) for pt in pts for P, s in pt.search.grid
                  for tau in cfg.taus], echo)
    io.write_json(out / "pc_search.json", {
        **echo,
        "points": [{"regime": pt.regime, "eps": pt.eps, "p": pt.p, "max_out_degree": pt.delta,
                    "P_c": {str(t): pt.search.p_c[t] for t in cfg.taus},
                    "grid": [[P, {str(t): s[t] for t in cfg.taus}] for P, s in pt.search.grid]} for pt in pts],
    })


def cmd_fit_dynamics(a):
    fam, qs = _load_states(a.states, a.n)
    T = a.horizon if a.horizon is not None else fam.shape[0] - 1
    out = Path(a.out)
    if a.library == "linear":
        X, Y = regression_pairs(fam, T)
        theta, names = linear_library(X)
        fit = sparse_regression(theta, Y, a.threshold, feature_names=names)
        C = fit.coefficients
        rows = [(i + 1, names[k], C[i, k]) for i, k in zip(*np.nonzero(C))]
        io.write_csv(out, ("node", "term", "value"), rows, {"library": "linear", "T": T, "threshold": a.threshold})
        io.write_csv(out.with_name(out.stem + "_matrix.csv"), ["node", *names],
                     [(i + 1, *C[i]) for i in range(C.shape[0])])
        return
    if not a.system:
        raise MfreconError("--library custom needs --system (a simulate sidecar)")
    meta = io.read_json(a.system)
    sys_ = system_from_params(meta.get("system", meta))
    terms, _ = oracle_dictionary(sys_)
    trajs = [(q, fam[:, :, k]) for k, q in enumerate(qs)]
    rows = []
    for i in sorted(terms):
        dm = build_dictionary_matrix(terms, i, trajs, T)
        coef = fit_coefficients(dm, stack_targets(i, trajs, T))
        rows.extend((i, name, c) for name, c in zip(dm.term_names, coef))
    io.write_csv(out, ("node", "term", "value"), rows, {"library": "oracle", "T": T})


def cmd_experiment(a):
    cfg = load_config(a.config, experiment=a.command, profile=a.profile) if a.config \
        else make_config(a.command, a.profile)
    res = RUNNERS[a.command](cfg, a.out_dir, a.workers)
    _emit({"experiment": a.command, "out_dir": str(a.out_dir), "checks": res.checks})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mfrecon", description="Network reconstruction from mean-field measurements.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="sample an Erdos-Renyi graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--directed", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("simulate", help="simulate every pinched trajectory on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--dynamics", choices=("logistic", "linear"), default="logistic")
    p.add_argument("--coupling", choices=("diffusive", "sine"), default="diffusive")
    p.add_argument("--sign", type=int, choices=(-1, 1), default=-1)
    p.add_argument("--rates", type=float, nargs="+", default=list(PAPER_RATES))
    p.add_argument("--T", "--horizon", dest="horizon", type=int, default=1)
    p.add_argument("--pinch-low", type=float, default=0.5)
    p.add_argument("--pinch-high", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="trajectory CSV; metadata goes to <out>.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("measure", help="mean-field measurements of a trajectory file")
    p.add_argument("--states", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--phi", help="matrix CSV; otherwise a Gaussian matrix with --P rows is drawn")
    p.add_argument("--P", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-initial", action="store_true", help="do not measure t = 0")
    p.add_argument("--phi-out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("certify", help="spark, isometry constants and reconstruction conditions")
    p.add_argument("--phi")
    p.add_argument("--spark", action="store_true")
    p.add_argument("--rip", type=int, nargs="*")
    p.add_argument("--delta", type=int, help="maximum out-degree to test the conditions against")
    p.add_argument("--rip-strc", action="store_true", help="also enumerate delta_{2(Delta+1)}")
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--edge-p", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--P", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("recover", help="solve the inverse problem for every measurement")
    p.add_argument("--phi", required=True)
    p.add_argument("--meanfields", required=True)
    p.add_argument("--method", choices=("bp", "bpdn", "l0"), default="bp")
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--s-max", type=int, default=3)
    p.add_argument("--tau", type=float, default=1e-9)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--backend", choices=("admm", "lp", "auto"), default="auto")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("topology", help="adjacency from recovered supports")
    p.add_argument("--supports", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--directed", action="store_true")
    p.add_argument("--truth")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("pc-search", help="critical measurement count for a configured scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--profile", choices=("smoke", "paper"))
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pc_search)

    p = sub.add_parser("fit-dynamics", help="identify node dynamics from trajectories")
    p.add_argument("--states", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--T", "--horizon", dest="horizon", type=int)
    p.add_argument("--library", choices=("linear", "custom", "oracle"), default="linear",
                   help="custom (alias oracle): the exact per-node dictionary of a simulated system")
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--system", help="simulate sidecar JSON, for the oracle dictionary")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_dynamics)

    for name in ("exp1", "exp2", "exp3"):
        p = sub.add_parser(name, help=f"run {name}")
        p.add_argument("--config")
        p.add_argument("--profile", choices=("smoke", "paper"), default="smoke")
        p.add_argument("--workers", type=int)
        p.add_argument("--out-dir", required=True)
        p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (MfreconError, OSError, json.JSONDecodeError) as exc:
        print(f"mfrecon: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
