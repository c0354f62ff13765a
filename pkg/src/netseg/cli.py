"""Command-line front end.

Subcommands: ``sbm``, ``jr simulate|predict|intervene``,
``fixed-node simulate|solve``, ``estimate``, ``verify``.  All model math
lives in the library modules; this layer parses flags, resolves the output
directory, and writes tables.

``--config FILE`` supplies defaults from a JSON object keyed by option name
(dashes or underscores); explicit flags win.  ``NETSEG_OUTDIR`` overrides the
default output directory only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import estimation as est
from . import fixed_node as fn
from . import jr, sbm, verify
from .mc import mean_ci
from .reporting import output_dir, write_csv, write_json
from .rng import split_rngs


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _year_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netseg",
        description="Network-formation models, closure effects, and fitting.")
    parser.add_argument("--config", help="JSON file with default option values")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sbm = sub.add_parser("sbm", help="block-model closed forms and Monte Carlo")
    p_sbm.add_argument("--sizes", type=_int_list, required=True,
                       help="comma-separated group sizes")
    p_sbm.add_argument("--p", type=float, required=True)
    p_sbm.add_argument("--q", type=float, required=True)
    p_sbm.add_argument("--gamma", type=_float_list, default=[1.0, 2.0, 3.0, 4.0])
    p_sbm.add_argument("--replicates", type=int, default=2000)
    p_sbm.add_argument("--seed", type=int, required=True)
    p_sbm.add_argument("--out")
    p_sbm.add_argument("--format", choices=("csv", "json"), default="csv")

    p_jr = sub.add_parser("jr", help="growing-network model")
    jr_sub = p_jr.add_subparsers(dest="jr_command", required=True)

    def add_jr_params(p):
        p.add_argument("--k", type=int, default=2, help="number of types")
        p.add_argument("--type-dist", type=_float_list, default=None)
        p.add_argument("--similar", type=int, required=True)
        p.add_argument("--dissimilar", type=int, required=True)
        p.add_argument("--fof", type=int, required=True)
        p.add_argument("--alpha", type=float, required=True)

    p_sim = jr_sub.add_parser("simulate", help="trajectory vs theory")
    add_jr_params(p_sim)
    p_sim.add_argument("--t-max", type=int, default=10_000)
    p_sim.add_argument("--replicates", type=int, default=5)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--segregated-seed", action="store_true")
    p_sim.add_argument("--out")

    p_pred = jr_sub.add_parser("predict", help="closed-form report")
    add_jr_params(p_pred)
    p_pred.add_argument("--out")

    p_int = jr_sub.add_parser("intervene", help="plan and evaluate interventions")
    add_jr_params(p_int)
    p_int.add_argument("--t-start", type=int, default=2000)
    p_int.add_argument("--window", type=int, default=50)
    p_int.add_argument("--rate-limit", type=float,
                       help="build the optimal plan for this per-step limit")
    p_int.add_argument("--plan-file",
                       help="JSON plan {T, I, delta_ns, rate_limit}")
    p_int.add_argument("--simulate", action="store_true",
                       help="validate the plan with paired simulations")
    p_int.add_argument("--t-max", type=int, default=None)
    p_int.add_argument("--replicates", type=int, default=20)
    p_int.add_argument("--seed", type=int, required=True)
    p_int.add_argument("--out")

    p_fn = sub.add_parser("fixed-node", help="fixed-node rewiring model")
    fn_sub = p_fn.add_subparsers(dest="fn_command", required=True)

    def add_fn_params(p):
        p.add_argument("--c", type=float, required=True,
                       help="triadic-closure probability")
        p.add_argument("--s", type=float, required=True,
                       help="same-type acceptance, random channel")
        p.add_argument("--s-prime", type=float, default=0.5)
        p.add_argument("--fractions", type=_float_list, default=[0.5, 0.5])

    p_solve = fn_sub.add_parser("solve", help="fixed points and stability")
    add_fn_params(p_solve)
    p_solve.add_argument("--out")

    p_fsim = fn_sub.add_parser("simulate", help="simulate vs fixed point")
    add_fn_params(p_fsim)
    p_fsim.add_argument("--nodes", type=int, default=200)
    p_fsim.add_argument("--mean-degree", type=float, default=10.0)
    p_fsim.add_argument("--time-units", type=int, default=300)
    p_fsim.add_argument("--burn-in", type=int, default=100)
    p_fsim.add_argument("--replicates", type=int, default=2)
    p_fsim.add_argument("--seed", type=int, required=True)
    p_fsim.add_argument("--out")

    p_est = sub.add_parser("estimate", help="fit the growth model to citations")
    p_est.add_argument("--input", required=True)
    p_est.add_argument("--years", type=_year_range, default=(2015, 2020),
                       help="inclusive window, e.g. 2015:2020")
    p_est.add_argument("--min-field-share", type=float, default=0.01)
    p_est.add_argument("--cluster-k", type=int, default=None)
    p_est.add_argument("--seed", type=int, required=True)
    p_est.add_argument("--out")

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("suite", choices=verify.SUITES)
    p_ver.add_argument("--seed", type=int, required=True)
    p_ver.add_argument("--out")
    p_ver.add_argument("--scale", type=json.loads, default={},
                       help="JSON object of suite-specific size overrides")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    with open(known.config, "r", encoding="utf-8") as fh:
        config = {k.replace("-", "_"): v for k, v in json.load(fh).items()}

    def walk(p):
        dests = {a.dest for a in p._actions}
        p.set_defaults(**{k: v for k, v in config.items() if k in dests})
        for a in p._actions:
            if isinstance(a, argparse._SubParsersAction):
                for child in a.choices.values():
                    walk(child)

    walk(parser)


def _cmd_sbm(args) -> int:
    params = sbm.SbmParams(tuple(args.sizes), args.p, args.q)
    counts = sbm.expected_counts(params)
    exact = sbm.expected_counts_exact(params)
    fields = ("e_m", "e_b", "o_m", "o_b", "w_m", "w_b")
    report = {
        "params": {"sizes": args.sizes, "p": args.p, "q": args.q},
        "absolute_effect": sbm.absolute_effect_sign(params),
        "moment_inequalities": sbm.moment_inequalities(args.sizes),
        "expected_counts_leading": {k: getattr(counts, k) for k in fields},
        "expected_counts_exact": {k: getattr(exact, k) for k in fields},
    }
    if params.K == 2 and args.sizes[0] >= args.sizes[1] and 0 < args.q < 1:
        c = sbm.centrality_analysis(params)
        report["centrality"] = {
            "beta": c.beta, "ratio_before": c.ratio_before,
            "delta_tc": c.delta_tc, "gamma_threshold": c.gamma_threshold}
    rows = []
    rngs = split_rngs(args.seed, len(args.gamma))
    ratio = args.p / args.q if args.q > 0 else float("inf")
    for gamma, rng in zip(args.gamma, rngs):
        bounds = sbm.relative_bounds(params, gamma)
        diffs = sbm.relative_effect_samples(params, gamma, args.replicates, rng)
        m, h = mean_ci(diffs, 0.99)
        rows.append((gamma, ratio, bounds.lower, bounds.upper, m, h))
    out = output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, "sbm_report.json"), report)
    write_csv(os.path.join(out, "sbm_sweep.csv"),
              ["gamma", "p_over_q", "lower", "upper", "sim_effect_mean",
               "sim_effect_ci"], rows)
    print(f"wrote sbm_report.json and sbm_sweep.csv to {out}")
    return 0


def _jr_params(args) -> jr.JrParams:
    dist = args.type_dist if args.type_dist else [1.0 / args.k] * args.k
    return jr.JrParams(args.k, tuple(dist), args.similar, args.dissimilar,
                       args.fof, args.alpha)


def _cmd_jr_simulate(args) -> int:
    params = _jr_params(args)
    theory = jr.equilibrium_integration(params)
    runs = [jr.simulate_jr(params, args.t_max, int(s), return_graph=False,
                           segregated_seed=args.segregated_seed)
            for s in split_rngs(args.seed, 1)[0].integers(0, 2**62,
                                                          size=args.replicates)]
    ts = np.unique(np.concatenate((
        np.logspace(0, np.log10(args.t_max), 60).astype(int),
        [args.t_max])))
    rows = []
    for t in ts:
        vals = np.array([r.f_total[t] for r in runs])
        m, h = mean_ci(vals, 0.99) if len(vals) > 1 else (float(vals[0]), 0.0)
        rows.append((int(t), m, h, theory))
    out = output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "jr_trajectory.csv"),
              ["t", "f_sim_mean", "f_sim_ci", "f_theory"], rows)
    print(f"wrote jr_trajectory.csv to {out} "
          f"(final sim {rows[-1][1]:.4f}, theory {theory:.4f})")
    return 0


def _cmd_jr_predict(args) -> int:
    params = _jr_params(args)
    d = jr.derived_rates(params)
    preds = jr.effect_predicates(params)
    report = {
        "params": {
            "k": params.n_types, "type_dist": list(params.type_dist),
            "similar": params.similar_links,
            "dissimilar": params.dissimilar_links,
            "fof": params.fof_links, "alpha": params.alpha},
        "equilibrium_integration": jr.equilibrium_integration(params),
        "convergence_exponent": jr.convergence_exponent(params),
        "absolute_effect": preds.absolute,
        "relative_effect": preds.relative,
        "rates": {
            "total_links": d.total_links,
            "phase1_fraction": d.phase1_fraction,
            "fof_fraction": d.fof_fraction,
            "phase1_bias": d.phase1_bias,
            "fof_bias": d.fof_bias},
    }
    out = output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, "jr_prediction.json"), report)
    print(f"wrote jr_prediction.json to {out}")
    return 0


def _load_plan(path) -> jr.InterventionPlan:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    deltas = raw["delta_ns"]
    if "I" in raw and len(deltas) != raw["I"]:
        raise ValueError("plan file: I does not match len(delta_ns)")
    return jr.InterventionPlan(start_time=int(raw["T"]),
                               delta_similar=tuple(float(x) for x in deltas),
                               rate_limit=float(raw.get("rate_limit", 0.0)))


def _cmd_jr_intervene(args) -> int:
    params = _jr_params(args)
    if (args.plan_file is None) == (args.rate_limit is None):
        print("error: provide exactly one of --plan-file / --rate-limit",
              file=sys.stderr)
        return 2
    if args.plan_file:
        plan = _load_plan(args.plan_file)
        planned = None
    else:
        planned = jr.optimal_interventions(params, args.t_start, args.window,
                                           args.rate_limit)
        plan = planned.plan
    per, total = jr.intervention_immediate_effect(params, plan)
    report = {
        "plan": {"T": plan.start_time, "I": plan.length,
                 "delta_ns": list(plan.delta_similar),
                 "rate_limit": plan.rate_limit},
        "predicted_window_end_effect": total,
        "per_intervention_effect": list(map(float, per)),
    }
    if planned is not None:
        report["achieved_gain"] = planned.achieved_gain
        report["clamped"] = planned.clamped
    horizon = plan.start_time + plan.length
    t_long = args.t_max if args.t_max else 5 * horizon
    if t_long >= horizon:
        _, long_total = jr.intervention_longterm_effect(params, plan, t_long)
        report["predicted_longrun_effect"] = {"t": t_long, "value": long_total}
    if args.simulate:
        t_max = args.t_max if args.t_max else horizon
        rng = split_rngs(args.seed, 1)[0]
        deltas = [jr.simulate_with_interventions(
            params, plan, t_max, int(s)).delta_f(horizon)
            for s in rng.integers(0, 2**62, size=args.replicates)]
        m, h = mean_ci(np.array(deltas), 0.99)
        report["simulated_window_end_effect"] = {
            "mean": m, "ci99": h, "replicates": args.replicates}
    out = output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, "jr_interventions.json"), report)
    write_csv(os.path.join(out, "jr_plan.csv"),
              ["i", "delta_similar", "per_intervention_effect"],
              [(i + 1, plan.delta_similar[i], float(per[i]))
               for i in range(plan.length)])
    print(f"wrote jr_interventions.json and jr_plan.csv to {out}")
    return 0


def _fn_params(args) -> fn.FixedNodeParams:
    return fn.FixedNodeParams(args.c, args.s, args.s_prime,
                              tuple(args.fractions))


def _cmd_fn_solve(args) -> int:
    params = _fn_params(args)
    points = fn.find_fixed_points(params)
    rows = [(args.s, args.c, p.t11, p.t22, p.p11, p.p22, p.stable,
             p.integration) for p in points]
    out = output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "fixed_points.csv"),
              ["s", "c", "t11", "t22", "p11", "p22", "stable", "integration"],
              rows)
    print(f"wrote fixed_points.csv to {out} ({len(points)} fixed points)")
    return 0


def _cmd_fn_simulate(args) -> int:
    params = _fn_params(args)
    theory = fn.equilibrium_integration(params)
    rng = split_rngs(args.seed, 1)[0]
    vals = []
    for _ in range(args.replicates):
        g0 = fn.random_two_type_graph(args.nodes, args.mean_degree,
                                      int(rng.integers(2**62)),
                                      tuple(args.fractions))
        run = fn.simulate_fixed_node(g0, params,
                                     args.time_units * g0.edge_count,
                                     int(rng.integers(2**62)),
                                     return_graph=False)
        vals.append(float(run.integration[args.burn_in:].mean()))
    m, h = mean_ci(vals, 0.99) if len(vals) > 1 else (vals[0], 0.0)
    out = output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "fixed_node_sim.csv"),
              ["s", "c", "integration_theory", "integration_sim_mean",
               "integration_sim_ci"],
              [(args.s, args.c, theory, m, h)])
    print(f"wrote fixed_node_sim.csv to {out} "
          f"(sim {m:.4f}, theory {theory:.4f})")
    return 0


def _cmd_estimate(args) -> int:
    report = est.estimate_pipeline(args.input, years=args.years,
                                   min_field_share=args.min_field_share,
                                   cluster_k=args.cluster_k, seed=args.seed)
    out = output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, "estimation_report.json"), report)
    print(f"wrote estimation_report.json to {out} "
          f"({report['n_clusters']} clusters)")
    return 0


def _cmd_verify(args) -> int:
    report = verify.run_suite(args.suite, seed=args.seed, **args.scale)
    out = output_dir(args.out)
    os.makedirs(out, exist_ok=True)
    for name, (header, rows) in report.tables.items():
        write_csv(os.path.join(out, f"{args.suite}_{name}.csv"), header, rows)
    write_json(os.path.join(out, f"{args.suite}_summary.json"), {
        "suite": args.suite,
        "passed": report.passed,
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                   for c in report.checks],
    })
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    if args.command == "sbm":
        return _cmd_sbm(args)
    if args.command == "jr":
        return {"simulate": _cmd_jr_simulate,
                "predict": _cmd_jr_predict,
                "intervene": _cmd_jr_intervene}[args.jr_command](args)
    if args.command == "fixed-node":
        return {"solve": _cmd_fn_solve,
                "simulate": _cmd_fn_simulate}[args.fn_command](args)
    if args.command == "estimate":
        return _cmd_estimate(args)
    if args.command == "verify":
        return _cmd_verify(args)
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
