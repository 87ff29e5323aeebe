"""Experiment command line: every module behind reproducible subcommands.

All randomized subcommands require an explicit --seed; there is no
time-based default anywhere, so re-running a command reproduces its
artifacts byte for byte.  Reports are JSON, traces and trajectories are
CSV, graphs are .khg and weight vectors are .wts.  Every artifact embeds
the digest of the resolved run configuration and the digests of its input
files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from typing import Optional, Sequence

from . import acceptance
from .bipartite import certify_entropy_lower_bound, matching_count_bound_report
from .counting import count_pm, entropy_identities_check, pm_marginals, verify_count_vs_entropy
from .entropy import (
    jensen_bounds,
    max_entropy_fpm,
    read_weights,
    well_distributed_factor,
    write_weights,
)
from .errors import HypermatchError, InvalidArgumentError
from .greedy import (
    TrajectoryConfig,
    run_greedy,
    trajectory_deviation,
    write_trajectory_csv,
    write_trajectory_metadata,
)
from .hypergraph import (
    AlphaTable,
    DiracParams,
    Hypergraph,
    degree_ratio_profile,
    gen_complete,
    gen_random_dirac,
    is_dirac,
    min_d_degree,
    read_hypergraph,
    write_hypergraph,
)
from .shifting import (
    AnnealParams,
    anneal_and_shift,
    auto_anneal_params,
    well_distributed_fpm,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise _UsageError(message)


def _canon_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def _digest_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _digest_file(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _provenance(config: dict, inputs: Sequence[str]) -> dict:
    return {
        "config": config,
        "config_digest": _digest_text(_canon_json(config)),
        "input_digests": {path: _digest_file(path) for path in inputs},
    }


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _comment_lines(prov: dict) -> list[str]:
    lines = [f"config_digest={prov['config_digest']}"]
    lines.extend(f"input_digest {p}={d}" for p, d in sorted(prov["input_digests"].items()))
    return lines


def _load_graph(path: str) -> Hypergraph:
    return read_hypergraph(path)


def _load_alpha(path: Optional[str]) -> Optional[AlphaTable]:
    return AlphaTable.from_file(path) if path else None


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _cmd_gen(args) -> int:
    config = {
        "subcommand": "gen",
        "n": args.n,
        "k": args.k,
        "complete": bool(args.complete),
        "density": args.density,
        "d": args.d,
        "gamma": args.gamma,
        "seed": args.seed,
    }
    prov = _provenance(config, [p for p in (args.alpha_table,) if p])
    if args.complete:
        G = gen_complete(args.n, args.k)
    else:
        if args.seed is None or args.d is None or args.gamma is None or args.density is None:
            raise InvalidArgumentError("random generation needs --density, --d, --gamma and --seed")
        G = gen_random_dirac(
            args.n,
            args.k,
            DiracParams(args.d, args.gamma),
            args.density,
            args.seed,
            alpha=_load_alpha(args.alpha_table),
        )
    path = _out_path(args, "graph.khg")
    write_hypergraph(G, path, header_comments=_comment_lines(prov))
    _write_json(
        _out_path(args, "gen_report.json"),
        {"graph": os.path.basename(path), "n": G.n, "k": G.k, "num_edges": G.num_edges,
         "graph_digest": G.digest(), "_provenance": prov},
    )
    print(f"wrote {path} ({G.num_edges} edges)")
    return 0


def _cmd_degrees(args) -> int:
    config = {"subcommand": "degrees", "graph": args.graph, "d": args.d, "gamma": args.gamma}
    prov = _provenance(config, [args.graph])
    G = _load_graph(args.graph)
    profile = degree_ratio_profile(G)
    report = {
        "n": G.n,
        "k": G.k,
        "num_edges": G.num_edges,
        "min_degrees": [min_d_degree(G, d) for d in range(G.k)],
        "profile": [str(q) for q in profile],
        "profile_float": [float(q) for q in profile],
        "profile_nonincreasing": all(
            profile[i] >= profile[i + 1] for i in range(len(profile) - 1)
        ),
        "_provenance": prov,
    }
    if args.d is not None and args.gamma is not None:
        report["dirac"] = bool(
            is_dirac(G, DiracParams(args.d, args.gamma), _load_alpha(args.alpha_table))
        )
    path = _out_path(args, "degrees.json")
    _write_json(path, report)
    print(f"wrote {path}")
    return 0


def _cmd_entropy(args) -> int:
    config = {"subcommand": "entropy", "graph": args.graph, "tol": args.tol,
              "max_iter": args.max_iter}
    prov = _provenance(config, [args.graph])
    G = _load_graph(args.graph)
    x, report = max_entropy_fpm(G, tol=args.tol, max_iter=args.max_iter)
    wts_path = _out_path(args, "weights.wts")
    write_weights(wts_path, x, extra_comments=_comment_lines(prov))
    L = float(x.weights.max()) if x.weights.size else 1.0
    upper, lower = jensen_bounds(G, L)
    _write_json(
        _out_path(args, "entropy_report.json"),
        {
            "entropy": report.entropy,
            "converged": report.converged,
            "iterations": report.iterations,
            "max_residual": report.max_residual,
            "potentials": [float(v) for v in report.potentials],
            "max_weight": L,
            "jensen_upper": upper,
            "jensen_lower": lower,
            "well_distributed_factor": well_distributed_factor(G, x),
            "weights_file": os.path.basename(wts_path),
            "_provenance": prov,
        },
    )
    print(f"h = {report.entropy:.12g}  converged={report.converged}  wrote {wts_path}")
    return 0


def _cmd_count(args) -> int:
    config = {"subcommand": "count", "graph": args.graph, "d": args.d, "gamma": args.gamma}
    prov = _provenance(config, [args.graph])
    G = _load_graph(args.graph)
    result = count_pm(G)
    payload = {
        "value": str(result.value),
        "note": result.note,
        "graph_digest": result.graph_digest,
        "_provenance": prov,
    }
    if args.d is not None and args.gamma is not None:
        payload["entropy_comparison"] = verify_count_vs_entropy(
            G, DiracParams(args.d, args.gamma), _load_alpha(args.alpha_table)
        )
    path = _out_path(args, "count.json")
    _write_json(path, payload)
    print(json.dumps({"value": str(result.value)}))
    return 0


def _cmd_marginals(args) -> int:
    config = {"subcommand": "marginals", "graph": args.graph}
    prov = _provenance(config, [args.graph])
    G = _load_graph(args.graph)
    x = pm_marginals(G)
    wts_path = _out_path(args, "marginals.wts")
    write_weights(wts_path, x, extra_comments=_comment_lines(prov))
    report = entropy_identities_check(G)
    report["weights_file"] = os.path.basename(wts_path)
    report["_provenance"] = prov
    _write_json(_out_path(args, "marginals_report.json"), report)
    print(f"h(marginals) = {x.entropy:.12g}  wrote {wts_path}")
    return 0


def _cmd_anneal(args) -> int:
    config = {
        "subcommand": "anneal",
        "graph": args.graph,
        "seed": args.seed,
        "d": args.d,
        "gamma": args.gamma,
        "epsilon": args.epsilon,
        "trials": args.trials,
        "auto": bool(args.auto),
        "max_steps": args.max_steps,
    }
    prov = _provenance(config, [args.graph])
    G = _load_graph(args.graph)
    dirac = DiracParams(args.d, args.gamma)
    x_star, solver_report = max_entropy_fpm(G)
    x_hat, hat_report = well_distributed_fpm(G, dirac, seed=args.seed, trials=args.trials)
    C = max(1.0, well_distributed_factor(G, x_hat))
    if args.auto:
        params = auto_anneal_params(G, args.gamma, args.epsilon, C, max_steps=args.max_steps)
    else:
        params = AnnealParams.for_graph(G, args.gamma, args.epsilon, C, max_steps=args.max_steps)
    x_final, log = anneal_and_shift(G, x_star, x_hat, params)
    wts_path = _out_path(args, "anneal.wts")
    write_weights(wts_path, x_final, extra_comments=_comment_lines(prov))
    trace_path = _out_path(args, "anneal_trace.csv")
    log.write_csv(trace_path, header_comments=_comment_lines(prov))
    _write_json(
        _out_path(args, "anneal_report.json"),
        {
            "termination": log.termination,
            "steps": len(log.steps),
            "entropy_solver": x_star.entropy,
            "entropy_start": log.start_entropy,
            "entropy_final": log.final_entropy,
            "proof_inequality_holds": log.proof_inequality_holds,
            "gain_ratio": log.gain_ratio,
            "well_distributed_factor_final": well_distributed_factor(G, x_final),
            "effective_params": {
                "epsilon": params.epsilon,
                "C": params.C,
                "eta": params.eta,
                "delta": params.delta,
                "D": params.D,
                "max_steps": params.max_steps,
            },
            "base_matching_report": hat_report,
            "weights_file": os.path.basename(wts_path),
            "trace_file": os.path.basename(trace_path),
            "_provenance": prov,
        },
    )
    print(
        f"anneal: {len(log.steps)} steps, {log.termination}, "
        f"h {log.start_entropy:.6g} -> {log.final_entropy:.6g}, wrote {wts_path}"
    )
    return 0


def _greedy_single(G, x, cfg, seed, stream, out_dir, prov, trial):
    traj = run_greedy(G, x, cfg, seed, stream=stream)
    csv_path = os.path.join(out_dir, f"trajectory_{trial:04d}.csv")
    write_trajectory_csv(csv_path, traj, G, x, header_comments=_comment_lines(prov))
    write_trajectory_metadata(os.path.join(out_dir, f"trajectory_{trial:04d}.meta.json"), traj)
    return trajectory_deviation(traj, G, x)


def _cmd_greedy(args) -> int:
    # --jobs is an execution detail, not part of the run identity
    config = {
        "subcommand": "greedy",
        "graph": args.graph,
        "weights": args.weights,
        "seed": args.seed,
        "trials": args.trials,
        "stop_fraction": args.stop_fraction,
        "c": args.c,
    }
    inputs = [args.graph] + ([args.weights] if args.weights else [])
    prov = _provenance(config, inputs)
    G = _load_graph(args.graph)
    if args.weights:
        x = read_weights(args.weights, G)
        from .entropy import as_verified

        x = as_verified(G, x)
    else:
        x, _ = max_entropy_fpm(G)
    cfg = TrajectoryConfig(c=args.c, stop_fraction=args.stop_fraction)
    os.makedirs(args.out, exist_ok=True)
    trials = list(range(args.trials))
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [
                pool.submit(_greedy_single, G, x, cfg, args.seed, (t,), args.out, prov, t)
                for t in trials
            ]
            summaries = [f.result() for f in futures]
    else:
        summaries = [
            _greedy_single(G, x, cfg, args.seed, (t,), args.out, prov, t) for t in trials
        ]
    _write_json(
        _out_path(args, "greedy_report.json"),
        {
            "trials": args.trials,
            "max_weight_deviation": max(s["max_weight_deviation"] for s in summaries),
            "max_entropy_deviation": max(s["max_entropy_deviation"] for s in summaries),
            "max_degree_deviation": max(s["max_degree_deviation"] for s in summaries),
            "reached_horizon_rate": sum(s["reached_horizon"] for s in summaries) / len(summaries),
            "per_trial": [
                {k: s[k] for k in ("max_weight_deviation", "max_entropy_deviation",
                                   "max_degree_deviation", "reached_horizon", "ran_to",
                                   "stop_reason")}
                for s in summaries
            ],
            "_provenance": prov,
        },
    )
    print(f"ran {args.trials} trajectories into {args.out}")
    return 0


def _cmd_bound(args) -> int:
    config = {"subcommand": "bound", "graph": args.graph, "d": args.d, "gamma": args.gamma}
    prov = _provenance(config, [args.graph])
    G = _load_graph(args.graph)
    report = {
        "certificate": certify_entropy_lower_bound(G, args.d),
        "matching_count_bound": matching_count_bound_report(
            G, DiracParams(args.d, args.gamma), alpha=_load_alpha(args.alpha_table)
        ),
        "_provenance": prov,
    }
    path = _out_path(args, "bound_report.json")
    _write_json(path, report)
    cert = report["certificate"]
    print(
        f"bound {cert['bound']:.6g}  h_solver {cert['h_solver']:.6g}  "
        f"h_pullback {cert['h_pullback']:.6g}  wrote {path}"
    )
    return 0


def _cmd_verify(args) -> int:
    if args.suite != "acceptance":
        raise InvalidArgumentError(f"unknown suite {args.suite!r}")
    results = acceptance.run_all(quick=args.quick)
    for r in results:
        print(r.summary_line())
    passed = all(r.passed for r in results)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(
            os.path.join(args.out, "acceptance_report.json"),
            {
                "passed": passed,
                "criteria": [
                    {"name": r.name, "passed": r.passed, "details": r.details,
                     "elapsed_s": r.elapsed}
                    for r in results
                ],
            },
        )
    print("ACCEPTANCE: " + ("PASS" if passed else "FAIL"))
    return 0 if passed else 1


def build_parser() -> _Parser:
    parser = _Parser(prog="hypermatch", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, graph=True):
        if graph:
            p.add_argument("--graph", required=True, help="input .khg file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--alpha-table", default=None, help="alpha override JSON")

    p = sub.add_parser("gen", help="generate a hypergraph instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--complete", action="store_true")
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    add_common(p, graph=False)
    p.set_defaults(handler=_cmd_gen)

    p = sub.add_parser("degrees", help="degree profile and Dirac check")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    add_common(p)
    p.set_defaults(handler=_cmd_degrees)

    p = sub.add_parser("entropy", help="max-entropy fractional perfect matching")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=20000)
    add_common(p)
    p.set_defaults(handler=_cmd_entropy)

    p = sub.add_parser("count", help="exact perfect matching count")
    p.add_argument("--d", type=int, default=None,
                   help="with --gamma: include the count-vs-entropy report")
    p.add_argument("--gamma", type=float, default=None)
    add_common(p)
    p.set_defaults(handler=_cmd_count)

    p = sub.add_parser("marginals", help="exact matching marginals")
    add_common(p)
    p.set_defaults(handler=_cmd_marginals)

    p = sub.add_parser("anneal", help="anneal-and-shift a near-optimal matching")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--auto", action="store_true",
                   help="shrink epsilon until the run parameters validate")
    p.add_argument("--max-steps", type=int, default=100000)
    add_common(p)
    p.set_defaults(handler=_cmd_anneal)

    p = sub.add_parser("greedy", help="guided random greedy trajectories")
    p.add_argument("--weights", default=None, help="input .wts file (default: solve)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--stop-fraction", type=float, default=None)
    p.add_argument("--c", type=float, default=0.05)
    p.add_argument("--jobs", type=int, default=1)
    add_common(p)
    p.set_defaults(handler=_cmd_greedy)

    p = sub.add_parser("bound", help="entropy lower bound certificates")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    add_common(p)
    p.set_defaults(handler=_cmd_bound)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--suite", default="acceptance")
    p.add_argument("--quick", action="store_true",
                   help="reduced trial counts (smoke run, not the gate)")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except _UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(json.dumps({"error": "missing-file", "message": str(exc)}), file=sys.stderr)
        return 2
    except HypermatchError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
