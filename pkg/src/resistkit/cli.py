"""Command-line interface.

Subcommands: gen, resistance, green, simulate, trace, fuse, ghp, growth,
identities, converge.  Report-producing commands write CSV tables (plus PNG
figures unless --no-plots) into --out directories; single-table commands write
CSV to stdout or --out.  Exit codes: nonzero when an identity check fails or a
bound comparison is violated beyond its statistical tolerance.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .ensembles import generate, parse_spec
from .errors import NetworkError
from .experiments import (ExperimentPlan, run_convergence,
                          run_fusing_experiment, run_identity_suite,
                          write_report)
from .ghp import ghp_search
from .kernels import green_kernel, transition_semigroup
from .mmspace import (from_network, read_mmspace, resistance_growth_profile,
                      growth_condition_flag, write_mmspace)
from .network import read_network, with_integer_ids, write_network
from .resistance import (effective_resistance, fuse_network, resistance_matrix,
                         set_resistance, trace_network)
from .rng import SimulationConfig
from .simulate import (hitting_tail_vs_bounds, killed_path, path_to_csv,
                       sample_hitting, sample_states_at_times, simulate_path)


def _split_ids(text: str) -> list:
    from .network import _decode_id
    return [_decode_id(tok) for tok in text.split(",") if tok != ""]


def _out_handle(args):
    if getattr(args, "out", None):
        return open(args.out, "w")
    return sys.stdout


def _load_net(args):
    if getattr(args, "net", None):
        return read_network(args.net)
    if getattr(args, "spec", None):
        return generate(parse_spec(args.spec[0] if isinstance(args.spec, list)
                                   else args.spec))
    raise NetworkError("provide --net FILE or --spec SPEC")


def _matrix_csv(ids, matrix, fh):
    fh.write(",".join(str(v) for v in ids) + "\n")
    for row in np.atleast_2d(matrix):
        fh.write(",".join(repr(float(x)) for x in row) + "\n")


# -- subcommand implementations ------------------------------------------------------

def _cmd_gen(args) -> int:
    net = generate(parse_spec(args.spec))
    try:
        write_network(net, args.out)
    except NetworkError:
        write_network(with_integer_ids(net), args.out)
    print(f"wrote {net.n} vertices / {net.n_edges} edges to {args.out}")
    return 0


def _cmd_resistance(args) -> int:
    net = _load_net(args)
    fh = _out_handle(args)
    if args.sets:
        A, B = (_split_ids(s) for s in args.sets.split(";"))
        fh.write("setA,setB,resistance\n")
        fh.write(f"\"{args.sets.split(';')[0]}\",\"{args.sets.split(';')[1]}\","
                 f"{set_resistance(net, A, B)!r}\n")
        return 0
    fh.write("x,y,resistance\n")
    if args.pairs:
        for pair in args.pairs.split(";"):
            x, y = _split_ids(pair.replace(":", ","))
            fh.write(f"{x},{y},{effective_resistance(net, x, y)!r}\n")
    else:
        R = resistance_matrix(net)
        for i, x in enumerate(net.ids):
            for j in range(i + 1, net.n):
                fh.write(f"{x},{net.ids[j]},{R.values[i, j]!r}\n")
    return 0


def _cmd_green(args) -> int:
    net = _load_net(args)
    A = _split_ids(args.boundary)
    kernel = green_kernel(net, A, verify=not args.no_verify)
    _matrix_csv(kernel.interior, kernel.matrix, _out_handle(args))
    return 0


def _cmd_simulate(args) -> int:
    net = _load_net(args)
    cfg = SimulationConfig(seed=args.seed, stream=args.stream,
                           n_samples=args.samples)
    start = _split_ids(args.start)[0] if args.start is not None else net.root
    fh = _out_handle(args)
    if args.marginal_time is not None:
        states = sample_states_at_times(net, start, [args.marginal_time],
                                        args.samples, cfg)
        counts = np.bincount(states[:, 0], minlength=net.n) / args.samples
        oracle = transition_semigroup(net, args.marginal_time)[
            net.vertex_index(start)]
        fh.write("statistic,value,stderr,oracle,bound\n")
        for v, (emp, ex) in zip(net.ids, zip(counts, oracle)):
            se = np.sqrt(max(ex * (1 - ex), 1.0 / args.samples) / args.samples)
            fh.write(f"P(X_t={v}),{emp!r},{se!r},{ex!r},\n")
        tv = 0.5 * float(np.abs(counts - oracle).sum())
        band = 3 * np.sqrt(np.log(net.n) / args.samples)
        fh.write(f"total_variation,{tv!r},,{0.0!r},{band!r}\n")
        return 0 if tv <= band else 1
    if args.hit is not None:
        A = _split_ids(args.hit)
        if args.samples > 1:
            sigma, _ = sample_hitting(net, start, A, args.samples, cfg)
            from .kernels import green_apply
            k = green_kernel(net, A, verify=False)
            mu_int = np.array([net.mu[net.vertex_index(v)] for v in k.interior])
            oracle = float(green_apply(k, 1.0, mu_int)[k.interior.index(start)]) \
                if start in k.interior else 0.0
            se = float(sigma.std(ddof=1) / np.sqrt(len(sigma)))
            fh.write("statistic,value,stderr,oracle,bound\n")
            fh.write(f"mean_hitting_time,{float(sigma.mean())!r},{se!r},{oracle!r},\n")
            return 0 if abs(float(sigma.mean()) - oracle) <= 3 * se else 1
        path, sigma = killed_path(net, start, A, cfg)
        path_to_csv(path, fh)
        return 0
    path = simulate_path(net, start, args.horizon, cfg)
    path_to_csv(path, fh)
    return 0


def _cmd_trace(args) -> int:
    net = _load_net(args)
    V = _split_ids(args.subset)
    nu = 1.0 if args.nu is None else \
        dict(zip(V, (float(x) for x in args.nu.split(","))))
    root = _split_ids(args.root)[0] if args.root else None
    traced = trace_network(net, V, nu, root=root)
    write_network(traced, args.out)
    print(f"wrote traced network ({traced.n} vertices) to {args.out}")
    return 0


def _cmd_fuse(args) -> int:
    if args.experiment_specs:
        rows = run_fusing_experiment(
            args.experiment_specs,
            pair_fractions=[tuple(float(x) for x in p.split(":"))
                            for p in args.pairs_at.split(";")] if args.pairs_at
            else ((0.3, 0.7),),
            seed=args.seed)
        out = Path(args.out or "fusing-report")
        out.mkdir(parents=True, exist_ok=True)
        from .experiments import _write_csv
        _write_csv(out / "fusing.csv", rows,
                   ["label", "n", "commutation_residual", "ghp_before",
                    "ghp_after", "x", "y", "seed"])
        if not args.no_plots:
            from .plots import plot_fusing
            plot_fusing(rows, out / "fusing.png")
        worst = max(r["commutation_residual"] for r in rows)
        print(f"fusing rows: {len(rows)}; worst commutation residual {worst:.3g}")
        return 0 if worst <= 1e-9 * args.tolerance_scale else 1
    net = _load_net(args)
    parts = [_split_ids(p) for p in args.part]
    fused = fuse_network(net, parts)
    write_network(fused, args.out)
    print(f"wrote fused network ({fused.n} vertices) to {args.out}")
    return 0


def _cmd_ghp(args) -> int:
    X = read_mmspace(args.space_x)
    Y = read_mmspace(args.space_y)
    val, C = ghp_search(X, Y, budget=args.budget, seed=args.seed)
    payload = {"surrogate_distance": val,
               "correspondence": sorted([list(map(str, p)) for p in C.pairs])}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    else:
        print(json.dumps(payload, indent=2))
    return 0


def _cmd_growth(args) -> int:
    nets = [generate(parse_spec(s)) for s in args.spec]
    radii = [float(r) for r in args.radii.split(",")]
    rows, proxy = resistance_growth_profile(nets, radii)
    for row, spec in zip(rows, (s for s in args.spec for _ in radii)):
        row["label"] = spec
    flag = growth_condition_flag(proxy)
    out = Path(args.out or "growth-report")
    out.mkdir(parents=True, exist_ok=True)
    from .experiments import _write_csv
    _write_csv(out / "growth.csv", rows, ["label", "n", "r", "value"])
    (out / "growth_proxy.json").write_text(json.dumps(
        {"proxy": {str(k): v for k, v in proxy.items()},
         "growth_bounded_flag": flag}, indent=2) + "\n")
    if not args.no_plots:
        from .plots import plot_growth_profile
        plot_growth_profile(rows, out / "growth.png")
    print(f"growth profile over {len(nets)} nets, {len(radii)} radii -> {out}")
    if flag:
        print("WARNING: resistance growth looks bounded "
              "(non-explosion condition fails along this family)")
    return 0


def _cmd_identities(args) -> int:
    net = _load_net(args)
    cfg = SimulationConfig(seed=args.seed, n_samples=args.samples)
    rows = run_identity_suite(net, cfg, tolerance_scale=args.tolerance_scale,
                              inject_error=1e-3 if args.negative_control else 0.0)
    fh = _out_handle(args)
    fh.write("name,statistic,threshold,passed,kind\n")
    for r in rows:
        fh.write(f"{r['name']},{r['statistic']!r},{r['threshold']!r},"
                 f"{r['passed']},{r['kind']}\n")
    failed = [r["name"] for r in rows if not r["passed"]]
    print(("FAIL: " + ", ".join(failed)) if failed else "all identity checks pass",
          file=sys.stderr)
    return 1 if failed else 0


def _cmd_converge(args) -> int:
    plan = ExperimentPlan(
        specs=tuple(args.spec),
        radii=tuple(float(r) for r in args.radii.split(",")),
        times=tuple(float(t) for t in args.times.split(",")),
        alpha_r=args.alpha_r, alpha_mu=args.alpha_mu,
        alpha_t=args.alpha_t, alpha_phi=args.alpha_phi,
        n_samples=args.samples, seed=args.seed,
        ghp_budget=args.ghp_budget, max_ball_points=args.ball_points,
        out_dir=None)
    report = run_convergence(plan)
    out = write_report(report, args.out or "convergence-report",
                       plots=not args.no_plots)
    gaps = [r for r in report.cauchy_rows if r["kind"] == "consecutive"]
    print(f"report -> {out}")
    for r in gaps:
        print(f"  cauchy gap n={r['from_n']} -> n={r['to_n']}: "
              f"{r['gap']:.4g} (3-sigma noise {r['noise3']:.2g})")
    if report.growth_bounded_flag:
        print("  WARNING: bounded resistance growth "
              "(non-explosion condition fails along this family)")
    print(f"  identity checks: {'pass' if report.all_pass else 'FAIL'}")
    return 0 if report.all_pass else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="resistkit",
        description="resistance networks, kernels, walks, and convergence reports")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1,
                       help="worker threads for independent cells")
        p.add_argument("--tolerance-scale", type=float, default=1.0)
        if out:
            p.add_argument("--out")

    p = sub.add_parser("gen", help="generate an ensemble network file")
    p.add_argument("--spec", required=True)
    common(p)
    p.set_defaults(fn=_cmd_gen)
    p.set_defaults(out_required=True)

    p = sub.add_parser("resistance", help="pairwise or set effective resistance")
    p.add_argument("--net")
    p.add_argument("--spec", nargs="*")
    p.add_argument("--pairs", help="semicolon-separated 'x:y' pairs")
    p.add_argument("--sets", help="'a,b;c,d' two vertex sets")
    common(p)
    p.set_defaults(fn=_cmd_resistance)

    p = sub.add_parser("green", help="killed Green kernel as CSV")
    p.add_argument("--net")
    p.add_argument("--spec", nargs="*")
    p.add_argument("--boundary", required=True)
    p.add_argument("--no-verify", action="store_true")
    common(p)
    p.set_defaults(fn=_cmd_green)

    p = sub.add_parser("simulate", help="paths, killed paths, and estimators")
    p.add_argument("--net")
    p.add_argument("--spec", nargs="*")
    p.add_argument("--start")
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--hit", help="target vertex set (killed path / estimator)")
    p.add_argument("--marginal-time", type=float,
                   help="estimate the time-t marginal against the semigroup")
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--stream", type=int, default=0)
    common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("trace", help="Schur-complement trace onto a subset")
    p.add_argument("--net")
    p.add_argument("--spec", nargs="*")
    p.add_argument("--subset", required=True)
    p.add_argument("--nu", help="comma-separated masses for the subset")
    p.add_argument("--root")
    common(p)
    p.set_defaults(fn=_cmd_trace)

    p = sub.add_parser("fuse", help="fuse vertex sets, or run the fusing experiment")
    p.add_argument("--net")
    p.add_argument("--spec", nargs="*")
    p.add_argument("--part", action="append", default=[],
                   help="comma-separated vertex set (repeatable)")
    p.add_argument("--experiment-specs", nargs="*",
                   help="run the fusing-continuity experiment over these specs")
    p.add_argument("--pairs-at", help="marked pair fractions 'f1:f2;f3:f4'")
    p.add_argument("--no-plots", action="store_true")
    common(p)
    p.set_defaults(fn=_cmd_fuse)

    p = sub.add_parser("ghp", help="GHP surrogate distance between space files")
    p.add_argument("--space-x", required=True)
    p.add_argument("--space-y", required=True)
    p.add_argument("--budget", type=int, default=64)
    common(p)
    p.set_defaults(fn=_cmd_ghp)

    p = sub.add_parser("growth", help="resistance-growth profile over a family")
    p.add_argument("--spec", action="append", required=True)
    p.add_argument("--radii", required=True)
    p.add_argument("--no-plots", action="store_true")
    common(p)
    p.set_defaults(fn=_cmd_growth)

    p = sub.add_parser("identities", help="run the identity/residual suite")
    p.add_argument("--net")
    p.add_argument("--spec", nargs="*")
    p.add_argument("--samples", type=int, default=4000)
    p.add_argument("--negative-control", action="store_true",
                   help="inject a kernel error to prove failures are caught")
    common(p)
    p.set_defaults(fn=_cmd_identities)

    p = sub.add_parser("converge", help="full convergence experiment report")
    p.add_argument("--spec", action="append", required=True)
    p.add_argument("--radii", required=True)
    p.add_argument("--times", default="0.5,1.0,2.0")
    p.add_argument("--alpha-r", type=float, default=0.0)
    p.add_argument("--alpha-mu", type=float, default=0.0)
    p.add_argument("--alpha-t", type=float, default=None)
    p.add_argument("--alpha-phi", type=float, default=0.0)
    p.add_argument("--samples", type=int, default=50_000)
    p.add_argument("--ghp-budget", type=int, default=64)
    p.add_argument("--ball-points", type=int, default=40)
    p.add_argument("--no-plots", action="store_true")
    common(p)
    p.set_defaults(fn=_cmd_converge)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except NetworkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
