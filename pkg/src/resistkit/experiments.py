"""Convergence experiments, the identity suite, and fusing experiments.

Continuum limits are not representable at desk scale, so "convergence" is
operationalized as a Cauchy criterion along the generated sequence: growth
profiles of the resistance from the root, GHP surrogate distances of restricted
balls against the largest instance, and moment functionals of the laws of
distance-to-root tuples sampled at fixed times.  Every reported number carries
the (spec, seed, stream) that produced it, and rerunning a plan with the same
seed reproduces the CSV bodies bit for bit.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.stats

from . import __version__
from .ensembles import generate, parse_spec, random_connected_network, spec_size
from .errors import NetworkError
from .ghp import ghp_search
from .kernels import (alpha_resolvent_full, alpha_resolvent_killed,
                      commute_time, dirichlet_green_matrix,
                      full_resolvent_via_decomposition, green_apply,
                      green_kernel, hitting_probability,
                      kernel_ball_sandwich_check, resolvent_equation_residual,
                      transition_semigroup)
from .mmspace import (FiniteMMSpace, growth_condition_flag,
                      resistance_growth_profile)
from .network import Network, rescale_network
from .resistance import (effective_resistance, fuse_network, resistance_matrix,
                         resistance_vector, set_resistance, trace_network)
from .rng import SimulationConfig, generator
from .simulate import sample_hit_before, sample_hitting, sample_states_at_times


@dataclass(frozen=True)
class ExperimentPlan:
    """Declarative description of one convergence experiment."""

    specs: tuple
    radii: tuple
    times: tuple = (0.5, 1.0, 2.0)
    alpha_r: float = 0.0
    alpha_mu: float = 0.0
    alpha_t: float | None = None     # default: intrinsic clock alpha_r + alpha_mu
    alpha_phi: float = 0.0
    n_samples: int = 50_000
    seed: int = 0
    ghp_budget: int = 64
    max_ball_points: int = 40
    moment_scales: tuple = (0.5, 1.0, 2.0, 4.0)
    out_dir: str | None = None

    def __post_init__(self):
        if not self.specs:
            raise NetworkError("plan needs at least one ensemble spec")
        if not self.radii or any(r <= 0 for r in self.radii) or \
                any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise NetworkError("radii must be positive and strictly increasing")
        if not self.times or any(t <= 0 for t in self.times) or \
                any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise NetworkError("times must be positive and strictly increasing")
        for name in ("alpha_r", "alpha_mu", "alpha_phi"):
            if not np.isfinite(getattr(self, name)):
                raise NetworkError(f"{name} must be finite")
        if self.seed is None:
            raise NetworkError("plan needs a seed")


@dataclass
class ExperimentReport:
    """Tables produced by a plan, plus provenance for every number."""

    plan: dict
    growth_rows: list = field(default_factory=list)
    growth_proxy: dict = field(default_factory=dict)
    growth_bounded_flag: bool = False
    moment_rows: list = field(default_factory=list)
    cauchy_rows: list = field(default_factory=list)
    ghp_rows: list = field(default_factory=list)
    identity_rows: list = field(default_factory=list)
    fusing_rows: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(row["passed"] for row in self.identity_rows)


def _ball_space(net: Network, r: float | None, max_points: int,
                include=()) -> FiniteMMSpace:
    """Closed r-ball around the root as a coarsened finite mm-space.

    Coarsening is farthest-point: up to max_points centers (root and `include`
    always kept), with every ball vertex's mass pushed to its nearest center.
    Distances are exact effective resistances of the full network.
    """
    d0 = resistance_vector(net, net.root)
    if r is None:
        ball = np.arange(net.n)
    else:
        ball = np.flatnonzero(d0 <= r)
    centers = [net.root_index]
    dvecs = [d0]
    for v in include:
        i = net.vertex_index(v)
        if i not in centers and (r is None or d0[i] <= r):
            centers.append(i)
            dvecs.append(resistance_vector(net, net.ids[i]))
    mind = np.min(np.stack([dv[ball] for dv in dvecs]), axis=0)
    while len(centers) < min(max_points, ball.size):
        k = int(np.argmax(mind))
        if mind[k] <= 0:
            break
        centers.append(int(ball[k]))
        dvecs.append(resistance_vector(net, net.ids[ball[k]]))
        mind = np.minimum(mind, dvecs[-1][ball])
    D = np.array([[dv[c] for c in centers] for dv in dvecs])
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0.0)
    assign = np.argmin(np.stack([dv[ball] for dv in dvecs]), axis=0)
    wts = np.zeros(len(centers))
    np.add.at(wts, assign, net.mu[ball])
    return FiniteMMSpace(tuple(net.ids[c] for c in centers), D, wts,
                         net.root)


def _moment_functionals(times, scales):
    names, funcs = [], []
    for k in range(len(times)):
        for lam in scales:
            names.append(f"exp(-{lam:g}*d[t{k}])")
            funcs.append(lambda D, k=k, lam=lam: np.exp(-lam * D[:, k]))
    for lam in scales:
        names.append(f"exp(-{lam:g}*sum(d))")
        funcs.append(lambda D, lam=lam: np.exp(-lam * D.sum(axis=1)))
    return names, funcs


def run_convergence(plan: ExperimentPlan) -> ExperimentReport:
    """Execute a plan: growth profiles, ball GHP Cauchy table, fdd moments.

    The moment table samples, for each instance, the resistance-to-root of the
    walk at the plan times and records bounded Laplace-type functionals of the
    tuple; gaps between consecutive instances (and against the largest) form
    the Cauchy diagnostic.  Identity checks run on a small seeded corpus so
    every report carries its own oracle residuals.
    """
    specs = [parse_spec(s) for s in plan.specs]
    report = ExperimentReport(plan=asdict(plan))
    nets = []
    for spec in specs:
        size = spec_size(spec)
        raw = generate(spec)
        scale_r = float(size) ** (-plan.alpha_r)
        scale_mu = float(size) ** (-plan.alpha_mu)
        nets.append((spec, size, rescale_network(raw, scale_r, scale_mu)))

    rows, proxy = resistance_growth_profile([net for _, _, net in nets],
                                            plan.radii)
    for row, (spec, size, _) in zip(rows, (x for x in nets for _ in plan.radii)):
        row["label"] = spec.label()
    report.growth_rows = rows
    report.growth_proxy = {str(k): v for k, v in proxy.items()}
    report.growth_bounded_flag = growth_condition_flag(proxy)

    # fdd moment functionals of distance-to-root tuples
    delta = 0.0 if plan.alpha_t is None else \
        plan.alpha_t - plan.alpha_r - plan.alpha_mu
    names, funcs = _moment_functionals(plan.times, plan.moment_scales)
    per_net = []
    for k, (spec, size, net) in enumerate(nets):
        t_query = [t * float(size) ** delta for t in plan.times]
        cfg = SimulationConfig(seed=plan.seed, stream=1000 + k,
                               n_samples=plan.n_samples)
        states = sample_states_at_times(net, net.root, t_query,
                                        plan.n_samples, cfg)
        droot = resistance_vector(net, net.root)
        D = droot[states]
        means, sems = [], []
        for name, f in zip(names, funcs):
            vals = f(D)
            means.append(float(vals.mean()))
            sems.append(float(vals.std(ddof=1) / np.sqrt(len(vals))))
            report.moment_rows.append({
                "label": spec.label(), "n": size, "functional": name,
                "value": means[-1], "stderr": sems[-1],
                "seed": plan.seed, "stream": 1000 + k})
        per_net.append((spec, size, np.array(means), np.array(sems)))

    def gap(a, b):
        g = np.abs(a[2] - b[2])
        noise = np.sqrt(a[3] ** 2 + b[3] ** 2)
        j = int(np.argmax(g))
        return float(g[j]), float(3 * noise[j]), float(np.max(3 * noise))

    for a, b in zip(per_net, per_net[1:]):
        g, nz, nzmax = gap(a, b)
        report.cauchy_rows.append({
            "kind": "consecutive", "from_n": a[1], "to_n": b[1],
            "gap": g, "noise3": nz, "noise3_max": nzmax})
    last = per_net[-1]
    for a in per_net[:-1]:
        g, nz, nzmax = gap(a, last)
        report.cauchy_rows.append({
            "kind": "to_largest", "from_n": a[1], "to_n": last[1],
            "gap": g, "noise3": nz, "noise3_max": nzmax})

    # GHP surrogate of restricted balls against the largest instance
    ref_spaces = {}
    for r in plan.radii:
        ref_spaces[r] = _ball_space(nets[-1][2], r, plan.max_ball_points)
    for spec, size, net in nets[:-1]:
        for r in plan.radii:
            space = _ball_space(net, r, plan.max_ball_points)
            val, _ = ghp_search(space, ref_spaces[r], budget=plan.ghp_budget,
                                seed=plan.seed)
            report.ghp_rows.append({
                "label": spec.label(), "n": size, "r": r,
                "points": space.n, "ref_points": ref_spaces[r].n,
                "surrogate_to_largest": val})

    # oracle residuals on a seeded corpus
    for k in range(3):
        net = random_connected_network(18, seed=plan.seed + 17 * k + 1)
        rows = run_identity_suite(net, SimulationConfig(seed=plan.seed,
                                                        stream=3000 + k,
                                                        n_samples=4000))
        for row in rows:
            row["net"] = f"random(n=18,seed={plan.seed + 17 * k + 1})"
        report.identity_rows.extend(rows)

    report.provenance = {
        "package": f"resistkit {__version__}",
        "numpy": np.__version__,
        "seed": plan.seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if plan.out_dir:
        write_report(report, plan.out_dir)
    return report


# -- identity suite -----------------------------------------------------------------

def _sample_boundaries(net: Network, gen, count: int):
    out = []
    for _ in range(count):
        size = int(gen.integers(1, net.n))
        out.append([net.ids[i] for i in gen.choice(net.n, size, replace=False)])
    return out


def run_identity_suite(net: Network, cfg: SimulationConfig | None = None,
                       tolerance_scale: float = 1.0,
                       inject_error: float = 0.0) -> list[dict]:
    """One row per exact identity / statistical check, with pass-fail verdicts.

    Residual rows compare two independent computations at fixed tolerances
    (scaled by tolerance_scale); Monte-Carlo rows use 3-sigma bands or a
    KS test at level 0.01.  inject_error adds a bias to the kernel in the
    first row, as a negative control that the suite can fail.
    """
    if cfg is None:
        cfg = SimulationConfig(seed=2024, n_samples=4000)
    ts = tolerance_scale
    gen = generator(cfg.substream(90_000))
    rows: list[dict] = []

    def add(name, statistic, threshold, passed, kind="residual"):
        rows.append({"name": name, "statistic": float(statistic),
                     "threshold": float(threshold), "passed": bool(passed),
                     "kind": kind})

    boundaries = _sample_boundaries(net, gen, 4)

    worst = 0.0
    for A in boundaries:
        g = green_kernel(net, A, verify=False)
        oracle = dirichlet_green_matrix(net, A)
        gap = np.abs(g.matrix - oracle.matrix)
        worst = max(worst, float(gap.max()))
    worst += abs(inject_error)
    add("kernel_oracle_equivalence", worst, 1e-9 * ts, worst <= 1e-9 * ts)

    worst = 0.0
    for A in boundaries:
        g = green_kernel(net, A, verify=False)
        for y in g.interior:
            worst = max(worst, abs(g.value(y, y) - set_resistance(net, [y], A)))
    add("kernel_diagonal_is_boundary_resistance", worst, 1e-9 * ts,
        worst <= 1e-9 * ts)

    worst = -np.inf
    R = resistance_matrix(net)
    for A in boundaries:
        g = green_kernel(net, A, verify=False).extended(net.ids)
        diff = np.abs(g[:, :, None] - g[:, None, :]) - R.values[None, :, :]
        worst = max(worst, float(diff.max()))
    add("kernel_metric_lipschitz", worst, 1e-9 * ts, worst <= 1e-9 * ts)

    worst = 0.0
    pairs = [(net.ids[int(a)], net.ids[int(b)])
             for a, b in gen.integers(0, net.n, (10, 2)) if a != b]
    for x, y in pairs or [(net.ids[0], net.ids[1])]:
        lhs = commute_time(net, x, y)
        rhs = effective_resistance(net, x, y) * net.total_mass()
        worst = max(worst, abs(lhs - rhs))
    add("commute_time_identity", worst, 1e-9 * ts, worst <= 1e-9 * ts)

    worst = -np.inf
    dmax = float(R.values.max())
    for _ in range(4):
        x = net.ids[int(gen.integers(0, net.n))]
        eps = float(gen.uniform(0.05, 0.6)) * dmax
        dist = resistance_vector(net, x)
        if (dist <= eps).sum() >= net.n:
            continue
        worst = max(worst, kernel_ball_sandwich_check(net, x, eps))
    add("kernel_ball_sandwich", worst, 1e-9 * ts, worst <= 1e-9 * ts)

    alpha = float(gen.uniform(0.01, 10.0))
    res = resolvent_equation_residual(net, boundaries[0], alpha)
    add("resolvent_equation", res, 1e-9 * ts, res <= 1e-9 * ts)

    direct = alpha_resolvent_full(net, alpha, verify=False).matrix
    dec = full_resolvent_via_decomposition(net, alpha)
    gap = float(np.abs(direct - dec).max())
    add("resolvent_decomposition", gap, 1e-8 * ts, gap <= 1e-8 * ts)

    sub = float((alpha * direct @ net.mu).max())
    add("resolvent_sub_markov", sub, 1.0 + 1e-10 * ts, sub <= 1.0 + 1e-10 * ts)

    lam = float((net.degree_weights() / net.mu).max())
    s, t = 0.3 / lam, 0.7 / lam
    ps, pt, pst = (transition_semigroup(net, u) for u in (s, t, s + t))
    gap = float(np.abs(ps @ pt - pst).max())
    add("semigroup_property", gap, 1e-9 * ts, gap <= 1e-9 * ts)

    gap = float(np.abs(net.mu[:, None] * pt - (net.mu[:, None] * pt).T).max())
    add("semigroup_detailed_balance", gap, 1e-10 * ts, gap <= 1e-10 * ts)

    # statistical rows
    A = boundaries[0]
    interior = [v for v in net.ids if v not in set(A)]
    z = interior[int(gen.integers(0, len(interior)))]
    _, loc = sample_hitting(net, z, A, cfg.n_samples, cfg.substream(1),
                            local_time_vertex=z)
    mean = set_resistance(net, [z], A)
    pval = scipy.stats.kstest(loc, "expon", args=(0, mean)).pvalue
    add("exponential_local_time_ks", pval, 0.01, pval >= 0.01, kind="pvalue")

    if len(interior) >= 2:
        x, zz = interior[0], interior[-1]
        emp = sample_hit_before(net, x, zz, A, cfg.n_samples, cfg.substream(2))
        exact = hitting_probability(net, x, zz, A)
        se = max(np.sqrt(exact * (1 - exact) / cfg.n_samples), 1.0 / cfg.n_samples)
        add("hitting_probability_formula", abs(emp - exact), 3 * se,
            abs(emp - exact) <= 3 * se, kind="mc")

    x0 = interior[0]
    sig, _ = sample_hitting(net, x0, A, cfg.n_samples, cfg.substream(3))
    k = green_kernel(net, A, verify=False)
    mu_int = np.array([net.mu[net.vertex_index(v)] for v in k.interior])
    exact = float(green_apply(k, 1.0, mu_int)[k.interior.index(x0)])
    se = float(sig.std(ddof=1) / np.sqrt(len(sig)))
    add("mean_hitting_time", abs(float(sig.mean()) - exact), 3 * se,
        abs(float(sig.mean()) - exact) <= 3 * se, kind="mc")

    return rows


# -- fusing experiment ---------------------------------------------------------------

def run_fusing_experiment(specs, pair_fractions=((0.3, 0.7),), seed: int = 0,
                          max_ball_points: int = 30,
                          ghp_budget: int = 64) -> list[dict]:
    """Fuse marked pairs along a network sequence and track GHP continuity.

    Marked pairs sit at fixed fractional positions of the vertex order, so they
    correspond across the sequence.  Each row reports the trace/fuse
    commutation residual (resistances through marked quotient points computed
    both orders) and the surrogate distances to the largest instance before
    and after fusing.
    """
    parsed = [parse_spec(s) for s in specs]
    nets = [(sp, spec_size(sp), generate(sp)) for sp in parsed]

    def marked(net):
        out = []
        for f1, f2 in pair_fractions:
            u = net.ids[min(int(f1 * (net.n - 1)), net.n - 1)]
            v = net.ids[min(int(f2 * (net.n - 1)), net.n - 1)]
            if u == v:
                raise NetworkError("marked pair positions coincide")
            out.append((u, v))
        return out

    rows = []
    fused_nets = []
    marks = []
    for sp, size, net in nets:
        pairs = marked(net)
        flat = [v for p in pairs for v in p]
        if len(set(flat)) < len(flat):
            raise NetworkError("marked points must be distinct")
        fused = fuse_network(net, [list(p) for p in pairs]) if pairs else net
        fused_nets.append(fused)
        marks.append(pairs)

        # commutation: trace to the marked skeleton then fuse, vs fuse directly
        others = [v for v in (net.root, net.ids[net.n // 2]) if v not in set(flat)]
        x = others[0]
        y = others[-1] if len(others) > 1 and others[-1] != x else \
            next(v for v in net.ids if v != x and v not in set(flat))
        V = [x, y] + flat
        traced = trace_network(net, V, 1.0, root=x)
        tf = fuse_network(traced, [list(p) for p in pairs]) if pairs else traced
        r_tf = effective_resistance(tf, x, y)
        r_ft = effective_resistance(fused, x, y)
        rows.append({"label": sp.label(), "n": size,
                     "commutation_residual": abs(r_tf - r_ft),
                     "marked_pairs": [list(p) for p in pairs],
                     "x": x, "y": y, "seed": seed})

    ref_before = _ball_space(nets[-1][2], None, max_ball_points,
                             include=[v for p in marks[-1] for v in p])
    ref_after = _ball_space(fused_nets[-1], None, max_ball_points,
                            include=[min(p, key=nets[-1][2].vertex_index)
                                     for p in marks[-1]])
    for (sp, size, net), fused, pairs, row in zip(nets, fused_nets, marks, rows):
        if net is nets[-1][2]:
            row["ghp_before"] = 0.0
            row["ghp_after"] = 0.0
            continue
        space_b = _ball_space(net, None, max_ball_points,
                              include=[v for p in pairs for v in p])
        mp_b = []
        for p, p_ref in zip(pairs, marks[-1]):
            mp_b.append((p[0], p_ref[0]))
            mp_b.append((p[1], p_ref[1]))
        row["ghp_before"], _ = ghp_search(space_b, ref_before, budget=ghp_budget,
                                          seed=seed, marked_pairs=mp_b)
        reps = [min(p, key=net.vertex_index) for p in pairs]
        reps_ref = [min(p, key=nets[-1][2].vertex_index) for p in marks[-1]]
        space_a = _ball_space(fused, None, max_ball_points, include=reps)
        row["ghp_after"], _ = ghp_search(space_a, ref_after, budget=ghp_budget,
                                         seed=seed,
                                         marked_pairs=list(zip(reps, reps_ref)))
    return rows


# -- report output -------------------------------------------------------------------

def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(row.get(c, "")) for c in columns) + "\n")


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, dict)):
        return '"' + json.dumps(v).replace('"', '""') + '"'
    return str(v)


def write_report(report: ExperimentReport, out_dir, plots: bool = True) -> Path:
    """One directory per plan: report.json plus per-table CSV (and figures).

    CSV bodies contain no timestamps, so identical seeds give identical bytes;
    the provenance block (with the timestamp) lives only in report.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema": "resistkit-report v1",
        "plan": report.plan,
        "growth_proxy": report.growth_proxy,
        "growth_bounded_flag": report.growth_bounded_flag,
        "all_identity_checks_pass": report.all_pass,
        "provenance": report.provenance,
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
    _write_csv(out / "growth.csv", report.growth_rows,
               ["label", "n", "r", "value"])
    _write_csv(out / "moments.csv", report.moment_rows,
               ["label", "n", "functional", "value", "stderr", "seed", "stream"])
    _write_csv(out / "cauchy.csv", report.cauchy_rows,
               ["kind", "from_n", "to_n", "gap", "noise3", "noise3_max"])
    _write_csv(out / "ghp.csv", report.ghp_rows,
               ["label", "n", "r", "points", "ref_points", "surrogate_to_largest"])
    _write_csv(out / "identities.csv", report.identity_rows,
               ["net", "name", "statistic", "threshold", "passed", "kind"])
    if report.fusing_rows:
        _write_csv(out / "fusing.csv", report.fusing_rows,
                   ["label", "n", "commutation_residual", "ghp_before",
                    "ghp_after", "x", "y", "seed"])
    if plots:
        from . import plots as _plots
        _plots.render_report_figures(report, out)
    return out
