"""Exact-event simulation of the continuous-time walk attached to (network, measure).

The walk holds at x for an exponential time with rate (total conductance at x)
divided by mu(x), then jumps to a neighbour with probability proportional to the
edge conductance.  Everything here is driven by counter-based streams from
rng.SimulationConfig, so identical configs give bit-identical output and batches
parallelize across streams without shared state.

Batch estimators advance all samples synchronously with numpy and compact the
alive set as samples finish, which keeps the cost proportional to the total
number of simulated events.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NetworkError
from .network import Network, VertexId
from .rng import SimulationConfig, generator
from .resistance import (effective_resistance, resistance_matrix,
                         resistance_vector, set_resistance)

__all__ = [
    "PathSample", "JumpTable", "simulate_path", "killed_path", "local_times",
    "occupation_measure", "time_change_trace", "sample_states_at_times",
    "estimate_fdd", "sample_hitting", "sample_hit_before",
    "sample_sup_radius_exceeds", "hitting_tail_vs_bounds", "hitting_time_bound",
    "fluctuation_probability", "fluctuation_bound", "path_to_csv",
]


@dataclass(frozen=True)
class PathSample:
    """Piecewise-constant trajectory: jump records (time, vertex) plus a horizon."""

    times: np.ndarray
    vertices: tuple
    horizon: float

    def __post_init__(self):
        if len(self.times) != len(self.vertices) or len(self.times) == 0:
            raise ValueError("times and vertices must align and be nonempty")
        if self.times[0] != 0.0:
            raise ValueError("first jump record must be at time 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("jump times must be strictly increasing")
        if self.times[-1] > self.horizon:
            raise ValueError("last jump time exceeds the horizon")

    @property
    def jumps(self) -> list[tuple[float, VertexId]]:
        return list(zip(self.times.tolist(), self.vertices))

    def state_at(self, t: float) -> VertexId:
        if t < 0 or t > self.horizon:
            raise ValueError("query time outside [0, horizon]")
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.vertices[k]


def path_to_csv(path: PathSample, fh) -> None:
    fh.write("time,vertex\n")
    for t, v in path.jumps:
        fh.write(f"{t!r},{v}\n")


class JumpTable:
    """Sampling tables for the embedded jump chain of a network.

    cum_global stores, for each vertex r, the cumulative jump probabilities
    offset by r, so r + uniform(0,1) searchsorted against it picks the next
    neighbour in one vectorized call.
    """

    def __init__(self, net: Network):
        self.net = net
        self.rates = net.degree_weights() / net.mu
        csr = net.cond
        self.indptr = csr.indptr.copy()
        self.indices = csr.indices.copy()
        cum = np.array(csr.data, dtype=float)
        for r in range(net.n):
            lo, hi = self.indptr[r], self.indptr[r + 1]
            row = np.cumsum(cum[lo:hi])
            row /= row[-1]
            row[-1] = 1.0
            cum[lo:hi] = row + r
        self.cum_global = cum

    def step_states(self, states: np.ndarray, u: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.cum_global, states + u, side="right")
        return self.indices[pos]


def _start_index(net: Network, x0: VertexId) -> int:
    return net.vertex_index(x0)


def simulate_path(net: Network, x0: VertexId, horizon: float,
                  cfg: SimulationConfig) -> PathSample:
    """One exact-event trajectory started at x0 and run until the horizon."""
    if horizon <= 0:
        raise NetworkError("horizon must be positive")
    gen = generator(cfg)
    table = JumpTable(net)
    pos = _start_index(net, x0)
    t = 0.0
    times = [0.0]
    verts = [pos]
    while True:
        hold = gen.standard_exponential() / table.rates[pos]
        if t + hold > horizon:
            break
        t += hold
        u = gen.random()
        pos = int(table.step_states(np.array([pos]), np.array([u]))[0])
        times.append(t)
        verts.append(pos)
    return PathSample(np.array(times), tuple(net.ids[v] for v in verts), horizon)


def killed_path(net: Network, x0: VertexId, A: Iterable[VertexId],
                cfg: SimulationConfig) -> tuple[PathSample, float]:
    """Trajectory stopped at its first entry into A, together with that time.

    Starting inside A returns the trivial path with hitting time 0; on a finite
    connected network the hitting time is almost surely finite, so no horizon
    is needed.
    """
    A = list(dict.fromkeys(A))
    if not A:
        raise NetworkError("target set must be nonempty")
    absorb = np.zeros(net.n, dtype=bool)
    absorb[net.vertex_indices(A)] = True
    gen = generator(cfg)
    table = JumpTable(net)
    pos = _start_index(net, x0)
    t = 0.0
    times = [0.0]
    verts = [pos]
    while not absorb[pos]:
        t += gen.standard_exponential() / table.rates[pos]
        u = gen.random()
        pos = int(table.step_states(np.array([pos]), np.array([u]))[0])
        times.append(t)
        verts.append(pos)
    path = PathSample(np.array(times), tuple(net.ids[v] for v in verts), t)
    return path, t


# -- path functionals --------------------------------------------------------------

def occupation_measure(path: PathSample, t: float) -> dict:
    """Seconds spent at each vertex during [0, t]."""
    if t < 0 or t > path.horizon:
        raise ValueError("query time outside [0, horizon]")
    occ: dict = {}
    times = path.times
    for k, v in enumerate(path.vertices):
        start = times[k]
        if start >= t:
            break
        end = times[k + 1] if k + 1 < len(times) else path.horizon
        occ[v] = occ.get(v, 0.0) + min(end, t) - start
    return occ


def local_times(path: PathSample, mu, t: float) -> dict:
    """Occupation time normalized by the measure: L_t(x) = occ(x, t) / mu(x).

    Satisfies the occupation identity sum_x L_t(x) mu(x) = t exactly up to
    float accumulation.
    """
    occ = occupation_measure(path, t)
    if np.isscalar(mu):
        return {v: o / float(mu) for v, o in occ.items()}
    return {v: o / float(mu[v]) for v, o in occ.items()}


def time_change_trace(net: Network, path: PathSample, V: Sequence[VertexId],
                      nu) -> PathSample:
    """Trace of a trajectory on V under the clock A_t = sum_{x in V} L_t(x) nu(x).

    While the path sits at x in V the traced clock runs at rate nu(x)/mu(x);
    elsewhere it is frozen.  The law of the result matches the walk on
    trace_network(net, V, nu) started at the first V-vertex the path visits.
    """
    V = list(dict.fromkeys(V))
    vset = set(V)
    if np.isscalar(nu):
        nu_of = {v: float(nu) for v in V}
    elif isinstance(nu, dict):
        nu_of = {v: float(nu[v]) for v in V}
    else:
        nu_of = {v: float(x) for v, x in zip(V, np.asarray(nu, dtype=float))}
    if any(x <= 0 for x in nu_of.values()):
        raise NetworkError("trace clock measure must be strictly positive on V")
    if not any(v in vset for v in path.vertices):
        raise NetworkError("path never visits the trace set")
    mu_of = {v: net.mu[net.vertex_index(v)] for v in V}

    clock = 0.0
    out_times: list[float] = []
    out_verts: list = []
    times = path.times
    for k, v in enumerate(path.vertices):
        start = times[k]
        end = times[k + 1] if k + 1 < len(times) else path.horizon
        if v in vset:
            if not out_verts or out_verts[-1] != v:
                out_times.append(clock)
                out_verts.append(v)
            clock += (end - start) * nu_of[v] / mu_of[v]
    return PathSample(np.array(out_times), tuple(out_verts), clock)


# -- batched estimators --------------------------------------------------------------

def sample_states_at_times(net: Network, x0: VertexId, times: Sequence[float],
                           n_samples: int, cfg: SimulationConfig) -> np.ndarray:
    """Vertex indices of n_samples independent walks at the given increasing times."""
    times = list(times)
    if not times:
        raise NetworkError("need at least one query time")
    if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
        raise NetworkError("query times must be nonnegative and strictly increasing")
    gen = generator(cfg)
    table = JumpTable(net)
    pos = np.full(n_samples, _start_index(net, x0), dtype=np.int64)
    tnext = gen.standard_exponential(n_samples) / table.rates[pos]
    out = np.empty((n_samples, len(times)), dtype=np.int64)
    for k, q in enumerate(times):
        active = np.flatnonzero(tnext <= q)
        while active.size:
            u = gen.random(active.size)
            pos[active] = table.step_states(pos[active], u)
            tnext[active] = tnext[active] + \
                gen.standard_exponential(active.size) / table.rates[pos[active]]
            active = active[tnext[active] <= q]
        out[:, k] = pos
    return out


def estimate_fdd(net: Network, x0: VertexId, times: Sequence[float],
                 n_samples: int, cfg: SimulationConfig) -> dict:
    """Empirical joint law of (X_{t_1}, ..., X_{t_K}) as {vertex tuple: frequency}."""
    states = sample_states_at_times(net, x0, times, n_samples, cfg)
    law: dict = {}
    uniq, counts = np.unique(states, axis=0, return_counts=True)
    for row, c in zip(uniq, counts):
        law[tuple(net.ids[i] for i in row)] = c / n_samples
    return law


def sample_hitting(net: Network, x0: VertexId, A: Iterable[VertexId],
                   n_samples: int, cfg: SimulationConfig,
                   local_time_vertex: VertexId | None = None,
                   t_cap: float | None = None):
    """Hitting times of A for a batch of walks from x0.

    Returns (sigma, local) where local is the local time accumulated at
    local_time_vertex up to the hit (or None).  With t_cap set, samples whose
    clock passes t_cap are censored with sigma = +inf, which is enough to
    estimate P(sigma <= t) for t <= t_cap.
    """
    A = list(dict.fromkeys(A))
    if not A:
        raise NetworkError("target set must be nonempty")
    if t_cap is not None and local_time_vertex is not None:
        raise NetworkError("censoring and local-time tracking do not combine")
    absorb = np.zeros(net.n, dtype=bool)
    absorb[net.vertex_indices(A)] = True
    gen = generator(cfg)
    table = JumpTable(net)
    zi = net.vertex_index(local_time_vertex) if local_time_vertex is not None else -1

    pos = np.full(n_samples, _start_index(net, x0), dtype=np.int64)
    t = np.zeros(n_samples)
    sigma = np.full(n_samples, np.inf)
    local = np.zeros(n_samples) if zi >= 0 else None
    if absorb[pos[0]]:
        return np.zeros(n_samples), local
    alive = np.arange(n_samples)
    while alive.size:
        holds = gen.standard_exponential(alive.size) / table.rates[pos[alive]]
        if local is not None:
            at_z = pos[alive] == zi
            if at_z.any():
                local[alive[at_z]] += holds[at_z]
        t[alive] += holds
        if t_cap is not None:
            alive = alive[t[alive] <= t_cap]
            if not alive.size:
                break
        u = gen.random(alive.size)
        pos[alive] = table.step_states(pos[alive], u)
        hit = absorb[pos[alive]]
        if hit.any():
            done = alive[hit]
            sigma[done] = t[done]
            alive = alive[~hit]
    if local is not None:
        local = local / net.mu[zi]
    return sigma, local


def sample_hit_before(net: Network, x: VertexId, z: VertexId,
                      A: Iterable[VertexId], n_samples: int,
                      cfg: SimulationConfig) -> float:
    """Empirical P_x(walk reaches z before entering A)."""
    A = list(dict.fromkeys(A))
    if x in set(A) or z in set(A):
        raise NetworkError("x and z must lie outside A")
    if x == z:
        return 1.0
    absorb = np.zeros(net.n, dtype=bool)
    absorb[net.vertex_indices(A)] = True
    zi = net.vertex_index(z)
    gen = generator(cfg)
    table = JumpTable(net)
    pos = np.full(n_samples, _start_index(net, x), dtype=np.int64)
    won = np.zeros(n_samples, dtype=bool)
    alive = np.arange(n_samples)
    # the event {reach z before A} only involves the embedded jump chain
    while alive.size:
        u = gen.random(alive.size)
        pos[alive] = table.step_states(pos[alive], u)
        reached = pos[alive] == zi
        won[alive[reached]] = True
        stopped = reached | absorb[pos[alive]]
        alive = alive[~stopped]
    return float(won.mean())


def sample_sup_radius_exceeds(net: Network, x: VertexId, eps: float, t: float,
                              n_samples: int, cfg: SimulationConfig) -> float:
    """Empirical P_x(sup_{s <= t} R(x, X_s) >= eps)."""
    if t < 0:
        raise NetworkError("time must be nonnegative")
    dist = resistance_vector(net, x)
    gen = generator(cfg)
    table = JumpTable(net)
    pos = np.full(n_samples, _start_index(net, x), dtype=np.int64)
    best = np.zeros(n_samples)
    if t == 0:
        return float((best >= eps).mean())
    tnext = gen.standard_exponential(n_samples) / table.rates[pos]
    active = np.flatnonzero(tnext <= t)
    while active.size:
        u = gen.random(active.size)
        pos[active] = table.step_states(pos[active], u)
        np.maximum.at(best, active, dist[pos[active]])
        tnext[active] = tnext[active] + \
            gen.standard_exponential(active.size) / table.rates[pos[active]]
        active = active[tnext[active] <= t]
    return float((best >= eps).mean())



# -- hitting-time tail bounds -----------------------------------------------------

def _open_ball_mass(net: Network, x: VertexId, delta: float) -> float:
    dist = resistance_vector(net, x)
    return float(net.mu[dist < delta].sum())


def _resolve_target(net: Network, x: VertexId, target):
    """Normalize a target spec into (A_ids, R(x, A), kind)."""
    kind = target[0]
    if kind == "set":
        A = list(dict.fromkeys(target[1]))
        if x in set(A):
            raise NetworkError("x must lie outside the target set")
        return A, set_resistance(net, [x], A), kind
    if kind == "ball":
        _, y, eps = target
        dist = resistance_vector(net, y)
        A = [net.ids[i] for i in np.flatnonzero(dist <= eps)]
        if x in set(A):
            raise NetworkError("x must lie outside the closed ball")
        return A, set_resistance(net, [x], A), kind
    if kind == "complement":
        _, r = target
        dist = resistance_vector(net, x)
        out = np.flatnonzero(dist >= r)
        A = [net.ids[i] for i in out]
        RA = set_resistance(net, [x], A) if A else math.inf
        return A, RA, kind
    raise NetworkError(f"unknown target kind {kind!r}")


def hitting_time_bound(net: Network, x: VertexId, target, t: float,
                       delta: float) -> float:
    """Tail bound on P_x(hit target by time t) for the three supported targets.

    ("set", A): 2 * [1 - ((R-d)/(R+d)) * exp(-2t / (mu(B(x,d)) (R-d)))],
        valid for d in (0, R(x,A)).
    ("ball", y, eps): 4 * [d/(R(x,y)-2 eps) + t/(mu(B(x,d)) (R(x,y)-2 eps-d))],
        valid for eps in (0, R(x,y)/2), d in (0, R(x,y)-2 eps).
    ("complement", r): same shape with R(x, complement of the open r-ball);
        an empty complement gives bound 0.
    """
    if t < 0:
        raise NetworkError("time must be nonnegative")
    kind = target[0]
    if kind == "set":
        A, RA, _ = _resolve_target(net, x, target)
        if not 0 < delta < RA:
            raise NetworkError(f"delta must lie in (0, R(x,A)) = (0, {RA:g})")
        m = _open_ball_mass(net, x, delta)
        return 2.0 * (1.0 - ((RA - delta) / (RA + delta))
                      * math.exp(-2.0 * t / (m * (RA - delta))))
    if kind == "ball":
        _, y, eps = target
        Rxy = effective_resistance(net, x, y)
        if not 0 < eps < Rxy / 2:
            raise NetworkError(f"eps must lie in (0, R(x,y)/2) = (0, {Rxy / 2:g})")
        if not 0 < delta < Rxy - 2 * eps:
            raise NetworkError(f"delta must lie in (0, R(x,y) - 2 eps) = (0, {Rxy - 2 * eps:g})")
        m = _open_ball_mass(net, x, delta)
        return 4.0 * (delta / (Rxy - 2 * eps)
                      + t / (m * (Rxy - 2 * eps - delta)))
    if kind == "complement":
        A, RA, _ = _resolve_target(net, x, target)
        if not A:
            return 0.0
        if not 0 < delta < RA:
            raise NetworkError(f"delta must lie in (0, R(x, complement)) = (0, {RA:g})")
        m = _open_ball_mass(net, x, delta)
        return 4.0 * (delta / RA + t / (m * (RA - delta)))
    raise NetworkError(f"unknown target kind {kind!r}")


@dataclass(frozen=True)
class BoundComparison:
    empirical: float
    stderr: float
    bound: float
    n_samples: int

    @property
    def satisfied(self) -> bool:
        return self.empirical <= self.bound + 3 * self.stderr


def hitting_tail_vs_bounds(net: Network, x: VertexId, target, t: float,
                           delta: float, cfg: SimulationConfig,
                           n_samples: int | None = None) -> BoundComparison:
    """Empirical P_x(hit target by t) next to its analytic tail bound."""
    n = n_samples or cfg.n_samples
    bound = hitting_time_bound(net, x, target, t, delta)
    A, _, _ = _resolve_target(net, x, target)
    if not A:
        return BoundComparison(0.0, 0.0, bound, n)
    if t == 0:
        return BoundComparison(0.0, 0.0, bound, n)
    sigma, _ = sample_hitting(net, x, A, n, cfg, t_cap=t)
    p = float((sigma <= t).mean())
    return BoundComparison(p, math.sqrt(max(p * (1 - p), 1.0 / n) / n), bound, n)


def fluctuation_bound(net: Network, eps: float, t: float,
                      delta: float | None = None) -> float:
    """Uniform bound on P_x(sup_{s<=t} R(x, X_s) >= eps) via an eps/4-net.

    Equals 32 * N(eps/4) / eps * (delta + t / min_x mu(B(x, delta))) with
    delta in (0, eps/8]; N is the greedy covering-net size, an upper bound for
    the minimal one, which is all the estimate needs.
    """
    from .mmspace import greedy_epsilon_net
    if eps <= 0:
        raise NetworkError("eps must be positive")
    if delta is None:
        delta = eps / 8
    if not 0 < delta <= eps / 8:
        raise NetworkError("delta must lie in (0, eps/8]")
    R = resistance_matrix(net).values
    n_net = len(greedy_epsilon_net(R, eps / 4))
    min_mass = min(float(net.mu[R[i] < delta].sum()) for i in range(net.n))
    return 32.0 * n_net / eps * (delta + t / min_mass)


def fluctuation_probability(net: Network, x: VertexId, eps: float, t: float,
                            cfg: SimulationConfig, n_samples: int | None = None,
                            delta: float | None = None) -> BoundComparison:
    """Empirical sup-fluctuation probability next to the covering-net bound."""
    n = n_samples or cfg.n_samples
    bound = fluctuation_bound(net, eps, t, delta)
    p = sample_sup_radius_exceeds(net, x, eps, t, n, cfg)
    return BoundComparison(p, math.sqrt(max(p * (1 - p), 1.0 / n) / n), bound, n)
