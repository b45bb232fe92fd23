"""Generators for the example network families, with exact seeding.

Families: the half-line-with-trap family (a segment plus auxiliary vertices
hanging off the origin on high-resistance edges, in a linear and a square-root
variant), critical Galton-Watson trees conditioned on their size, the largest
component of the critical Erdos-Renyi graph, the range graph of a transient
lattice walk with its cut-times, Sierpinski gasket approximations, and a
generic random connected network for property sweeps.  Every generator is a
pure function of (parameters, seed).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .errors import GenerationBudgetError, NetworkError
from .network import Network
from .rng import SimulationConfig, generator

GASKET_MAX_LEVEL = 10


# -- half-line plus trap vertices (linear / sqrt variants) -------------------------

def figure1_family(n: int, variant: str = "linear") -> Network:
    """Segment {0..n} with unit-resistance edges plus auxiliary vertices at the origin.

    Each auxiliary vertex hangs off vertex 0 on an edge of resistance n; the
    linear variant attaches n of them, the sqrt variant floor(sqrt(n)).  All
    vertex masses are one and the root is 0.  The linear variant has bounded
    resistance growth from the root (the profile plateaus at 1); the sqrt
    variant's growth diverges.
    """
    if n < 1:
        raise NetworkError("n must be >= 1")
    if variant not in ("linear", "sqrt"):
        raise NetworkError(f"unknown variant {variant!r}")
    k = n if variant == "linear" else math.isqrt(n)
    line = np.arange(n)
    aux = n + 1 + np.arange(k)
    rows = np.concatenate([line, np.zeros(k, dtype=int)])
    cols = np.concatenate([line + 1, aux])
    data = np.concatenate([np.ones(n), np.full(k, 1.0 / n)])
    nv = n + 1 + k
    cond = sp.csr_matrix((np.concatenate([data, data]),
                          (np.concatenate([rows, cols]),
                           np.concatenate([cols, rows]))), shape=(nv, nv))
    return Network(range(nv), cond, 1.0, 0)


# -- conditioned Galton-Watson trees ----------------------------------------------

_OFFSPRING = {
    "geometric": lambda gen, size: gen.geometric(0.5, size) - 1,
    "poisson": lambda gen, size: gen.poisson(1.0, size),
    "binary": lambda gen, size: 2 * gen.integers(0, 2, size),
}


def gw_tree_conditioned(law: str, size: int, seed: int,
                        max_attempts: int = 100_000) -> Network:
    """Critical Galton-Watson tree conditioned to have exactly `size` vertices.

    Samples i.i.d. offspring counts, rejects until they sum to size - 1, and
    rotates the increment sequence at its first minimum so the depth-first
    walk stays nonnegative until its final step (the cycle lemma gives a
    unique such rotation, making the draw uniform under the conditioned law).
    Unit edge resistances, unit masses, root 0.
    """
    if law not in _OFFSPRING:
        raise NetworkError(f"unsupported offspring law {law!r}; "
                           f"choose from {sorted(_OFFSPRING)}")
    if size < 2:
        raise NetworkError("conditioned trees need size >= 2 to form a network")
    if law == "binary" and size % 2 == 0:
        raise NetworkError("the binary-uniform law only realizes odd sizes")
    gen = generator(SimulationConfig(seed=seed))
    draw = _OFFSPRING[law]
    for _ in range(max_attempts):
        xi = draw(gen, size)
        if xi.sum() == size - 1:
            break
    else:
        raise GenerationBudgetError(
            f"no size-{size} sample in {max_attempts} attempts; retry with a new seed")
    steps = xi - 1
    walk = np.cumsum(steps)
    pivot = int(np.argmin(walk)) + 1
    xi = np.concatenate([xi[pivot:], xi[:pivot]])

    edges = []
    stack = [0]
    next_id = 1
    for c in xi:
        node = stack.pop()
        kids = list(range(next_id, next_id + c))
        next_id += c
        for kid in kids:
            edges.append((node, kid, 1.0))
        stack.extend(reversed(kids))
    return Network.from_edges(edges, mu=1.0, root=0, ids=range(size))


# -- critical Erdos-Renyi largest component ----------------------------------------

@dataclass(frozen=True)
class ERComponent:
    """Largest component of G(n, p) at criticality, with its surplus edges."""

    network: Network
    surplus_edges: tuple
    n: int
    p: float
    seed: int

    @property
    def surplus(self) -> int:
        return self.network.n_edges - self.network.n + 1


def _sample_gnp_edges(n: int, p: float, gen) -> np.ndarray:
    """Skip-sampled edge list of G(n, p); O(#edges) work."""
    total = n * (n - 1) // 2
    if p >= 1.0:
        idx = np.arange(total)
    elif p <= 0.0:
        idx = np.array([], dtype=np.int64)
    else:
        picks = []
        log1mp = math.log1p(-p)
        t = -1
        while True:
            u = gen.random()
            t += 1 + int(math.log(max(u, 1e-300)) / log1mp)
            if t >= total:
                break
            picks.append(t)
        idx = np.array(picks, dtype=np.int64)
    offsets = np.cumsum(np.concatenate(([0], np.arange(n - 1, 0, -1))))
    i = np.searchsorted(offsets, idx, side="right") - 1
    j = idx - offsets[i] + i + 1
    return np.stack([i, j], axis=1)


def critical_er_graph(n: int, lam: float, seed: int) -> ERComponent:
    """Largest component of G(n, p) with p = 1/n + lam * n^(-4/3).

    Unit conductances, unit masses, root at the smallest vertex id.  The
    surplus edges (those outside a breadth-first spanning tree) are reported
    as the natural marked pairs for fusing experiments.
    """
    if n < 2:
        raise NetworkError("n must be >= 2")
    p = min(1.0, max(0.0, 1.0 / n + lam * n ** (-4.0 / 3.0)))
    gen = generator(SimulationConfig(seed=seed))
    edges = _sample_gnp_edges(n, p, gen)
    if edges.size == 0:
        raise GenerationBudgetError("no edges retained; retry with a new seed")
    adj = sp.csr_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])),
                        shape=(n, n))
    adj = adj + adj.T
    ncomp, labels = connected_components(adj, directed=False)
    sizes = np.bincount(labels)
    big = int(np.argmax(sizes))
    members = np.flatnonzero(labels == big)
    if members.size < 2:
        raise GenerationBudgetError(
            "largest component is a single vertex; retry with a new seed")
    keep = np.isin(edges[:, 0], members) & np.isin(edges[:, 1], members)
    comp_edges = edges[keep]
    net = Network.from_edges(
        [(int(u), int(v), 1.0) for u, v in comp_edges],
        mu=1.0, root=int(members.min()), ids=[int(v) for v in members])

    order, pred = breadth_first_order(net.cond, net.root_index, directed=False)
    tree = {frozenset((net.ids[v], net.ids[pred[v]]))
            for v in order if pred[v] >= 0}
    surplus = tuple((int(u), int(v)) for u, v in comp_edges
                    if frozenset((int(u), int(v))) not in tree)
    return ERComponent(net, surplus, n, p, seed)


# -- range of a transient lattice walk ---------------------------------------------

@dataclass(frozen=True)
class RangeGraph:
    """Range graph of a lattice walk with its (horizon-censored) cut-times."""

    network: Network
    cut_times: tuple
    censored: tuple          # parallel to cut_times; True means horizon-limited
    positions: np.ndarray    # (steps+1, d) walk positions
    below_transient_dim: bool = False

    def cut_points(self) -> list:
        return [tuple(self.positions[t + 1]) for t in self.cut_times]


def srw_range_graph(d: int, steps: int, seed: int,
                    coin_sequence=None) -> RangeGraph:
    """Graph spanned by a simple random walk on Z^d with unit edge resistances.

    Vertices are the visited lattice points (as coordinate tuples), edges the
    traversed steps, masses one, root the origin.  A time t is a cut-time when
    the sites visited up to t and strictly after t are disjoint within the
    horizon; every reported cut-time is flagged censored because later steps
    could still revoke it.  coin_sequence injects a deterministic step stream
    for tests.
    """
    if steps < 1:
        raise NetworkError("steps must be >= 1")
    if d < 1:
        raise NetworkError("dimension must be >= 1")
    if d < 5:
        warnings.warn("cut-time asymptotics expect dimension >= 5", stacklevel=2)
    if coin_sequence is not None:
        coins = np.asarray(coin_sequence, dtype=int)
        if coins.shape != (steps,) or coins.min() < 0 or coins.max() >= 2 * d:
            raise NetworkError("coin_sequence must hold `steps` values in [0, 2d)")
    else:
        coins = generator(SimulationConfig(seed=seed)).integers(0, 2 * d, steps)
    moves = np.zeros((steps, d), dtype=np.int64)
    axis = coins // 2
    sign = np.where(coins % 2 == 0, 1, -1)
    moves[np.arange(steps), axis] = sign
    pos = np.zeros((steps + 1, d), dtype=np.int64)
    pos[1:] = np.cumsum(moves, axis=0)

    site_ids: dict = {}
    visit_site = np.empty(steps + 1, dtype=np.int64)
    for t in range(steps + 1):
        key = tuple(int(c) for c in pos[t])
        visit_site[t] = site_ids.setdefault(key, len(site_ids))

    blocked = np.zeros(steps + 1, dtype=bool)
    last_seen: dict = {}
    for t in range(steps + 1):
        s = visit_site[t]
        if s in last_seen:
            blocked[last_seen[s]:t] = True
        last_seen[s] = t
    cut_times = tuple(int(t) for t in np.flatnonzero(~blocked[:steps]))

    edge_keys = {}
    for t in range(steps):
        a, b = int(visit_site[t]), int(visit_site[t + 1])
        edge_keys[(min(a, b), max(a, b))] = None
    ids = list(site_ids)
    edges = [(ids[a], ids[b], 1.0) for a, b in edge_keys]
    net = Network.from_edges(edges, mu=1.0, root=ids[0], ids=ids)
    return RangeGraph(net, cut_times, tuple(True for _ in cut_times), pos,
                      below_transient_dim=d < 5)


def cut_time_ratios(rg: RangeGraph) -> list[dict]:
    """Per-cut-time ratios T_k/k, R(0,C_k)/k, d_graph(0,C_k)/k, |range(T_k)|/k.

    Cut points are cut vertices, so resistance and graph distance to the k-th
    cut point add up over the walk segments between consecutive cut points;
    each segment is solved on its own small subgraph.
    """
    from .resistance import effective_resistance
    pos = rg.positions
    steps = pos.shape[0] - 1
    first_new = np.zeros(steps + 1, dtype=bool)
    seen: set = set()
    for t in range(steps + 1):
        key = tuple(int(c) for c in pos[t])
        if key not in seen:
            seen.add(key)
            first_new[t] = True
    range_size = np.cumsum(first_new)

    rows = []
    res_acc = 0.0
    dist_acc = 0
    prev_t = 0
    prev_site = tuple(int(c) for c in pos[0])
    for k, t in enumerate(rg.cut_times, start=1):
        end_site = tuple(int(c) for c in pos[t + 1]) if t + 1 <= steps else prev_site
        seg = pos[prev_t:t + 2]
        seg_ids = []
        seen_seg: dict = {}
        for row in seg:
            key = tuple(int(c) for c in row)
            if key not in seen_seg:
                seen_seg[key] = None
                seg_ids.append(key)
        edge_keys = {}
        for a, b in zip(seg[:-1], seg[1:]):
            ka, kb = tuple(int(c) for c in a), tuple(int(c) for c in b)
            edge_keys[frozenset((ka, kb))] = (ka, kb)
        if len(seg_ids) == 2:
            # single traversed edge between consecutive cut points
            res_acc += 1.0
            dist_acc += 1
        elif len(seg_ids) > 2:
            seg_net = Network.from_edges(
                [(u, v, 1.0) for u, v in edge_keys.values()],
                mu=1.0, root=prev_site, ids=seg_ids)
            res_acc += effective_resistance(seg_net, prev_site, end_site)
            dist_acc += _graph_distance(seg_net, prev_site, end_site)
        rows.append({
            "k": k, "T_k": t,
            "T_over_k": t / k,
            "resistance_over_k": res_acc / k,
            "graph_distance_over_k": dist_acc / k,
            "range_over_k": int(range_size[min(t, steps)]) / k,
        })
        prev_t = t + 1
        prev_site = end_site
    return rows


def _graph_distance(net: Network, x, y) -> int:
    from scipy.sparse.csgraph import shortest_path
    dist = shortest_path(net.cond != 0, method="D", unweighted=True,
                         indices=net.vertex_index(x))
    return int(dist[net.vertex_index(y)])


# -- Sierpinski gasket approximations ----------------------------------------------

def gasket_graph(level: int) -> Network:
    """Level-k triangular gasket graph with unit conductances and unit masses.

    Level 0 is a triangle; each level subdivides every triangle into three
    corner copies.  The root is the corner at the origin.  Levels beyond
    GASKET_MAX_LEVEL are refused to keep memory bounded.
    """
    if level < 0:
        raise NetworkError("level must be >= 0")
    if level > GASKET_MAX_LEVEL:
        raise NetworkError(f"level capped at {GASKET_MAX_LEVEL}")
    side = 2 ** level
    corners = [(0, 0), (side, 0), (0, side)]
    edge_set: dict = {}

    stack = [tuple(corners)]
    while stack:
        a, b, c = stack.pop()
        if max(abs(a[0] - b[0]), abs(a[1] - b[1]),
               abs(a[0] - c[0]), abs(a[1] - c[1])) == 1:
            for u, v in ((a, b), (b, c), (a, c)):
                edge_set[frozenset((u, v))] = (u, v)
            continue
        mab = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
        mbc = ((b[0] + c[0]) // 2, (b[1] + c[1]) // 2)
        mac = ((a[0] + c[0]) // 2, (a[1] + c[1]) // 2)
        stack.append((a, mab, mac))
        stack.append((mab, b, mbc))
        stack.append((mac, mbc, c))

    ids: dict = {}
    for u, v in edge_set.values():
        ids.setdefault(u, None)
        ids.setdefault(v, None)
    edges = [(u, v, 1.0) for u, v in edge_set.values()]
    return Network.from_edges(edges, mu=1.0, root=(0, 0), ids=list(ids))


# -- generic random corpus ----------------------------------------------------------

def random_connected_network(n: int, seed: int, extra_edge_prob: float = 0.15,
                             unit: bool = False) -> Network:
    """Random connected network: random tree plus a few chords.

    Conductances and masses are uniform in [0.5, 2.0] unless unit=True, which
    gives the unit-conductance, unit-mass variant.  Root is vertex 0.
    """
    if n < 2:
        raise NetworkError("n must be >= 2")
    gen = generator(SimulationConfig(seed=seed, stream=7))
    edges = {}
    for v in range(1, n):
        u = int(gen.integers(0, v))
        edges[(u, v)] = None
    n_extra = gen.binomial(max(n * (n - 1) // 2 - (n - 1), 0),
                           min(extra_edge_prob * 2.0 / max(n - 1, 1), 1.0))
    for _ in range(int(n_extra)):
        u = int(gen.integers(0, n))
        v = int(gen.integers(0, n))
        if u != v:
            edges[(min(u, v), max(u, v))] = None
    conds = np.ones(len(edges)) if unit else gen.uniform(0.5, 2.0, len(edges))
    mu = np.ones(n) if unit else gen.uniform(0.5, 2.0, n)
    return Network.from_edges(
        [(u, v, c) for (u, v), c in zip(edges, conds)],
        mu=mu, root=0, ids=range(n))


# -- CLI-facing ensemble specs --------------------------------------------------------

@dataclass(frozen=True)
class EnsembleSpec:
    """Parsed generator spec: family tag, parameters, and a seed."""

    family: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        if self.seed is not None:
            inner += f",seed={self.seed}"
        return f"{self.family}:{inner}"


_FAMILIES = ("fig1", "gw", "er", "range", "gasket", "random")
_NEEDS_SEED = {"gw", "er", "range", "random"}


def parse_spec(text: str) -> EnsembleSpec:
    """Parse strings like 'fig1:n=1000,variant=sqrt' or 'gw:law=geom,size=500,seed=7'."""
    family, _, rest = text.partition(":")
    family = family.strip()
    if family not in _FAMILIES:
        raise NetworkError(f"unknown ensemble family {family!r}")
    params: dict = {}
    seed = None
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            val = val.strip()
            if not key or not val:
                raise NetworkError(f"bad spec item {item!r}")
            if key == "seed":
                seed = int(val)
            elif key in ("variant", "law"):
                params[key] = val
            elif key == "lambda":
                params["lam"] = float(val)
            else:
                params[key] = int(val)
    if family in _NEEDS_SEED and seed is None:
        raise NetworkError(f"family {family!r} needs an explicit seed")
    return EnsembleSpec(family, params, seed)


def generate(spec: EnsembleSpec) -> Network:
    """Network for a spec (rich per-family extras via the family functions)."""
    p = dict(spec.params)
    if spec.family == "fig1":
        return figure1_family(p["n"], p.get("variant", "linear"))
    if spec.family == "gw":
        law = {"geom": "geometric"}.get(p.get("law", "geometric"),
                                        p.get("law", "geometric"))
        return gw_tree_conditioned(law, p["size"], spec.seed)
    if spec.family == "er":
        return critical_er_graph(p["n"], p.get("lam", 0.0), spec.seed).network
    if spec.family == "range":
        return srw_range_graph(p.get("d", 5), p["steps"], spec.seed).network
    if spec.family == "gasket":
        return gasket_graph(p["level"])
    if spec.family == "random":
        return random_connected_network(p["n"], spec.seed)
    raise NetworkError(f"unknown ensemble family {spec.family!r}")


def spec_size(spec: EnsembleSpec) -> int:
    """Nominal size parameter used to order a convergence sequence."""
    p = spec.params
    return {"fig1": p.get("n", 0), "gw": p.get("size", 0), "er": p.get("n", 0),
            "range": p.get("steps", 0), "gasket": 3 ** p.get("level", 0),
            "random": p.get("n", 0)}[spec.family]
