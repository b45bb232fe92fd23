"""Finite pointed measured metric spaces and their restrictions.

The bridge from networks: the metric is the matrix of pairwise effective
resistances, the weights are the speed measure, and the root carries over.
Spaces may carry an embedding into a common host space R^d (the spatial
variant).  Restriction to closed balls around the root is what the vague
comparison of unbounded sequences works through; radii that slice exactly
through points are reported so callers can perturb them.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NetworkError
from .network import Network
from .resistance import resistance_matrix, triangle_defect
from .rng import SimulationConfig, generator

EXACT_MOMENT_CAP = 10 ** 6


@dataclass(frozen=True)
class FiniteMMSpace:
    """Pointed measured finite metric space, optionally embedded in R^d."""

    ids: tuple
    metric: np.ndarray
    weights: np.ndarray
    root: object
    embedding: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.ids)
        if self.metric.shape != (n, n):
            raise ValueError("metric shape does not match point count")
        if self.weights.shape != (n,):
            raise ValueError("weights length does not match point count")
        if self.root not in self.ids:
            raise ValueError(f"root {self.root!r} is not a point")
        if np.any(self.weights < 0) or self.weights.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive total")
        if self.embedding is not None and self.embedding.shape[0] != n:
            raise ValueError("embedding must cover every point")

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def root_index(self) -> int:
        return self.ids.index(self.root)

    def point_index(self, v) -> int:
        return self.ids.index(v)

    def validate_metric(self, atol: float = 1e-9) -> None:
        D = self.metric
        if np.abs(np.diag(D)).max() > atol:
            raise ValueError("metric diagonal must be zero")
        if np.abs(D - D.T).max() > atol:
            raise ValueError("metric must be symmetric")
        if D.min() < -atol:
            raise ValueError("metric must be nonnegative")
        if triangle_defect(D) > atol:
            raise ValueError("triangle inequality violated")

    def normalized_weights(self) -> np.ndarray:
        return self.weights / self.weights.sum()


def from_network(net: Network, embedding=None) -> FiniteMMSpace:
    """Resistance metric space of a network: metric R, weights mu, same root."""
    R = resistance_matrix(net)
    emb = None
    if embedding is not None:
        if isinstance(embedding, dict):
            emb = np.array([np.atleast_1d(np.asarray(embedding[v], dtype=float))
                            for v in net.ids])
        else:
            emb = np.asarray(embedding, dtype=float)
            if emb.ndim == 1:
                emb = emb[:, None]
    return FiniteMMSpace(net.ids, R.values, net.mu.copy(), net.root, emb)


def ball_boundary_ties(space: FiniteMMSpace, r: float,
                       tol: float = 1e-12) -> list:
    """Points whose distance to the root equals r up to tol."""
    d = space.metric[space.root_index]
    scale = max(1.0, abs(r))
    return [space.ids[i] for i in np.flatnonzero(np.abs(d - r) <= tol * scale)]


def restrict_ball(space: FiniteMMSpace, r: float) -> FiniteMMSpace:
    """Restriction to the closed ball of radius r around the root.

    The root always survives (r >= 0).  Points sitting exactly at distance r
    trigger a warning, since the restriction is then unstable under
    perturbations of r.
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    ties = ball_boundary_ties(space, r)
    if ties:
        warnings.warn(f"points at distance exactly {r:g} from the root: {ties}; "
                      "consider perturbing the radius", stacklevel=2)
    keep = np.flatnonzero(space.metric[space.root_index] <= r)
    emb = space.embedding[keep] if space.embedding is not None else None
    return FiniteMMSpace(tuple(space.ids[i] for i in keep),
                         space.metric[np.ix_(keep, keep)],
                         space.weights[keep], space.root, emb)


def gromov_weak_moment(space: FiniteMMSpace, K: int,
                       f: Callable[[np.ndarray], float],
                       cfg: SimulationConfig | None = None,
                       n_samples: int | None = None,
                       exact_cap: int = EXACT_MOMENT_CAP) -> float:
    """Moment of f over K points sampled from the normalized weights, plus the root.

    f receives the K(K+1)/2 pairwise distances among (x_0 = root, x_1, ..., x_K)
    in row-major upper-triangle order.  Exact summation when n^K fits under
    exact_cap, Monte Carlo otherwise (cfg required then).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    w = space.normalized_weights()
    n = space.n
    ri = space.root_index

    def distances_for(idx: np.ndarray) -> np.ndarray:
        pts = np.concatenate(([ri], idx))
        pairs = [space.metric[pts[a], pts[b]]
                 for a in range(K + 1) for b in range(a + 1, K + 1)]
        return np.array(pairs)

    if n ** K <= exact_cap and n_samples is None:
        total = 0.0
        for combo in itertools.product(range(n), repeat=K):
            idx = np.array(combo)
            total += float(f(distances_for(idx))) * float(np.prod(w[idx]))
        return total
    if cfg is None:
        raise ValueError("Monte-Carlo moment needs a SimulationConfig")
    m = n_samples or cfg.n_samples
    gen = generator(cfg)
    draws = gen.choice(n, size=(m, K), p=w)
    vals = np.fromiter((f(distances_for(draws[i])) for i in range(m)),
                       dtype=float, count=m)
    return float(vals.mean())


def greedy_epsilon_net(D: np.ndarray, eps: float) -> list[int]:
    """Greedy farthest-point covering net: open eps-balls at the centers cover all.

    Deterministic: starts from index 0, always picks the uncovered point
    farthest from the chosen centers (lowest index on ties).  The result upper
    bounds the minimal net size.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = D.shape[0]
    centers = [0]
    mind = D[0].copy()
    while mind.max() >= eps:
        nxt = int(np.argmax(mind))
        centers.append(nxt)
        mind = np.minimum(mind, D[nxt])
    return centers


def coarsen_space(space: FiniteMMSpace, max_points: int) -> FiniteMMSpace:
    """Farthest-point coarsening: keep up to max_points centers, push weights
    to the nearest center (ties to the earlier center).  Root is always kept."""
    if max_points < 1:
        raise ValueError("max_points must be >= 1")
    if space.n <= max_points:
        return space
    D = space.metric
    centers = [space.root_index]
    mind = D[space.root_index].copy()
    while len(centers) < max_points:
        nxt = int(np.argmax(mind))
        if mind[nxt] == 0:
            break
        centers.append(nxt)
        mind = np.minimum(mind, D[nxt])
    centers = sorted(centers)
    assign = np.argmin(D[np.ix_(centers, range(space.n))], axis=0)
    wts = np.zeros(len(centers))
    np.add.at(wts, assign, space.weights)
    emb = space.embedding[centers] if space.embedding is not None else None
    return FiniteMMSpace(tuple(space.ids[i] for i in centers),
                         D[np.ix_(centers, centers)], wts, space.root, emb)


def resistance_growth_profile(nets: Sequence[Network], radii: Sequence[float],
                              n0: int | None = None):
    """Table of R_n(root, complement of open ball of radius r) over (net, r).

    Returns (rows, proxy): rows are dicts with n, r, value; proxy maps each
    radius to the max of the tabled values over the tail nets (index >= n0,
    default the second half), a finite stand-in for limsup over n followed by
    r -> infinity.  A profile that plateaus as r grows flags bounded
    resistance growth; divergence supports the non-explosion condition.
    """
    from .resistance import ball_complement_resistance
    radii = list(radii)
    if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be positive and strictly increasing")
    if n0 is None:
        n0 = len(nets) // 2
    rows = []
    for k, net in enumerate(nets):
        for r in radii:
            rows.append({"index": k, "n": net.n, "r": r,
                         "value": ball_complement_resistance(net, net.root, r)})
    proxy = {}
    for r in radii:
        tail = [row["value"] for row in rows if row["r"] == r and row["index"] >= n0]
        proxy[r] = max(tail) if tail else float("nan")
    return rows, proxy


def growth_condition_flag(proxy: dict, plateau_rel_gain: float = 0.05) -> bool:
    """True when the growth profile looks bounded (the non-explosion diagnostic fails).

    Compares the proxy at the largest radius against the value at half that
    radius; relative gain below plateau_rel_gain reads as a plateau.
    """
    radii = sorted(r for r, v in proxy.items() if np.isfinite(v))
    if len(radii) < 2:
        return False
    r_max = radii[-1]
    r_half = min(radii, key=lambda r: abs(r - r_max / 2))
    if r_half == r_max:
        return False
    gain = proxy[r_max] - proxy[r_half]
    return bool(gain <= plateau_rel_gain * max(proxy[r_max], 1e-300))


# -- file schema -----------------------------------------------------------------
#
# mmspace v1
# point <id> <mass> [<coord> ...]
# dist <id> <id> <value>        (upper triangle)
# root <id>

def write_mmspace(space: FiniteMMSpace, path) -> None:
    from .network import _encode_id
    lines = ["mmspace v1"]
    for i, v in enumerate(space.ids):
        coords = ""
        if space.embedding is not None:
            coords = " " + " ".join(repr(float(c)) for c in space.embedding[i])
        lines.append(f"point {_encode_id(v)} {float(space.weights[i])!r}{coords}")
    for i in range(space.n):
        for j in range(i + 1, space.n):
            lines.append(f"dist {_encode_id(space.ids[i])} {_encode_id(space.ids[j])} "
                         f"{float(space.metric[i, j])!r}")
    lines.append(f"root {_encode_id(space.root)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mmspace(path) -> FiniteMMSpace:
    from .network import _decode_id
    ids: list = []
    masses: list = []
    coords: list = []
    dists: dict = {}
    root = None
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != "mmspace v1":
        raise NetworkError("expected 'mmspace v1' header")
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "point":
            v = _decode_id(parts[1])
            if v in set(ids):
                raise NetworkError(f"duplicate point {v!r}")
            ids.append(v)
            masses.append(float(parts[2]))
            coords.append([float(x) for x in parts[3:]])
        elif parts[0] == "dist":
            u, v = _decode_id(parts[1]), _decode_id(parts[2])
            key = frozenset((u, v))
            if key in dists:
                raise NetworkError(f"duplicate distance {u!r} {v!r}")
            dists[key] = float(parts[3])
        elif parts[0] == "root":
            if root is not None:
                raise NetworkError("duplicate root line")
            root = _decode_id(parts[1])
        else:
            raise NetworkError(f"unknown record {parts[0]!r}")
    if root is None:
        raise NetworkError("missing root line")
    n = len(ids)
    index = {v: i for i, v in enumerate(ids)}
    D = np.zeros((n, n))
    for key, val in dists.items():
        u, v = tuple(key)
        if u not in index or v not in index:
            raise NetworkError(f"distance references unknown point in {key}")
        D[index[u], index[v]] = D[index[v], index[u]] = val
    dims = {len(c) for c in coords}
    emb = None
    if dims == {0}:
        emb = None
    elif len(dims) == 1:
        emb = np.array(coords)
    else:
        raise NetworkError("inconsistent embedding dimensions")
    return FiniteMMSpace(tuple(ids), D, np.array(masses), root, emb)
