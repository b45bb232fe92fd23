"""Effective resistance, Schur-complement trace, fusing, and the resistance metric.

Effective resistances come from symmetric positive-definite solves on the grounded
conductance Laplacian (ground one endpoint, or the whole boundary set); this is
numerically stable and lets one factorization serve a whole boundary set.  Trees
get an O(n) path-sum fast path.  Dense all-pairs routines are capped at
DENSE_CAP vertices; larger inputs either use the tree fast path or a sparse
factorization with per-column solves.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NetworkError, NotRealizableError, RealizabilityWarning
from .network import Network, VertexId, _as_measure

DENSE_CAP = 4096


@dataclass(frozen=True)
class ResistanceMatrix:
    """Symmetric matrix of pairwise effective resistances; a finite metric."""

    ids: tuple
    values: np.ndarray

    def __post_init__(self):
        n = len(self.ids)
        if self.values.shape != (n, n):
            raise ValueError("resistance matrix shape does not match id count")
        if n < 2:
            raise ValueError("a resistance metric needs at least 2 points")

    def distance(self, x, y) -> float:
        idx = {v: i for i, v in enumerate(self.ids)}
        return float(self.values[idx[x], idx[y]])

    def validate(self, atol: float = 1e-9) -> None:
        R = self.values
        if np.abs(np.diag(R)).max() > atol:
            raise ValueError("resistance diagonal must be zero")
        if np.abs(R - R.T).max() > atol:
            raise ValueError("resistance matrix must be symmetric")
        off = R[~np.eye(len(self.ids), dtype=bool)]
        if off.min() <= 0:
            raise ValueError("off-diagonal resistances must be strictly positive")
        if triangle_defect(R) > atol:
            raise ValueError("triangle inequality violated")


def triangle_defect(D: np.ndarray) -> float:
    """Largest violation of D[i,j] <= D[i,k] + D[k,j]; nonpositive means a metric."""
    n = D.shape[0]
    worst = -math.inf
    for k in range(n):
        slack = D - (D[:, k][:, None] + D[k, :][None, :])
        worst = max(worst, slack.max())
    return float(worst)


# -- single solves --------------------------------------------------------------

def _tree_adjacency(net: Network):
    indptr, indices, data = net.cond.indptr, net.cond.indices, net.cond.data
    return indptr, indices, data


def _tree_root_distances(net: Network, start: int) -> np.ndarray:
    """Resistance from `start` to every vertex when the graph is a tree."""
    indptr, indices, data = _tree_adjacency(net)
    dist = np.full(net.n, -1.0)
    dist[start] = 0.0
    stack = [start]
    while stack:
        u = stack.pop()
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if dist[v] < 0:
                dist[v] = dist[u] + 1.0 / data[k]
                stack.append(v)
    return dist


def _grounded_solve(net: Network, ground: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve L[keep,keep] x = rhs[keep] with the given vertices grounded.

    Returns the solution extended by zeros on the grounded set.
    """
    keep = np.setdiff1d(np.arange(net.n), ground, assume_unique=False)
    L = net.laplacian()
    sub = L[np.ix_(keep, keep)]
    b = rhs[keep]
    if keep.size <= DENSE_CAP:
        x = sla.solve(sub.toarray(), b, assume_a="pos")
    else:
        x = spla.splu(sub.tocsc()).solve(b)
    out = np.zeros(net.n if rhs.ndim == 1 else (net.n,) + rhs.shape[1:])
    out[keep] = x
    return out


def effective_resistance(net: Network, x: VertexId, y: VertexId) -> float:
    """Two-point effective resistance R(x, y)."""
    i, j = net.vertex_index(x), net.vertex_index(y)
    if i == j:
        return 0.0
    if net.is_tree:
        return float(_tree_root_distances(net, i)[j])
    e = np.zeros(net.n)
    e[i] = 1.0
    v = _grounded_solve(net, np.array([j]), e)
    return float(v[i])


def resistance_vector(net: Network, x: VertexId) -> np.ndarray:
    """R(x, v) for every vertex v, aligned with net.ids."""
    i = net.vertex_index(x)
    if net.is_tree:
        return _tree_root_distances(net, i)
    keep = np.setdiff1d(np.arange(net.n), [i])
    L = net.laplacian()
    sub = L[np.ix_(keep, keep)]
    out = np.zeros(net.n)
    if keep.size <= DENSE_CAP:
        inv = sla.inv(sub.toarray())
        out[keep] = np.diag(inv)
    else:
        lu = spla.splu(sub.tocsc())
        e = np.zeros(keep.size)
        for k in range(keep.size):
            e[k] = 1.0
            out[keep[k]] = lu.solve(e)[k]
            e[k] = 0.0
    return out


def resistance_matrix(net: Network) -> ResistanceMatrix:
    """All pairwise effective resistances (dense; capped at DENSE_CAP vertices)."""
    n = net.n
    if n > DENSE_CAP:
        raise NetworkError(
            f"all-pairs resistance needs n <= {DENSE_CAP}; restrict or coarsen first")

    def build():
        L = net.laplacian_dense()
        M = np.zeros((n, n))
        M[1:, 1:] = sla.inv(L[1:, 1:])
        d = np.diag(M)
        R = d[:, None] + d[None, :] - 2 * M
        np.fill_diagonal(R, 0.0)
        return ResistanceMatrix(net.ids, R)

    return net._cached("rmat", build)


# -- network transforms ----------------------------------------------------------

def _check_parts(net: Network, parts: Sequence[Iterable[VertexId]]):
    seen: set = set()
    norm = []
    for part in parts:
        members = list(dict.fromkeys(part))
        if not members:
            raise NetworkError("empty part in fuse")
        for v in members:
            net.vertex_index(v)
            if v in seen:
                raise NetworkError(f"vertex {v!r} appears in two parts")
            seen.add(v)
        norm.append(members)
    return norm


def fuse_network(net: Network, parts: Sequence[Iterable[VertexId]]) -> Network:
    """Quotient the network by identifying each part to a single vertex.

    Conductances between quotient classes are the sums of the member
    conductances, the measure of a fused vertex is the sum of member measures,
    and edges internal to a part vanish.  Each class is named after its member
    that comes first in the vertex order.
    """
    parts = _check_parts(net, parts)
    cls = np.arange(net.n)
    for part in parts:
        idxs = sorted(net.vertex_index(v) for v in part)
        cls[idxs] = idxs[0]
    reps = np.unique(cls)
    remap = {rep: k for k, rep in enumerate(reps)}
    cls_k = np.array([remap[c] for c in cls])
    new_ids = [net.ids[rep] for rep in reps]

    coo = net.cond.tocoo()
    r, c = cls_k[coo.row], cls_k[coo.col]
    keep = r < c  # one canonical copy per stored half, then mirror exactly
    upper = sp.csr_matrix((coo.data[keep], (r[keep], c[keep])),
                          shape=(len(reps), len(reps)))
    upper.sum_duplicates()
    cond = upper + upper.T
    mu = np.bincount(cls_k, weights=net.mu, minlength=len(reps))
    root = net.ids[cls[net.root_index]]
    return Network(new_ids, cond, mu, root)


def set_resistance(net: Network, A: Iterable[VertexId], B: Iterable[VertexId]) -> float:
    """Effective resistance between vertex sets A and B (each fused to a point)."""
    A, B = list(dict.fromkeys(A)), list(dict.fromkeys(B))
    if not A or not B:
        raise NetworkError("set resistance needs nonempty sets")
    if set(A) & set(B):
        raise NetworkError("sets must be disjoint")
    fused = fuse_network(net, [A, B])
    rep_a = min(A, key=net.vertex_index)
    rep_b = min(B, key=net.vertex_index)
    return effective_resistance(fused, rep_a, rep_b)


def fused_resistance(net: Network, A: Iterable[VertexId],
                     y: VertexId, z: VertexId) -> float:
    """Resistance between y and z in the network with A collapsed to one vertex."""
    A = list(dict.fromkeys(A))
    if not A:
        raise NetworkError("boundary set must be nonempty")
    if y in set(A) or z in set(A):
        raise NetworkError("y and z must lie outside the fused set")
    if y == z:
        return 0.0
    return effective_resistance(fuse_network(net, [A]), y, z)


def trace_network(net: Network, V: Sequence[VertexId], nu,
                  root: VertexId | None = None,
                  clamp_tol: float = 1e-10) -> Network:
    """Network on V whose energy is the Schur complement of the Laplacian onto V.

    Effective resistances among V are unchanged, and the process of the traced
    network is the original watched on V with speed measure nu.
    """
    V = list(dict.fromkeys(V))
    if not V:
        raise NetworkError("trace target must be nonempty")
    vi = net.vertex_indices(V)
    nu_arr = _as_measure(nu, V)
    if np.any(nu_arr <= 0):
        raise NetworkError("trace measure must be strictly positive on V")
    if root is None:
        root = net.root
    if root not in set(V):
        raise NetworkError("root of the traced network must belong to V")

    keep = np.zeros(net.n, dtype=bool)
    keep[vi] = True
    w = np.flatnonzero(~keep)
    L = net.laplacian()
    if w.size == 0:
        return Network(V, net.cond[np.ix_(vi, vi)], nu_arr, root)
    Lvv = L[np.ix_(vi, vi)].toarray()
    Lvw = L[np.ix_(vi, w)].toarray()
    Lww = L[np.ix_(w, w)]
    if w.size <= DENSE_CAP:
        X = sla.solve(Lww.toarray(), Lvw.T, assume_a="pos")
    else:
        X = spla.splu(Lww.tocsc()).solve(Lvw.T)
    S = Lvv - Lvw @ X
    cond = -(S - np.diag(np.diag(S)))
    scale = max(1.0, np.abs(S).max())
    bad = cond.min() if cond.size else 0.0
    if bad < -clamp_tol * scale:
        raise NetworkError(f"Schur complement produced negative conductance {bad:g}")
    cond[cond < 0] = 0.0
    cond = (cond + cond.T) / 2
    return Network(V, sp.csr_matrix(cond), nu_arr, root)


def resistance_to_network(R: ResistanceMatrix, base: VertexId,
                          measure=1.0, neg_tol: float = 1e-8) -> Network:
    """Recover the unique network whose effective resistances reproduce R.

    Builds M(x,y) = (R(base,x) + R(base,y) - R(x,y)) / 2 over x, y != base,
    inverts it into the Laplacian grounded at base, and reads conductances off
    the result.  Reconstructed conductances in [-neg_tol, 0) are clamped to zero
    with a RealizabilityWarning; anything more negative means the input is not
    the resistance metric of any network.
    """
    ids = list(R.ids)
    if base not in ids:
        raise NetworkError(f"base {base!r} not among points")
    others = [v for v in ids if v != base]
    idx = {v: i for i, v in enumerate(ids)}
    b = idx[base]
    oi = np.array([idx[v] for v in others])
    Rb = R.values[b, oi]
    M = (Rb[:, None] + Rb[None, :] - R.values[np.ix_(oi, oi)]) / 2
    try:
        cf = sla.cho_factor(M)
        L = sla.cho_solve(cf, np.eye(len(others)))
    except np.linalg.LinAlgError as exc:
        raise NotRealizableError("kernel matrix is singular or indefinite") from exc

    edges = []

    def push(u, v, c):
        if c < -neg_tol:
            raise NotRealizableError(
                f"reconstructed conductance c({u!r},{v!r}) = {c:g} is negative")
        if c < 0:
            warnings.warn(
                f"clamped slightly negative conductance c({u!r},{v!r}) = {c:g}",
                RealizabilityWarning, stacklevel=3)
            c = 0.0
        if c > 0:
            edges.append((u, v, c))

    for i in range(len(others)):
        for j in range(i + 1, len(others)):
            push(others[i], others[j], -L[i, j])
        push(others[i], base, float(L[i].sum()))

    try:
        return Network.from_edges(edges, mu=measure, root=base, ids=ids)
    except NetworkError as exc:
        raise NotRealizableError(f"reconstruction is not a valid network: {exc}") from exc


def ball_complement_resistance(net: Network, rho: VertexId, r: float) -> float:
    """R(rho, complement of the open resistance ball of radius r around rho).

    Returns math.inf when the complement is empty (the ball covers the network).
    """
    if r <= 0:
        raise NetworkError("radius must be positive")
    i = net.vertex_index(rho)
    dist = resistance_vector(net, rho)
    ball = dist < r
    if ball.all():
        return math.inf
    ball_idx = np.flatnonzero(ball)
    L = net.laplacian()
    sub = L[np.ix_(ball_idx, ball_idx)]
    pos = int(np.searchsorted(ball_idx, i))
    e = np.zeros(ball_idx.size)
    e[pos] = 1.0
    if ball_idx.size <= DENSE_CAP:
        v = sla.solve(sub.toarray(), e, assume_a="pos")
    else:
        v = spla.splu(sub.tocsc()).solve(e)
    return float(v[pos])
