"""Finite weighted networks with a strictly positive vertex measure and a marked root.

A Network is the finite realization of a resistance space: symmetric nonnegative
conductances on an ordered vertex set, a speed measure, and a root.  Connectivity
is enforced at construction so every pairwise effective resistance is finite;
one-vertex networks are rejected because no resistance metric lives on a point.
Networks are immutable after construction; all queries are read-only, and the
small per-instance cache is guarded by a lock so concurrent readers are safe.
"""
from __future__ import annotations

import threading
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedNetworkError, NetworkError

VertexId = Hashable


def _as_measure(mu, ids) -> np.ndarray:
    if np.isscalar(mu):
        arr = np.full(len(ids), float(mu))
    elif isinstance(mu, Mapping):
        try:
            arr = np.array([float(mu[v]) for v in ids])
        except KeyError as exc:
            raise NetworkError(f"measure missing vertex {exc.args[0]!r}") from exc
    else:
        arr = np.asarray(mu, dtype=float)
        if arr.shape != (len(ids),):
            raise NetworkError("measure array length does not match vertex count")
    return arr


class Network:
    """Finite conductance network (vertices, symmetric conductances, measure, root)."""

    __slots__ = ("ids", "index", "cond", "mu", "root", "_cache", "_lock")

    def __init__(self, ids: Sequence[VertexId], cond: sp.spmatrix,
                 mu, root: VertexId, validate: bool = True):
        self.ids = tuple(ids)
        self.index = {v: i for i, v in enumerate(self.ids)}
        cond = sp.csr_matrix(cond, dtype=float)
        cond.eliminate_zeros()
        self.cond = cond
        self.mu = _as_measure(mu, self.ids)
        self.root = root
        self._cache: dict = {}
        self._lock = threading.RLock()  # builders may nest cached lookups
        if validate:
            self._validate()

    def _validate(self):
        n = len(self.ids)
        if n < 2:
            raise NetworkError("a network needs at least 2 vertices")
        if len(self.index) != n:
            raise NetworkError("duplicate vertex ids")
        if self.cond.shape != (n, n):
            raise NetworkError("conductance matrix shape does not match vertex count")
        if self.root not in self.index:
            raise NetworkError(f"root {self.root!r} is not a vertex")
        if self.cond.data.size and self.cond.data.min() < 0:
            raise NetworkError("negative conductance")
        if np.any(self.cond.diagonal() != 0):
            raise NetworkError("conductance diagonal must be zero")
        if (self.cond != self.cond.T).nnz:
            raise NetworkError("conductance matrix must be symmetric")
        if np.any(self.mu <= 0) or not np.all(np.isfinite(self.mu)):
            raise NetworkError("measure must be strictly positive and finite")
        ncomp, _ = connected_components(self.cond, directed=False)
        if ncomp != 1:
            raise DisconnectedNetworkError(
                "network is disconnected: effective resistance would be infinite")

    # -- constructors ---------------------------------------------------------

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], mu=1.0,
                   root: VertexId | None = None,
                   ids: Sequence[VertexId] | None = None) -> "Network":
        """Build from (u, v, conductance) triples; vertex order is first appearance."""
        edges = list(edges)
        if ids is None:
            seen: dict = {}
            for u, v, _ in edges:
                seen.setdefault(u, None)
                seen.setdefault(v, None)
            ids = list(seen)
        index = {v: i for i, v in enumerate(ids)}
        rows, cols, data = [], [], []
        for u, v, c in edges:
            if u not in index or v not in index:
                raise NetworkError(f"edge endpoint not in vertex list: {(u, v)}")
            if u == v:
                raise NetworkError(f"self-loop at {u!r}")
            i, j = index[u], index[v]
            rows += [i, j]
            cols += [j, i]
            data += [float(c), float(c)]
        cond = sp.csr_matrix((data, (rows, cols)), shape=(len(ids), len(ids)))
        if root is None:
            root = ids[0]
        return cls(ids, cond, mu, root)

    # -- queries --------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.ids)

    def vertex_index(self, v: VertexId) -> int:
        try:
            return self.index[v]
        except KeyError:
            raise NetworkError(f"unknown vertex {v!r}") from None

    def vertex_indices(self, vs: Iterable[VertexId]) -> np.ndarray:
        return np.array([self.vertex_index(v) for v in vs], dtype=int)

    @property
    def root_index(self) -> int:
        return self.index[self.root]

    def total_mass(self) -> float:
        return float(self.mu.sum())

    def degree_weights(self) -> np.ndarray:
        """Total conductance at each vertex."""
        return self._cached("degw", lambda: np.asarray(self.cond.sum(axis=1)).ravel())

    def laplacian(self) -> sp.csr_matrix:
        def build():
            return (sp.diags(self.degree_weights()) - self.cond).tocsr()
        return self._cached("lap", build)

    def laplacian_dense(self) -> np.ndarray:
        return self._cached("lapd", lambda: self.laplacian().toarray())

    @property
    def n_edges(self) -> int:
        return self.cond.nnz // 2

    @property
    def is_tree(self) -> bool:
        return self.n_edges == self.n - 1

    def edges(self) -> list[tuple[VertexId, VertexId, float]]:
        coo = sp.triu(self.cond, k=1).tocoo()
        return [(self.ids[i], self.ids[j], float(c))
                for i, j, c in zip(coo.row, coo.col, coo.data)]

    def _cached(self, key, build):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = build()
            return self._cache[key]

    def __repr__(self):
        return (f"Network(n={self.n}, edges={self.n_edges}, root={self.root!r}, "
                f"mass={self.total_mass():g})")


def rescale_network(net: Network, resistance_scale: float = 1.0,
                    measure_scale: float = 1.0) -> Network:
    """Multiply all resistances by resistance_scale and the measure by measure_scale.

    Conductances divide by resistance_scale (e.g. resistance_scale = 1/n
    shrinks the metric by n); the process time-unit scales by the product of
    the two factors.
    """
    if resistance_scale <= 0 or measure_scale <= 0:
        raise NetworkError("scale factors must be positive")
    return Network(net.ids, net.cond / resistance_scale,
                   net.mu * measure_scale, net.root, validate=False)


def with_integer_ids(net: Network) -> Network:
    """Relabel vertices 0..n-1 in order; useful before file export of exotic ids."""
    return Network(range(net.n), net.cond, net.mu, net.root_index, validate=False)


# -- file schema ---------------------------------------------------------------
#
# network v1
# vertex <id> <mu>
# edge <id> <id> <conductance>
# root <id>
#
# ids are whitespace-free tokens; integer-looking tokens parse back as ints.

def _encode_id(v: VertexId) -> str:
    s = str(v)
    if not s or any(ch.isspace() for ch in s):
        raise NetworkError(
            f"vertex id {v!r} is not file-serializable; relabel with with_integer_ids()")
    return s


def _decode_id(token: str) -> VertexId:
    try:
        return int(token)
    except ValueError:
        return token


def write_network(net: Network, path) -> None:
    lines = ["network v1"]
    for v, m in zip(net.ids, net.mu):
        lines.append(f"vertex {_encode_id(v)} {float(m)!r}")
    for u, v, c in net.edges():
        lines.append(f"edge {_encode_id(u)} {_encode_id(v)} {c!r}")
    lines.append(f"root {_encode_id(net.root)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_network(path) -> Network:
    ids: list = []
    mu: dict = {}
    edges: list = []
    seen_edges: set = set()
    root = None
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != "network v1":
        raise NetworkError("expected 'network v1' header")
    for ln in lines[1:]:
        parts = ln.split()
        kind = parts[0]
        if kind == "vertex":
            if len(parts) != 3:
                raise NetworkError(f"bad vertex line: {ln!r}")
            v = _decode_id(parts[1])
            if v in mu:
                raise NetworkError(f"duplicate vertex {v!r}")
            ids.append(v)
            mu[v] = float(parts[2])
        elif kind == "edge":
            if len(parts) != 4:
                raise NetworkError(f"bad edge line: {ln!r}")
            u, v = _decode_id(parts[1]), _decode_id(parts[2])
            if u == v:
                raise NetworkError(f"self-loop edge {u!r}")
            key = frozenset((u, v))
            if key in seen_edges:
                raise NetworkError(f"duplicate edge {u!r} {v!r} (or asymmetric duplicate)")
            seen_edges.add(key)
            edges.append((u, v, float(parts[3])))
        elif kind == "root":
            if root is not None:
                raise NetworkError("duplicate root line")
            root = _decode_id(parts[1])
        else:
            raise NetworkError(f"unknown record {kind!r}")
    if root is None:
        raise NetworkError("missing root line")
    return Network.from_edges(edges, mu=mu, root=root, ids=ids)
