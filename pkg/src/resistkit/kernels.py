"""Killed Green kernels, hitting probabilities, resolvents, and the semigroup.

The Green kernel of the process killed on a boundary set A admits two
independent computations: the resistance identity

    g_A(y, z) = (R(y, A) + R(z, A) - R_A(y, z)) / 2,

with R_A the resistance after fusing A to one point, and the inverse of the
conductance Laplacian with the rows and columns of A deleted.  green_kernel
returns the resistance-formula value and, by default, verifies it against the
Laplacian inverse; keep both routes independent when testing.

Kernels are stored over the interior only; queries touching the boundary
return 0 (the kernel vanishes there).  All operations are pure functions of
immutable inputs and safe to call concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg as sla

from .errors import KernelMismatchError, NetworkError
from .network import Network, VertexId
from .resistance import fuse_network, resistance_matrix, resistance_vector


def _align(values, ids, name="values") -> np.ndarray:
    """Accept a scalar, mapping, or array over ids and return an aligned array."""
    if np.isscalar(values):
        return np.full(len(ids), float(values))
    if callable(values):
        return np.array([float(values(v)) for v in ids])
    if isinstance(values, dict):
        return np.array([float(values[v]) for v in ids])
    arr = np.asarray(values, dtype=float)
    if arr.shape != (len(ids),):
        raise NetworkError(f"{name} has wrong length for {len(ids)} ids")
    return arr


@dataclass(frozen=True)
class GreenKernel:
    """Occupation-density kernel g_A over the interior V \\ A (resistance units)."""

    boundary: tuple
    interior: tuple
    matrix: np.ndarray

    def value(self, y, z) -> float:
        bd = set(self.boundary)
        if y in bd or z in bd:
            return 0.0
        idx = {v: i for i, v in enumerate(self.interior)}
        return float(self.matrix[idx[y], idx[z]])

    def extended(self, ids) -> np.ndarray:
        """Kernel as a full matrix over `ids`, zero on boundary rows/columns."""
        idx = {v: i for i, v in enumerate(self.interior)}
        out = np.zeros((len(ids), len(ids)))
        pos = [idx.get(v, -1) for v in ids]
        for a, pa in enumerate(pos):
            if pa < 0:
                continue
            for b, pb in enumerate(pos):
                if pb >= 0:
                    out[a, b] = self.matrix[pa, pb]
        return out


@dataclass(frozen=True)
class AlphaResolvent:
    """Kernel of the alpha-resolvent; acts by f -> K @ (mu * f) on the interior."""

    alpha: float
    boundary: tuple | None
    interior: tuple
    matrix: np.ndarray


def _interior_split(net: Network, A: Iterable[VertexId]):
    A = list(dict.fromkeys(A))
    if not A:
        raise NetworkError("boundary set must be nonempty")
    a_idx = net.vertex_indices(A)
    mask = np.zeros(net.n, dtype=bool)
    mask[a_idx] = True
    interior = np.flatnonzero(~mask)
    if interior.size == 0:
        raise NetworkError("boundary set must be a proper subset of the vertices")
    return A, a_idx, interior


def dirichlet_green_matrix(net: Network, A: Iterable[VertexId]) -> GreenKernel:
    """Oracle route: inverse of the Laplacian with rows/columns of A deleted."""
    A, _, interior = _interior_split(net, A)
    L = net.laplacian_dense()
    G = sla.inv(L[np.ix_(interior, interior)])
    G = (G + G.T) / 2
    return GreenKernel(tuple(A), tuple(net.ids[i] for i in interior), G)


def green_kernel(net: Network, A: Iterable[VertexId], verify: bool = True,
                 atol: float = 1e-8) -> GreenKernel:
    """Green kernel of the walk killed on A, from the resistance identity.

    With verify=True the result is checked entrywise against the independent
    Dirichlet-Laplacian inverse; disagreement beyond atol raises
    KernelMismatchError.
    """
    A, _, interior = _interior_split(net, A)
    fused = fuse_network(net, [A])
    rep = min(A, key=net.vertex_index)
    Rf = resistance_matrix(fused)
    fidx = {v: i for i, v in enumerate(fused.ids)}
    rep_i = fidx[rep]
    int_ids = [net.ids[i] for i in interior]
    ii = np.array([fidx[v] for v in int_ids])
    r_to_A = Rf.values[ii, rep_i]
    R_A = Rf.values[np.ix_(ii, ii)]
    g = (r_to_A[:, None] + r_to_A[None, :] - R_A) / 2
    kernel = GreenKernel(tuple(A), tuple(int_ids), g)
    if verify:
        oracle = dirichlet_green_matrix(net, A)
        gap = float(np.abs(kernel.matrix - oracle.matrix).max())
        if gap > atol:
            raise KernelMismatchError(
                f"resistance-formula kernel deviates from Laplacian inverse by {gap:g}")
    return kernel


def green_apply(kernel: GreenKernel, f, mu) -> np.ndarray:
    """(G_A f)(y) = sum_z g_A(y, z) f(z) mu(z) over the interior.

    Equals the expected integral of f along the walk until it hits A; defined
    for signed f by linearity.
    """
    fv = _align(f, kernel.interior, "f")
    mv = _align(mu, kernel.interior, "mu")
    return kernel.matrix @ (fv * mv)


def _interior_measure(net: Network, kernel) -> np.ndarray:
    return np.array([net.mu[net.vertex_index(v)] for v in kernel.interior])


def expected_hitting_time(net: Network, x: VertexId, A: Iterable[VertexId]) -> float:
    """E_x of the hitting time of A (0 when x is in A)."""
    A = list(dict.fromkeys(A))
    if x in set(A):
        return 0.0
    k = green_kernel(net, A, verify=False)
    vec = green_apply(k, 1.0, _interior_measure(net, k))
    return float(vec[k.interior.index(x)])


def commute_time(net: Network, x: VertexId, y: VertexId) -> float:
    """E_x(hit y) + E_y(hit x); equals R(x, y) times the total mass."""
    if x == y:
        raise NetworkError("commute time needs two distinct vertices")
    return expected_hitting_time(net, x, [y]) + expected_hitting_time(net, y, [x])


def hitting_probability(net: Network, x: VertexId, z: VertexId,
                        A: Iterable[VertexId]) -> float:
    """P_x(walk reaches z before entering A) = g_A(x, z) / g_A(z, z)."""
    A = list(dict.fromkeys(A))
    bd = set(A)
    if x in bd or z in bd:
        raise NetworkError("x and z must lie outside A")
    if x == z:
        return 1.0
    k = green_kernel(net, A, verify=False)
    p = k.value(x, z) / k.value(z, z)
    return float(min(1.0, max(0.0, p)))


# -- resolvents -------------------------------------------------------------------

def alpha_resolvent_killed(net: Network, A: Iterable[VertexId],
                           alpha: float) -> AlphaResolvent:
    """Resolvent kernel of the killed walk at rate alpha > 0.

    The matrix is (alpha * diag(mu) + L_D)^{-1} over the interior, acting by
    f -> K @ (mu * f); it decreases to the Green kernel as alpha -> 0.
    """
    if alpha <= 0:
        raise NetworkError("alpha must be positive")
    A, _, interior = _interior_split(net, A)
    L = net.laplacian_dense()
    M = L[np.ix_(interior, interior)] + alpha * np.diag(net.mu[interior])
    K = sla.inv(M)
    K = (K + K.T) / 2
    return AlphaResolvent(alpha, tuple(A), tuple(net.ids[i] for i in interior), K)


def _extended_killed(net: Network, x: VertexId, alpha: float) -> np.ndarray:
    res = alpha_resolvent_killed(net, [x], alpha)
    out = np.zeros((net.n, net.n))
    pos = net.vertex_indices(res.interior)
    out[np.ix_(pos, pos)] = res.matrix
    return out


def full_resolvent_via_decomposition(net: Network, alpha: float,
                                     marked: tuple[VertexId, VertexId] | None = None
                                     ) -> np.ndarray:
    """Full resolvent assembled from killed resolvents through two marked points.

    Splits every trajectory into excursions between the marked points; the
    survival factors 1 - alpha * (K @ mu) account for the discounted hitting
    times.  Serves as the independent cross-check of the direct solve.
    """
    if net.n < 2:
        raise NetworkError("need at least 2 vertices")
    if marked is None:
        marked = (net.ids[0], net.ids[1])
    x0, x1 = marked
    if x0 == x1:
        raise NetworkError("marked points must be distinct")
    i0, i1 = net.vertex_index(x0), net.vertex_index(x1)
    k0 = _extended_killed(net, x0, alpha)
    k1 = _extended_killed(net, x1, alpha)
    h0 = 1.0 - alpha * (k0 @ net.mu)   # E_y exp(-alpha * hit time of x0)
    h1 = 1.0 - alpha * (k1 @ net.mu)
    q = h1[i0] * h0[i1]
    w = k1[i0, :] + h1[i0] * k0[i1, :]
    return k0 + np.outer(h0, w) / (1.0 - q)


def alpha_resolvent_full(net: Network, alpha: float, verify: bool = True,
                         atol: float = 1e-8,
                         marked: tuple[VertexId, VertexId] | None = None
                         ) -> AlphaResolvent:
    """Resolvent of the full (conservative) walk: (alpha * diag(mu) + L)^{-1}.

    With verify=True the direct solve is compared entrywise against the
    two-marked-point decomposition through killed resolvents.
    """
    if alpha <= 0:
        raise NetworkError("alpha must be positive")
    if net.n < 2:
        raise NetworkError("need at least 2 vertices")
    M = net.laplacian_dense() + alpha * np.diag(net.mu)
    K = sla.inv(M)
    K = (K + K.T) / 2
    if verify:
        K2 = full_resolvent_via_decomposition(net, alpha, marked)
        gap = float(np.abs(K - K2).max())
        if gap > atol:
            raise KernelMismatchError(
                f"full resolvent direct solve vs decomposition differ by {gap:g}")
    return AlphaResolvent(alpha, None, net.ids, K)


def resolvent_apply(res: AlphaResolvent, f, mu) -> np.ndarray:
    fv = _align(f, res.interior, "f")
    mv = _align(mu, res.interior, "mu")
    return res.matrix @ (fv * mv)


def resolvent_equation_residual(net: Network, A: Iterable[VertexId],
                                alpha: float) -> float:
    """Max entrywise residual of G^a f = G f - alpha * G G^a f over basis f."""
    k = green_kernel(net, A, verify=False)
    res = alpha_resolvent_killed(net, A, alpha)
    mu = np.diag(_interior_measure(net, k))
    GM = k.matrix @ mu
    KM = res.matrix @ mu
    return float(np.abs(KM - GM + alpha * GM @ KM).max())


def kernel_ball_sandwich_check(net: Network, x: VertexId, eps: float) -> float:
    """Largest violation of g_x - 2*eps <= g_{closed ball(x, eps)} <= g_x.

    The comparison runs over all vertex pairs with both kernels extended by
    zero on their boundary sets; a nonpositive return means the two-sided
    bound holds.
    """
    if eps <= 0:
        raise NetworkError("eps must be positive")
    dist = resistance_vector(net, x)
    ball_ids = [net.ids[i] for i in np.flatnonzero(dist <= eps)]
    if len(ball_ids) == net.n:
        raise NetworkError("the closed ball covers the whole network")
    g_point = green_kernel(net, [x], verify=False).extended(net.ids)
    g_ball = green_kernel(net, ball_ids, verify=False).extended(net.ids)
    upper = float((g_ball - g_point).max())
    lower = float((g_point - 2 * eps - g_ball).max())
    return max(upper, lower)


# -- semigroup --------------------------------------------------------------------

_UNIFORMIZATION_TAIL = 1e-14
_MAX_RATE_CHUNK = 50.0


def _uniformized(net: Network, t: float) -> np.ndarray:
    rates = net.degree_weights() / net.mu
    lam = float(rates.max())
    P = net.cond.toarray() / net.mu[:, None] / lam
    np.fill_diagonal(P, 1.0 - rates / lam)
    out = None
    term = np.eye(net.n)
    w = np.exp(-lam * t)
    acc = w
    out = w * term
    k = 0
    while acc < 1.0 - _UNIFORMIZATION_TAIL:
        k += 1
        term = term @ P
        w *= lam * t / k
        acc += w
        out += w * term
        if k > 1000 + 10 * lam * t:
            break
    return out


def transition_semigroup(net: Network, t: float) -> np.ndarray:
    """Transition matrix p_t = exp(t * generator) via uniformization.

    The generator is c(x,y)/mu(x) off-diagonal with conserving diagonal, so
    rows are probability vectors; uniformization keeps every entry nonnegative.
    Large rate*t is handled by repeated squaring of a shorter-time matrix.
    """
    if t < 0:
        raise NetworkError("time must be nonnegative")
    if t == 0:
        return np.eye(net.n)
    rates = net.degree_weights() / net.mu
    lam = float(rates.max())
    k = 0
    while lam * t / (1 << k) > _MAX_RATE_CHUNK:
        k += 1
    P = _uniformized(net, t / (1 << k))
    for _ in range(k):
        P = P @ P
    return P
