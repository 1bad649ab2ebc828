"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time from the ``HEATCTL_BACKEND``
environment variable (``numba`` or ``numpy``). When unset, numba is used if
it imports cleanly. Both paths compute the same closed-form expressions; the
test-suite runs them against each other.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_requested = os.environ.get("HEATCTL_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(f"HEATCTL_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

BACKEND = "numpy" if (_requested == "numpy" or numba is None) else "numba"


def _phi1(x):
    # (1 - e^{-x}) / x, accurate near 0
    out = np.ones_like(x)
    nz = x != 0.0
    out[nz] = -np.expm1(-x[nz]) / x[nz]
    return out


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------

def continuous_gramian_np(lam, G, T):
    s = lam[:, None] + lam[None, :]
    return G * (-np.expm1(-s * T)) / s


def sampled_gramian_np(lam, G, delta, k):
    s = lam[:, None] + lam[None, :]
    mu = _phi1(lam * delta)
    geom = np.expm1(-s * (k * delta)) / np.expm1(-s * delta)
    return G * np.outer(mu, mu) * (delta * geom)


def sampled_response_np(lam, G, P, delta):
    """State at K*delta produced from rest by the block generators ``P`` (K x J)."""
    K = P.shape[0]
    mu = _phi1(lam * delta)
    lag = (K - np.arange(1, K + 1))[:, None] * delta
    decay = np.exp(-lam[None, :] * lag)
    return delta * mu * np.sum(decay * (P @ G), axis=0)


def sampled_adjoint_distance_sq_np(lam, G, P, delta, z, T_adj, t_end):
    """Squared L2 distance on (0, t_end) between chi_w P_i blockwise and chi_w phi(t; T_adj, z)."""
    K = P.shape[0]
    t0 = np.arange(K) * delta
    t1 = np.minimum(t0 + delta, t_end)
    keep = t0 < t_end
    t0, t1, Pk = t0[keep], t1[keep], P[keep]
    length = t1 - t0

    pp = np.sum((Pk @ G) * Pk, axis=1) @ length

    # integral of phi over each block piece
    c = z[None, :] * np.exp(-lam[None, :] * (T_adj - t1[:, None])) * (
        length[:, None] * _phi1(lam[None, :] * length[:, None])
    )
    cross = np.sum((Pk @ G) * c)

    s = lam[:, None] + lam[None, :]
    ww = G * np.exp(-s * (T_adj - t_end)) * (t_end * _phi1(s * t_end))
    phiphi = z @ ww @ z
    return pp - 2.0 * cross + phiphi


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def _phi1_scalar(x):
        if x == 0.0:
            return 1.0
        return -np.expm1(-x) / x

    @numba.njit(cache=True)
    def continuous_gramian_nb(lam, G, T):
        J = lam.shape[0]
        W = np.empty((J, J))
        for i in range(J):
            for j in range(i, J):
                s = lam[i] + lam[j]
                v = G[i, j] * (-np.expm1(-s * T)) / s
                W[i, j] = v
                W[j, i] = v
        return W

    @numba.njit(cache=True)
    def sampled_gramian_nb(lam, G, delta, k):
        J = lam.shape[0]
        mu = np.empty(J)
        for i in range(J):
            mu[i] = _phi1_scalar(lam[i] * delta)
        W = np.empty((J, J))
        for i in range(J):
            for j in range(i, J):
                s = lam[i] + lam[j]
                geom = np.expm1(-s * (k * delta)) / np.expm1(-s * delta)
                v = G[i, j] * mu[i] * mu[j] * delta * geom
                W[i, j] = v
                W[j, i] = v
        return W

    @numba.njit(cache=True)
    def sampled_response_nb(lam, G, P, delta):
        K, J = P.shape
        GP = np.dot(P, G)
        decay = np.exp(-lam * delta)
        # Horner over blocks: acc <- e^{-lam d} acc + G p_b
        acc = np.zeros(J)
        for b in range(K):
            for i in range(J):
                acc[i] = decay[i] * acc[i] + GP[b, i]
        for i in range(J):
            acc[i] *= delta * _phi1_scalar(lam[i] * delta)
        return acc

    @numba.njit(cache=True)
    def sampled_adjoint_distance_sq_nb(lam, G, P, delta, z, T_adj, t_end):
        K, J = P.shape
        nb = 0
        while nb < K and nb * delta < t_end:
            nb += 1
        GP = np.dot(P[:nb], G)
        pp = 0.0
        cross = 0.0
        decay = np.exp(-lam * delta)
        full_w = np.empty(J)
        for i in range(J):
            full_w[i] = delta * _phi1_scalar(lam[i] * delta)
        # e^{-lam (T_adj - t1)} for full blocks, walked backwards from the last one
        fac = np.empty(J)
        started = False
        for b in range(nb - 1, -1, -1):
            t0 = b * delta
            t1 = min(t0 + delta, t_end)
            length = t1 - t0
            blk = 0.0
            for i in range(J):
                blk += GP[b, i] * P[b, i]
            pp += length * blk
            if t0 + delta <= t_end:
                if not started:
                    for i in range(J):
                        fac[i] = np.exp(-lam[i] * (T_adj - t1))
                    started = True
                else:
                    for i in range(J):
                        fac[i] *= decay[i]
                for i in range(J):
                    cross += GP[b, i] * z[i] * fac[i] * full_w[i]
            else:
                for i in range(J):
                    ci = z[i] * np.exp(-lam[i] * (T_adj - t1)) * length * _phi1_scalar(lam[i] * length)
                    cross += GP[b, i] * ci
        phiphi = 0.0
        for i in range(J):
            ei = np.exp(-lam[i] * (T_adj - t_end))
            for j in range(i, J):
                s = lam[i] + lam[j]
                v = z[i] * z[j] * G[i, j] * ei * np.exp(-lam[j] * (T_adj - t_end)) * t_end * _phi1_scalar(s * t_end)
                phiphi += v if i == j else 2.0 * v
        return pp - 2.0 * cross + phiphi


if BACKEND == "numba":
    continuous_gramian = continuous_gramian_nb
    sampled_gramian = sampled_gramian_nb
    sampled_response = sampled_response_nb
    sampled_adjoint_distance_sq = sampled_adjoint_distance_sq_nb
else:
    continuous_gramian = continuous_gramian_np
    sampled_gramian = sampled_gramian_np
    sampled_response = sampled_response_np
    sampled_adjoint_distance_sq = sampled_adjoint_distance_sq_np
