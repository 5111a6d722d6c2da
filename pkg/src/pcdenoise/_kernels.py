"""Hot inner loops over graph arcs.

Every kernel has a numba implementation and a pure-numpy one with the same
signature. The numba path is used when numba imports and the environment
variable ``PCDENOISE_DISABLE_NUMBA`` is unset (or ``0``); set it to ``1`` to
force the numpy path. Both variants stay importable as ``<name>_numpy`` and
``<name>_numba`` so they can be compared directly.

Graph layout expected by the kernels is CSR with sorted column indices:
``indptr`` (n+1), ``indices`` (m), per-arc ``sqrt_w`` or ``weights`` (m), and
``rev`` (m) mapping arc ``i->j`` to its twin ``j->i``.
"""

import os

import numpy as np
import scipy.sparse as sp

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip probing an outdated system TBB
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("PCDENOISE_DISABLE_NUMBA", "0") in ("", "0")


# --------------------------------------------------------------------------
# numpy reference path
# --------------------------------------------------------------------------

def _arc_sources(indptr):
    n = indptr.shape[0] - 1
    return np.repeat(np.arange(n, dtype=indptr.dtype), np.diff(indptr))


def arc_gradient_numpy(indptr, indices, sqrt_w, x):
    src = _arc_sources(indptr)
    return sqrt_w[:, None] * (x[indices] - x[src])


def arc_divergence_numpy(indptr, indices, sqrt_w, rev, z):
    # div z = -grad^T z; per row i: sum_a sqrt_w[a] * (z[a] - z[rev[a]])
    n = indptr.shape[0] - 1
    m = indices.shape[0]
    seg = sp.csr_matrix((sqrt_w, np.arange(m), indptr), shape=(n, m))
    return np.asarray(seg @ (z - z[rev]))


def shifted_laplacian_matvec_numpy(indptr, indices, weights, degrees, x, alpha, beta):
    """Return ``alpha*x + beta*(D - W) x`` for a (n, d) block ``x``."""
    n = indptr.shape[0] - 1
    W = sp.csr_matrix((weights, indices, indptr), shape=(n, n))
    return (alpha + beta * degrees)[:, None] * x - beta * (W @ x)


def soft_threshold_numpy(v, kappa):
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def group_soft_threshold_numpy(v, kappa):
    norms = np.sqrt(np.einsum("ij,ij->i", v, v))
    scale = np.zeros_like(norms)
    nz = norms > 0
    scale[nz] = np.maximum(1.0 - kappa / norms[nz], 0.0)
    return v * scale[:, None]


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(parallel=True, cache=True, nogil=True)
    def arc_gradient_numba(indptr, indices, sqrt_w, x):
        n = indptr.shape[0] - 1
        d = x.shape[1]
        out = np.empty((indices.shape[0], d))
        for i in prange(n):
            for a in range(indptr[i], indptr[i + 1]):
                j = indices[a]
                s = sqrt_w[a]
                for c in range(d):
                    out[a, c] = s * (x[j, c] - x[i, c])
        return out

    @njit(parallel=True, cache=True, nogil=True)
    def arc_divergence_numba(indptr, indices, sqrt_w, rev, z):
        n = indptr.shape[0] - 1
        d = z.shape[1]
        out = np.zeros((n, d))
        for i in prange(n):
            for a in range(indptr[i], indptr[i + 1]):
                s = sqrt_w[a]
                b = rev[a]
                for c in range(d):
                    out[i, c] += s * (z[a, c] - z[b, c])
        return out

    @njit(parallel=True, cache=True, nogil=True)
    def shifted_laplacian_matvec_numba(indptr, indices, weights, degrees, x, alpha, beta):
        n = indptr.shape[0] - 1
        d = x.shape[1]
        out = np.empty((n, d))
        for i in prange(n):
            diag = alpha + beta * degrees[i]
            for c in range(d):
                out[i, c] = diag * x[i, c]
            for a in range(indptr[i], indptr[i + 1]):
                j = indices[a]
                w = beta * weights[a]
                for c in range(d):
                    out[i, c] -= w * x[j, c]
        return out

    @njit(parallel=True, cache=True, nogil=True)
    def _soft_threshold_flat(flat, kappa):
        out = np.empty_like(flat)
        for i in prange(flat.shape[0]):
            v = flat[i]
            if v > kappa:
                out[i] = v - kappa
            elif v < -kappa:
                out[i] = v + kappa
            else:
                out[i] = 0.0
        return out

    def soft_threshold_numba(v, kappa):
        v = np.asarray(v, dtype=np.float64)
        flat = np.ascontiguousarray(v).reshape(-1)
        return _soft_threshold_flat(flat, float(kappa)).reshape(v.shape)

    @njit(parallel=True, cache=True, nogil=True)
    def group_soft_threshold_numba(v, kappa):
        m, d = v.shape
        out = np.empty_like(v)
        for a in prange(m):
            nrm = 0.0
            for c in range(d):
                nrm += v[a, c] * v[a, c]
            nrm = np.sqrt(nrm)
            scale = 0.0
            if nrm > 0.0:
                scale = 1.0 - kappa / nrm
                if scale < 0.0:
                    scale = 0.0
            for c in range(d):
                out[a, c] = v[a, c] * scale
        return out


if USE_NUMBA:
    arc_gradient = arc_gradient_numba
    arc_divergence = arc_divergence_numba
    shifted_laplacian_matvec = shifted_laplacian_matvec_numba
    soft_threshold = soft_threshold_numba
    group_soft_threshold = group_soft_threshold_numba
else:
    arc_gradient = arc_gradient_numpy
    arc_divergence = arc_divergence_numpy
    shifted_laplacian_matvec = shifted_laplacian_matvec_numpy
    soft_threshold = soft_threshold_numpy
    group_soft_threshold = group_soft_threshold_numpy


def backend():
    """Name of the active kernel backend (``"numba"`` or ``"numpy"``)."""
    return "numba" if USE_NUMBA else "numpy"
