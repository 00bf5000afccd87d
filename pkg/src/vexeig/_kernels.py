"""Hot per-quadrature-point kernels.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical semantics. The numba path is used when numba imports
and ``VEXEIG_DISABLE_NUMBA`` is unset (or ``0``); otherwise the numpy path is
used. Both paths are always importable as ``numba_impl`` / ``numpy_impl`` so
tests and the benchmark can compare them directly.

All kernels take flat, contiguous float64 arrays.
"""

import os
import types

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get("VEXEIG_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# numpy reference path


def _np_power_sum(absf, p, weights):
    out = np.zeros_like(absf)
    nz = absf > 0.0
    out[nz] = np.exp(p[nz] * np.log(absf[nz]))
    return float(np.dot(weights, out))


def _np_log_power_sum(logabs, p, logw, logtau):
    """log(sum w * exp(p * (logabs - logtau))) without overflow; logabs = -inf marks zeros."""
    t = p * (logabs - logtau) + logw
    m = np.max(t)
    if not np.isfinite(m):
        return m
    return float(m + np.log(np.sum(np.exp(t - m))))


def _np_gradient_energy(mag2, p, weights, eps):
    """Return (sum w/p |g|^p, flux weight |g|^(p-2) with eps-regularization where p<2)."""
    energy = np.zeros_like(mag2)
    nz = mag2 > 0.0
    energy[nz] = np.exp(0.5 * p[nz] * np.log(mag2[nz])) / p[nz]
    flux = np.zeros_like(mag2)
    sub = p < 2.0
    with np.errstate(divide="ignore"):
        flux[sub] = np.exp(0.5 * (p[sub] - 2.0) * np.log(mag2[sub] + eps * eps))
    pos = ~sub & (mag2 > 0.0)
    flux[pos] = np.exp(0.5 * (p[pos] - 2.0) * np.log(mag2[pos]))
    # |g|^0 = 1 at g = 0 when p == 2
    flux[~sub & (mag2 == 0.0) & (p == 2.0)] = 1.0
    return float(np.dot(weights, energy)), flux


def _np_coupling(z, w, c, ap1, bp1, weights):
    """Return (sum weights*c|z|^ap1|w|^bp1, d/dz, d/dw) per quadrature point (unweighted)."""
    az = np.abs(z)
    aw = np.abs(w)
    with np.errstate(divide="ignore"):
        lz = np.log(az)
        lw = np.log(aw)
    both = (az > 0.0) & (aw > 0.0)
    val = np.zeros_like(z)
    val[both] = c[both] * np.exp(ap1[both] * lz[both] + bp1[both] * lw[both])
    dz = np.zeros_like(z)
    dw = np.zeros_like(z)
    # c(a+1)|z|^(a-1) z |w|^(b+1) = (a+1) * val / z, val = 0 covers z = 0 since a + 1 > 2
    dz[both] = ap1[both] * val[both] / z[both]
    dw[both] = bp1[both] * val[both] / w[both]
    return float(np.dot(weights, val)), dz, dw


numpy_impl = types.SimpleNamespace(
    power_sum=_np_power_sum,
    log_power_sum=_np_log_power_sum,
    gradient_energy=_np_gradient_energy,
    coupling=_np_coupling,
    name="numpy",
)


# ---------------------------------------------------------------------------
# numba path

if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _nb_power_sum(absf, p, weights):
        s = 0.0
        for i in range(absf.shape[0]):
            a = absf[i]
            if a > 0.0:
                s += weights[i] * np.exp(p[i] * np.log(a))
        return s

    @numba.njit(cache=True, nogil=True)
    def _nb_log_power_sum(logabs, p, logw, logtau):
        n = logabs.shape[0]
        m = -np.inf
        for i in range(n):
            t = p[i] * (logabs[i] - logtau) + logw[i]
            if t > m:
                m = t
        if not np.isfinite(m):
            return m
        s = 0.0
        for i in range(n):
            s += np.exp(p[i] * (logabs[i] - logtau) + logw[i] - m)
        return m + np.log(s)

    @numba.njit(cache=True, nogil=True)
    def _nb_gradient_energy(mag2, p, weights, eps):
        n = mag2.shape[0]
        flux = np.empty(n)
        e = 0.0
        eps2 = eps * eps
        for i in range(n):
            m = mag2[i]
            pi = p[i]
            if m > 0.0:
                lm = np.log(m)
                e += weights[i] * np.exp(0.5 * pi * lm) / pi
            if pi < 2.0:
                flux[i] = np.exp(0.5 * (pi - 2.0) * np.log(m + eps2))
            elif m > 0.0:
                flux[i] = np.exp(0.5 * (pi - 2.0) * np.log(m))
            elif pi == 2.0:
                flux[i] = 1.0
            else:
                flux[i] = 0.0
        return e, flux

    @numba.njit(cache=True, nogil=True)
    def _nb_coupling(z, w, c, ap1, bp1, weights):
        n = z.shape[0]
        dz = np.zeros(n)
        dw = np.zeros(n)
        s = 0.0
        for i in range(n):
            az = abs(z[i])
            aw = abs(w[i])
            if az > 0.0 and aw > 0.0:
                v = c[i] * np.exp(ap1[i] * np.log(az) + bp1[i] * np.log(aw))
                s += weights[i] * v
                dz[i] = ap1[i] * v / z[i]
                dw[i] = bp1[i] * v / w[i]
        return s, dz, dw

    numba_impl = types.SimpleNamespace(
        power_sum=_nb_power_sum,
        log_power_sum=_nb_log_power_sum,
        gradient_energy=_nb_gradient_energy,
        coupling=_nb_coupling,
        name="numba",
    )
else:  # pragma: no cover
    numba_impl = None


def select_backend():
    if HAVE_NUMBA and not _env_disabled():
        return numba_impl
    return numpy_impl


backend = select_backend()
BACKEND = backend.name
