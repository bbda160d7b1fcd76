"""RK4 kernels for the gauge-fixed spin-chain flow ``Z' = -i Z (alpha * Z^dag Z - diag(lam))``.

Two interchangeable backends: a numba loop kernel and a vectorized numpy
kernel.  Set ``COADJOINT_DISABLE_NUMBA=1`` to force the numpy one.
"""
from __future__ import annotations

import os

import numpy as np

OK, BLOWUP = 0, 1
BLOWUP_RTOL = 0.1

try:
    if os.environ.get("COADJOINT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes"):
        raise ImportError("numba disabled by environment")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def default_backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def _rhs_numpy(Z, alpha, lam):
    M = alpha * (Z.conj().T @ Z)
    M[np.diag_indices_from(M)] = -lam
    return -1j * (Z @ M)


def rk4_numpy(Z0, alpha, lam, p, dt, steps, record_every, renormalize):
    """``lam`` has shape ``(2 * steps + 1, n)``: multipliers at every half step."""
    Z = np.array(Z0, dtype=np.complex128)
    nrec = steps // record_every + 1
    out = np.empty((nrec,) + Z.shape, dtype=np.complex128)
    out[0] = Z
    target = np.sqrt(p)
    rec = 1
    for s in range(steps):
        l0, lh, l1 = lam[2 * s], lam[2 * s + 1], lam[2 * s + 2]
        k1 = _rhs_numpy(Z, alpha, l0)
        k2 = _rhs_numpy(Z + 0.5 * dt * k1, alpha, lh)
        k3 = _rhs_numpy(Z + 0.5 * dt * k2, alpha, lh)
        k4 = _rhs_numpy(Z + dt * k3, alpha, l1)
        Z = Z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        norms = np.sum(np.abs(Z) ** 2, axis=0)
        if not np.all(np.isfinite(norms)) or np.any(np.abs(norms - p) > BLOWUP_RTOL * p):
            return out[:rec], BLOWUP, s + 1
        if renormalize:
            Z = Z * (target / np.sqrt(norms))
        if (s + 1) % record_every == 0:
            out[rec] = Z
            rec += 1
    return out, OK, steps


if HAVE_NUMBA:

    @njit(cache=True)
    def _rhs_nb(Z, alpha, lam, out):
        n = Z.shape[0]
        M = np.empty((n, n), dtype=np.complex128)
        for a in range(n):
            for b in range(n):
                if a == b:
                    M[a, b] = -lam[a]
                else:
                    acc = 0j
                    for k in range(n):
                        acc += Z[k, a].conjugate() * Z[k, b]
                    M[a, b] = alpha[a, b] * acc
        for i in range(n):
            for b in range(n):
                acc = 0j
                for a in range(n):
                    acc += Z[i, a] * M[a, b]
                out[i, b] = -1j * acc

    @njit(cache=True)
    def rk4_numba(Z0, alpha, lam, p, dt, steps, record_every, renormalize):
        n = Z0.shape[0]
        nrec = steps // record_every + 1
        out = np.empty((nrec, n, n), dtype=np.complex128)
        Z = Z0.copy()
        out[0] = Z
        k1 = np.empty_like(Z)
        k2 = np.empty_like(Z)
        k3 = np.empty_like(Z)
        k4 = np.empty_like(Z)
        tmp = np.empty_like(Z)
        rec = 1
        for s in range(steps):
            _rhs_nb(Z, alpha, lam[2 * s], k1)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = Z[i, j] + 0.5 * dt * k1[i, j]
            _rhs_nb(tmp, alpha, lam[2 * s + 1], k2)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = Z[i, j] + 0.5 * dt * k2[i, j]
            _rhs_nb(tmp, alpha, lam[2 * s + 1], k3)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = Z[i, j] + dt * k3[i, j]
            _rhs_nb(tmp, alpha, lam[2 * s + 2], k4)
            for i in range(n):
                for j in range(n):
                    Z[i, j] = Z[i, j] + (dt / 6.0) * (k1[i, j] + 2.0 * k2[i, j]
                                                      + 2.0 * k3[i, j] + k4[i, j])
            for j in range(n):
                nrm = 0.0
                for i in range(n):
                    nrm += Z[i, j].real ** 2 + Z[i, j].imag ** 2
                if not np.isfinite(nrm) or abs(nrm - p[j]) > BLOWUP_RTOL * p[j]:
                    return out[:rec], BLOWUP, s + 1
                if renormalize:
                    scale = np.sqrt(p[j] / nrm)
                    for i in range(n):
                        Z[i, j] *= scale
            if (s + 1) % record_every == 0:
                out[rec] = Z
                rec += 1
        return out, OK, steps


def rk4(Z0, alpha, lam, p, dt, steps, record_every=1, renormalize=True, backend=None):
    """Dispatch to the requested backend; returns ``(states, status, steps_done)``."""
    backend = backend or default_backend()
    args = (np.ascontiguousarray(Z0, dtype=np.complex128),
            np.ascontiguousarray(alpha, dtype=np.float64),
            np.ascontiguousarray(lam, dtype=np.float64),
            np.ascontiguousarray(p, dtype=np.float64),
            float(dt), int(steps), int(record_every), bool(renormalize))
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return rk4_numba(*args)
    if backend == "numpy":
        return rk4_numpy(*args)
    raise ValueError(f"unknown backend {backend!r}")
