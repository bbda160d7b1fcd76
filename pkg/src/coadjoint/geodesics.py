"""Polar decomposition bridge, closed-form evolution and magnetic geodesics.

A non-degenerate ``Z`` factors as ``Z = U H`` with ``U`` unitary and
``H = K^{1/2}``, ``K = Z^dag Z``.  For nested couplings the spin-chain flow is
``Z(t) = Z(0) Ev(t)`` with ``Ev(t) = E_n ... E_2`` and
``E_k = exp[i (alpha_{k+1} - alpha_k) t Pr_k(A0)]``, ``alpha_{n+1} = 0``;
consequently ``U(t) = U(0) Ev(t)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spinchain import SpinChainConfig, Trajectory, gram

DIVISOR_RTOL = 1e-8
CLAMP = 1e-14


class DivisorError(ValueError):
    """``Z`` is (numerically) on the divisor ``det Z = 0``."""

    def __init__(self, message: str, min_singular: float, time: float | None = None):
        super().__init__(message)
        self.min_singular = min_singular
        self.time = time


@dataclass(frozen=True, eq=False)
class PolarPair:
    U: np.ndarray
    K: np.ndarray

    def H(self) -> np.ndarray:
        w, V = np.linalg.eigh(self.K)
        return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T

    def reconstruct(self) -> np.ndarray:
        return self.U @ self.H()

    def unitarity_residual(self) -> float:
        n = self.U.shape[0]
        return float(np.abs(self.U.conj().T @ self.U - np.eye(n)).max())


def polar_decompose(Z, rtol: float = DIVISOR_RTOL) -> PolarPair:
    """``U = Z (Z^dag Z)^{-1/2}`` via the eigendecomposition of ``K = Z^dag Z``.

    Raises ``DivisorError`` when the smallest singular value of ``Z`` is below
    ``rtol`` times the largest.
    """
    Z = np.asarray(Z, dtype=complex)
    K = Z.conj().T @ Z
    K = 0.5 * (K + K.conj().T)
    w, V = np.linalg.eigh(K)
    wmax = max(w[-1], 0.0)
    smin, smax = np.sqrt(max(w[0], 0.0)), np.sqrt(wmax)
    if smax == 0.0 or smin < rtol * smax:
        raise DivisorError(f"Z is degenerate: min/max singular value {smin:.3g}/{smax:.3g}", smin)
    if w[0] < CLAMP:
        raise DivisorError(f"Gram eigenvalue {w[0]:.3g} below clamp", smin)
    U = Z @ ((V / np.sqrt(w)) @ V.conj().T)
    return PolarPair(U, K)


def det_bound(Z, p: Sequence[float] | None = None, tol: float = 1e-8):
    """``(det(Z^dag Z), ((sum p)/n)^n, at_max)`` for one matrix or a stack.

    ``at_max`` is true iff ``Z^dag Z`` is within ``tol`` of ``(sum p / n) 1``.
    """
    Z = np.asarray(Z, dtype=complex)
    single = Z.ndim == 2
    Zs = Z[None] if single else Z
    n = Zs.shape[-1]
    K = np.einsum("kia,kib->kab", Zs.conj(), Zs)
    value = np.linalg.det(K).real
    if p is None:
        p = np.real(np.einsum("kaa->ka", K)).mean(axis=0)
    c = float(np.sum(p)) / n
    bound = c ** n
    dev = np.abs(K - c * np.eye(n)).max(axis=(1, 2))
    at_max = dev < tol
    if single:
        return float(value[0]), bound, bool(at_max[0])
    return value, bound, at_max


@dataclass(frozen=True, eq=False)
class CotangentPointCP1:
    n: np.ndarray
    pi: np.ndarray

    def residuals(self) -> tuple[float, float]:
        return abs(float(self.n @ self.n) - 1.0), abs(float(self.pi @ self.n))

    def energy(self) -> float:
        return float(self.pi @ self.pi)


def cp1_cotangent_map(n1, n2, p: float) -> CotangentPointCP1:
    """``n = (n1 - n2)/s``, ``pi = p (n1 x n2)/s`` with ``s = sqrt(2 (1 - n1.n2))``.

    The canonical form ``d pi ^ d n`` pulls back to ``(p/2)(A_1 + A_2)`` where
    ``A_i(u, v) = n_i . (u_i x v_i)`` is the area form of the ``i``-th sphere.
    """
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    c = float(n1 @ n2)
    if c > 1 - 1e-12:
        raise DivisorError("n1 = n2 lies on the divisor", 1.0 - c)
    s = np.sqrt(2.0 * (1.0 - c))
    return CotangentPointCP1((n1 - n2) / s, p * np.cross(n1, n2) / s)


def _expi_hermitian(M: np.ndarray, theta: float) -> np.ndarray:
    """``exp(i theta M)`` for Hermitian ``M``."""
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    return (V * np.exp(1j * theta * w)) @ V.conj().T


def ev_factors(config: SpinChainConfig, A0: np.ndarray):
    """Eigendecompositions of ``Pr_k(A0)`` with their rates ``alpha_{k+1} - alpha_k``."""
    config.require_nested()
    A0 = np.asarray(A0, dtype=complex)
    n = config.n
    lv = np.append(config.levels(), 0.0)
    out = []
    for k in range(2, n + 1):
        w, V = np.linalg.eigh(0.5 * (A0[:k, :k] + A0[:k, :k].conj().T))
        out.append((k, lv[k] - lv[k - 1], w, V))
    return out


def _ev_from_factors(factors, n: int, t: float) -> np.ndarray:
    Ev = np.eye(n, dtype=complex)
    for k, rate, w, V in factors:
        E = np.eye(n, dtype=complex)
        E[:k, :k] = (V * np.exp(1j * rate * t * w)) @ V.conj().T
        Ev = E @ Ev
    return Ev


def ev_operator(config: SpinChainConfig, A0, t: float) -> np.ndarray:
    """``Ev(t)``: ordered product with the ``k = 2`` factor rightmost."""
    return _ev_from_factors(ev_factors(config, A0), config.n, t)


def closed_form_trajectory(Z0, config: SpinChainConfig, times) -> Trajectory:
    """``Z(t) = Z0 Ev(t)`` sampled at ``times``."""
    Z0 = np.asarray(Z0, dtype=complex)
    factors = ev_factors(config, gram(Z0))
    times = np.asarray(times, dtype=float)
    states = np.array([Z0 @ _ev_from_factors(factors, config.n, t) for t in times])
    return Trajectory(times, states, config, {"method": "closed_form"})


@dataclass(frozen=True, eq=False)
class GeodesicTrajectory:
    times: np.ndarray
    U: np.ndarray
    K: np.ndarray
    config: SpinChainConfig
    charges: np.ndarray
    ev_deviation: float
    """``max_t |U(t) - U(0) Ev(t)|``."""
    min_singular: float

    def __len__(self) -> int:
        return len(self.times)

    def Z(self) -> np.ndarray:
        w, V = np.linalg.eigh(self.K)
        H = np.einsum("kij,kj,klj->kil", V, np.sqrt(np.clip(w, 0, None)), V.conj())
        return self.U @ H

    def unitarity_residual(self) -> float:
        n = self.config.n
        return float(np.abs(np.einsum("kia,kib->kab", self.U.conj(), self.U) - np.eye(n)).max())

    def to_trajectory(self) -> Trajectory:
        return Trajectory(self.times, self.U, self.config,
                          {"unitary": True, "q": self.charges.tolist(), "method": "geodesic"})


def magnetic_geodesic(Z0, config: SpinChainConfig, times) -> GeodesicTrajectory:
    """Polar factor ``U(t)`` of the closed-form trajectory, checked against ``U(0) Ev(t)``."""
    traj = closed_form_trajectory(Z0, config, times)
    factors = ev_factors(config, gram(Z0))
    Us, Ks = [], []
    smin = np.inf
    for t, Z in zip(traj.times, traj.states):
        try:
            pp = polar_decompose(Z)
        except DivisorError as exc:
            raise DivisorError(f"trajectory reaches the divisor at t = {t:.6g}",
                               exc.min_singular, float(t)) from exc
        Us.append(pp.U)
        Ks.append(pp.K)
        smin = min(smin, float(np.sqrt(np.linalg.eigvalsh(pp.K)[0])))
    U = np.array(Us)
    U0 = U[0]
    dev = max(float(np.abs(U[k] - U0 @ _ev_from_factors(factors, config.n, t)).max())
              for k, t in enumerate(traj.times))
    return GeodesicTrajectory(traj.times, U, np.array(Ks), config, config.charges(), dev, smin)


def geodesic_residual(traj, config: SpinChainConfig | None = None, gauge=None,
                      K: np.ndarray | None = None) -> float:
    """Max residual of ``i Z' - Z M`` on a uniformly sampled trajectory.

    ``traj`` is a ``Trajectory``, a ``GeodesicTrajectory`` (``Z`` rebuilt as
    ``U K^{1/2}``) or a raw ``(times, states)`` pair.  ``Z'`` uses second-order
    differences, one-sided at the endpoints.
    """
    if isinstance(traj, GeodesicTrajectory):
        config = config or traj.config
        times, Z = traj.times, traj.Z()
    elif isinstance(traj, Trajectory):
        config = config or traj.config
        times, Z = traj.times, traj.states
    else:
        times, Z = traj
        times = np.asarray(times, dtype=float)
        Z = np.asarray(Z, dtype=complex)
        if K is not None:
            w, V = np.linalg.eigh(K)
            Z = Z @ np.einsum("kij,kj,klj->kil", V, np.sqrt(np.clip(w, 0, None)), V.conj())
    if config is None:
        raise ValueError("config is required")
    h = np.diff(times)
    if len(times) < 3 or np.abs(h - h[0]).max() > 1e-9 * h[0]:
        raise ValueError("geodesic_residual needs at least three uniform samples")
    Zd = np.gradient(Z, h[0], axis=0, edge_order=2)
    A = np.einsum("kia,kib->kab", Z.conj(), Z)
    M = config.alpha * A
    if gauge is None:
        lam = np.broadcast_to(config.default_gauge(), (len(times), config.n))
    elif callable(gauge):
        lam = np.array([gauge(t) for t in times])
    else:
        lam = np.broadcast_to(np.asarray(gauge, dtype=float), (len(times), config.n))
    idx = np.arange(config.n)
    M[:, idx, idx] = -lam
    R = 1j * Zd - Z @ M
    return float(np.abs(R).max())


def shift_normalizations(Z0, c: float) -> np.ndarray:
    """``U0 (K0 + c 1)^{1/2}``: same polar factor, every ``p_i`` shifted by ``c``."""
    pp = polar_decompose(Z0)
    n = pp.K.shape[0]
    return PolarPair(pp.U, pp.K + c * np.eye(n)).reconstruct()


__all__ = [
    "PolarPair", "CotangentPointCP1", "GeodesicTrajectory", "DivisorError",
    "polar_decompose", "det_bound", "cp1_cotangent_map", "ev_operator", "ev_factors",
    "closed_form_trajectory", "magnetic_geodesic", "geodesic_residual", "shift_normalizations",
]
