"""Classical spin chain on ``(CP^{n-1})^n``.

The state is an ``n x n`` complex matrix ``Z`` whose columns ``z_a`` obey
``|z_a|^2 = p_a``.  The Hamiltonian is ``sum_{a<b} alpha_ab |z_a^dag z_b|^2``
and the gauge-fixed equations of motion read ``i Z' = Z M`` with
``M_ab = alpha_ab A_ab`` off the diagonal, ``M_aa = -lam_a`` and
``A = Z^dag Z``.  For nested couplings ``alpha_ab = alpha_max(a, b)`` the
default gauge ``lam_a = -alpha_a p_a`` makes ``M`` equal to ``B``, the
coupling-weighted Gram matrix, and ``i A' + [B, A] = 0``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels

Gauge = Callable[[float], np.ndarray] | np.ndarray | None

NORM_TOL = 1e-9


class BlowUpError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class NonNestedError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpinChainConfig:
    p: tuple[float, ...]
    alpha: np.ndarray
    nested: bool = False

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        alpha = np.array(self.alpha, dtype=float)
        n = len(p)
        if n < 2:
            raise ValueError("need at least two sites")
        if alpha.shape != (n, n):
            raise ValueError(f"alpha must be {n}x{n}, got {alpha.shape}")
        if any(x <= 0 for x in p):
            raise ValueError("normalizations p must be positive")
        if not np.array_equal(alpha, alpha.T):
            raise ValueError("alpha must be symmetric")
        if np.any(np.diag(alpha) != 0):
            raise ValueError("alpha must have zero diagonal")
        alpha.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "alpha", alpha)
        if self.nested and not _is_nested(alpha):
            raise NonNestedError("alpha_ij != alpha_max(i,j)")

    @property
    def n(self) -> int:
        return len(self.p)

    @classmethod
    def from_levels(cls, p: Sequence[float], levels: Sequence[float]) -> "SpinChainConfig":
        """Nested couplings from ``(alpha_2, ..., alpha_n)``; ``alpha_1 := alpha_2``."""
        n = len(p)
        lv = [float(x) for x in levels]
        if len(lv) != n - 1:
            raise ValueError(f"need {n - 1} levels for {n} sites, got {len(lv)}")
        full = np.array([lv[0]] + lv)
        idx = np.arange(n)
        alpha = full[np.maximum.outer(idx, idx)]
        np.fill_diagonal(alpha, 0.0)
        return cls(tuple(p), alpha, nested=True)

    @classmethod
    def from_matrix(cls, p: Sequence[float], alpha) -> "SpinChainConfig":
        alpha = np.asarray(alpha, dtype=float)
        return cls(tuple(p), alpha, nested=_is_nested(alpha))

    def levels(self) -> np.ndarray:
        """``(alpha_1, ..., alpha_n)`` with ``alpha_1 = alpha_2``; nested configs only."""
        self.require_nested()
        lv = np.array([self.alpha[0, 1]] + [self.alpha[0, k] for k in range(1, self.n)])
        return lv

    def require_nested(self) -> None:
        if not self.nested:
            raise NonNestedError("operation requires nested couplings alpha_ij = alpha_max(i,j)")

    def default_gauge(self) -> np.ndarray:
        if self.nested:
            return -self.levels() * np.asarray(self.p)
        return np.zeros(self.n)

    def weights(self) -> np.ndarray:
        """``alpha`` with the nested self-couplings ``alpha_a`` on the diagonal."""
        W = np.array(self.alpha)
        if self.nested:
            np.fill_diagonal(W, self.levels())
        return W

    def charges(self) -> np.ndarray:
        """Magnetic charges ``q_i = p_i - p_{i-1}`` for ``i >= 2``."""
        return np.diff(np.asarray(self.p))

    def shifted(self, c: float) -> "SpinChainConfig":
        return SpinChainConfig(tuple(x + c for x in self.p), self.alpha, self.nested)

    def to_dict(self) -> dict:
        return {"p": list(self.p), "alpha": self.alpha.tolist(), "nested": self.nested}

    @classmethod
    def from_dict(cls, d: dict) -> "SpinChainConfig":
        if "levels" in d and "alpha" not in d:
            return cls.from_levels(d["p"], d["levels"])
        cfg = cls.from_matrix(d["p"], d["alpha"])
        if d.get("nested") and not cfg.nested:
            raise NonNestedError("config marked nested but alpha is not")
        return cfg

    def __eq__(self, other):
        if not isinstance(other, SpinChainConfig):
            return NotImplemented
        return (self.p == other.p and self.nested == other.nested
                and np.array_equal(self.alpha, other.alpha))

    __hash__ = None


def _is_nested(alpha: np.ndarray) -> bool:
    n = alpha.shape[0]
    if n < 2:
        return False
    lv = np.array([alpha[0, 1]] + [alpha[0, k] for k in range(1, n)])
    idx = np.arange(n)
    ref = lv[np.maximum.outer(idx, idx)]
    np.fill_diagonal(ref, 0.0)
    return bool(np.array_equal(ref, alpha))


@dataclass(frozen=True, eq=False)
class SpinChainState:
    Z: np.ndarray
    time: float = 0.0

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.Z) ** 2, axis=0)

    def validate(self, config: SpinChainConfig, tol: float = NORM_TOL) -> None:
        Z = np.asarray(self.Z)
        if Z.shape != (config.n, config.n):
            raise ValueError(f"Z must be {config.n}x{config.n}, got {Z.shape}")
        err = np.abs(self.norms() - np.asarray(config.p)).max()
        if err > tol:
            raise ValueError(f"column norms deviate from p by {err:.3g}")


def _Z(state) -> np.ndarray:
    return np.asarray(state.Z if isinstance(state, SpinChainState) else state, dtype=complex)


def gram(state) -> np.ndarray:
    Z = _Z(state)
    return Z.conj().T @ Z


def normalize_columns(Z: np.ndarray, p: Sequence[float]) -> np.ndarray:
    Z = np.asarray(Z, dtype=complex)
    return Z * np.sqrt(np.asarray(p) / np.sum(np.abs(Z) ** 2, axis=0))


def random_state(config: SpinChainConfig, seed=0) -> np.ndarray:
    """Gaussian columns rescaled to the normalizations ``p``."""
    rng = np.random.default_rng(seed)
    n = config.n
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return normalize_columns(Z, config.p)


def hamiltonian(state, config: SpinChainConfig) -> float:
    A = gram(state)
    return float(0.5 * np.sum(config.alpha * np.abs(A) ** 2))


def _resolve_gauge(config: SpinChainConfig, gauge: Gauge, t: float) -> np.ndarray:
    if gauge is None:
        return config.default_gauge()
    if callable(gauge):
        return np.asarray(gauge(t), dtype=float)
    return np.asarray(gauge, dtype=float)


def eom_matrix(state, config: SpinChainConfig, t: float = 0.0, gauge: Gauge = None) -> np.ndarray:
    """``M`` in ``i Z' = Z M``."""
    M = config.alpha * gram(state)
    M[np.diag_indices(config.n)] = -_resolve_gauge(config, gauge, t)
    return M


def eom_rhs(state, config: SpinChainConfig, t: float | None = None, gauge: Gauge = None) -> np.ndarray:
    """``Z' = -i Z M`` for the gauge ``lam`` (default: ``-alpha_a p_a`` if nested, else 0)."""
    if t is None:
        t = state.time if isinstance(state, SpinChainState) else 0.0
    return -1j * _Z(state) @ eom_matrix(state, config, t, gauge)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    config: SpinChainConfig
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) != len(self.states):
            raise ValueError("times and states must have equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def state(self, k: int) -> SpinChainState:
        return SpinChainState(self.states[k], float(self.times[k]))

    def gram(self) -> np.ndarray:
        Z = self.states
        return np.einsum("kia,kib->kab", Z.conj(), Z)

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.states) ** 2, axis=1)

    def energies(self) -> np.ndarray:
        A = self.gram()
        return 0.5 * np.einsum("ab,kab->k", self.config.alpha, np.abs(A) ** 2)

    def det_gram(self) -> np.ndarray:
        return np.linalg.det(self.gram()).real

    def samples(self):
        """Iterate ``(t, state, diagnostics)``; diagnostics are computed on the fly."""
        H, N, D, A = self.energies(), self.norms(), self.det_gram(), self.gram()
        for k in range(len(self)):
            yield (float(self.times[k]), self.state(k),
                   {"H": float(H[k]), "norms": N[k], "detK": float(D[k]), "gram": A[k]})

    def energy_drift(self) -> float:
        H = self.energies()
        return float(np.abs(H - H[0]).max() / max(H[0], 1.0))

    def norm_drift(self) -> float:
        return float(np.abs(self.norms() - np.asarray(self.config.p)).max())

    def max_deviation(self, other: "Trajectory") -> float:
        if len(self) != len(other) or not np.allclose(self.times, other.times, rtol=0, atol=1e-12):
            raise ValueError("trajectories are sampled on different grids")
        return float(np.abs(self.states - other.states).max())

    # export

    def metadata(self) -> dict:
        out = {"config": self.config.to_dict(), "n": self.config.n, "samples": len(self)}
        out.update(self.meta)
        return out

    def csv_header(self) -> list[str]:
        n = self.config.n
        cols = ["t"]
        for i in range(n):
            for j in range(n):
                cols += [f"Re_Z{i + 1}{j + 1}", f"Im_Z{i + 1}{j + 1}"]
        return cols + ["H", "detK"]

    def to_csv(self, metadata: dict | None = None) -> str:
        """First line ``# {json metadata}``, then a header row, then one row per sample.

        Columns: ``t``, then ``Re_Zij, Im_Zij`` for ``Z`` in row-major order,
        then ``H`` and ``detK = det(Z^dag Z)``.
        """
        buf = io.StringIO()
        buf.write("# " + json.dumps(metadata if metadata is not None else self.metadata(),
                                    sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        H, D = self.energies(), self.det_gram()
        flat = self.states.reshape(len(self), -1)
        for k in range(len(self)):
            row = [repr(float(self.times[k]))]
            for z in flat[k]:
                row += [repr(float(z.real)), repr(float(z.imag))]
            row += [repr(float(H[k])), repr(float(D[k]))]
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        lines = text.splitlines()
        meta = json.loads(lines[0][1:].strip()) if lines and lines[0].startswith("#") else {}
        rows = list(csv.reader(lines[2:] if meta else lines[1:]))
        config = SpinChainConfig.from_dict(meta["config"])
        n = config.n
        data = np.array([[float(x) for x in r] for r in rows])
        Z = (data[:, 1:1 + 2 * n * n:2] + 1j * data[:, 2:2 + 2 * n * n:2]).reshape(-1, n, n)
        extra = {k: v for k, v in meta.items() if k not in ("config", "n", "samples")}
        return cls(data[:, 0], Z, config, extra)

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata(),
            "times": self.times.tolist(),
            "states_re": self.states.real.tolist(),
            "states_im": self.states.imag.tolist(),
            "H": self.energies().tolist(),
            "detK": self.det_gram().tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        d = json.loads(text)
        meta = d["metadata"]
        config = SpinChainConfig.from_dict(meta["config"])
        Z = np.array(d["states_re"]) + 1j * np.array(d["states_im"])
        extra = {k: v for k, v in meta.items() if k not in ("config", "n", "samples")}
        return cls(np.array(d["times"], dtype=float), Z, config, extra)


def integrate(config: SpinChainConfig, Z0, t_end: float, dt: float, gauge: Gauge = None,
              record_every: int = 1, renormalize: bool = True, backend: str | None = None,
              check_initial: bool = True) -> Trajectory:
    """Fixed-step RK4 with column renormalization to ``sqrt(p_a)`` after every step.

    ``gauge`` gives the multipliers ``lam_a`` (array or function of time).
    Raises ``BlowUpError`` if a column norm leaves a 10% band around ``p_a``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    Z0 = np.asarray(Z0, dtype=complex)
    if check_initial:
        SpinChainState(Z0).validate(config)
    steps = int(round(t_end / dt))
    if abs(steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be an integer multiple of dt")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    half_times = 0.5 * dt * np.arange(2 * steps + 1)
    if callable(gauge):
        lam = np.array([gauge(t) for t in half_times], dtype=float).reshape(2 * steps + 1, config.n)
    else:
        lam = np.broadcast_to(_resolve_gauge(config, gauge, 0.0), (2 * steps + 1, config.n))
    states, status, done = _kernels.rk4(Z0, config.alpha, lam, np.asarray(config.p), dt, steps,
                                        record_every, renormalize, backend)
    if status != _kernels.OK:
        raise BlowUpError(f"column norms left the 10% band at t = {done * dt:.6g}", done * dt)
    times = dt * record_every * np.arange(len(states))
    return Trajectory(times, states, config,
                      {"dt": dt, "method": "rk4", "backend": backend or _kernels.default_backend()})


def gram_and_lax(state, config: SpinChainConfig):
    """``(A, B, residual)`` at one state, with ``A'`` taken from the equations of motion.

    Passing a ``Trajectory`` returns stacked ``A`` and ``B`` and the maximum
    finite-difference residual from ``lax_residual``.
    """
    config.require_nested()
    W = config.weights()
    if isinstance(state, Trajectory):
        A = state.gram()
        return A, W * A, float(lax_residual(state).max(initial=0.0))
    Z = _Z(state)
    A = Z.conj().T @ Z
    B = W * A
    Zd = eom_rhs(Z, config)
    Ad = Zd.conj().T @ Z + Z.conj().T @ Zd
    return A, B, float(np.linalg.norm(1j * Ad + B @ A - A @ B))


def lax_residual(traj: Trajectory) -> np.ndarray:
    """``||i A' + [B, A]||`` at interior samples, ``A'`` by centered differences."""
    traj.config.require_nested()
    if len(traj) < 3:
        raise ValueError("need at least three samples")
    t = traj.times
    h = np.diff(t)
    if np.abs(h - h[0]).max() > 1e-9 * h[0]:
        raise ValueError("lax_residual needs a uniform time grid")
    A = traj.gram()
    B = traj.config.weights() * A
    Ad = (A[2:] - A[:-2]) / (2 * h[0])
    Ai, Bi = A[1:-1], B[1:-1]
    R = 1j * Ad + Bi @ Ai - Ai @ Bi
    return np.linalg.norm(R, axis=(1, 2))


PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def bloch_vector(z) -> np.ndarray:
    """``(z^dag sigma z) / (z^dag z)`` with the standard Pauli matrices."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.shape != (2,):
        raise ValueError("bloch_vector needs a 2-vector")
    nz = np.vdot(z, z).real
    if nz == 0.0:
        raise ValueError("zero vector has no Bloch vector")
    return np.array([np.vdot(z, s @ z).real for s in PAULI]) / nz


__all__ = [
    "SpinChainConfig", "SpinChainState", "Trajectory", "BlowUpError", "NonNestedError",
    "hamiltonian", "eom_rhs", "eom_matrix", "integrate", "gram", "gram_and_lax", "lax_residual",
    "bloch_vector", "normalize_columns", "random_state", "PAULI",
]
