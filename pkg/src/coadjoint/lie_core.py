"""Matrix Lie group and Lie algebra primitives for the compact classical families.

Conventions
-----------
Algebra elements are stored anti-Hermitian:

* ``su(n)``: ``i * diag(lambda)`` for a real Cartan element ``lambda``;
* ``so(m)``: real antisymmetric, Cartan elements ``diag(lambda) (x) J2``;
* ``sp(n)``: ``X^dagger = -X`` and ``X^t omega + omega X = 0`` with
  ``omega = 1_n (x) J2``; Cartan elements ``i * diag(lambda) (x) sigma3``.

The Hermitian "moment" matrix attached to a stored element ``X`` is ``-i X``.
"""
from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])

_TOL = {"default": 1e-10}


def default_tolerance() -> float:
    return _TOL["default"]


def set_default_tolerance(value: float) -> None:
    """Set the membership/residual tolerance used when ``tol=None``."""
    if not value > 0:
        raise ValueError("tolerance must be positive")
    _TOL["default"] = float(value)


class Family(str, enum.Enum):
    SU = "SU"
    SO_EVEN = "SO_even"
    SO_ODD = "SO_odd"
    SP = "Sp"


@dataclass(frozen=True)
class GroupFamily:
    """A compact classical group, identified by family and rank parameter ``n``.

    The matrix size is ``n``, ``2n``, ``2n+1`` or ``2n`` for SU, SO_even,
    SO_odd and Sp respectively.
    """

    family: Family
    n: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"rank parameter must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def size(self) -> int:
        return {
            Family.SU: self.n,
            Family.SO_EVEN: 2 * self.n,
            Family.SO_ODD: 2 * self.n + 1,
            Family.SP: 2 * self.n,
        }[self.family]

    @property
    def dim(self) -> int:
        m = self.size
        if self.family is Family.SU:
            return m * m - 1
        if self.family is Family.SP:
            return self.n * (2 * self.n + 1)
        return m * (m - 1) // 2

    @property
    def is_real(self) -> bool:
        return self.family in (Family.SO_EVEN, Family.SO_ODD)

    def __str__(self) -> str:
        name = "SO" if self.is_real else self.family.value
        return f"{name}({self.size if self.is_real else self.n})"

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "GroupFamily":
        """Parse ``"SU(3)"``, ``"SO(7)"``, ``"Sp(2)"`` or a family name plus ``n``.

        For the ``"SO(m)"`` form ``m`` is the matrix size; the family name forms
        (``"SO_even"``, ``"SO_odd"``) take the rank parameter.  A bare ``"SO"``
        with ``n`` also treats ``n`` as the matrix size.
        """
        text = text.strip()
        m = re.fullmatch(r"(SU|SO|Sp)\((\d+)\)", text)
        if m:
            name, k = m.group(1), int(m.group(2))
        elif text == "SO" and n is not None:
            name, k = "SO", int(n)
        else:
            if n is None:
                raise ValueError(f"cannot parse group {text!r} without a rank parameter")
            return cls(Family(text), n)
        if name == "SO":
            if k < 2:
                raise ValueError("SO(m) needs m >= 2")
            return cls(Family.SO_EVEN, k // 2) if k % 2 == 0 else cls(Family.SO_ODD, k // 2)
        return cls(Family(name), k)

    def symplectic_form(self) -> np.ndarray:
        """``omega = 1_n (x) J2``; only meaningful for Sp."""
        return np.kron(np.eye(self.n), J2)


@dataclass(frozen=True)
class CartanSpec:
    """Block multiplicities and eigenvalues of a Cartan element.

    For SU the blocks tile ``C^n`` and ``sum n_i lambda_i = 0``.  For SO/Sp the
    blocks tile the ``n`` two-dimensional planes (resp. quaternionic lines); a
    block with eigenvalue ``0`` plays the role of the ``n_0`` block.  Unless
    ``degenerate`` is set, the eigenvalues (SU) or their absolute values
    (SO/Sp) must be pairwise distinct.
    """

    group: GroupFamily
    multiplicities: tuple[int, ...]
    eigenvalues: tuple[float, ...]
    degenerate: bool = False

    def __post_init__(self):
        mult = tuple(int(k) for k in self.multiplicities)
        eig = tuple(float(x) for x in self.eigenvalues)
        object.__setattr__(self, "multiplicities", mult)
        object.__setattr__(self, "eigenvalues", eig)
        if len(mult) != len(eig):
            raise ValueError(
                f"{len(mult)} multiplicities but {len(eig)} eigenvalues")
        if not mult or any(k <= 0 for k in mult):
            raise ValueError(f"multiplicities must be positive integers, got {mult}")
        if sum(mult) != self.group.n:
            raise ValueError(
                f"multiplicities sum to {sum(mult)}, expected {self.group.n}")
        if self.group.family is Family.SU:
            trace = sum(k * x for k, x in zip(mult, eig))
            if abs(trace) > 1e-10 * max(1.0, max(abs(x) for x in eig)):
                raise ValueError(f"SU Cartan element must be traceless, trace = {trace:g}")
        if not self.degenerate:
            keys = eig if self.group.family is Family.SU else tuple(abs(x) for x in eig)
            if len(set(keys)) != len(keys):
                raise ValueError(
                    "eigenvalues must be distinct (pass degenerate=True to allow)")

    def diagonal(self) -> np.ndarray:
        """The real diagonal ``(lambda_0 1_{n_0}, ..., lambda_r 1_{n_r})``."""
        return np.repeat(np.asarray(self.eigenvalues), self.multiplicities)

    @classmethod
    def from_diagonal(cls, group: GroupFamily, diag: Sequence[float]) -> "CartanSpec":
        """Run-length encode a diagonal into blocks; always flagged degenerate."""
        diag = [float(x) for x in diag]
        mult, eig = [], []
        for x in diag:
            if eig and eig[-1] == x:
                mult[-1] += 1
            else:
                mult.append(1)
                eig.append(x)
        return cls(group, tuple(mult), tuple(eig), degenerate=True)


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    matrix: np.ndarray
    group: GroupFamily

    def hermitian(self) -> np.ndarray:
        """The Hermitian moment matrix ``-i X``."""
        return -1j * self.matrix

    def spectral_part(self) -> np.ndarray:
        """Real eigenvalues of the Hermitian moment matrix, ascending."""
        return np.linalg.eigvalsh(_hermitize(self.hermitian()))

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(self.matrix + as_matrix(other), self.group)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(self.matrix - as_matrix(other), self.group)

    def __mul__(self, scalar: float) -> "AlgebraElement":
        return AlgebraElement(scalar * self.matrix, self.group)

    __rmul__ = __mul__


MatrixLike = Union[AlgebraElement, np.ndarray]


def as_matrix(X: MatrixLike) -> np.ndarray:
    return X.matrix if isinstance(X, AlgebraElement) else np.asarray(X)


def _hermitize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def build_cartan(spec: CartanSpec) -> AlgebraElement:
    d = spec.diagonal()
    fam = spec.group.family
    if fam is Family.SU:
        X = 1j * np.diag(d)
    elif fam is Family.SO_EVEN:
        X = np.kron(np.diag(d), J2)
    elif fam is Family.SO_ODD:
        m = spec.group.size
        X = np.zeros((m, m))
        X[: m - 1, : m - 1] = np.kron(np.diag(d), J2)
    else:
        X = 1j * np.kron(np.diag(d), SIGMA3)
    return AlgebraElement(X.astype(complex), spec.group)


def sp_block_to_interleaved(n: int) -> np.ndarray:
    """Permutation ``P`` with ``P^t diag(A, B) P`` in the interleaved ordering.

    The block ordering uses ``omega = J2 (x) 1_n``; the interleaved one uses
    ``omega = 1_n (x) J2``.  ``P`` maps interleaved index ``2k + s`` to block
    index ``s n + k``.
    """
    P = np.zeros((2 * n, 2 * n))
    for k in range(n):
        for s in range(2):
            P[s * n + k, 2 * k + s] = 1.0
    return P


def algebra_residual(X: MatrixLike, group: GroupFamily) -> float:
    """Largest violation of the defining relations of ``group``'s algebra."""
    X = as_matrix(X)
    res = np.abs(X + X.conj().T).max(initial=0.0)
    if group.family is Family.SU:
        res = max(res, abs(np.trace(X)))
    elif group.is_real:
        res = max(res, np.abs(X.imag).max(initial=0.0))
    else:
        w = group.symplectic_form()
        res = max(res, np.abs(X.T @ w + w @ X).max(initial=0.0))
    return float(res)


def in_algebra(X: MatrixLike, group: GroupFamily, tol: float | None = None) -> bool:
    tol = default_tolerance() if tol is None else tol
    return algebra_residual(X, group) < tol


def killing_pairing(X: MatrixLike, Y: MatrixLike) -> float:
    """``Tr(XY)``; real for two elements of the same compact algebra."""
    X, Y = as_matrix(X), as_matrix(Y)
    if X.shape != Y.shape:
        raise ValueError(f"size mismatch: {X.shape} vs {Y.shape}")
    return float(np.einsum("ij,ji->", X, Y).real)


def commutator(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X @ Y - Y @ X


def to_real_vector(X: np.ndarray) -> np.ndarray:
    """Flatten a complex matrix (or a stack of them) into real coordinates."""
    X = np.asarray(X)
    lead = X.shape[:-2]
    flat = X.reshape(lead + (X.shape[-2] * X.shape[-1],))
    return np.concatenate([flat.real, flat.imag], axis=-1)


def _sp_project(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    return 0.5 * (X + w @ X.T @ w)


def _orthonormal_span(mats: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    m = mats.shape[-1]
    V = to_real_vector(mats)
    _, s, vt = np.linalg.svd(V, full_matrices=False)
    rank = int(np.sum(s > rtol * s[0])) if s.size else 0
    rows = vt[:rank]
    half = rows.shape[1] // 2
    return (rows[:, :half] + 1j * rows[:, half:]).reshape(rank, m, m)


@functools.lru_cache(maxsize=None)
def _basis_cached(group: GroupFamily) -> np.ndarray:
    m = group.size
    mats = []
    if group.family is Family.SU:
        for k in range(m - 1):
            E = np.zeros((m, m), complex)
            E[k, k], E[m - 1, m - 1] = 1j, -1j
            mats.append(E)
    for j in range(m):
        for k in range(j + 1, m):
            E = np.zeros((m, m), complex)
            E[j, k], E[k, j] = 1.0, -1.0
            mats.append(E)
            if not group.is_real:
                F = np.zeros((m, m), complex)
                F[j, k] = F[k, j] = 1j
                mats.append(F)
    if group.family is Family.SP:
        for k in range(m):
            E = np.zeros((m, m), complex)
            E[k, k] = 1j
            mats.append(E)
        w = group.symplectic_form()
        mats = [_sp_project(E, w) for E in mats]
    if not mats:
        return np.zeros((0, m, m), complex)
    basis = _orthonormal_span(np.array(mats))
    if basis.shape[0] != group.dim:
        raise RuntimeError(f"basis of {group} has {basis.shape[0]} elements, expected {group.dim}")
    basis.flags.writeable = False
    return basis


def algebra_basis(group: GroupFamily) -> np.ndarray:
    """Basis of the real Lie algebra, orthonormal for the real Frobenius product.

    Returns an array of shape ``(dim, m, m)``.
    """
    return _basis_cached(group)


def random_algebra_element(group: GroupFamily, rng: np.random.Generator,
                           scale: float = 1.0) -> AlgebraElement:
    basis = algebra_basis(group)
    coeffs = rng.standard_normal(basis.shape[0]) * scale
    return AlgebraElement(np.tensordot(coeffs, basis, axes=1), group)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng(np.random.SeedSequence([int(s) for s in seed]))
    return np.random.default_rng(seed)


def haar_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of U(m) (QR of a Ginibre matrix, phases fixed)."""
    A = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    Q, R = np.linalg.qr(A)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def haar_orthogonal(m: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((m, m))
    Q, R = np.linalg.qr(A)
    return Q * np.sign(np.diag(R))


def sample_group_element(group: GroupFamily, seed) -> np.ndarray:
    """Deterministic pseudo-random element of ``group``.

    ``seed`` may be an integer, a tuple of integers (hashed through
    ``SeedSequence``) or a ``numpy.random.Generator``.  SU and SO samples are
    Haar; Sp samples are exponentials of random algebra elements.
    """
    rng = _rng(seed)
    m = group.size
    if group.family is Family.SU:
        g = haar_unitary(m, rng)
        return g / np.linalg.det(g) ** (1.0 / m)
    if group.is_real:
        g = haar_orthogonal(m, rng)
        if np.linalg.det(g) < 0:
            g[:, 0] = -g[:, 0]
        return g.astype(complex)
    X = random_algebra_element(group, rng, scale=np.pi / np.sqrt(group.dim)).matrix
    return matrix_exp_antihermitian(X)


def group_residual(g: np.ndarray, group: GroupFamily) -> float:
    g = np.asarray(g)
    m = group.size
    if g.shape != (m, m):
        return np.inf
    res = np.abs(g.conj().T @ g - np.eye(m)).max()
    if group.family is Family.SU:
        res = max(res, abs(np.linalg.det(g) - 1.0))
    elif group.is_real:
        res = max(res, np.abs(g.imag).max(), abs(np.linalg.det(g) - 1.0))
    else:
        w = group.symplectic_form()
        res = max(res, np.abs(g.T @ w @ g - w).max())
    return float(res)


def adjoint_action(g: np.ndarray, X: MatrixLike, tol: float | None = None,
                   group: GroupFamily | None = None) -> AlgebraElement:
    """``Ad_g X = g X g^dagger`` for ``g`` in the group of ``X``."""
    tol = default_tolerance() if tol is None else tol
    if group is None:
        if not isinstance(X, AlgebraElement):
            raise TypeError("pass an AlgebraElement or an explicit group")
        group = X.group
    g = np.asarray(g)
    Xm = as_matrix(X)
    if g.shape != Xm.shape:
        raise ValueError(f"size mismatch: g {g.shape}, X {Xm.shape}")
    res = group_residual(g, group)
    if res > tol:
        raise ValueError(f"g is not in {group}: residual {res:.3g}")
    return AlgebraElement(g @ Xm @ g.conj().T, group)


def matrix_exp_antihermitian(X: np.ndarray) -> np.ndarray:
    """``exp(X)`` for anti-Hermitian ``X``; unitary to rounding."""
    w, V = np.linalg.eigh(_hermitize(-1j * X))
    return (V * np.exp(1j * w)) @ V.conj().T


__all__ = [
    "Family", "GroupFamily", "CartanSpec", "AlgebraElement", "J2", "SIGMA3",
    "build_cartan", "killing_pairing", "sample_group_element", "adjoint_action",
    "algebra_basis", "algebra_residual", "in_algebra", "random_algebra_element",
    "commutator", "to_real_vector", "group_residual", "sp_block_to_interleaved",
    "haar_unitary", "haar_orthogonal", "default_tolerance", "set_default_tolerance",
    "matrix_exp_antihermitian", "as_matrix",
]
