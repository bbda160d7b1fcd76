"""Isotropic embeddings of flag manifolds into products of coadjoint orbits.

An embedding is specified by a target Cartan element ``Lambda`` and factors
``Lambda_i`` with ``sum_i Lambda_i = 0`` and ``Lambda = sum_i C_i Lambda_i``;
the orbit point ``Ad_g Lambda`` maps to ``(Ad_g Lambda_0, ..., Ad_g Lambda_r)``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lie_core import (
    AlgebraElement,
    CartanSpec,
    Family,
    GroupFamily,
    MatrixLike,
    adjoint_action,
    as_matrix,
    build_cartan,
    commutator,
    haar_unitary,
    random_algebra_element,
    sample_group_element,
    to_real_vector,
)
from .orbits import joint_stabilizer_dim, kks_form, orbit_dim, stabilizer_dim


class EmbeddingInvariantError(ValueError):
    """An embedding spec violates one of its defining conditions."""


class FlagRecoveryError(RuntimeError):
    pass


class EmbeddingKind(str, enum.Enum):
    GENERIC = "generic"
    SU_GRASSMANN = "su_grassmann"
    UPSILON = "upsilon"
    SO6_LAGRANGIAN = "so6_lagrangian"


@dataclass(frozen=True)
class EmbeddingSpec:
    group: GroupFamily
    target: CartanSpec
    factors: tuple[CartanSpec, ...]
    coefficients: tuple[float, ...]
    kind: EmbeddingKind = EmbeddingKind.GENERIC
    blocks: tuple[int, ...] = ()
    """Block sizes of the flag read off by ``flag_recover`` (builder-specific)."""

    def __post_init__(self):
        object.__setattr__(self, "kind", EmbeddingKind(self.kind))
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))

    def factor_matrices(self) -> list[np.ndarray]:
        return [build_cartan(f).matrix for f in self.factors]

    def residuals(self) -> dict:
        Lam = build_cartan(self.target).matrix
        mats = self.factor_matrices()
        if len(self.coefficients) != len(mats):
            raise EmbeddingInvariantError(
                f"{len(mats)} factors but {len(self.coefficients)} coefficients")
        combo = sum(c * M for c, M in zip(self.coefficients, mats))
        return {
            "decomposition": float(np.abs(Lam - combo).max()),
            "factor_sum": float(np.abs(np.sum(mats, axis=0)).max()),
            "stabilizer_target": stabilizer_dim(self.target),
            "stabilizer_joint": joint_stabilizer_dim(mats, self.group),
        }

    def validate(self) -> None:
        if any(f.group != self.group for f in self.factors) or self.target.group != self.group:
            raise EmbeddingInvariantError("all Cartan specs must share the embedding's group")
        r = self.residuals()
        if r["decomposition"] > 1e-10:
            raise EmbeddingInvariantError(
                f"Lambda != sum C_i Lambda_i (residual {r['decomposition']:.3g})")
        if r["factor_sum"] > 1e-12:
            raise EmbeddingInvariantError(
                f"sum of factors is not zero (residual {r['factor_sum']:.3g})")
        if r["stabilizer_target"] != r["stabilizer_joint"]:
            raise EmbeddingInvariantError(
                f"joint stabilizer has dimension {r['stabilizer_joint']}, "
                f"target stabilizer {r['stabilizer_target']}")

    def to_dict(self) -> dict:
        return {
            "group": self.group.family.value,
            "n": self.group.n,
            "multiplicities": list(self.target.multiplicities),
            "eigenvalues": list(self.target.eigenvalues),
            "degenerate": self.target.degenerate,
            "factors": [
                {"multiplicities": list(f.multiplicities),
                 "eigenvalues": list(f.eigenvalues),
                 "degenerate": f.degenerate}
                for f in self.factors
            ],
            "coefficients": list(self.coefficients),
            "kind": self.kind.value,
            "blocks": list(self.blocks),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingSpec":
        group = GroupFamily(Family(d["group"]), int(d["n"]))
        target = CartanSpec(group, d["multiplicities"], d["eigenvalues"],
                            degenerate=bool(d.get("degenerate", False)))
        factors = tuple(
            CartanSpec(group, f["multiplicities"], f["eigenvalues"],
                       degenerate=bool(f.get("degenerate", True)))
            for f in d["factors"]
        )
        coeffs = d.get("coefficients")
        if coeffs is None:
            coeffs = solve_coefficients(target, factors)
        return cls(group, target, factors, coeffs,
                   kind=d.get("kind", "generic"), blocks=d.get("blocks", ()))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "EmbeddingSpec":
        return cls.from_dict(json.loads(text))


def solve_coefficients(target: CartanSpec, factors: Sequence[CartanSpec]) -> tuple[float, ...]:
    """Least-squares ``C`` with ``Lambda = sum C_i Lambda_i``.

    Raises ``EmbeddingInvariantError`` if the target is not in the span.
    """
    Lam = to_real_vector(build_cartan(target).matrix)
    A = np.array([to_real_vector(build_cartan(f).matrix) for f in factors]).T
    coeffs, *_ = np.linalg.lstsq(A, Lam, rcond=None)
    resid = float(np.abs(A @ coeffs - Lam).max(initial=0.0))
    if resid > 1e-10:
        raise EmbeddingInvariantError(
            f"target is not a combination of the factors (residual {resid:.3g})")
    return tuple(float(c) for c in coeffs)


def _generic_su_eigenvalues(multiplicities: Sequence[int]) -> tuple[float, ...]:
    n = sum(multiplicities)
    raw = np.arange(1, len(multiplicities) + 1, dtype=float)
    shift = np.dot(multiplicities, raw) / n
    return tuple(raw - shift)


def su_grassmann_set(n: int, multiplicities: Sequence[int],
                     eigenvalues: Sequence[float] | None = None) -> EmbeddingSpec:
    """Flag manifold ``F_{n_0..n_r}`` into ``Gr(n_0, n) x ... x Gr(n_r, n)``.

    Factor ``i`` is ``-n_i`` on every block except block ``i``, where it is
    ``n - n_i``.
    """
    mult = tuple(int(k) for k in multiplicities)
    if sum(mult) != n or any(k <= 0 for k in mult):
        raise ValueError(f"{mult} is not a partition of {n}")
    group = GroupFamily(Family.SU, n)
    if eigenvalues is None:
        eigenvalues = _generic_su_eigenvalues(mult)
    target = CartanSpec(group, mult, eigenvalues)
    factors = []
    for i, ni in enumerate(mult):
        diag = np.concatenate([np.full(k, float(n - ni) if j == i else float(-ni))
                               for j, k in enumerate(mult)])
        factors.append(CartanSpec.from_diagonal(group, diag))
    coeffs = solve_coefficients(target, factors)
    return EmbeddingSpec(group, target, tuple(factors), coeffs,
                         kind=EmbeddingKind.SU_GRASSMANN, blocks=mult)


def upsilon_diagonals(n: int, multiplicities: Sequence[int]) -> list[np.ndarray]:
    """Integer diagonals of the ``r + 1`` matrices Upsilon_1..Upsilon_{r+1}.

    Upsilon_l (l <= r) is ``2^(r-l)`` times ``-1`` on blocks ``< l``, ``+1`` on
    block ``l`` and ``0`` elsewhere; Upsilon_{r+1} is ``-1`` on every block.
    The trailing ``n - m`` entries are zero.
    """
    mult = [int(k) for k in multiplicities]
    r, m = len(mult), sum(mult)
    if m > n:
        raise ValueError(f"multiplicities sum to {m} > n = {n}")
    if r == 0 or any(k <= 0 for k in mult):
        raise ValueError(f"invalid multiplicities {mult}")
    out = []
    for ell in range(1, r + 2):
        scale = 2 ** (r - ell) if ell <= r else 1
        d = np.zeros(n, dtype=np.int64)
        pos = 0
        for j, k in enumerate(mult, start=1):
            if j < ell:
                d[pos:pos + k] = -scale
            elif j == ell:
                d[pos:pos + k] = scale
            pos += k
        out.append(d)
    return out


def so_upsilon_set(n: int, multiplicities: Sequence[int], family: Family | str = Family.SO_EVEN,
                   eigenvalues: Sequence[float] | None = None) -> EmbeddingSpec:
    """Generalized flag manifold of SO(2n), SO(2n+1) or Sp(n) into isotropic Grassmannians.

    The factors are ``Upsilon_l (x) J2`` (padded by a zero row and column for
    SO(2n+1)) or ``Upsilon_l (x) sigma3`` for Sp(n).
    """
    family = Family(family)
    if family is Family.SU:
        raise ValueError("use su_grassmann_set for SU(n)")
    mult = tuple(int(k) for k in multiplicities)
    diags = upsilon_diagonals(n, mult)
    if int(np.abs(np.sum(diags, axis=0)).max()) != 0:
        raise AssertionError("Upsilon matrices do not sum to zero")
    group = GroupFamily(family, n)
    m = sum(mult)
    if eigenvalues is None:
        eigenvalues = tuple(float(k) for k in range(1, len(mult) + 1))
    eig = tuple(eigenvalues)
    if len(eig) != len(mult):
        raise ValueError(f"need {len(mult)} eigenvalues, got {len(eig)}")
    if m < n:
        target = CartanSpec(group, mult + (n - m,), eig + (0.0,))
    else:
        target = CartanSpec(group, mult, eig)
    factors = tuple(CartanSpec.from_diagonal(group, d) for d in diags)
    coeffs = solve_coefficients(target, factors)
    return EmbeddingSpec(group, target, factors, coeffs,
                         kind=EmbeddingKind.UPSILON, blocks=mult)


SO6_SIGN_PATTERNS = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))


def so6_lagrangian_set(eigenvalues: Sequence[float] = (1.0, 2.0, 3.0)) -> EmbeddingSpec:
    """``SO(6)/U(1)^3`` into four copies of ``SO(6)/U(3)``."""
    group = GroupFamily(Family.SO_EVEN, 3)
    target = CartanSpec(group, (1, 1, 1), eigenvalues)
    factors = tuple(CartanSpec.from_diagonal(group, s) for s in SO6_SIGN_PATTERNS)
    coeffs = solve_coefficients(target, factors)
    return EmbeddingSpec(group, target, factors, coeffs,
                         kind=EmbeddingKind.SO6_LAGRANGIAN, blocks=(1, 1, 1))


def generic_embedding(target: CartanSpec, factors: Sequence[CartanSpec]) -> EmbeddingSpec:
    """Any decomposition; coefficients are fitted and the result validated."""
    spec = EmbeddingSpec(target.group, target, tuple(factors),
                         solve_coefficients(target, factors))
    spec.validate()
    return spec


def embed(spec: EmbeddingSpec, g: np.ndarray) -> list[AlgebraElement]:
    """Image ``(Ad_g Lambda_i)_i`` of the orbit point ``Ad_g Lambda``."""
    return [adjoint_action(g, build_cartan(f)) for f in spec.factors]


@dataclass(frozen=True)
class EmbeddingCertificate:
    isotropy_residual: float
    orbit_dim: int
    factor_dims: tuple[int, ...]
    lagrangian: bool
    moment_residual: float
    samples: int
    kind: str = "generic"

    @property
    def dims(self) -> tuple[int, tuple[int, ...], int]:
        return self.orbit_dim, self.factor_dims, sum(self.factor_dims)

    def isotropic(self, tol: float = 1e-9) -> bool:
        return self.isotropy_residual < tol

    def to_dict(self) -> dict:
        return {
            "isotropy_residual": self.isotropy_residual,
            "orbit_dim": self.orbit_dim,
            "factor_dims": list(self.factor_dims),
            "factor_dim_sum": sum(self.factor_dims),
            "lagrangian": self.lagrangian,
            "moment_residual": self.moment_residual,
            "samples": self.samples,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingCertificate":
        return cls(float(d["isotropy_residual"]), int(d["orbit_dim"]),
                   tuple(int(k) for k in d["factor_dims"]), bool(d["lagrangian"]),
                   float(d["moment_residual"]), int(d["samples"]), d.get("kind", "generic"))


def certify(spec: EmbeddingSpec, samples: int = 20, seed: int = 0,
            perturbation: float = 0.0) -> EmbeddingCertificate:
    """Numerically certify that the embedded orbit is isotropic.

    For each sample the product KKS form is evaluated on a random pair of
    tangent vectors ``([a, x_i])_i``, ``([b, x_i])_i`` with each factor's
    generator recovered from its own tangent vector.  ``perturbation`` moves
    each factor point independently by ``exp(eps * c_i)`` off the embedded
    orbit, which is useful to check first-order sensitivity.
    """
    spec.validate()
    group = spec.group
    target_dim = orbit_dim(spec.target)
    factor_dims = tuple(orbit_dim(f) for f in spec.factors)
    Lams = spec.factor_matrices()
    iso = 0.0
    mom = 0.0
    for s in range(samples):
        g = sample_group_element(group, (seed, s))
        rng = np.random.default_rng(np.random.SeedSequence([seed, s, 1]))
        a = random_algebra_element(group, rng).matrix
        b = random_algebra_element(group, rng).matrix
        a /= max(np.linalg.norm(a), 1e-300)
        b /= max(np.linalg.norm(b), 1e-300)
        total = 0.0
        xs = []
        for Lam in Lams:
            gi = g
            if perturbation:
                c = random_algebra_element(group, rng).matrix
                gi = g @ _expm_ah(perturbation * c / max(np.linalg.norm(c), 1e-300))
            x = AlgebraElement(gi @ Lam @ gi.conj().T, group)
            xs.append(x.matrix)
            if group.dim:
                total += kks_form(x, commutator(a, x.matrix), commutator(b, x.matrix))
        iso = max(iso, abs(total))
        mom = max(mom, float(np.abs(np.sum(xs, axis=0)).max()))
    return EmbeddingCertificate(
        isotropy_residual=iso,
        orbit_dim=target_dim,
        factor_dims=factor_dims,
        lagrangian=2 * target_dim == sum(factor_dims),
        moment_residual=mom,
        samples=samples,
        kind=spec.kind.value,
    )


def _expm_ah(X: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(-0.5j * (X - X.conj().T))
    return (V * np.exp(1j * w)) @ V.conj().T


# ---------------------------------------------------------------------------
# two-step SO(2n) series

@dataclass(frozen=True, eq=False)
class TwoStepImage:
    """Hermitian moment matrices of ``(x + y, x + y*, x)`` in the three factors."""

    mu_u: np.ndarray
    mu_v: np.ndarray
    mu_w: np.ndarray

    def moment(self) -> np.ndarray:
        return self.mu_u + self.mu_v - 2.0 * self.mu_w

    def moment_residual(self) -> float:
        return float(np.abs(self.moment()).max())

    def algebra_elements(self, n: int) -> list[AlgebraElement]:
        group = GroupFamily(Family.SO_EVEN, n)
        return [AlgebraElement(1j * M, group) for M in (self.mu_u, self.mu_v, self.mu_w)]


def isotropic_moment(vectors: np.ndarray) -> np.ndarray:
    """``sum_i (u_i u_i^dagger - u_i^* u_i^t)`` for the columns ``u_i``."""
    U = np.atleast_2d(np.asarray(vectors))
    if U.shape[0] == 1 and U.shape[1] > 1 and np.ndim(vectors) == 1:
        U = U.T
    return U @ U.conj().T - U.conj() @ U.T


def two_step_so_embed(n: int, x_line: np.ndarray, y_plane: np.ndarray,
                      tol: float = 1e-10) -> TwoStepImage:
    """``(x, y) -> (x + y, x + y*, x)`` for SO(2n)/(U(1) x U(n-1)).

    ``x_line`` is a unit vector in ``C^{2n}`` and ``y_plane`` a ``2n x (n-1)``
    matrix with orthonormal columns; ``x + y`` must be isotropic for the
    symmetric form and ``y`` orthogonal to ``x``.
    """
    x = np.asarray(x_line, dtype=complex).reshape(-1)
    Y = np.asarray(y_plane, dtype=complex).reshape(2 * n, n - 1)
    if x.shape != (2 * n,):
        raise ValueError(f"x must have length {2 * n}")
    B = np.column_stack([x, Y])
    checks = {
        "orthonormality": np.abs(B.conj().T @ B - np.eye(n)).max(),
        "isotropy": np.abs(B.T @ B).max(),
    }
    for name, val in checks.items():
        if val > tol:
            raise ValueError(f"{name} violated by {val:.3g}")
    U = B
    V = np.column_stack([x, Y.conj()])
    return TwoStepImage(isotropic_moment(U), isotropic_moment(V), isotropic_moment(x[:, None]))


def standard_isotropic_plane(n: int) -> np.ndarray:
    """Columns ``(e_{2k} + i e_{2k+1}) / sqrt 2``: a maximal isotropic plane in ``C^{2n}``."""
    E = np.zeros((2 * n, n), dtype=complex)
    for k in range(n):
        E[2 * k, k] = 1 / np.sqrt(2)
        E[2 * k + 1, k] = 1j / np.sqrt(2)
    return E


def random_two_step_flag(n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """A random point ``(x, y)`` of SO(2n)/(U(1) x U(n-1))."""
    group = GroupFamily(Family.SO_EVEN, n)
    g = sample_group_element(group, seed).real
    plane = g @ standard_isotropic_plane(n)
    key = list(seed) if isinstance(seed, tuple) else [int(seed)]
    rng = np.random.default_rng(np.random.SeedSequence(key + [7]))
    Y = plane[:, 1:] @ haar_unitary(n - 1, rng) if n > 1 else plane[:, 1:]
    return plane[:, 0], Y


def two_step_dims(n: int) -> tuple[int, tuple[int, int, int]]:
    """Orbit dimensions of SO(2n)/(U(1) x U(n-1)) and of the three factors."""
    if n < 2:
        raise ValueError("need n >= 2")
    group = GroupFamily(Family.SO_EVEN, n)
    lhs = orbit_dim(CartanSpec(group, (1, n - 1), (2.0, 1.0)))
    ogr = orbit_dim(CartanSpec(group, (n,), (1.0,)))
    quadric = orbit_dim(CartanSpec(group, (1, n - 1), (1.0, 0.0)))
    return lhs, (ogr, ogr, quadric)


def certify_two_step(n: int, samples: int = 50, seed: int = 0) -> dict:
    """Moment residual, weighted KKS isotropy and dimension tally for the two-step series.

    The product form carries weights ``(1, 1, -2)`` matching the moment map
    ``mu_u + mu_v - 2 mu_w``.
    """
    lhs, factor_dims = two_step_dims(n)
    group = GroupFamily(Family.SO_EVEN, n)
    weights = (1.0, 1.0, -2.0)
    mom = iso = 0.0
    for s in range(samples):
        x, y = random_two_step_flag(n, (seed, s))
        image = two_step_so_embed(n, x, y)
        mom = max(mom, image.moment_residual())
        rng = np.random.default_rng(np.random.SeedSequence([seed, s, 2]))
        a = random_algebra_element(group, rng).matrix
        b = random_algebra_element(group, rng).matrix
        total = 0.0
        for w, X in zip(weights, image.algebra_elements(n)):
            total += w * kks_form(X, commutator(a, X.matrix), commutator(b, X.matrix))
        iso = max(iso, abs(total))
    return {
        "n": n,
        "samples": samples,
        "moment_residual": mom,
        "isotropy_residual": iso,
        "orbit_dim": lhs,
        "factor_dims": list(factor_dims),
        "factor_dim_sum": sum(factor_dims),
        "lagrangian": 2 * lhs == sum(factor_dims),
    }


# ---------------------------------------------------------------------------
# flag recovery

@dataclass(frozen=True, eq=False)
class RecoveredFlag:
    planes: list
    """Orthonormal bases (``m x n_l`` arrays) of the recovered planes, in order."""
    moment_residual: float
    isotropy_residual: float = 0.0
    orthogonality_residual: float = 0.0

    def subspaces(self) -> list[np.ndarray]:
        """Bases of the nested flag ``L_1 < L_2 < ...``."""
        out, acc = [], None
        for P in self.planes:
            acc = P if acc is None else np.hstack([acc, P])
            out.append(acc)
        return out


def _hermitian_points(points: Sequence[MatrixLike]) -> list[np.ndarray]:
    mats = []
    for p in points:
        M = -1j * as_matrix(p.point if hasattr(p, "point") else p)
        mats.append(0.5 * (M + M.conj().T))
    return mats


def _split(C: np.ndarray, levels: dict, band: float):
    w, V = np.linalg.eigh(C)
    groups = {name: [] for name in levels}
    for k, val in enumerate(w):
        hit = [name for name, lv in levels.items() if abs(val - lv) < band]
        if not hit:
            raise FlagRecoveryError(
                f"eigenvalue {val:.6g} lies between the expected bands {sorted(levels.values())}")
        groups[hit[0]].append(k)
    return {name: V[:, idx] for name, idx in groups.items()}


def flag_recover(spec: EmbeddingSpec, points: Sequence[MatrixLike],
                 moment_tol: float = 1e-8, band: float = 1e-6) -> RecoveredFlag:
    """Reconstruct the flag from a point of the zero level of the moment map.

    Works inductively: the top eigenspace of the current factor's moment
    matrix, restricted to the orthogonal complement of what was already
    extracted, is the next plane of the flag.  Only the SU Grassmannian and
    Upsilon constructions are supported.
    """
    if spec.kind not in (EmbeddingKind.SU_GRASSMANN, EmbeddingKind.UPSILON):
        raise FlagRecoveryError(f"recovery is not defined for {spec.kind.value} embeddings")
    if len(points) != len(spec.factors):
        raise ValueError(f"expected {len(spec.factors)} points, got {len(points)}")
    mats = _hermitian_points(points)
    residual = float(np.abs(np.sum(mats, axis=0)).max())
    if residual > moment_tol:
        raise FlagRecoveryError(f"moment map does not vanish (residual {residual:.3g})")
    if spec.kind is EmbeddingKind.SU_GRASSMANN:
        return _recover_su(spec, mats, residual, band)
    return _recover_upsilon(spec, mats, residual, band)


def _recover_su(spec, mats, residual, band):
    n = spec.group.n
    Q = np.eye(n, dtype=complex)
    planes = []
    for ell, (M, k) in enumerate(zip(mats, spec.blocks)):
        top, low = float(n - k), float(-k)
        parts = _split(Q.conj().T @ M @ Q, {"top": top, "low": low}, band)
        if parts["top"].shape[1] != k:
            raise FlagRecoveryError(
                f"factor {ell}: top eigenspace has dimension {parts['top'].shape[1]}, expected {k}")
        P = Q @ parts["top"]
        for j in range(ell + 1, len(mats)):
            lowj = -float(spec.blocks[j])
            err = np.abs(mats[j] @ P - lowj * P).max()
            if err > band:
                raise FlagRecoveryError(f"plane {ell} is not in the low eigenspace of factor {j}")
        planes.append(P)
        Q = Q @ parts["low"]
    B = np.hstack(planes)
    ortho = float(np.abs(B.conj().T @ B - np.eye(B.shape[1])).max())
    return RecoveredFlag(planes, residual, 0.0, ortho)


def _partner(P: np.ndarray, group: GroupFamily) -> np.ndarray:
    if group.family is Family.SP:
        return group.symplectic_form() @ P.conj()
    return P.conj()


def _isotropy(P: np.ndarray, group: GroupFamily) -> float:
    if group.family is Family.SP:
        return float(np.abs(P.T @ group.symplectic_form() @ P).max())
    return float(np.abs(P.T @ P).max())


def _recover_upsilon(spec, mats, residual, band):
    group = spec.group
    r = len(spec.blocks)
    m = group.size
    Q = np.eye(m, dtype=complex)
    planes = []
    for ell in range(r):
        k = spec.blocks[ell]
        t = float(2 ** (r - 1 - ell))
        parts = _split(Q.conj().T @ mats[ell] @ Q, {"top": t, "bottom": -t, "zero": 0.0}, band)
        for name in ("top", "bottom"):
            if parts[name].shape[1] != k:
                raise FlagRecoveryError(
                    f"factor {ell}: {name} eigenspace has dimension {parts[name].shape[1]}, "
                    f"expected {k}")
        P = Q @ parts["top"]
        Pbar = Q @ parts["bottom"]
        partner = _partner(P, group)
        # the conjugate plane must coincide with the bottom eigenspace
        if np.abs(partner - Pbar @ (Pbar.conj().T @ partner)).max() > band:
            raise FlagRecoveryError(f"factor {ell}: bottom eigenspace is not conjugate to the top one")
        for j in range(ell + 1, r + 1):
            lowj = -float(2 ** (r - 1 - j)) if j < r else -1.0
            if np.abs(mats[j] @ P - lowj * P).max() > band:
                raise FlagRecoveryError(f"plane {ell} is not an eigenspace of factor {j}")
        planes.append(P)
        Q = Q @ parts["zero"]
    rest = Q.conj().T @ mats[r] @ Q
    if rest.size and np.abs(rest).max() > band:
        raise FlagRecoveryError("last factor does not vanish on the complement of the flag")
    B = np.hstack(planes)
    ortho = float(np.abs(B.conj().T @ B - np.eye(B.shape[1])).max())
    return RecoveredFlag(planes, residual, _isotropy(B, group), ortho)


# ---------------------------------------------------------------------------
# moment locus on (CP^1)^3

class TriangleLocusKind(str, enum.Enum):
    REGULAR_ORBIT = "regular_orbit"
    DEGENERATE_ISOTROPIC = "degenerate_isotropic"
    EMPTY = "empty"


@dataclass(frozen=True, eq=False)
class TriangleLocus:
    kind: TriangleLocusKind
    witness: np.ndarray | None = field(default=None)
    """``(3, 3)`` array of unit vectors with ``alpha n1 + beta n2 + gamma n3 = 0``."""

    def residual(self, weights: Sequence[float]) -> float:
        if self.witness is None:
            return float("nan")
        return float(np.linalg.norm(np.asarray(weights) @ self.witness))


def triangle_locus(alpha: float, beta: float, gamma: float) -> TriangleLocus:
    """Classify ``{alpha n1 + beta n2 + gamma n3 = 0}`` in ``(S^2)^3``."""
    w = np.array([alpha, beta, gamma], dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    big = int(np.argmax(w))
    others = [i for i in range(3) if i != big]
    gap = w[big] - w[others].sum()
    ez = np.array([0.0, 0.0, 1.0])
    if abs(gap) < 1e-9 * w.sum():
        wit = np.empty((3, 3))
        wit[others] = ez
        wit[big] = -ez
        return TriangleLocus(TriangleLocusKind.DEGENERATE_ISOTROPIC, wit)
    if gap > 0:
        return TriangleLocus(TriangleLocusKind.EMPTY)
    a, b, c = w
    cos = (c * c - a * a - b * b) / (2 * a * b)
    sin = np.sqrt(max(0.0, 1.0 - cos * cos))
    n1 = np.array([1.0, 0.0, 0.0])
    n2 = np.array([cos, sin, 0.0])
    n3 = -(a * n1 + b * n2) / c
    n3 /= np.linalg.norm(n3)
    return TriangleLocus(TriangleLocusKind.REGULAR_ORBIT, np.array([n1, n2, n3]))


__all__ = [
    "EmbeddingSpec", "EmbeddingKind", "EmbeddingCertificate", "EmbeddingInvariantError",
    "FlagRecoveryError", "RecoveredFlag", "TwoStepImage", "TriangleLocus", "TriangleLocusKind",
    "su_grassmann_set", "so_upsilon_set", "so6_lagrangian_set", "generic_embedding",
    "solve_coefficients", "upsilon_diagonals", "embed", "certify", "two_step_so_embed",
    "certify_two_step", "isotropic_moment", "standard_isotropic_plane", "random_two_step_flag", "two_step_dims",
    "flag_recover", "triangle_locus",
]
