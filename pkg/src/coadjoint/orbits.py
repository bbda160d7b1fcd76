"""Coadjoint orbits: points, dimensions, tangent frames, KKS form, moment maps.

All dimensions are real dimensions.  The dual of the algebra is identified
with the algebra through the trace pairing, so moment maps are returned as
algebra elements.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .lie_core import (
    AlgebraElement,
    CartanSpec,
    GroupFamily,
    MatrixLike,
    adjoint_action,
    algebra_basis,
    as_matrix,
    build_cartan,
    commutator,
    killing_pairing,
    sample_group_element,
    to_real_vector,
)

RANK_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class OrbitPoint:
    point: AlgebraElement
    generator: np.ndarray
    cartan: CartanSpec

    @property
    def matrix(self) -> np.ndarray:
        return self.point.matrix

    @property
    def group(self) -> GroupFamily:
        return self.cartan.group

    def eigenvalue_residual(self) -> float:
        ref = build_cartan(self.cartan).spectral_part()
        return float(np.abs(self.point.spectral_part() - ref).max(initial=0.0))


def orbit_point(spec: CartanSpec, g: np.ndarray | None = None, seed=None) -> OrbitPoint:
    """``Ad_g Lambda``; ``g`` is sampled from ``seed`` when not given."""
    if g is None:
        g = sample_group_element(spec.group, 0 if seed is None else seed)
    Lam = build_cartan(spec)
    return OrbitPoint(adjoint_action(g, Lam), np.asarray(g), spec)


def _ad_images(X: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Rows are the real coordinates of ``[b_k, X]``."""
    imgs = np.einsum("kij,jl->kil", basis, X) - np.einsum("ij,kjl->kil", X, basis)
    return to_real_vector(imgs)


def _numeric_rank(M: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def joint_stabilizer_dim(elements: Iterable[MatrixLike], group: GroupFamily) -> int:
    """Dimension of ``{a : [a, X] = 0 for every X}`` inside the algebra."""
    basis = algebra_basis(group)
    blocks = [_ad_images(as_matrix(X), basis) for X in elements]
    if not blocks:
        return group.dim
    return group.dim - _numeric_rank(np.hstack(blocks))


def stabilizer_dim(spec: CartanSpec) -> int:
    return joint_stabilizer_dim([build_cartan(spec)], spec.group)


def stabilizer_dim_at(X: MatrixLike, group: GroupFamily) -> int:
    return joint_stabilizer_dim([X], group)


def orbit_dim(spec: CartanSpec) -> int:
    return spec.group.dim - stabilizer_dim(spec)


@dataclass(frozen=True, eq=False)
class TangentFrame:
    base: OrbitPoint
    vectors: np.ndarray
    """``(k, m, m)`` tangent vectors ``[a_j, x]``, orthonormal in real coordinates."""
    generators: np.ndarray
    """``(k, m, m)`` algebra elements ``a_j`` with ``vectors[j] = [a_j, x]``."""

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def min_singular_value(self) -> float:
        if len(self) == 0:
            return np.inf
        return float(np.linalg.svd(to_real_vector(self.vectors), compute_uv=False)[-1])


def tangent_frame(x: OrbitPoint, seed: int = 0) -> TangentFrame:
    """A basis of ``T_x O`` built from the images of a (randomly mixed) algebra basis.

    Raises ``np.linalg.LinAlgError`` when the numerical rank disagrees with
    ``orbit_dim``, which signals near-degenerate eigenvalues of the Cartan element.
    """
    group = x.group
    basis = algebra_basis(group)
    m = group.size
    if basis.shape[0]:
        mix = np.linalg.qr(np.random.default_rng(seed).standard_normal((basis.shape[0],) * 2))[0]
        basis = np.tensordot(mix, basis, axes=1)
    M = _ad_images(x.matrix, basis)
    expected = orbit_dim(x.cartan)
    if M.size == 0 or expected == 0:
        empty = np.zeros((0, m, m), complex)
        return TangentFrame(x, empty, empty)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > RANK_RTOL * s[0]))
    if rank != expected:
        raise np.linalg.LinAlgError(
            f"tangent space has numerical rank {rank}, expected {expected}")
    half = Vt.shape[1] // 2
    vectors = (Vt[:rank, :half] + 1j * Vt[:rank, half:]).reshape(rank, m, m)
    coeffs = (U[:, :rank] / s[:rank]).T
    generators = np.tensordot(coeffs, basis, axes=1)
    return TangentFrame(x, vectors, generators)


def tangent_generators(x: MatrixLike, vectors: Sequence[np.ndarray], group: GroupFamily,
                       tol: float = 1e-8) -> np.ndarray:
    """Solve ``[a, x] = xi`` for each tangent vector ``xi`` (minimum-norm ``a``).

    Raises ``ValueError`` if some ``xi`` is not tangent to the orbit through ``x``
    (relative least-squares residual above ``tol``).
    """
    basis = algebra_basis(group)
    M = _ad_images(as_matrix(x), basis)
    V = to_real_vector(np.asarray([as_matrix(v) for v in vectors]))
    coeffs, *_ = np.linalg.lstsq(M.T, V.T, rcond=RANK_RTOL)
    resid = np.linalg.norm(M.T @ coeffs - V.T, axis=0)
    scale = np.maximum(1.0, np.linalg.norm(V, axis=1))
    worst = float(np.max(resid / scale, initial=0.0))
    if worst > tol:
        raise ValueError(f"vector is not tangent to the orbit (residual {worst:.3g})")
    return np.tensordot(coeffs.T, basis, axes=1)


def kks_from_generators(x: MatrixLike, a: MatrixLike, b: MatrixLike) -> float:
    """``<x, [a, b]>``, the KKS form on the fundamental vector fields of ``a`` and ``b``."""
    return killing_pairing(x, commutator(as_matrix(a), as_matrix(b)))


def kks_form(x: OrbitPoint | AlgebraElement, xi: MatrixLike, zeta: MatrixLike,
             tol: float = 1e-8) -> float:
    """Kirillov-Kostant-Souriau form at ``x`` on tangent vectors ``xi``, ``zeta``.

    The tangent vectors are given as matrices of the form ``[a, x]``; the
    generators are recovered by least squares and the form evaluates to
    ``<x, [a, b]>``.  Independent of the choice of generators because the
    centralizer of ``x`` pairs to zero.
    """
    X = x.point if isinstance(x, OrbitPoint) else x
    a, b = tangent_generators(X, [xi, zeta], X.group, tol=tol)
    return kks_from_generators(X, a, b)


def kks_gram(frame: TangentFrame) -> np.ndarray:
    """Matrix of the KKS form on a tangent frame."""
    x = frame.base.matrix
    G = frame.generators
    k = G.shape[0]
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = kks_from_generators(x, G[i], G[j])
            out[j, i] = -out[i, j]
    return out


def moment_sum(points: Sequence[OrbitPoint | MatrixLike]) -> AlgebraElement:
    """Moment map of the diagonal action on a product of orbits: ``sum_i x_i``."""
    if not points:
        raise ValueError("need at least one point")
    mats = [p.matrix if isinstance(p, OrbitPoint) else as_matrix(p) for p in points]
    shape = mats[0].shape
    for M in mats[1:]:
        if M.shape != shape:
            raise ValueError(f"size mismatch: {M.shape} vs {shape}")
    first = points[0]
    group = first.group if isinstance(first, (OrbitPoint, AlgebraElement)) else None
    total = np.sum(mats, axis=0)
    return AlgebraElement(total, group) if group is not None else total


__all__ = [
    "OrbitPoint", "TangentFrame", "orbit_point", "stabilizer_dim", "stabilizer_dim_at",
    "joint_stabilizer_dim", "orbit_dim", "tangent_frame", "tangent_generators",
    "kks_form", "kks_from_generators", "kks_gram", "moment_sum",
]
