import json
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import subspace_angles

from coadjoint.embeddings import (
    EmbeddingCertificate,
    EmbeddingInvariantError,
    EmbeddingSpec,
    FlagRecoveryError,
    TriangleLocusKind,
    certify,
    certify_two_step,
    embed,
    flag_recover,
    generic_embedding,
    isotropic_moment,
    random_two_step_flag,
    so6_lagrangian_set,
    so_upsilon_set,
    solve_coefficients,
    standard_isotropic_plane,
    su_grassmann_set,
    triangle_locus,
    two_step_dims,
    two_step_so_embed,
    upsilon_diagonals,
)
from coadjoint.lie_core import CartanSpec, Family, GroupFamily, algebra_residual, sample_group_element
from coadjoint.orbits import joint_stabilizer_dim, moment_sum


def compositions(n):
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in compositions(n - first):
            yield (first,) + rest


def test_su_grassmann_example():
    spec = su_grassmann_set(3, (1, 1, 1))
    diags = [np.diag(M).imag for M in spec.factor_matrices()]
    assert np.array_equal(diags, [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])
    spec.validate()
    cert = certify(spec, samples=10, seed=0)
    assert cert.isotropy_residual < 1e-9 and cert.lagrangian
    assert cert.dims == (6, (4, 4, 4), 12)


def test_su_grassmann_22():
    spec = su_grassmann_set(4, (2, 2))
    diags = [np.diag(M).imag for M in spec.factor_matrices()]
    assert np.array_equal(diags, [[2, 2, -2, -2], [-2, -2, 2, 2]])
    assert certify(spec, samples=5).lagrangian


def test_su_grassmann_invalid():
    with pytest.raises(ValueError):
        su_grassmann_set(4, (1, 2))
    with pytest.raises(ValueError):
        su_grassmann_set(3, (0, 3))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_su_lagrangian_identity_all_partitions(n):
    for mult in compositions(n):
        spec = su_grassmann_set(n, mult)
        cert = certify(spec, samples=1, seed=n)
        assert 2 * cert.orbit_dim == 2 * (n * n - sum(k * k for k in mult))
        assert sum(cert.factor_dims) == sum(2 * k * (n - k) for k in mult)
        assert cert.lagrangian


def test_upsilon_sums_vanish_in_integers():
    for r in range(1, 5):
        for mult in product([1, 2], repeat=r):
            n = sum(mult) + 1
            diags = upsilon_diagonals(n, mult)
            assert all(d.dtype.kind == "i" for d in diags)
            assert not np.sum(diags, axis=0).any()


def test_upsilon_r2_pattern():
    d = upsilon_diagonals(2, (1, 1))
    assert [list(x) for x in d] == [[2, 0], [-1, 1], [-1, -1]]


@pytest.mark.parametrize("family", ["SO_even", "SO_odd", "Sp"])
@pytest.mark.parametrize("mult", [(1, 1), (1, 2), (1, 1, 1)])
def test_upsilon_specs(family, mult):
    n = sum(mult) + 1
    spec = so_upsilon_set(n, mult, family)
    spec.validate()
    for M in spec.factor_matrices():
        assert algebra_residual(M, spec.group) < 1e-12
    g = sample_group_element(spec.group, 4)
    assert np.abs(moment_sum(embed(spec, g)).matrix).max() < 1e-12
    assert certify(spec, samples=5).isotropy_residual < 1e-9


def test_upsilon_errors():
    with pytest.raises(ValueError):
        so_upsilon_set(2, (2, 1), "SO_even")
    with pytest.raises(ValueError):
        so_upsilon_set(3, (1,), "SU")


def test_so4_upsilon_not_lagrangian():
    cert = certify(so_upsilon_set(4, (1, 1), "SO_even"), samples=5)
    assert cert.isotropy_residual < 1e-9 and not cert.lagrangian


def test_so6_lagrangian():
    spec = so6_lagrangian_set()
    mats = spec.factor_matrices()
    for M in mats:
        assert np.array_equal(M @ M, -np.eye(6))
    assert not np.sum(mats, axis=0).any()
    assert joint_stabilizer_dim(mats, spec.group) == 3
    cert = certify(spec, samples=10)
    assert cert.lagrangian and cert.isotropy_residual < 1e-9 and cert.moment_residual < 1e-12
    assert cert.dims == (12, (6, 6, 6, 6), 24)


def test_invariant_violations():
    su3 = GroupFamily(Family.SU, 3)
    target = CartanSpec(su3, (1, 2), (2.0, -1.0))
    factors = [CartanSpec.from_diagonal(su3, d) for d in ([1, 0, -1], [1, -1, 0], [-2, 1, 1])]
    spec = EmbeddingSpec(su3, target, factors, solve_coefficients(target, factors))
    with pytest.raises(EmbeddingInvariantError, match="stabilizer"):
        spec.validate()
    with pytest.raises(EmbeddingInvariantError, match="stabilizer"):
        certify(spec, samples=1)
    good = su_grassmann_set(3, (1, 1, 1))
    bad = EmbeddingSpec(good.group, good.target, good.factors, (1.0, 0.0, 0.0))
    with pytest.raises(EmbeddingInvariantError, match="Lambda"):
        bad.validate()
    unbalanced = EmbeddingSpec(good.group, good.target, good.factors[:2], good.coefficients[:2])
    with pytest.raises(EmbeddingInvariantError):
        unbalanced.validate()
    with pytest.raises(EmbeddingInvariantError, match="combination"):
        solve_coefficients(CartanSpec(su3, (1, 1, 1), (1.0, 0.5, -1.5)), factors[:1])


def test_generic_embedding_path():
    su3 = GroupFamily(Family.SU, 3)
    target = CartanSpec(su3, (1, 1, 1), (1.0, 0.5, -1.5))
    factors = su_grassmann_set(3, (1, 1, 1)).factors
    spec = generic_embedding(target, factors)
    assert certify(spec, samples=3).isotropic()


@pytest.mark.parametrize("builder", [
    lambda: su_grassmann_set(4, (1, 1, 2)),
    lambda: so_upsilon_set(4, (1, 1, 2), "SO_odd"),
    so6_lagrangian_set,
])
def test_spec_json_round_trip(builder):
    spec = builder()
    again = EmbeddingSpec.from_json(spec.to_json())
    assert again.to_dict() == spec.to_dict()
    d = json.loads(spec.to_json())
    del d["coefficients"]
    refit = EmbeddingSpec.from_dict(d)
    assert np.allclose(refit.coefficients, spec.coefficients, atol=1e-12)


def test_certificate_round_trip():
    cert = certify(su_grassmann_set(3, (1, 2)), samples=2)
    assert EmbeddingCertificate.from_dict(json.loads(json.dumps(cert.to_dict()))) == cert


def test_certify_deterministic_and_linear_in_perturbation():
    spec = su_grassmann_set(4, (1, 1, 2))
    assert certify(spec, 3, seed=5) == certify(spec, 3, seed=5)
    r1 = certify(spec, 5, seed=2, perturbation=1e-6).isotropy_residual
    r2 = certify(spec, 5, seed=2, perturbation=2e-6).isotropy_residual
    assert r1 > 1e-9
    assert 1.5 < r2 / r1 < 2.5


# flag recovery -------------------------------------------------------------

def _expected_planes(spec, g):
    """Top eigenvectors of the block Cartan elements, pushed forward by g."""
    out, pos = [], 0
    for k in spec.blocks:
        if spec.group.family is Family.SU:
            basis = np.eye(spec.group.n)[:, pos:pos + k]
        elif spec.group.family is Family.SP:
            basis = np.eye(spec.group.size)[:, [2 * j for j in range(pos, pos + k)]]
        else:
            E = standard_isotropic_plane(spec.group.n)
            basis = np.zeros((spec.group.size, k), complex)
            basis[:E.shape[0]] = E[:, pos:pos + k]
        out.append(g @ basis)
        pos += k
    return out


@pytest.mark.parametrize("builder", [
    lambda: su_grassmann_set(4, (1, 1, 2)),
    lambda: su_grassmann_set(6, (2, 1, 3)),
    lambda: so_upsilon_set(4, (1, 1, 2), "SO_even"),
    lambda: so_upsilon_set(4, (1, 1, 2), "SO_odd"),
    lambda: so_upsilon_set(4, (1, 1, 2), "Sp"),
    lambda: so_upsilon_set(4, (2, 1), "SO_even"),
], ids=["su4", "su6", "so8", "so9", "sp4", "so8_partial"])
def test_flag_recover_identity(builder):
    spec = builder()
    for s in range(5):
        g = sample_group_element(spec.group, (11, s))
        flag = flag_recover(spec, embed(spec, g))
        assert flag.orthogonality_residual < 1e-10
        assert flag.isotropy_residual < 1e-8
        for got, want in zip(flag.planes, _expected_planes(spec, g)):
            assert got.shape == want.shape
            assert np.max(subspace_angles(got, want), initial=0.0) < 1e-7
        assert [S.shape[1] for S in flag.subspaces()] == list(np.cumsum(spec.blocks))


def test_flag_recover_rejects_nonzero_moment():
    spec = su_grassmann_set(4, (1, 1, 2))
    pts = [x.matrix for x in embed(spec, sample_group_element(spec.group, 0))]
    pts[0] = pts[0] + 1e-2 * 1j * np.diag([1.0, -1.0, 0.0, 0.0])
    with pytest.raises(FlagRecoveryError, match="moment"):
        flag_recover(spec, pts)


def test_flag_recover_rejects_mismatched_points():
    spec = su_grassmann_set(3, (1, 1, 1))
    g1, g2 = sample_group_element(spec.group, 1), sample_group_element(spec.group, 2)
    a, b = embed(spec, g1), embed(spec, g2)
    mixed = [a[0], b[1], a[2]]
    with pytest.raises(FlagRecoveryError):
        flag_recover(spec, mixed, moment_tol=10.0)
    with pytest.raises(FlagRecoveryError, match="not defined"):
        flag_recover(so6_lagrangian_set(), embed(so6_lagrangian_set(), np.eye(6)))


# two-step series -------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_two_step(n):
    for s in range(10):
        x, y = random_two_step_flag(n, (n, s))
        im = two_step_so_embed(n, x, y)
        assert im.moment_residual() < 1e-10
        w = np.linalg.eigvalsh(im.mu_w)
        assert np.all(np.min(np.abs(w[:, None] - np.array([-1, 0, 1])), axis=1) < 1e-12)
        for X in im.algebra_elements(n):
            assert algebra_residual(X, X.group) < 1e-12
    lhs, dims = two_step_dims(n)
    assert lhs == n * n + n - 2 and 2 * lhs == sum(dims)


def test_two_step_dims_n3():
    assert two_step_dims(3) == (10, (6, 6, 8))


def test_two_step_certificate():
    rep = certify_two_step(3, samples=5, seed=1)
    assert rep["lagrangian"] and rep["isotropy_residual"] < 1e-9 and rep["moment_residual"] < 1e-10


def test_two_step_rejects_invalid_input():
    n = 3
    x, y = random_two_step_flag(n, 0)
    with pytest.raises(ValueError, match="isotropy"):
        two_step_so_embed(n, x.real / np.linalg.norm(x.real), y)
    with pytest.raises(ValueError, match="orthonormality"):
        two_step_so_embed(n, x, np.column_stack([y[:, 0], y[:, 0]]))


def test_isotropic_moment_difference_of_projectors():
    E = standard_isotropic_plane(2)
    M = isotropic_moment(E)
    assert np.allclose(M, M.conj().T)
    assert np.allclose(np.linalg.eigvalsh(M), [-1, -1, 1, 1])


# triangle locus ---------------------------------------------------------------

def test_triangle_examples():
    reg = triangle_locus(1, 1, 1)
    assert reg.kind is TriangleLocusKind.REGULAR_ORBIT and reg.residual((1, 1, 1)) < 1e-12
    deg = triangle_locus(1, 1, 2)
    assert deg.kind is TriangleLocusKind.DEGENERATE_ISOTROPIC
    n1, n2, n3 = deg.witness
    assert np.abs(n1 - n2).max() < 1e-10 and np.abs(n1 + n3).max() < 1e-10
    assert triangle_locus(1, 1, 5).kind is TriangleLocusKind.EMPTY
    assert triangle_locus(1, 1, 5).witness is None
    with pytest.raises(ValueError):
        triangle_locus(1, 0, 1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=3, max_size=3))
def test_triangle_classification(w):
    loc = triangle_locus(*w)
    big = max(w)
    gap = big - (sum(w) - big)
    if gap > 1e-9 * sum(w):
        assert loc.kind is TriangleLocusKind.EMPTY
    else:
        assert loc.kind is not TriangleLocusKind.EMPTY
        assert np.allclose(np.linalg.norm(loc.witness, axis=1), 1.0)
        assert loc.residual(w) < 1e-9 * sum(w)
