import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coadjoint.spinchain import (
    BlowUpError,
    NonNestedError,
    SpinChainConfig,
    SpinChainState,
    Trajectory,
    bloch_vector,
    eom_matrix,
    eom_rhs,
    gram,
    gram_and_lax,
    hamiltonian,
    integrate,
    lax_residual,
    random_state,
)


def nested(p, levels):
    return SpinChainConfig.from_levels(p, levels)


def test_config_from_levels():
    cfg = nested([1, 2, 3], [0.5, 2.0])
    assert cfg.nested
    assert np.array_equal(cfg.alpha, [[0, 0.5, 2], [0.5, 0, 2], [2, 2, 0]])
    assert np.array_equal(cfg.levels(), [0.5, 0.5, 2.0])
    assert np.array_equal(cfg.default_gauge(), [-0.5, -1.0, -6.0])
    assert np.array_equal(cfg.charges(), [1.0, 1.0])
    assert SpinChainConfig.from_matrix(cfg.p, cfg.alpha).nested


def test_config_validation():
    with pytest.raises(ValueError, match="positive"):
        SpinChainConfig((1.0, -1.0), np.array([[0, 1], [1, 0]]))
    with pytest.raises(ValueError, match="symmetric"):
        SpinChainConfig((1.0, 1.0), np.array([[0, 1], [2, 0]]))
    with pytest.raises(ValueError, match="diagonal"):
        SpinChainConfig((1.0, 1.0), np.array([[1, 1], [1, 0]]))
    general = np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0]], float)
    with pytest.raises(NonNestedError):
        SpinChainConfig((1.0, 1.0, 1.0), general, nested=True)
    cfg = SpinChainConfig.from_matrix((1, 1, 1), general)
    assert not cfg.nested
    assert np.array_equal(cfg.default_gauge(), np.zeros(3))
    with pytest.raises(NonNestedError):
        cfg.levels()
    with pytest.raises(ValueError):
        nested([1, 1, 1], [1.0])


def test_config_dict_round_trip():
    cfg = nested([1, 1.5, 2], [1, 3])
    assert SpinChainConfig.from_dict(cfg.to_dict()) == cfg
    assert SpinChainConfig.from_dict({"p": [1, 1.5, 2], "levels": [1, 3]}) == cfg


def test_hamiltonian_examples():
    cfg = nested([1.0, 1.0], [0.7])
    assert hamiltonian(np.eye(2), cfg) == 0.0
    z = np.array([1.0, 1j]) / np.sqrt(2)
    assert hamiltonian(np.column_stack([z, z]), cfg) == pytest.approx(0.7)
    Z = random_state(cfg, 3)
    a = np.vdot(Z[:, 0], Z[:, 1])
    assert hamiltonian(Z, cfg) == pytest.approx(0.7 * abs(a) ** 2)
    n1, n2 = bloch_vector(Z[:, 0]), bloch_vector(Z[:, 1])
    assert abs(a) ** 2 == pytest.approx((1 + n1 @ n2) / 2, abs=1e-12)


def test_eom_examples():
    cfg = nested([1.3, 0.8], [0.9])
    Z = random_state(cfg, 1)
    z1, z2 = Z[:, 0], Z[:, 1]
    a = np.vdot(z1, z2)
    Zd = eom_rhs(Z, cfg)
    assert np.allclose(1j * Zd[:, 0], 0.9 * (np.conj(a) * z2 + 1.3 * z1), atol=1e-14)
    assert np.allclose(1j * Zd[:, 1], 0.9 * (a * z1 + 0.8 * z2), atol=1e-14)


def test_eom_orthogonal_columns_rotate_phases():
    cfg = nested([2.0, 1.0, 3.0], [1.0, 2.0])
    Z = np.diag(np.sqrt(cfg.p)).astype(complex)
    lam = cfg.default_gauge()
    assert np.allclose(eom_rhs(Z, cfg), 1j * Z * lam)


def test_eom_matrix_nested_form():
    cfg = nested([1.0, 1.2, 0.9], [0.6, 1.4])
    Z = random_state(cfg, 5)
    A = gram(Z)
    a, b, c = A[0, 1], A[0, 2], A[1, 2]
    p1, p2, p3 = cfg.p
    M = np.array([[0.6 * p1, 0.6 * a, 1.4 * b],
                  [0.6 * np.conj(a), 0.6 * p2, 1.4 * c],
                  [1.4 * np.conj(b), 1.4 * np.conj(c), 1.4 * p3]])
    assert np.allclose(eom_matrix(Z, cfg), M, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 5))
def test_eom_tangency(seed, n):
    rng = np.random.default_rng(seed)
    cfg = nested(rng.uniform(0.5, 2, n), rng.uniform(0.1, 2, n - 1))
    Z = random_state(cfg, seed)
    Zd = eom_rhs(Z, cfg)
    assert np.abs(np.einsum("ia,ia->a", Z.conj(), Zd).real).max() < 1e-12


def test_state_validation():
    cfg = nested([1.0, 2.0], [1.0])
    SpinChainState(random_state(cfg, 0)).validate(cfg)
    with pytest.raises(ValueError, match="norms"):
        SpinChainState(np.eye(2, dtype=complex)).validate(cfg)
    with pytest.raises(ValueError):
        integrate(cfg, np.eye(2), 1.0, 1e-2)


def test_cp1_conservation():
    cfg = nested([1.0, 1.0], [1.0])
    Z0 = random_state(cfg, 7)
    tr = integrate(cfg, Z0, 10.0, 1e-3, record_every=10)
    H = tr.energies()
    assert np.abs(H - H[0]).max() < 1e-8
    A = tr.gram()
    assert np.abs(np.abs(A[:, 0, 1]) - abs(A[0, 0, 1])).max() < 1e-8
    tot = np.array([bloch_vector(Z[:, 0]) + bloch_vector(Z[:, 1]) for Z in tr.states])
    assert np.abs(tot - tot[0]).max() < 1e-8


def test_bloch_picture_rotation():
    p, alpha = 1.0, 1.0
    cfg = nested([p, p], [alpha])
    tr = integrate(cfg, random_state(cfg, 3), 10.0, 1e-3, record_every=20)
    n1 = np.array([bloch_vector(Z[:, 0]) for Z in tr.states])
    n2 = np.array([bloch_vector(Z[:, 1]) for Z in tr.states])
    avec = n1[0] + n2[0]
    m = n1 - n2
    amp = np.linalg.norm(m[0])
    e1 = m[0] / amp
    e2 = np.cross(avec / np.linalg.norm(avec), e1)
    w = alpha * p * np.linalg.norm(avec)
    model = amp * (np.cos(w * tr.times)[:, None] * e1 + np.sin(w * tr.times)[:, None] * e2)
    assert np.abs(m - model).max() < 1e-6


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_energy_and_norm_drift(n):
    rng = np.random.default_rng(n)
    cfg = nested(rng.uniform(0.5, 1.5, n), rng.uniform(0.2, 1.5, n - 1))
    Z0 = random_state(cfg, n)
    tr = integrate(cfg, Z0, 10.0, 1e-3, record_every=50)
    assert tr.energy_drift() < 1e-7
    assert tr.norm_drift() < 1e-9
    raw = integrate(cfg, Z0, 10.0, 1e-3, record_every=50, renormalize=False)
    assert raw.norm_drift() < 1e-6


def test_general_couplings_conserve_energy():
    alpha = np.array([[0, 1, 2], [1, 0, 0.5], [2, 0.5, 0]], float)
    cfg = SpinChainConfig.from_matrix((1.0, 1.5, 0.7), alpha)
    tr = integrate(cfg, random_state(cfg, 2), 5.0, 1e-3, record_every=25)
    assert tr.energy_drift() < 1e-7


def test_gauge_covariance():
    cfg = nested([1.0, 1.5, 0.8], [0.7, 1.3])
    Z0 = random_state(cfg, 4)
    c = np.array([0.3, -0.8, 1.1])
    gauge = lambda t: cfg.default_gauge() + c * np.cos(t)
    ref = integrate(cfg, Z0, 5.0, 1e-3, record_every=25)
    alt = integrate(cfg, Z0, 5.0, 1e-3, gauge=gauge, record_every=25)
    overlaps = np.abs(np.einsum("kia,kia->ka", ref.states.conj(), alt.states))
    assert np.abs(overlaps - np.asarray(cfg.p)).max() < 1e-7
    assert np.abs(ref.energies() - alt.energies()).max() < 1e-9


def test_integrate_errors():
    cfg = nested([1.0, 1.0], [1.0])
    Z0 = random_state(cfg, 0)
    with pytest.raises(ValueError):
        integrate(cfg, Z0, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate(cfg, Z0, 1.0, 0.3)
    with pytest.raises(BlowUpError):
        integrate(nested([1.0, 1.0], [50.0]), Z0, 10.0, 0.5)


def test_integrate_deterministic():
    cfg = nested([1.0, 2.0, 1.5], [1.0, 2.0])
    Z0 = random_state(cfg, 1)
    a = integrate(cfg, Z0, 1.0, 1e-3)
    b = integrate(cfg, Z0, 1.0, 1e-3)
    assert np.array_equal(a.states, b.states)


def test_gram_and_lax_single_state():
    cfg = nested([1.0, 1.2, 0.9], [0.6, 1.4])
    Z = random_state(cfg, 2)
    A, B, res = gram_and_lax(Z, cfg)
    assert np.allclose(A, A.conj().T) and np.allclose(np.diag(A).real, cfg.p)
    assert res < 1e-12
    stationary = np.diag(np.sqrt(cfg.p)).astype(complex)
    _, B0, res0 = gram_and_lax(stationary, cfg)
    assert res0 < 1e-8
    with pytest.raises(NonNestedError):
        gram_and_lax(Z, SpinChainConfig.from_matrix(cfg.p, [[0, 1, 2], [1, 0, 3], [2, 3, 0]]))


def test_lax_residual_along_trajectory():
    cfg = nested([1.0, 1.2, 0.9], [0.6, 1.4])
    tr = integrate(cfg, random_state(cfg, 3), 2.0, 1e-3)
    assert lax_residual(tr).max() < 1e-5
    A, B, res = gram_and_lax(tr, cfg)
    assert A.shape == (len(tr), 3, 3) and res < 1e-5


def test_bloch_vector():
    assert np.allclose(bloch_vector([1, 0]), [0, 0, 1])
    assert np.allclose(bloch_vector(np.array([1, 1]) / np.sqrt(2)), [1, 0, 0])
    with pytest.raises(ValueError):
        bloch_vector([0, 0])
    with pytest.raises(ValueError):
        bloch_vector([1, 0, 0])


@settings(max_examples=50, deadline=None)
@given(re=st.lists(st.floats(-5, 5), min_size=4, max_size=4), phi=st.floats(0, 6.3))
def test_bloch_vector_unit_and_phase_invariant(re, phi):
    z = np.array([re[0] + 1j * re[1], re[2] + 1j * re[3]])
    if np.linalg.norm(z) < 1e-3:
        return
    n = bloch_vector(z)
    assert abs(np.linalg.norm(n) - 1) < 1e-12
    assert np.allclose(bloch_vector(np.exp(1j * phi) * z), n, atol=1e-12)


def test_trajectory_round_trips():
    cfg = nested([1.0, 2.0, 1.5], [1.0, 2.0])
    tr = integrate(cfg, random_state(cfg, 1), 0.1, 1e-3, record_every=10)
    back = Trajectory.from_json(tr.to_json())
    assert np.array_equal(back.states, tr.states) and np.array_equal(back.times, tr.times)
    assert back.config == cfg
    csv_back = Trajectory.from_csv(tr.to_csv())
    assert np.array_equal(csv_back.states, tr.states) and csv_back.config == cfg
    header = tr.to_csv().splitlines()[1].split(",")
    assert header[:3] == ["t", "Re_Z11", "Im_Z11"] and header[-2:] == ["H", "detK"]
    t, state, diag = next(iter(tr.samples()))
    assert t == 0.0 and set(diag) == {"H", "norms", "detK", "gram"}


def test_trajectory_requires_increasing_times():
    cfg = nested([1.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 2, 2), complex), cfg)
