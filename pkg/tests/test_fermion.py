import numpy as np
import pytest

from quasiwork import fermion as F
from quasiwork import oracle as O
from quasiwork.errors import ConfigError
from quasiwork.model import EVEN, PhaseProfile, dispersion, momenta

ALT = PhaseProfile.alternating(np.pi, 0.0)


def lq(L=4, lam=1.0, field=0.8, beta=1.0, phases=ALT, state="psi1", site=1, coefficients=None):
    return F.LocalQuench(L, lam, field, beta, phases, state, site, coefficients)


# --- forms -------------------------------------------------------------------------


def test_zero_field_leaves_chain_unchanged():
    H, Hp = F.build_chain_form(0.7, 6, 0.0, 3)
    np.testing.assert_array_equal(H.A, Hp.A)
    np.testing.assert_array_equal(H.B, Hp.B)


def test_local_field_spectrum_independent_of_site():
    spectra = [np.linalg.eigvalsh(F.build_chain_form(0.7, 4, 0.9, l)[1].fock_hamiltonian()) for l in range(1, 5)]
    for s in spectra[1:]:
        np.testing.assert_allclose(s, spectra[0], atol=1e-10)


def test_local_field_adds_site_term():
    # H' - H = -field (2 n_l - 1)
    H, Hp = F.build_chain_form(0.7, 4, 0.9, 2)
    a = O.fermion_operators(4)[1]
    n = (a.conj().T @ a).toarray()
    diff = Hp.fock_hamiltonian() - H.fock_hamiltonian()
    np.testing.assert_allclose(diff, -0.9 * (2 * n - np.eye(16)), atol=1e-12)


@pytest.mark.parametrize("site", [0, 5])
def test_site_out_of_range(site):
    with pytest.raises(ConfigError):
        F.build_chain_form(0.7, 4, 0.5, site)


def test_form_validation():
    with pytest.raises(ConfigError):
        F.QuadraticFermionForm(np.array([[0, 1], [2, 0.0]]), np.zeros((2, 2)))
    with pytest.raises(ConfigError):
        F.QuadraticFermionForm(np.zeros((2, 2)), np.ones((2, 2)))


# --- diagonalization -------------------------------------------------------------------


@pytest.mark.parametrize("lam", [0.4, 1.0, 1.7])
def test_uniform_chain_energies(lam):
    dec = F.diagonalize(F.build_chain_form(lam, 4)[0])
    np.testing.assert_allclose(dec.eps, np.sort(dispersion(lam, momenta(4, EVEN))), atol=1e-10)


def test_decoupled_modes():
    A = np.diag([-3.0, -1.0, -2.0])
    dec = F.diagonalize(F.QuadraticFermionForm(A, np.zeros((3, 3))))
    np.testing.assert_allclose(dec.eps, [1, 2, 3])
    P = np.abs(dec.g) + np.abs(dec.h)
    np.testing.assert_allclose(np.sort(P, axis=1), [[0, 0, 1]] * 3, atol=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_decomposition_properties(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(6, 6))
    B = rng.normal(size=(6, 6))
    form = F.QuadraticFermionForm(A + A.T, B - B.T)
    dec = F.diagonalize(form)
    phi, psi = dec.phi_mat, dec.psi_mat
    np.testing.assert_allclose(psi.T @ np.diag(dec.eps) @ phi, form.A + form.B, atol=1e-10)
    np.testing.assert_allclose(phi @ phi.T, np.eye(6), atol=1e-10)
    np.testing.assert_allclose(psi @ psi.T, np.eye(6), atol=1e-10)
    assert np.all(np.diff(dec.eps) >= 0)
    rows = np.arange(6)
    assert np.all(phi[rows, np.argmax(np.abs(phi), axis=1)] > 0)
    assert dec.car_residual() <= 1e-10


def test_decomposition_diagonalizes_fock_hamiltonian():
    form = F.build_chain_form(0.6, 4, 0.9, 2)[1]
    dec = F.diagonalize(form)
    H = form.fock_hamiltonian()
    for r, alpha in enumerate(O.mode_operators(dec.g, dec.h)):
        al = alpha.toarray()
        assert np.abs(H @ al - al @ H + dec.eps[r] * al).max() <= 1e-10


# --- plane-wave modes ----------------------------------------------------------------


@pytest.mark.parametrize("lam", [0.3, 1.0, 2.2])
def test_momentum_modes_are_canonical(lam):
    assert F.momentum_modes(lam, 8).car_residual() <= 1e-12


def test_momentum_modes_strong_field_limit():
    # -lambda sum(2n - 1) fills the band at large field, so quasiparticles become holes
    dec = F.momentum_modes(1e8, 6)
    assert np.abs(dec.g).max() <= 1e-7
    np.testing.assert_allclose(np.abs(dec.h), 1 / np.sqrt(6), atol=1e-7)


def test_momentum_modes_diagonalize_fock_hamiltonian():
    lam = 0.8
    dec = F.momentum_modes(lam, 4)
    H = F.build_chain_form(lam, 4)[0].fock_hamiltonian()
    for r, alpha in enumerate(O.mode_operators(dec.g, dec.h)):
        al = alpha.toarray()
        assert np.abs(H @ al - al @ H + dec.eps[r] * al).max() <= 1e-10


# --- overlap kernel --------------------------------------------------------------------


def test_identical_vacua_have_zero_pairing():
    dec = F.momentum_modes(0.8, 6)
    assert np.abs(F.overlap_kernel(dec, dec).G).max() <= 1e-14


def test_pairing_is_linear_in_small_fields():
    dec = F.momentum_modes(0.8, 6)
    norms = []
    for fld in (1e-3, 2e-3):
        dp = F.diagonalize(F.build_chain_form(0.8, 6, fld, 1)[1])
        ker = F.overlap_kernel(dec, dp)
        assert ker.residual() <= 1e-10
        assert np.abs(ker.G + ker.G.T).max() <= 1e-10
        norms.append(np.linalg.norm(ker.G))
    assert norms[1] / norms[0] == pytest.approx(2, rel=1e-2)


def test_vacuum_overlap_against_fock_space():
    lam, fld = 0.8, 0.9
    dec = F.momentum_modes(lam, 4)
    dp = F.diagonalize(F.build_chain_form(lam, 4, fld, 1)[1])
    ker = F.overlap_kernel(dec, dp)
    v = O.quasiparticle_vacuum(O.mode_operators(dec.g, dec.h))
    vp = O.quasiparticle_vacuum(O.mode_operators(dp.g, dp.h))
    dense = abs(np.vdot(v, vp)) ** 2
    # |<0|0'>|^2 = 1 / sqrt(det(1 + G^dag G)) for the pair-condensate expansion
    from_G = 1 / np.sqrt(np.linalg.det(np.eye(4) + ker.G.conj().T @ ker.G).real)
    assert from_G == pytest.approx(dense, abs=1e-10)


# --- Pfaffian --------------------------------------------------------------------------------


def test_pfaffian_small_cases():
    assert F.pfaffian(np.array([[0, 2.5], [-2.5, 0]])) == pytest.approx(2.5)
    assert F.pfaffian(np.zeros((3, 3))) == 0
    A = np.zeros((4, 4))
    A[0, 1], A[0, 2], A[0, 3], A[1, 2], A[1, 3], A[2, 3] = 1, 2, 3, 4, 5, 6
    A = A - A.T
    assert F.pfaffian(A) == pytest.approx(1 * 6 - 2 * 5 + 3 * 4)


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_pfaffian_squares_to_determinant(n):
    rng = np.random.default_rng(n)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    A = A - A.T
    p = F.pfaffian(A)
    assert p**2 == pytest.approx(np.linalg.det(A), rel=1e-10)
    assert F._pfaffian_numba(A.copy()) == pytest.approx(F._pfaffian_numpy(A), rel=1e-12)


def test_pfaffian_rejects_non_antisymmetric():
    with pytest.raises(ConfigError):
        F.pfaffian(np.ones((2, 2)))


# --- local quench X_q ---------------------------------------------------------------------


@pytest.mark.parametrize("state", ["psi1", "psi2"])
def test_no_field_gives_constant_one(state):
    X = F.local_X(lq(L=6, field=0.0, state=state), np.linspace(-5, 5, 11), 0.3)
    np.testing.assert_allclose(X, 1, atol=1e-12)


@pytest.mark.parametrize("state", ["psi1", "psi2"])
@pytest.mark.parametrize("q", [0.0, 0.3, 0.5])
def test_normalized_at_zero(state, q):
    assert F.local_X(lq(L=8, beta=0.4, state=state), 0.0, q) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("fn", [F.X_q_psi1, F.X_q_psi2])
@pytest.mark.parametrize("method", ["wick", "gamma"])
def test_example_against_fock_oracle(fn, method):
    state = "psi1" if fn is F.X_q_psi1 else "psi2"
    ref = O.local_characteristic_X(lq(state=state), np.array([0.3]), 0.5)[0]
    assert fn(0.3, 0.5, 1.0, ALT, method=method) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("L", [4, 6])
@pytest.mark.parametrize("state", ["psi1", "psi2"])
def test_engines_against_fock_oracle_on_grid(L, state):
    setup = lq(L=L, lam=0.7, field=1.3, beta=0.6, phases=PhaseProfile.constant(0.4), state=state, site=2)
    u = np.linspace(-4, 4, 9)
    ref = O.local_characteristic_X(setup, u, 0.2)
    for method in ("wick", "gamma"):
        np.testing.assert_allclose(F.local_X(setup, u, 0.2, method), ref, atol=1e-9)


def test_low_temperature_states_agree_with_ground_state():
    u = np.linspace(-3, 3, 7)
    g = F.ground_state_chi(lq(L=8, beta=50.0), u)
    for state in ("psi1", "psi2"):
        np.testing.assert_allclose(F.local_chi(lq(L=8, beta=50.0, state=state), u), g, atol=1e-6)


@pytest.mark.parametrize("state", ["psi1", "psi2"])
@pytest.mark.parametrize("n", [1, 2])
def test_low_moments_independent_of_q(state, n):
    setup = lq(L=10, beta=0.3, state=state)
    vals = [F.local_moment_contour(setup, n, q)[0].real for q in (0.0, 0.25, 0.5)]
    assert max(vals) - min(vals) <= 1e-8 * max(abs(v) for v in vals)


def test_contour_and_difference_moments_agree():
    setup = lq(L=10, beta=0.5, state="psi2")
    for n in (1, 2, 4):
        c, _ = F.local_moment_contour(setup, n, 0.25)
        d, _ = F.local_moment_fd(setup, n, 0.25)
        assert c.real == pytest.approx(d.real, rel=1e-4, abs=1e-6)


def test_moments_against_fock_atoms():
    setup = lq(L=6, lam=0.9, field=0.7, beta=0.5, state="psi2")
    psi, H, Hp = O.local_quench_state(setup)
    for n in (2, 4):
        ref = O.moments_closed_form(psi, H, Hp, 0.3, n)
        assert F.local_moment_contour(setup, n, 0.3)[0].real == pytest.approx(ref, rel=1e-9)


def test_sign_gauge_does_not_change_X(monkeypatch):
    setup = lq(L=6, lam=0.7, field=1.1, beta=0.5, state="psi2", site=3)
    u = np.linspace(-4, 4, 9)
    ref = F.local_X(setup, u, 0.2)
    rng = np.random.default_rng(5)
    plain = F.diagonalize

    def flipped(form):
        dec = plain(form)
        s = rng.choice([-1.0, 1.0], size=len(dec.eps))[:, None]
        return F.ModeDecomposition(s * dec.g, s * dec.h, dec.eps)

    monkeypatch.setattr(F, "diagonalize", flipped)
    for _ in range(3):
        np.testing.assert_allclose(F.local_X(setup, u, 0.2), ref, atol=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_random_coefficient_states_have_nonnegative_fourth_moment(seed):
    rng = np.random.default_rng(seed)
    L = 20
    c = rng.uniform(0, 1, L) * np.exp(2j * np.pi * rng.uniform(size=L))
    m4 = F.fourth_moment_sweep(L, 1.0, 0.0, 0.0, ALT, np.linspace(0, 2, 21), coefficients=c)
    assert m4.min() >= -1e-8


def test_sweep_vanishes_without_field():
    assert F.fourth_moment_sweep(10, 1.0, 0.5, 0.5, ALT, [0.0])[0] == 0


def test_bad_local_quench_arguments():
    with pytest.raises(ConfigError):
        lq(L=5)
    with pytest.raises(ConfigError):
        lq(state="psi3")
    with pytest.raises(ConfigError):
        F.local_X(lq(), 0.1, method="dense")
    with pytest.raises(ConfigError):
        F.local_X(lq(coefficients=np.ones(3)), 0.1)
