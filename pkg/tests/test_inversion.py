import warnings

import numpy as np
import pytest
from scipy.special import sici
from scipy.stats import norm

from quasiwork import global_quench as gq
from quasiwork import inversion as inv
from quasiwork import thermo as T
from quasiwork.errors import ConfigError
from quasiwork.model import PhaseProfile, QuenchSpec


def skewed_spec(L):
    return QuenchSpec(L, 1.0, 0.5, 1.5, 0.5, PhaseProfile.constant(np.pi / 4), "coherent")


def lobed_spec(q):
    return QuenchSpec(50, 1.0, 0.9, 1.1, q, PhaseProfile.constant(0.0), "coherent")


def test_standard_gaussian():
    dw = 0.05
    h = inv.histogram(lambda u: np.exp(-0.5 * u * u), dw, 8, (-8, 8))
    exact = norm.cdf(h.w_centers + dw / 2) - norm.cdf(h.w_centers - dw / 2)
    assert np.abs(h.density - exact / dw).max() <= 1e-6
    assert h.total == pytest.approx(1, abs=1e-6)


@pytest.mark.parametrize("K", [8, 400])
def test_single_atom_lands_in_its_bin(K):
    dw, a = 0.1, 0.3
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", inv.AliasingWarning)
        h = inv.histogram(lambda u: np.exp(1j * u * a), dw, K, (-1, 1), allow_complex=True)
    j = int(np.argmax(np.abs(h.masses)))
    assert h.w_centers[j] == pytest.approx(a)
    # the truncated sinc integral puts (2/pi) Si(pi K) into the bin
    assert h.masses[j] == pytest.approx(2 / np.pi * sici(np.pi * K)[0], abs=1e-6)


def test_aliasing_warning_for_slow_decay():
    with pytest.warns(inv.AliasingWarning):
        inv.histogram(lambda u: np.exp(-1e-4 * u * u), 0.1, 2, (-1, 1))


@pytest.mark.parametrize("kw", [dict(dw=0), dict(dw=-1), dict(K=0), dict(w_range=(1, -1))])
def test_histogram_rejects_bad_arguments(kw):
    args = dict(chf=lambda u: np.exp(-0.5 * u * u), dw=0.1, K=8, w_range=(-5, 5))
    args.update(kw)
    with pytest.raises(ConfigError):
        inv.histogram(**args)


def test_range_required_for_plain_callables():
    with pytest.raises(ConfigError):
        inv.histogram(lambda u: np.exp(-0.5 * u * u), 0.1)


def test_nonnegative_histogram_has_unit_negativity():
    h = inv.histogram(lambda u: np.exp(-0.5 * u * u), 0.05, 8, (-8, 8))
    assert inv.negativity_integral(h) == pytest.approx(1, abs=1e-6)


def test_negativity_of_lobed_and_symmetric_laws():
    for q, check in ((0.0, lambda n: n > 1.01), (0.5, lambda n: abs(n - 1) <= 1e-4)):
        law = T.gaussian_law(lobed_spec(q))
        dw = np.sqrt(law.sigma2) / 50
        h = inv.histogram(law.chf, dw, 8, inv.default_range(law, 14), law=law)
        assert check(inv.negativity_integral(h))


@pytest.mark.parametrize("L", [10, 50])
def test_histogram_moments_match_finite_differences(L):
    s = skewed_spec(L)
    dw = np.sqrt(T.variance_work(s)) / 50
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", inv.AliasingWarning)
        h = inv.histogram(s, dw, 8)
    for n in (1, 2):
        assert h.moment(n) == pytest.approx(gq.moments_fd(s, n), rel=5e-3)


def test_histogram_of_decaying_chi_is_normalized_and_real():
    h = inv.histogram(skewed_spec(50), np.sqrt(T.variance_work(skewed_spec(50))) / 10, 8)
    assert h.total == pytest.approx(1, abs=1e-6)
    assert h.masses.dtype == float


@pytest.mark.parametrize("L", [10, 50])
def test_refinement_changes_density_little(L):
    # the finite-chain law is a set of atoms, so bin averages need not converge under refinement
    s = skewed_spec(L)
    dw = np.sqrt(T.variance_work(s)) / 10
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", inv.AliasingWarning)
        a = inv.histogram(s, dw, 8)
        b = inv.histogram(s, dw / 2, 8)
    fine = dict(zip(np.rint(b.w_centers / (dw / 2)).astype(int), b.density))
    diff = max(abs(fine[2 * int(round(w / dw))] - p) for w, p in zip(a.w_centers, a.density))
    assert diff < 1e-4


def test_kernels_agree():
    rng = np.random.default_rng(4)
    amps = rng.normal(size=4001) + 1j * rng.normal(size=4001)
    w = np.linspace(-20, 20, 81)
    np.testing.assert_allclose(inv._bin_sums_numba(2000, 0.01, amps, w), inv._bin_sums_numpy(2000, 0.01, amps, w), atol=1e-10)


def test_csv_round_trip(tmp_path):
    h = inv.histogram(skewed_spec(50), 0.5, 8)
    path, sidecar = h.to_csv(tmp_path / "h.csv", skewed_spec(50))
    assert path.read_text().splitlines()[0] == "w,p,dw"
    back = inv.read_csv(path)
    np.testing.assert_array_equal(back.masses, h.masses)
    np.testing.assert_array_equal(back.w_centers, h.w_centers)
    assert back.dw == h.dw and back.meta["spec"]["L"] == 50
    assert back.meta["chi_checksum"] == h.meta["chi_checksum"]


def test_complex_histogram_cannot_be_written(tmp_path):
    h = inv.histogram(lambda u: np.exp(-0.5 * u * u + 0.3j * u * u), 0.1, 8, (-8, 8), allow_complex=True)
    with pytest.raises(ConfigError):
        h.to_csv(tmp_path / "c.csv")
