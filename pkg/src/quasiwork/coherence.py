"""Coherence as a resource: fluctuation relation, cumulant series and bounds.

The random coherence ``C`` and the work ``w`` are jointly distributed for a
full-rank initial state; ``<exp(-beta w - C)> = exp(-beta Delta F)``. At
infinite temperature the mixture ``eta |Psi><Psi| + (1 - eta) I / D`` has a
two-level spectrum and everything reduces to closed forms in ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class CoherenceLaw:
    """Spectrum of ``eta |Psi><Psi| + (1 - eta) I / D``."""

    eta: float
    D: int

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError("eta must lie in [0, 1]")
        if self.D < 2:
            raise ConfigError("D must be at least 2")

    @property
    def top(self) -> float:
        """Eigenvalue of ``|Psi>``."""
        return self.eta + (1 - self.eta) / self.D

    @property
    def rest(self) -> float:
        """Eigenvalue of the ``D - 1`` orthogonal directions."""
        return (1 - self.eta) / self.D

    def eigenvalues(self):
        return np.concatenate([[self.top], np.full(self.D - 1, self.rest)])

    def mean(self) -> float:
        """``<C>``, the relative entropy of coherence ``ln D - S(rho)``."""
        out = np.log(self.D) + self.top * np.log(self.top)
        if self.rest > 0:
            out += (self.D - 1) * self.rest * np.log(self.rest)
        return float(out)

    def moment(self, n: int) -> float:
        """``<C^n>``; ``C = ln(D R)`` on the eigenvalue ``R``."""
        out = self.top * np.log(self.D * self.top) ** n
        if self.rest > 0:
            out += (self.D - 1) * self.rest * np.log(self.D * self.rest) ** n
        return float(out)


def _weights(law: CoherenceLaw, t):
    """``R^{1 + it}`` for the two eigenvalues (zero weight stays zero)."""
    t = np.asarray(t)
    a = law.top ** (1 + 1j * t)
    b = law.rest ** (1 + 1j * t) if law.rest > 0 else np.zeros_like(a)
    return a, b


def coherence_chf(law: CoherenceLaw, t):
    """``<exp(itC)> = D^{it} [a^{1+it} + (D-1) b^{1+it}]``."""
    a, b = _weights(law, t)
    return law.D ** (1j * np.asarray(t)) * (a + (law.D - 1) * b)


def coherent_work(law: CoherenceLaw, w_mean: float, delta_F: float):
    """Split the mean work into ``w_1`` on ``|Psi>`` and the per-direction mean ``w_2`` elsewhere.

    ``w_1 = (<w> - (1 - eta) Delta F) / eta`` and
    ``w_2 = (D Delta F - w_1) / (D - 1)``.
    """
    if law.eta == 0:
        if abs(w_mean - delta_F) > 1e-12 * max(1.0, abs(w_mean)):
            raise ConfigError("eta = 0 requires <w> = Delta F")
        return delta_F, delta_F
    w1 = (w_mean - (1 - law.eta) * delta_F) / law.eta
    w2 = (law.D * delta_F - w1) / (law.D - 1)
    return w1, w2


def duG(law: CoherenceLaw, w_mean: float, delta_F: float, t):
    """``-i d_u ln <exp(iuw + itC)>`` at ``u = 0`` as a function of ``t`` (complex allowed)."""
    w1, w2 = coherent_work(law, w_mean, delta_F)
    a, b = _weights(law, t)
    return (a * w1 + (law.D - 1) * b * w2) / (a + (law.D - 1) * b)


def correlation_derivatives(law: CoherenceLaw, w_mean: float, delta_F: float, kmax: int = 3, method: str = "fd"):
    """``d_t^k d_u G(0, 0)`` for ``k = 1..kmax``.

    ``d_u G = i duG``; the ``t`` derivatives use Richardson central
    differences (``fd``) or a Cauchy integral (``contour``) of ``duG``.
    """
    from .global_quench import richardson_derivative

    f = lambda t: duG(law, w_mean, delta_F, t)  # noqa: E731
    out = []
    for k in range(1, kmax + 1):
        if method == "fd":
            val, _ = richardson_derivative(f, k, 0.05)
        elif method == "contour":
            r, m = 0.25, 64
            z = r * np.exp(2j * np.pi * np.arange(m) / m)
            val = factorial(k) * np.mean(f(z) * (z / r) ** (-k)) / r**k
        else:
            raise ConfigError("method must be 'fd' or 'contour'")
        out.append(1j * val)
    return np.array(out)


def correlation_closed_forms(law: CoherenceLaw, w_mean: float, delta_F: float):
    """The first three ``d_t^k d_u G(0, 0)`` from covariances of ``w`` with powers of ``C``."""
    w1, w2 = coherent_work(law, w_mean, delta_F)
    D, a, b = law.D, law.top, law.rest
    c1, c2 = np.log(D * a), (np.log(D * b) if b > 0 else 0.0)

    def wC(n):
        return a * w1 * c1**n + (D - 1) * b * w2 * c2**n

    C1, C2 = law.moment(1), law.moment(2)
    s1 = wC(1) - w_mean * C1
    s2 = wC(2) - w_mean * C2
    s3 = wC(3) - w_mean * law.moment(3)
    d1 = -s1
    d2 = 2j * C1 * s1 - 1j * s2
    d3 = 3 * (2 * C1**2 - C2) * s1 - 3 * C1 * s2 + s3
    return np.array([d1, d2, d3])


def correlation_series(law: CoherenceLaw, w_mean: float, delta_F: float, order: int = 6, method: str = "contour"):
    """Partial sums ``Delta F + sum_{k<=N} i^{k+1}/k! d_t^k d_u G(0,0)`` for ``N = 1..order``."""
    d = correlation_derivatives(law, w_mean, delta_F, order, method)
    terms = np.array([1j ** (k + 1) / factorial(k) * d[k - 1] for k in range(1, order + 1)])
    return (delta_F + np.cumsum(terms)).real


# --- cumulant series of s = beta w + C ---------------------------------------------


def cumulants_from_moments(m):
    """Cumulants ``k_1..k_N`` from raw moments ``m_1..m_N``."""
    from math import comb

    m = [1.0] + list(m)
    k = [0.0] * len(m)
    for n in range(1, len(m)):
        k[n] = m[n] - sum(comb(n - 1, j - 1) * k[j] * m[n - j] for j in range(1, n))
    return np.array(k[1:])


@dataclass(frozen=True)
class CumulantSeries:
    partial_sums: np.ndarray
    cumulants: np.ndarray
    exact: float

    @property
    def gaps(self):
        return np.abs(self.partial_sums - self.exact)


def cumulant_series(joint, beta: float, order: int, exact: float | None = None) -> CumulantSeries:
    """Partial sums of ``Delta F = beta^-1 sum (-1)^{n+1} k_n(s)/n!`` with ``s = beta w + C``.

    ``joint`` carries atoms ``w``, ``C`` and (possibly complex) ``mass``.
    """
    if beta <= 0:
        raise ConfigError("beta must be positive")
    if not 1 <= order <= 6:
        raise ConfigError("order must lie in 1..6")
    s = beta * np.asarray(joint.w) + np.asarray(joint.C)
    mass = np.asarray(joint.mass)
    moments = [np.sum(mass * s**n).real for n in range(1, order + 1)]
    kap = cumulants_from_moments(moments)
    terms = np.array([(-1) ** (n + 1) * kap[n - 1] / factorial(n) for n in range(1, order + 1)]) / beta
    sums = np.cumsum(terms)
    if exact is None:
        exact = -np.log(np.sum(mass * np.exp(-s)).real) / beta
    return CumulantSeries(sums, kap, float(exact))


def fluctuation_residual(joint, beta: float, delta_F: float) -> float:
    """``|<exp(-beta w - C)> exp(beta Delta F) - 1|``, the relative residual of the relation."""
    s = -beta * (np.asarray(joint.w) - delta_F) - np.asarray(joint.C)
    return float(abs(np.sum(np.asarray(joint.mass) * np.exp(s)) - 1.0))


# --- Gaussian closure ------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianBound:
    delta_F: float
    extracted_work: float
    variance_term: float
    correlation_term: float


def gaussian_bound(mean_w: float, var_w: float, cov_wC: float, beta: float) -> GaussianBound:
    """``Delta F = <w> - beta sigma_w^2 / 2 - sigma_wC`` for Gaussian ``s``.

    The extracted work ``-<w>`` then splits as
    ``-Delta F - beta sigma_w^2/2 - sigma_wC``.
    """
    if beta <= 0:
        raise ConfigError("beta must be positive")
    vt = 0.5 * beta * var_w
    dF = mean_w - vt - cov_wC
    return GaussianBound(float(dF), float(-mean_w), float(vt), float(cov_wC))


def coherence_inequality(mean_w: float, delta_F: float, mean_C: float, beta: float) -> float:
    """Slack of ``<w> >= Delta F - <C>/beta``; nonnegative when it holds."""
    if beta <= 0:
        raise ConfigError("beta must be positive")
    return float(mean_w - delta_F + mean_C / beta)


# --- Ising chain at infinite temperature ----------------------------------------------


@dataclass(frozen=True)
class CyclicDecomposition:
    """Mean work of the ``beta = 0`` mixture and its correlation-series partial sums."""

    eta: float
    coherent_work: float
    mean_work: float
    extracted_work: float
    correlation_sums: np.ndarray


def ising_mixture_decomposition(spec, eta: float, order: int = 6) -> CyclicDecomposition:
    """Trace the extracted work of ``eta |Psi_G(0)><Psi_G(0)| + (1 - eta) I / D`` to correlations.

    The chain Hamiltonian is traceless for every field, so ``Delta F = 0`` at
    ``beta = 0`` and all mean work comes from the ``d_t^k d_u G`` terms.
    ``w_1`` is the first moment of the coherent state from the global quench.
    """
    from .global_quench import moments_fd

    law = CoherenceLaw(eta, 2**spec.L)
    w1 = moments_fd(spec.replace(beta=0.0, state="coherent"), 1)
    w_mean = eta * w1
    sums = correlation_series(law, w_mean, 0.0, order)
    return CyclicDecomposition(eta, float(w1), float(w_mean), float(-w_mean), sums)


def coherence_draw(L: int, seed: int, beta_range, lambda_range):
    """One random full-rank mixture of a coherent Gibbs state with its Gibbs state, and its residuals."""
    from . import oracle as O

    rng = np.random.default_rng(seed)
    beta = rng.uniform(*beta_range)
    l0, lt = rng.uniform(*lambda_range, size=2)
    eta = rng.uniform(0.0, 0.99)
    H, Hp = O.build_spin_hamiltonian(l0, L), O.build_spin_hamiltonian(lt, L)
    psi = O.coherent_gibbs_state(H, beta, rng.uniform(0, 2 * np.pi, 2**L))
    rho_g = O.gibbs_state(H, beta)
    rho = eta * np.outer(psi, psi.conj()) + (1 - eta) * rho_g
    dF = O.free_energy_difference(H, Hp, beta)
    fr = fluctuation_residual(O.joint_atoms(rho, H, Hp), beta, dF)
    jz = fluctuation_residual(O.joint_atoms(rho_g, H, Hp), beta, dF)
    w_mean = float(np.trace(rho @ (Hp - H)).real)
    slack = coherence_inequality(w_mean, dF, O.relative_entropy_of_coherence(rho, H), beta)
    return (seed, beta, l0, lt, eta, fr, jz, slack)
