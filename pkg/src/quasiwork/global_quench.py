"""Exact finite-size characteristic functions for global sudden quenches.

``X_q(u) = Tr{exp(-iuqH) rho exp(-iu(1-q)H) exp(iuH')}`` factorizes over
momentum pairs inside each parity sector. Paired-mode factors are carried
normalized by ``Z_k^2 = 4 cosh^2(beta eps/2)`` so that nothing overflows;
the normalization constants are added back in the log domain.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import ConfigError, ConvergenceError, CriticalityError, NumericalError
from .model import EVEN, ODD, ModeTable, QuenchSpec, dispersion, is_critical, log_partition_function, mode_table, momenta

# zero-temperature finite chains have degenerate sectors; stay at finite beta
BETA_MAX = 50.0


# --- single-mode factors (unnormalized, as closed-form expressions) ---------


def mode_factor_thermal(eps, eps_prime, dot, beta, u):
    """Incoherent pair factor ``2(cos((u-i beta)eps) cos(u eps') + sin((u-i beta)eps) sin(u eps') dot + 1)``."""
    z = (u - 1j * beta) * eps
    return 2.0 * (np.cos(z) * np.cos(u * eps_prime) + np.sin(z) * np.sin(u * eps_prime) * dot + 1.0)


def mode_factor_coherent(eps, eps_prime, cross_x, phi, q, u):
    """Coherent pair factor ``-2i sin(u eps') sin(u(2q-1)eps - 2 phi) cross_x``."""
    return -2j * np.sin(u * eps_prime) * np.sin(u * (2 * q - 1) * eps - 2 * phi) * cross_x


def mode_factor_unpaired(eps, eps_prime, sign, beta, u):
    """Unpaired ``k = 0, pi`` factors ``(2 cosh z, 2 sinh z)``, ``z = (beta eps - iu(s eps' - eps))/2``."""
    z = 0.5 * (beta * eps - 1j * u * (sign * eps_prime - eps))
    return 2.0 * np.cosh(z), 2.0 * np.sinh(z)


# --- hot kernels: sums of log factors over modes, for every u ---------------


def _normalizers(eps, beta):
    """``cosh/(cosh+1)``, ``tanh(x/2)`` and ``1/(cosh+1)`` at ``x = beta eps``, overflow-free."""
    x = beta * eps
    e = np.exp(-x)
    sech = 2.0 * e / (1.0 + e * e)
    r = sech / (1.0 + sech)
    return 1.0 / (1.0 + sech), np.tanh(0.5 * x), r


def _log_or_ninf(z):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(z)
    return np.where(z == 0, -np.inf + 0j, out)


def _sector_logs_numpy(u, eps, epsp, dot, cross, phi, beta, q, coherent, ueps, uepsp, usign):
    u = u[:, None]
    cb, tb, r = _normalizers(eps, beta)
    ce, se = np.cos(u * eps), np.sin(u * eps)
    cp, sp_ = np.cos(u * epsp), np.sin(u * epsp)
    xh = (ce * cb + 1j * se * tb) * cp + (se * cb - 1j * ce * tb) * sp_ * dot + r
    if coherent:
        xh = xh - 1j * sp_ * np.sin(u * (2 * q - 1) * eps - 2 * phi) * cross * r
    lx = np.sum(_log_or_ninf(xh), axis=1)
    lxp = np.sum(_log_or_ninf(xh - 2 * r), axis=1)
    if ueps.size:
        z = 0.5 * (beta * ueps - 1j * u * (usign * uepsp - ueps))
        em = np.exp(-2 * z)
        lx = lx + np.sum(z + _log_or_ninf(1 + em), axis=1)
        lxp = lxp + np.sum(z + _log_or_ninf(1 - em), axis=1)
    return lx, lxp


@_accel.njit
def _clog(z):
    if z.real == 0.0 and z.imag == 0.0:
        return complex(-np.inf, 0.0)
    return np.log(z)


@_accel.njit
def _sector_logs_numba(u, eps, epsp, dot, cross, phi, beta, q, coherent, ueps, uepsp, usign):
    nu = u.shape[0]
    nk = eps.shape[0]
    lx = np.zeros(nu, dtype=np.complex128)
    lxp = np.zeros(nu, dtype=np.complex128)
    cb = np.empty(nk)
    tb = np.empty(nk)
    r = np.empty(nk)
    for j in range(nk):
        x = beta * eps[j]
        e = np.exp(-x)
        sech = 2.0 * e / (1.0 + e * e)
        r[j] = sech / (1.0 + sech)
        cb[j] = 1.0 / (1.0 + sech)
        tb[j] = np.tanh(0.5 * x)
    for i in range(nu):
        acc = 0j
        accp = 0j
        for j in range(nk):
            ce = np.cos(u[i] * eps[j])
            se = np.sin(u[i] * eps[j])
            cp = np.cos(u[i] * epsp[j])
            sp_ = np.sin(u[i] * epsp[j])
            xh = complex(ce * cb[j], se * tb[j]) * cp + complex(se * cb[j], -ce * tb[j]) * sp_ * dot[j] + r[j]
            if coherent:
                xh -= 1j * sp_ * np.sin(u[i] * (2 * q - 1) * eps[j] - 2 * phi[j]) * cross[j] * r[j]
            acc += _clog(xh)
            accp += _clog(xh - 2 * r[j])
        for j in range(ueps.shape[0]):
            z = 0.5 * complex(beta * ueps[j], -u[i] * (usign[j] * uepsp[j] - ueps[j]))
            em = np.exp(-2 * z)
            acc += z + _clog(1 + em)
            accp += z + _clog(1 - em)
        lx[i] = acc
        lxp[i] = accp
    return lx, lxp


sector_logs = _accel.select(_sector_logs_numba, _sector_logs_numpy)


def _table_args(tab: ModeTable):
    return (
        np.asarray(tab.eps, dtype=float),
        np.asarray(tab.eps_prime, dtype=float),
        np.asarray(tab.dot, dtype=float),
        np.asarray(tab.cross_x, dtype=float),
        np.asarray(tab.phi, dtype=float),
    )


def _paired_log_norm(tab: ModeTable, beta):
    x = beta * np.asarray(tab.eps)
    # log(2 (cosh x + 1)) = 2 log(2 cosh(x/2))
    return float(np.sum(2 * (0.5 * x + np.log1p(np.exp(-x)))))


def finite_size_X(spec: QuenchSpec, u, sign_rule: str = "product", kernel=None):
    """Exact ``X_q(u)`` on a real ``u`` grid for a finite periodic chain."""
    if is_critical(spec.lambda0):
        raise CriticalityError("finite-size X_q needs |lambda0| != 1")
    if spec.beta * spec.J > BETA_MAX:
        raise ConfigError(f"beta J = {spec.beta * spec.J:g} exceeds the supported maximum {BETA_MAX:g}")
    scalar = np.ndim(u) == 0
    # energies scale with J: X(u; beta, J) = X(u J; beta J, 1)
    u = np.ascontiguousarray(np.atleast_1d(np.asarray(u, dtype=float)) * spec.J)
    if spec.J != 1.0:
        spec = spec.replace(beta=spec.beta * spec.J, J=1.0)
    kern = sector_logs if kernel is None else kernel
    lz = log_partition_function(spec.L, spec.beta, spec.lambda0)
    total = np.zeros(u.shape, dtype=complex)
    for s in (EVEN, ODD):
        tab = mode_table(spec, s, sign_rule=sign_rule)
        lx, lxp = kern(
            u,
            *_table_args(tab),
            float(spec.beta),
            float(spec.q),
            bool(spec.coherent),
            np.asarray(tab.unpaired_eps, dtype=float),
            np.asarray(tab.unpaired_eps_prime, dtype=float),
            np.asarray(tab.unpaired_sign, dtype=float),
        )
        c = _paired_log_norm(tab, spec.beta) - lz - np.log(2.0)
        total += np.exp(lx + c) + tab.eta * np.exp(lxp + c)
    if not np.all(np.isfinite(total)):
        raise NumericalError("non-finite characteristic function value")
    return total[0] if scalar else total


@dataclass(frozen=True)
class CharacteristicCurve:
    """Samples of ``X_q`` or ``chi_q`` on a ``u`` grid."""

    u: np.ndarray
    values: np.ndarray
    kind: str
    spec: QuenchSpec | None = None
    meta: dict = field(default_factory=dict)

    def __call__(self, u):
        """Linear interpolation in ``u`` (real and imaginary parts separately)."""
        return np.interp(u, self.u, self.values.real) + 1j * np.interp(u, self.u, self.values.imag)


def chi(spec: QuenchSpec, u_grid, sign_rule: str = "product") -> CharacteristicCurve:
    """``chi_q = (X_q + X_{1-q})/2`` sampled on ``u_grid``."""
    u = np.asarray(u_grid, dtype=float)
    # canonical pair (q_lo, 1 - q_lo) so that chi_q and chi_{1-q} are bitwise equal
    q_lo = round(min(spec.q, 1.0 - spec.q), 12)
    xa = finite_size_X(spec.replace(q=q_lo), u, sign_rule)
    xb = xa if q_lo == 0.5 else finite_size_X(spec.replace(q=1.0 - q_lo), u, sign_rule)
    return CharacteristicCurve(u, 0.5 * (xa + xb), "chi_q", spec)


# --- moments by Richardson-extrapolated central differences ------------------


def central_weights(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the second-order central stencil for ``d^n/du^n``."""
    p = (n + 1) // 2
    offs = np.arange(-p, p + 1, dtype=float)
    V = np.vander(offs, increasing=True).T
    rhs = np.zeros(len(offs))
    from math import factorial

    rhs[n] = factorial(n)
    return offs, np.linalg.solve(V, rhs)


def richardson_derivative(f, n: int, h: float, levels: int = 3):
    """``n``-th derivative at 0 of ``f`` (vectorized in its argument).

    Central differences at ``h, h/2, h/4, ...`` combined by Richardson
    extrapolation in ``h^2``. Returns the estimate and the size of the last
    correction, a proxy for its error.
    """
    offs, wts = central_weights(n)
    steps = h / 2.0 ** np.arange(levels)
    pts = np.concatenate([offs * s for s in steps])
    vals = np.asarray(f(pts)).reshape(levels, len(offs))
    T = [np.dot(vals[i], wts) / steps[i] ** n for i in range(levels)]
    corr = 0.0
    for m in range(1, levels):
        fac = 4.0**m
        new = [(fac * T[i + 1] - T[i]) / (fac - 1) for i in range(len(T) - 1)]
        corr = abs(new[-1] - T[-1])
        T = new
    return T[0], corr


def work_scale(spec: QuenchSpec) -> float:
    """Largest single-particle energy of the initial and final Hamiltonians."""
    eps = []
    for s in (EVEN, ODD):
        k = momenta(spec.L, s)
        eps += [dispersion(spec.lambda0, k).max(), dispersion(spec.lambda_tau, k).max()]
    return float(max(eps)) * spec.J


def _moment_from_derivative(val, n):
    return (-1j) ** n * val


def moments_fd(spec: QuenchSpec, n: int, h: float | None = None, rtol: float = 1e-5):
    """Work moment ``(-i)^n d^n chi_q(0)`` by Richardson-extrapolated differences.

    Each estimate uses central differences at ``h, h/2, h/4`` with two
    Richardson sweeps. Unless ``h`` is forced, the base step is chosen from
    the ladder ``0.4/W * 2^-j`` (``W = <w^2>^{1/2}`` from a pilot at the
    small step ``1e-2/(L max eps)``) where neighbouring estimates agree best,
    which balances truncation against roundoff separately for every order.
    """
    if n < 1 or n > 6:
        raise ValueError("moments_fd supports 1 <= n <= 6")
    f = lambda uu: chi(spec, uu).values  # noqa: E731
    if h is not None:
        val, _ = richardson_derivative(f, n, h)
        m = _moment_from_derivative(val, n)
        return _checked_moment(m, abs(m), 0.0, n, rtol)
    h_pilot = 1e-2 / (spec.L * work_scale(spec))
    m2, _ = richardson_derivative(f, 2, h_pilot)
    W = float(np.sqrt(abs(m2.real)))
    if W == 0.0:
        return 0.0
    m, err = adaptive_derivative(f, n, 0.4 / W)
    return _checked_moment((-1j) ** n * m, W**n, err, n, rtol)


def adaptive_derivative(f, n: int, h_max: float, n_steps: int = 12):
    """Richardson derivative at the base step from a halving ladder with the
    smallest disagreement between neighbours; returns (value, error proxy)."""
    steps = h_max / 2.0 ** np.arange(n_steps)
    ests = [richardson_derivative(f, n, hh)[0] for hh in steps]
    diffs = [abs(ests[j] - ests[j + 1]) for j in range(n_steps - 1)]
    j = int(np.argmin(diffs))
    return ests[j + 1], diffs[j]


def _checked_moment(m, scale, err, n, rtol):
    ref = max(abs(m), scale, 1e-300)
    if abs(m.imag) > 1e-7 * ref:
        raise NumericalError(f"moment {n} has imaginary residue {m.imag:.3e}")
    if err > rtol * ref:
        raise ConvergenceError(f"moment {n}: step ladder disagreement {err:.3e} exceeds tolerance")
    return float(m.real)
