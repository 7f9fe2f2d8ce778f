"""Thermodynamic-limit asymptotics of the global quench.

For large ``L`` the log of the characteristic function becomes extensive,
``ln X_q(u) ~ L g_q(u)``, and the work quasiprobability approaches a
Gaussian with complex variance ``v_q = sigma_w^2 + i r_q``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .errors import BranchError, ConfigError, ConvergenceError, CriticalityError
from .model import QuenchSpec, dispersion, is_critical

# 15-point Kronrod nodes on [0, 1] (symmetric half) with 7-point Gauss weights
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def _phase_fn(spec: QuenchSpec):
    if not spec.coherent:
        return lambda k: np.zeros_like(k)
    if spec.phases.kind != "constant":
        raise ConfigError("thermodynamic-limit integrals need a constant phase profile")
    phi = spec.phases.values[0]
    return lambda k: np.full_like(k, phi)


def _geometry(lam0, lamt, k):
    eps = dispersion(lam0, k)
    epsp = dispersion(lamt, k)
    s, c = np.sin(k), np.cos(k)
    # unnormalized d-vectors (0, s, -(lam + c)); |d| = eps/2
    dot = (s * s + (lam0 + c) * (lamt + c)) / (0.25 * eps * epsp)
    cross = s * (lam0 - lamt) / (0.25 * eps * epsp)
    return eps, epsp, dot, cross


def normalized_mode_factor(spec: QuenchSpec, k, u):
    """``X^{(k)}_q(u) / Z_k^2`` for continuous ``k`` in ``(0, pi)``."""
    beta = spec.beta * spec.J
    uu = u * spec.J
    eps, epsp, dot, cross = _geometry(spec.lambda0, spec.lambda_tau, k)
    x = beta * eps
    e = np.exp(-x)
    sech = 2 * e / (1 + e * e)
    r = sech / (1 + sech)
    cb, tb = 1 / (1 + sech), np.tanh(0.5 * x)
    ce, se = np.cos(uu * eps), np.sin(uu * eps)
    cp, sp_ = np.cos(uu * epsp), np.sin(uu * epsp)
    val = (ce * cb + 1j * se * tb) * cp + (se * cb - 1j * ce * tb) * sp_ * dot + r
    if spec.coherent:
        phi = _phase_fn(spec)(k)
        val = val - 1j * sp_ * np.sin(uu * (2 * spec.q - 1) * eps - 2 * phi) * cross * r
    return val


def _panel_nodes(panels):
    a, b = panels[:, 0:1], panels[:, 1:2]
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * _NODES[None, :], half


def adaptive_log_integral(f, a, b, tol=1e-10, max_panels=4000, init=16, breakpoints=()):
    """``int_a^b log f(k) dk`` with the log continued along ``k``.

    Gauss-Kronrod 7/15 panels are refined until the summed error estimate is
    below ``tol``. The imaginary part of the log is unwrapped across the
    ordered node sequence of all panels, starting from the principal value
    at the leftmost node. Raises ``BranchError`` when neighbouring nodes still
    differ in phase by more than ``pi/2`` after refinement.
    """
    edges = np.unique(np.concatenate([np.linspace(a, b, init + 1), np.asarray(breakpoints, float)]))
    edges = edges[(edges >= a) & (edges <= b)]
    panels = np.stack([edges[:-1], edges[1:]], axis=1)
    for _ in range(200):
        nodes, half = _panel_nodes(panels)
        vals = f(nodes.ravel())
        if np.any(vals == 0):
            raise BranchError("integrand of the log vanishes on a node")
        ang = np.angle(vals)
        jumps = np.abs(np.diff(ang))
        jumps = np.minimum(jumps, 2 * np.pi - jumps)
        logs = np.log(np.abs(vals)) + 1j * np.unwrap(ang)
        logs = logs.reshape(nodes.shape)
        kron = half[:, 0] * (logs @ _KW)
        gauss = half[:, 0] * (logs @ _GW)
        err = np.abs(kron - gauss)
        bad_branch = np.zeros(len(panels), bool)
        big = np.nonzero(jumps > np.pi / 2)[0]
        if big.size:
            bad_branch[np.unique(big // 15)] = True
            bad_branch[np.unique((big + 1) // 15)] = True
        total_err = err.sum()
        if total_err <= tol and not bad_branch.any():
            return complex(kron.sum()), float(total_err)
        if len(panels) >= max_panels:
            break
        split = bad_branch | (err > max(tol / len(panels), 1e-3 * err.max()))
        mids = 0.5 * (panels[split, 0] + panels[split, 1])
        new = np.concatenate(
            [
                panels[~split],
                np.stack([panels[split, 0], mids], axis=1),
                np.stack([mids, panels[split, 1]], axis=1),
            ]
        )
        panels = new[np.argsort(new[:, 0])]
    if bad_branch.any():
        raise BranchError("phase of the integrand jumps by more than pi/2 between nodes")
    raise ConvergenceError(f"log-integral error {total_err:.2e} above tolerance {tol:.1e}")


def _breakpoints(lam0):
    # the integrand steepens near k = pi (lam0 ~ 1) or k = 0 (lam0 ~ -1)
    d = abs(abs(lam0) - 1.0)
    if d > 0.2:
        return ()
    edge = np.pi if lam0 > 0 else 0.0
    offs = np.geomspace(max(d, 1e-8), 0.5, 12)
    pts = edge - offs if lam0 > 0 else edge + offs
    return tuple(pts)


def g_q(u, spec: QuenchSpec, tol: float = 1e-10) -> complex:
    """Intensive cumulant function ``(2 pi)^-1 int_0^pi ln(X^{(k)}_q(u)/Z_k^2) dk``."""
    if is_critical(spec.lambda0):
        raise CriticalityError("g_q needs |lambda0| != 1")
    if u == 0:
        return 0j
    val, _ = adaptive_log_integral(
        lambda k: normalized_mode_factor(spec, k, u), 0.0, np.pi, tol=2 * np.pi * tol, breakpoints=_breakpoints(spec.lambda0)
    )
    return val / (2 * np.pi)


def g_q_high_temperature(u, spec: QuenchSpec, tol: float = 1e-10) -> complex:
    """The ``beta -> 0`` form of ``g_q``: the mode factor at infinite temperature."""
    return g_q(u, spec.replace(beta=0.0), tol)


# --- dedicated quadratures for the low cumulants ---------------------------


def _quad(f, lam0, tol=1e-13):
    pts = _breakpoints(lam0)
    val, err = integrate.quad(f, 0.0, np.pi, epsabs=tol, epsrel=tol, limit=500, points=pts or None)
    if not np.isfinite(val):
        raise ConvergenceError("quadrature returned a non-finite value")
    return val


def _sin2phi(spec):
    return np.sin(2 * _phase_fn(spec)(np.zeros(1))[0])


def _cos2phi(spec):
    return np.cos(2 * _phase_fn(spec)(np.zeros(1))[0])


HIGH_TEMP_BETA = 1e-6


def _sech2_half(x):
    """``1/cosh^2(x/2)`` for ``x >= 0`` without overflow."""
    e = np.exp(-x)
    return 4.0 * e / (1.0 + e) ** 2


def _use_closed_form(spec: QuenchSpec) -> bool:
    return spec.beta * spec.J < HIGH_TEMP_BETA and not is_critical(spec.lambda0)


def mean_work(spec: QuenchSpec) -> float:
    """Extensive mean work ``w_bar`` of the Gaussian law."""
    if _use_closed_form(spec):
        return -spec.J * extracted_work_high_temperature(spec)
    lam0, lamt = spec.lambda0, spec.lambda_tau
    b = spec.beta * spec.J
    s2 = _sin2phi(spec)

    def f(k):
        eps = dispersion(lam0, k)
        x = b * eps
        # sinh x / cosh^2(x/2) = 2 tanh(x/2)
        return ((lam0 + np.cos(k)) * 2 * np.tanh(0.5 * x) + np.sin(k) * s2 * _sech2_half(x)) / eps

    return spec.J * (lam0 - lamt) * spec.L / np.pi * _quad(f, lam0)


def variance_work(spec: QuenchSpec) -> float:
    """Extensive work variance ``sigma_w^2`` of the Gaussian law."""
    if _use_closed_form(spec):
        return -spec.J**2 * spec.L * high_temp_derivatives(spec)[1].real
    lam0, lamt = spec.lambda0, spec.lambda_tau
    b = spec.beta * spec.J
    s2 = _sin2phi(spec)

    def f(k):
        eps = dispersion(lam0, k)
        x = b * eps
        sh = _sech2_half(x)
        term = np.sin(k) * s2 * sh + (lam0 + np.cos(k)) * 2 * np.tanh(0.5 * x)
        return 2.0 - sh - 2.0 / eps**2 * term**2

    return spec.J**2 * (lam0 - lamt) ** 2 * spec.L / np.pi * _quad(f, lam0)


def r_q(spec: QuenchSpec, q: float | None = None) -> float:
    """Imaginary part of the complex work variance; odd under ``q -> 1 - q``."""
    q = spec.q if q is None else q
    if not spec.coherent or q == 0.5:
        return 0.0
    lam0, lamt = spec.lambda0, spec.lambda_tau
    b = spec.beta * spec.J
    c2 = _cos2phi(spec)
    if c2 == 0:
        return 0.0
    if _use_closed_form(spec):
        return -spec.J**2 * spec.L * high_temp_derivatives(spec, q)[1].imag

    def f(k):
        eps = dispersion(lam0, k)
        return np.sin(k) * c2 * _sech2_half(b * eps)

    return spec.J**2 * 2 * (1 - 2 * q) * (lamt - lam0) * spec.L / np.pi * _quad(f, lam0)


@dataclass(frozen=True)
class GaussianWorkLaw:
    """Complex-variance Gaussian ``Re[(2 pi v)^-1/2 exp(-(w - w_bar)^2 / 2v)]``."""

    w_bar: float
    sigma2: float
    r: float
    L: int

    @property
    def v(self) -> complex:
        return complex(self.sigma2, self.r)

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        v = self.v
        return (np.exp(-((w - self.w_bar) ** 2) / (2 * v)) / np.sqrt(2 * np.pi * v)).real

    def __call__(self, w):
        return self.pdf(w)

    def chf(self, u):
        """Fourier transform of ``pdf``: the Hermitian part of the complex-Gaussian transform."""
        u = np.asarray(u, dtype=float)
        g = np.exp(1j * u * self.w_bar - 0.5 * u * u * self.sigma2)
        return g * np.cos(0.5 * self.r * u * u)


def gaussian_law(spec: QuenchSpec, q: float | None = None) -> GaussianWorkLaw:
    """Asymptotic work law with ``w_bar``, ``sigma_w^2`` and ``r_q`` from quadratures."""
    s2 = variance_work(spec)
    if s2 <= 0:
        raise ConfigError("work variance is not positive; the Gaussian law is undefined")
    return GaussianWorkLaw(mean_work(spec), s2, r_q(spec, q), spec.L)


def negativity_asymptotic(law: GaussianWorkLaw) -> float:
    """``(sigma^4 + r^2)^{1/4} / sigma``.

    This is the L1 norm of the complex amplitude ``(2 pi v)^-1/2 exp(-(w - w_bar)^2/2v)``;
    ``negativity_numeric`` integrates ``|p_q|`` of its real part, which is smaller when ``r != 0``.
    """
    if law.sigma2 <= 0:
        raise ConfigError("sigma_w must be positive")
    return (law.sigma2**2 + law.r**2) ** 0.25 / np.sqrt(law.sigma2)


def negativity_numeric(law: GaussianWorkLaw, n_sigma: float = 14.0) -> float:
    """``int |p_q(w)| dw`` of the real density, integrating between its sign changes."""
    s = np.sqrt(abs(law.v))
    grid = np.linspace(law.w_bar - n_sigma * s, law.w_bar + n_sigma * s, 4001)
    vals = law.pdf(grid)
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    roots = [brentq(law.pdf, grid[i], grid[i + 1], xtol=1e-14) for i in flips]
    edges = [grid[0], *roots, grid[-1]]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(law.pdf, a, b, limit=500, epsabs=1e-13, epsrel=1e-12)
        total += abs(v)
    return total


def kurtosis_asymptotic(law: GaussianWorkLaw) -> float:
    return 3.0 - 3.0 * law.r**2 / law.sigma2**2


def fourth_moment_asymptotic(law: GaussianWorkLaw) -> float:
    w, s2, r = law.w_bar, law.sigma2, law.r
    return w**4 + 6 * w**2 * s2 + 3 * s2**2 - 3 * r**2


def strong_negativity(law: GaussianWorkLaw) -> bool:
    """True in the regime ``r_q > sigma_w^2`` where a zero-mean law has a negative fourth moment."""
    return abs(law.r) > law.sigma2


# --- closed forms ----------------------------------------------------------


def _hi_t_shape(lam0):
    a = abs(lam0)
    return 1 + a - abs(1 - a)


def high_temp_derivatives(spec: QuenchSpec, q: float | None = None):
    """Closed forms of ``g_q'(0)`` and ``g_q''(0)`` at infinite temperature, constant phase."""
    if is_critical(spec.lambda0):
        raise CriticalityError("closed forms are singular at |lambda0| = 1")
    q = spec.q if q is None else q
    lam0, lamt = spec.lambda0, spec.lambda_tau
    phi = spec.phases.values[0] if spec.coherent else 0.0
    if spec.coherent and spec.phases.kind != "constant":
        raise ConfigError("closed forms need a constant phase")
    dl = lamt - lam0
    a = abs(lam0)
    d1 = -1j * dl / (2 * np.pi * a) * np.sin(2 * phi) * _hi_t_shape(lam0)
    shape2 = (1 + lam0**2 - (1 + a) * abs(1 - a)) / (8 * lam0**2)
    coh = 1.0 if spec.coherent else 0.0
    d2 = -(dl**2) * (1 - shape2 * np.sin(2 * phi) ** 2 * coh) - 4j / np.pi * dl * (1 - 2 * q) * np.cos(2 * phi) * coh
    if not spec.coherent:
        d1 = 0j
    return complex(d1), complex(d2)


def extracted_work_high_temperature(spec: QuenchSpec) -> float:
    """``W_ex = -<w>`` at infinite temperature; nonzero only through the phases."""
    if not spec.coherent:
        return 0.0
    lam0, lamt = spec.lambda0, spec.lambda_tau
    phi = spec.phases.values[0]
    return (lamt - lam0) * spec.L / (2 * np.pi * abs(lam0)) * np.sin(2 * phi) * _hi_t_shape(lam0)


def fermi_dirac(x):
    return 1.0 / (1.0 + np.exp(np.abs(x)))


def fermi_dirac_integral(x: float, tol: float = 1e-13) -> float:
    """``int_0^inf y / (sqrt(1+y^2) cosh^2(x sqrt(1+y^2)/2)) dy`` by quadrature."""
    ax = abs(x)

    def f(y):
        t = np.sqrt(1 + y * y)
        return y / t * _sech2_half(ax * t)

    # split where the integrand has decayed; the tail is exponentially small
    ycut = max(1.0, 80.0 / ax)
    v1, _ = integrate.quad(f, 0, ycut, epsabs=tol, epsrel=tol, limit=500)
    v2, _ = integrate.quad(f, ycut, np.inf, epsabs=tol, epsrel=tol, limit=500)
    return v1 + v2


def fermi_dirac_closed(x: float) -> float:
    ax = abs(x)
    return 4.0 / ((1 + np.exp(ax)) * ax)


def scaling_couplings(a: float, m: float, c: float = 1.0):
    """``J = c/(2a)`` and ``lambda0 = 1 - m c a`` of the continuum limit."""
    return c / (2 * a), 1 - m * c * a


def coherent_work_scaling(spec: QuenchSpec) -> float:
    """Scaling-limit coherent mean work ``(lam0-lam_tau) sin(2 phi_pi) L g_FD(beta m c^2) / (pi beta)``.

    ``m c^2 = 2 J (1 - lambda0)`` with the energy scale ``spec.J``.
    """
    if spec.beta <= 0:
        raise ConfigError("the scaling form needs beta > 0")
    phi = spec.phases.values[0] if spec.coherent else 0.0
    mc2 = 2 * spec.J * (1 - spec.lambda0)
    return (spec.lambda0 - spec.lambda_tau) * np.sin(2 * phi) * spec.L / (np.pi * spec.beta) * fermi_dirac(spec.beta * mc2)


def coherent_work_quadrature(spec: QuenchSpec) -> float:
    """``w_bar(coherent Gibbs) - w_bar(Gibbs)`` from two quadratures."""
    return mean_work(spec.replace(state="coherent")) - mean_work(spec.replace(state="gibbs"))
