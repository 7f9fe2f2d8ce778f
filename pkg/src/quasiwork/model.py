"""Momentum grids, dispersion, Bogoliubov geometry and parity bookkeeping
for the periodic transverse-field Ising chain

    H(lam) = -lam * sum_i sz_i - sum_i sx_i sx_{i+1}.

After the Jordan-Wigner map the Hilbert space splits into the even parity
sector (antiperiodic fermions, ``K+``) and the odd one (periodic fermions,
``K-``). Every sector is a product of independent momentum modes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, CriticalityError, DegenerateDirectionError

EVEN = +1
ODD = -1

# |lambda| closer than this to 1 counts as critical
CRITICAL_TOL = 1e-12
# directions are undefined below this single-particle energy
GAP_TOL = 1e-14


def _sector(sector) -> int:
    if sector in (EVEN, "even", "+"):
        return EVEN
    if sector in (ODD, "odd", "-"):
        return ODD
    raise ConfigError(f"unknown sector {sector!r}; use 'even' or 'odd'")


def _check_L(L) -> int:
    if int(L) != L or L <= 0 or int(L) % 2:
        raise ConfigError(f"L must be a positive even integer, got {L!r}")
    return int(L)


def momenta(L: int, sector) -> np.ndarray:
    """Ascending momenta of one parity sector.

    Odd sector: ``2 pi n / L``; even sector: ``2 pi (n - 1/2) / L``, with
    ``n = -L/2 + 1, ..., L/2``.
    """
    L = _check_L(L)
    n = np.arange(-L // 2 + 1, L // 2 + 1, dtype=float)
    if _sector(sector) == EVEN:
        n = n - 0.5
    k = 2.0 * np.pi * n / L
    if _sector(sector) == ODD:
        # exact pi keeps the unpaired mode on the real axis
        k[-1] = np.pi
    return k


def dispersion(lam, k):
    """Single-particle energy ``2 sqrt((lam + cos k)^2 + sin^2 k)``."""
    k = np.asarray(k, dtype=float)
    c = lam + np.cos(k)
    s = np.sin(k)
    return 2.0 * np.hypot(c, s)


def dvector(lam, k):
    """Unit d-vector ``(0, sin k, -(lam + cos k)) / norm`` and ``eps_k``.

    Works elementwise on arrays of ``k``; the returned directions have shape
    ``k.shape + (3,)``.
    """
    k = np.asarray(k, dtype=float)
    d = np.stack([np.zeros_like(k), np.sin(k), -(lam + np.cos(k))], axis=-1)
    norm = np.linalg.norm(d, axis=-1)
    if np.any(norm < GAP_TOL / 2):
        raise DegenerateDirectionError(
            f"d-vector direction undefined at the gap closure (lambda={lam})"
        )
    return d / norm[..., None], 2.0 * norm


def is_critical(lam) -> bool:
    return abs(abs(lam) - 1.0) < CRITICAL_TOL


def parity_signs(lambda0, lambda_tau, rule: str = "product"):
    """Sector sign ``eta_-`` and the unpaired-mode signs ``(s_0, s_pi)``.

    ``eta_+`` is always +1. ``rule="product"`` uses
    ``s_k = sign((lambda0 + cos k)(lambda_tau + cos k))`` for ``k`` in
    ``{0, pi}``, which tracks whether the unpaired Bogoliubov mode flips
    between particle and hole. ``rule="table"`` reproduces the four-case
    enumeration that only lists quenches crossing one critical point.
    The two agree except when a quench crosses both critical points
    (``lambda0 > 1 > -1 > lambda_tau`` and its mirror).
    """
    if is_critical(lambda0):
        raise CriticalityError("parity signs are undefined at |lambda0| = 1")
    eta_minus = -1 if abs(lambda0) > 1 else 1
    if rule == "product":
        s0 = -1 if (lambda0 + 1.0) * (lambda_tau + 1.0) < 0 else 1
        s_pi = -1 if (lambda0 - 1.0) * (lambda_tau - 1.0) < 0 else 1
    elif rule == "table":
        a0, at = abs(lambda0), abs(lambda_tau)
        s_pi = -1 if (a0 < 1 and lambda_tau > 1) or (at < 1 and lambda0 > 1) else 1
        s0 = -1 if (a0 < 1 and lambda_tau < -1) or (at < 1 and lambda0 < -1) else 1
    else:
        raise ConfigError(f"unknown parity-sign rule {rule!r}")
    return eta_minus, s0, s_pi


def _log2cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x))


def _log2sinh(x):
    # -inf at x = 0, as it should
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return x + np.log(-np.expm1(-2.0 * x))


def _signed_logsumexp(logs, signs):
    logs = np.asarray(logs, dtype=float)
    finite = np.isfinite(logs)
    if not finite.any():
        return -np.inf, 0.0
    m = logs[finite].max()
    total = float(np.sum(np.asarray(signs)[finite] * np.exp(logs[finite] - m)))
    if total <= 0:
        return -np.inf, np.sign(total)
    return m + np.log(total), 1.0


def sector_log_products(L, beta, lambda0):
    """``log prod 2cosh(beta eps/2)`` and ``log prod 2sinh(beta eps/2)`` per sector."""
    out = {}
    for s in (EVEN, ODD):
        x = 0.5 * beta * dispersion(lambda0, momenta(L, s))
        out[s] = (float(np.sum(_log2cosh(x))), float(np.sum(_log2sinh(x))))
    return out


def log_partition_function(L, beta, lambda0) -> float:
    """Natural log of ``Tr exp(-beta H(lambda0))`` on the full chain."""
    L = _check_L(L)
    if beta < 0:
        raise ConfigError("beta must be nonnegative")
    prods = sector_log_products(L, beta, lambda0)
    if is_critical(lambda0):
        # eta_- is ambiguous, but then eps_k = 0 for an odd-sector mode so
        # the sinh product vanishes and the sign never matters
        eta = {EVEN: 1, ODD: 1}
    else:
        eta = {EVEN: 1, ODD: parity_signs(lambda0, lambda0)[0]}
    logs, signs = [], []
    for s in (EVEN, ODD):
        logs += [prods[s][0], prods[s][1]]
        signs += [1.0, float(eta[s])]
    lz, _ = _signed_logsumexp(logs, signs)
    return lz - np.log(2.0)


def partition_function(L, beta, lambda0) -> float:
    """``Tr exp(-beta H(lambda0))``; may be ``inf`` where the log is finite."""
    with np.errstate(over="ignore"):
        return float(np.exp(log_partition_function(L, beta, lambda0)))


@dataclass(frozen=True)
class PhaseProfile:
    """Phases ``phi_k`` of the coherent Gibbs amplitudes, even in ``k``.

    kind ``constant`` uses ``values = (phi,)``; ``alternating`` uses
    ``(phi_odd, phi_even)`` keyed on the positive-momentum label ``n``
    (``k = 2 pi (n - 1/2)/L`` in the even sector, ``2 pi n / L`` in the odd
    one); ``per_mode`` stores one value per momentum ``k >= 0`` of the even
    sector and optionally a second list for the odd sector.
    """

    kind: str = "constant"
    values: tuple = (0.0,)
    odd_values: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "alternating", "per_mode"):
            raise ConfigError(f"unknown phase profile kind {self.kind!r}")
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        object.__setattr__(self, "values", vals)
        if self.odd_values is not None:
            object.__setattr__(
                self, "odd_values", tuple(float(v) for v in np.atleast_1d(self.odd_values))
            )
        if self.kind == "constant" and len(vals) != 1:
            raise ConfigError("constant phase profile takes exactly one value")
        if self.kind == "alternating" and len(vals) != 2:
            raise ConfigError("alternating phase profile takes (phi_odd, phi_even)")

    @classmethod
    def constant(cls, phi: float) -> "PhaseProfile":
        return cls("constant", (phi,))

    @classmethod
    def alternating(cls, phi_odd: float, phi_even: float) -> "PhaseProfile":
        return cls("alternating", (phi_odd, phi_even))

    @classmethod
    def per_mode(cls, even: Sequence[float], odd: Sequence[float] | None = None):
        return cls("per_mode", tuple(even), None if odd is None else tuple(odd))

    def phases(self, L: int, sector=EVEN) -> np.ndarray:
        """Phases aligned with ``momenta(L, sector)``."""
        s = _sector(sector)
        k = momenta(L, s)
        if self.kind == "constant":
            return np.full(k.shape, self.values[0])
        # label of |k| on the positive half grid
        shift = 0.5 if s == EVEN else 0.0
        n = np.rint(np.abs(k) * L / (2 * np.pi) + shift).astype(int)
        if self.kind == "alternating":
            return np.where(n % 2 == 1, self.values[0], self.values[1])
        table = self.values if s == EVEN else self.odd_values
        if table is None:
            raise ConfigError("per-mode phases for the odd sector were not supplied")
        idx = n - 1 if s == EVEN else n
        need = L // 2 if s == EVEN else L // 2 + 1
        if len(table) != need:
            raise ConfigError(f"per-mode phase list needs {need} entries, got {len(table)}")
        return np.asarray(table, dtype=float)[idx]

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "values": list(self.values)}
        if self.odd_values is not None:
            d["odd_values"] = list(self.odd_values)
        return d

    @classmethod
    def from_dict(cls, d) -> "PhaseProfile":
        if isinstance(d, (int, float)):
            return cls.constant(float(d))
        return cls(d.get("kind", "constant"), tuple(d.get("values", (0.0,))), d.get("odd_values"))


@dataclass(frozen=True)
class QuenchSpec:
    """Physical parameters of one sudden global quench experiment."""

    L: int
    beta: float
    lambda0: float
    lambda_tau: float
    q: float = 0.5
    phases: PhaseProfile = field(default_factory=PhaseProfile)
    state: str = "gibbs"
    J: float = 1.0

    def __post_init__(self):
        _check_L(self.L)
        object.__setattr__(self, "L", int(self.L))
        for name in ("beta", "lambda0", "lambda_tau", "q", "J"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ConfigError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if not 0.0 <= self.q <= 1.0:
            raise ConfigError(f"q must lie in [0, 1], got {self.q}")
        if self.J <= 0:
            raise ConfigError("J must be positive")
        if self.state not in ("gibbs", "coherent"):
            raise ConfigError(f"state must be 'gibbs' or 'coherent', got {self.state!r}")
        if isinstance(self.phases, (int, float)):
            object.__setattr__(self, "phases", PhaseProfile.constant(float(self.phases)))

    @property
    def coherent(self) -> bool:
        return self.state == "coherent"

    def replace(self, **kw) -> "QuenchSpec":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return QuenchSpec(**d)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "beta": self.beta,
            "lambda0": self.lambda0,
            "lambda_tau": self.lambda_tau,
            "q": self.q,
            "phases": self.phases.to_dict(),
            "state": self.state,
            "J": self.J,
        }


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModeTable:
    """Per-momentum data of one sector, restricted to ``k >= 0``.

    ``paired`` selects ``0 < k < pi``; ``k = 0`` and ``k = pi`` (odd sector
    only) are kept as unpaired entries with their own signs.
    """

    sector: int
    k: np.ndarray
    eps: np.ndarray
    eps_prime: np.ndarray
    dhat: np.ndarray
    dhat_prime: np.ndarray
    cross_x: np.ndarray
    dot: np.ndarray
    phi: np.ndarray
    eta: int
    s0: int = 1
    s_pi: int = 1
    unpaired_k: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0)))
    unpaired_eps: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0)))
    unpaired_eps_prime: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0)))
    unpaired_sign: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0, dtype=int)))


def mode_table(spec: QuenchSpec, sector, sign_rule: str = "product") -> ModeTable:
    """Build the immutable per-mode table for one sector of a quench."""
    s = _sector(sector)
    L = spec.L
    lam0, lamt = spec.lambda0, spec.lambda_tau
    k_all = momenta(L, s)
    phi_all = spec.phases.phases(L, s) if spec.coherent else np.zeros(k_all.shape)
    paired = (k_all > 0) & (k_all < np.pi)
    k = k_all[paired]
    dh, eps = dvector(lam0, k)
    dhp, epsp = dvector(lamt, k)
    cross = dh[:, 1] * dhp[:, 2] - dh[:, 2] * dhp[:, 1]
    dot = np.einsum("ij,ij->i", dh, dhp)
    eta, s0, s_pi = 1, 1, 1
    unp_k = np.zeros(0)
    unp_sign = np.zeros(0, dtype=int)
    if s == ODD:
        eta, s0, s_pi = parity_signs(lam0, lamt, rule=sign_rule)
        unp_k = np.array([0.0, np.pi])
        unp_sign = np.array([s0, s_pi])
    return ModeTable(
        sector=s,
        k=_frozen(k),
        eps=_frozen(eps),
        eps_prime=_frozen(epsp),
        dhat=_frozen(dh),
        dhat_prime=_frozen(dhp),
        cross_x=_frozen(cross),
        dot=_frozen(dot),
        phi=_frozen(phi_all[paired]),
        eta=int(eta),
        s0=int(s0),
        s_pi=int(s_pi),
        unpaired_k=_frozen(unp_k),
        unpaired_eps=_frozen(dispersion(lam0, unp_k)),
        unpaired_eps_prime=_frozen(dispersion(lamt, unp_k)),
        unpaired_sign=_frozen(unp_sign),
    )
