"""Fourier inversion of characteristic functions into binned work histograms.

The bin mass ``p_n = int_{w_n - dw/2}^{w_n + dw/2} p(w) dw`` equals
``(dw / 2 pi) int chi(u) sinc(u dw / 2) exp(-i u w_n) du``. The integral is
truncated to ``|u| <= 2 pi K / dw`` and evaluated with a uniform trapezoid
rule fine enough to resolve the fastest bin phase ``exp(-i u w_n)``.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _accel
from .errors import ConfigError, NumericalError
from .model import QuenchSpec

ALIAS_LEVEL = 1e-6
IMAG_RESIDUE = 1e-8


class AliasingWarning(UserWarning):
    """The characteristic function has not decayed at the truncation edge."""


@dataclass(frozen=True)
class WorkHistogram:
    """Bin masses ``p_n`` on centres ``w_n = n dw``."""

    w_centers: np.ndarray
    dw: float
    masses: np.ndarray
    K: float
    meta: dict = field(default_factory=dict)

    @property
    def density(self):
        """``p_n / dw``, the density estimate at each centre."""
        return self.masses / self.dw

    @property
    def total(self):
        return self.masses.sum()

    def moment(self, n: int):
        return np.sum(self.masses * self.w_centers**n)

    def to_csv(self, path, spec: QuenchSpec | None = None):
        """Write ``w,p,dw`` rows and a JSON sidecar next to ``path``."""
        path = Path(path)
        if np.iscomplexobj(self.masses):
            raise ConfigError("complex histograms cannot be written as w,p,dw")
        rows = np.column_stack([self.w_centers, self.masses, np.full(self.masses.shape, self.dw)])
        np.savetxt(path, rows, delimiter=",", header="w,p,dw", comments="", fmt="%.17g")
        side = {
            "dw": self.dw,
            "K": self.K,
            "spec": spec.to_dict() if spec is not None else self.meta.get("spec"),
            "chi_checksum": self.meta.get("chi_checksum"),
            "n_u": self.meta.get("n_u"),
        }
        sidecar = path.with_suffix(path.suffix + ".json")
        sidecar.write_text(json.dumps(side, indent=2, sort_keys=True))
        return path, sidecar


def read_csv(path) -> WorkHistogram:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    side = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return WorkHistogram(data[:, 0], float(side["dw"]), data[:, 1], float(side["K"]), side)


# --- kernels: masses[n] = sum_j a_j exp(-i u_j w_n), u_j = (j - m) du -----
# Integer indexing keeps the grid exactly antisymmetric, so a Hermitian chi
# yields real masses to rounding instead of to the grid's endpoint error.


def _bin_sums_numpy(m, du, amps, w, chunk=256):
    out = np.empty(len(w), dtype=complex)
    u = du * (np.arange(len(amps)) - m)
    for s in range(0, len(w), chunk):
        ph = np.exp(-1j * np.outer(w[s : s + chunk], u))
        out[s : s + chunk] = ph @ amps
    return out


@_accel.njit(parallel=True)
def _bin_sums_numba(m, du, amps, w):
    nw = w.shape[0]
    nu = amps.shape[0]
    out = np.empty(nw, dtype=np.complex128)
    for n in _accel.prange(nw):
        step = np.exp(-1j * du * w[n])
        acc = 0j
        j = 0
        # restart the phase recurrence every block to bound rounding drift
        while j < nu:
            z = np.exp(-1j * ((j - m) * du) * w[n])
            stop = min(j + 512, nu)
            for i in range(j, stop):
                acc += amps[i] * z
                z *= step
            j = stop
        out[n] = acc
    return out


bin_sums = _accel.select(_bin_sums_numba, _bin_sums_numpy)


# --- characteristic function sources -----------------------------------------


def _as_callable(chf):
    from .global_quench import CharacteristicCurve, chi

    if isinstance(chf, QuenchSpec):
        spec = chf
        return (lambda u: chi(spec, u).values), spec
    if isinstance(chf, CharacteristicCurve):
        if chf.spec is not None and chf.kind == "chi_q":
            spec = chf.spec
            return (lambda u: chi(spec, u).values), spec
        warnings.warn("inverting a sampled curve by linear interpolation", stacklevel=3)
        return chf, chf.spec
    if callable(chf):
        return chf, None
    raise ConfigError("chf must be a QuenchSpec, CharacteristicCurve or callable")


def default_range(law, n_sigma: float = 12.0):
    s = np.sqrt(law.sigma2)
    return law.w_bar - n_sigma * s, law.w_bar + n_sigma * s


def histogram(
    chf,
    dw: float,
    K: float = 8,
    w_range=None,
    points_per_period: int = 40,
    allow_complex: bool = False,
    law=None,
) -> WorkHistogram:
    """Binned quasiprobability of work from its characteristic function.

    Parameters
    ----------
    chf : QuenchSpec, CharacteristicCurve or callable
        Vectorized ``chi(u)``. A spec (or an exact curve carrying one) is
        re-evaluated on the quadrature grid rather than interpolated.
    dw : float
        Bin width; centres are the multiples ``n dw`` inside ``w_range``.
    K : float
        Truncation multiplier of the ``u`` interval ``[-2 pi K/dw, 2 pi K/dw]``.
    w_range : (float, float), optional
        Defaults to ``w_bar +- 12 sigma_w`` of ``law`` (or of the
        thermodynamic-limit law of a spec).
    allow_complex : bool
        Keep complex masses instead of requiring a real histogram.
    """
    if not dw > 0:
        raise ConfigError("dw must be positive")
    if not K > 0:
        raise ConfigError("K must be positive")
    if points_per_period < 2:
        raise ConfigError("points_per_period must be at least 2")
    f, spec = _as_callable(chf)
    if w_range is None:
        if law is None and spec is not None:
            from .thermo import gaussian_law

            law = gaussian_law(spec)
        if law is None:
            raise ConfigError("w_range is required without a Gaussian law")
        w_range = default_range(law)
    lo, hi = float(w_range[0]), float(w_range[1])
    if not hi > lo:
        raise ConfigError("w_range must be increasing")
    n = np.arange(np.ceil(lo / dw), np.floor(hi / dw) + 1)
    w = n * dw
    U = 2 * np.pi * K / dw
    w_fast = max(np.abs(w).max() + dw / 2, dw)
    du_max = 2 * np.pi / (points_per_period * w_fast)
    m = int(np.ceil(U / du_max))
    n_u = 2 * m + 1
    du = U / m
    u = du * np.arange(-m, m + 1)
    vals = np.asarray(f(u), dtype=complex)
    edge = max(abs(vals[0]), abs(vals[-1]))
    if edge > ALIAS_LEVEL:
        warnings.warn(f"|chi| = {edge:.2e} at the truncation edge; increase K", AliasingWarning, stacklevel=2)
    amps = vals * np.sinc(u * dw / (2 * np.pi))
    amps[0] *= 0.5
    amps[-1] *= 0.5
    masses = dw / (2 * np.pi) * du * bin_sums(m, float(du), np.ascontiguousarray(amps), np.ascontiguousarray(w))
    if not allow_complex:
        ref = max(np.abs(masses.real).max(), 1e-300)
        resid = np.abs(masses.imag).max()
        if resid > IMAG_RESIDUE * max(1.0, ref):
            raise NumericalError(f"histogram imaginary residue {resid:.2e} exceeds {IMAG_RESIDUE:.0e}")
        masses = masses.real
    checksum = hashlib.sha256(np.ascontiguousarray(vals).tobytes()).hexdigest()
    meta = {"n_u": int(n_u), "chi_checksum": checksum, "edge_abs_chi": float(edge)}
    if spec is not None:
        meta["spec"] = spec.to_dict()
    return WorkHistogram(w, float(dw), masses, float(K), meta)


def negativity_integral(hist: WorkHistogram) -> float:
    """``sum_n |p_n|``, the binned version of ``int |p(w)| dw``."""
    return float(np.sum(np.abs(hist.masses)))
