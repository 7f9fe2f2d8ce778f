"""A small exact Grassmann algebra for checking Gaussian Berezin integrals.

Elements are dictionaries from strictly increasing generator tuples to
coefficients. The measure is fixed by ``int theta_1 ... theta_n = (-1)^{n/2}``,
which makes ``int exp(-theta^T Gamma theta / 2) = Pf(Gamma)`` and
``<theta_i theta_j> = (Gamma^{-1})_ij``.
"""
from __future__ import annotations

from itertools import product

import numpy as np

from .errors import ConfigError

MAX_GENERATORS = 12


def _merge_sign(a: tuple, b: tuple):
    """Sign of sorting the concatenation ``a + b`` (both sorted), or 0 on overlap."""
    if set(a) & set(b):
        return 0, ()
    inversions = sum(1 for x in a for y in b if x > y)
    return (-1) ** inversions, tuple(sorted(a + b))


class Grassmann:
    """Element of the exterior algebra on ``n`` generators."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms=None):
        if n > MAX_GENERATORS:
            raise ConfigError(f"at most {MAX_GENERATORS} generators")
        self.n = n
        self.terms = {k: v for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def scalar(cls, n, c):
        return cls(n, {(): c})

    @classmethod
    def generator(cls, n, i):
        return cls(n, {(i,): 1.0})

    def __add__(self, other):
        if not isinstance(other, Grassmann):
            other = Grassmann.scalar(self.n, other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Grassmann(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return Grassmann(self.n, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Grassmann):
            return Grassmann(self.n, {k: v * other for k, v in self.terms.items()})
        out = {}
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                s, key = _merge_sign(ka, kb)
                if s:
                    out[key] = out.get(key, 0) + s * va * vb
        return Grassmann(self.n, out)

    def __rmul__(self, c):
        return self * c

    def is_zero(self):
        return not self.terms

    def top(self):
        return self.terms.get(tuple(range(self.n)), 0)


def gexp(x: Grassmann) -> Grassmann:
    """``exp`` of an even element without a scalar part (the series terminates)."""
    if () in x.terms:
        raise ConfigError("gexp expects a nilpotent element")
    out = Grassmann.scalar(x.n, 1.0)
    term = Grassmann.scalar(x.n, 1.0)
    for m in range(1, x.n // 2 + 2):
        term = term * x * (1.0 / m)
        if term.is_zero():
            break
        out = out + term
    return out


def berezin(x: Grassmann) -> complex:
    """Berezin integral over all generators with ``int theta_1..theta_n = (-1)^{n/2}``."""
    if x.n % 2:
        raise ConfigError("the measure is defined for an even number of generators")
    return (-1) ** (x.n // 2) * x.top()


def quadratic_form(gamma) -> Grassmann:
    """``-theta^T Gamma theta / 2``."""
    gamma = np.asarray(gamma)
    n = gamma.shape[0]
    th = [Grassmann.generator(n, i) for i in range(n)]
    out = Grassmann(n)
    for i in range(n):
        for j in range(n):
            if gamma[i, j] != 0:
                out = out + th[i] * th[j] * (-0.5 * gamma[i, j])
    return out


def moment(gamma, idx) -> complex:
    """``int theta_{i1} ... theta_{im} exp(-theta^T Gamma theta / 2)``."""
    gamma = np.asarray(gamma)
    n = gamma.shape[0]
    w = gexp(quadratic_form(gamma))
    mono = Grassmann.scalar(n, 1.0)
    for i in idx:
        mono = mono * Grassmann.generator(n, i)
    return berezin(mono * w)


def _X(n, i, j):
    X = np.zeros((n, n))
    X[i, j] += 1
    X[j, i] -= 1
    return X


def two_point_rhs(gamma, i, j, pf):
    inv = np.linalg.inv(gamma)
    return -0.5 * np.trace(inv @ _X(len(gamma), i, j)) * pf


def four_point_rhs(gamma, i, j, k, l, pf):
    n = len(gamma)
    inv = np.linalg.inv(gamma)
    a, b = inv @ _X(n, i, j), inv @ _X(n, k, l)
    return (-0.5 * np.trace(a @ b) + 0.25 * np.trace(a) * np.trace(b)) * pf


def random_antisymmetric(n, rng, complex_entries=False):
    A = rng.normal(size=(n, n))
    if complex_entries:
        A = A + 1j * rng.normal(size=(n, n))
    return A - A.T


def identity_residuals(gamma) -> dict:
    """Largest residuals of the Pfaffian, two-point and four-point identities."""
    from .fermion import pfaffian

    gamma = np.asarray(gamma)
    n = gamma.shape[0]
    pf_sym = moment(gamma, ())
    pf_num = pfaffian(gamma)
    res = {
        "pfaffian": abs(pf_sym - pf_num),
        "pf_squared_det": abs(pf_num**2 - np.linalg.det(gamma)),
        "two_point": 0.0,
        "four_point": 0.0,
    }
    for i, j in product(range(n), repeat=2):
        res["two_point"] = max(res["two_point"], abs(moment(gamma, (i, j)) - two_point_rhs(gamma, i, j, pf_num)))
    for i, j, k, l in product(range(n), repeat=4):
        lhs = moment(gamma, (i, j, k, l))
        res["four_point"] = max(res["four_point"], abs(lhs - four_point_rhs(gamma, i, j, k, l, pf_num)))
    return res


def grassmann_oracle(n_pairs: int, n_samples: int = 20, seed: int = 0, complex_entries: bool = False) -> dict:
    """Worst identity residuals over random antisymmetric ``2 n_pairs`` matrices."""
    if not 1 <= n_pairs <= 3:
        raise ConfigError("n_pairs must be 1, 2 or 3")
    rng = np.random.default_rng(seed)
    worst = {}
    for _ in range(n_samples):
        r = identity_residuals(random_antisymmetric(2 * n_pairs, rng, complex_entries))
        for k, v in r.items():
            worst[k] = max(worst.get(k, 0.0), float(v))
    return worst
