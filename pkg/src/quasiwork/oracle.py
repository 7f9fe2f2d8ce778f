"""Dense brute-force reference on the full 2^L Hilbert space.

Everything here follows directly from definitions: explicit matrices,
explicit eigenbases and explicit sums over energy labels. It is slow on
purpose and only meant for small chains.

Conventions: site ``i`` (0-based) is the ``i``-th tensor factor; the local
basis is ``(up, down)``; an up spin is an occupied fermion, so
``sz = 2 n - 1``. The Jordan-Wigner string is ``prod_{j<i} (-sz_j)``, which
makes the spin chain equal to the fermion chain projected on both parity
sectors.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .errors import ConfigError, ResourceError
from .model import EVEN, ODD, PhaseProfile, QuenchSpec, dispersion, momenta

MAX_SPIN_SITES = 14
MAX_FOCK_MODES = 12
MERGE_TOL = 1e-9
DEGENERACY_TOL = 1e-9

_SX = np.array([[0.0, 1.0], [1.0, 0.0]])
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
_SM = np.array([[0.0, 0.0], [1.0, 0.0]])  # lowers up -> down, i.e. annihilates
_I2 = np.eye(2)


def _site_op(op, i, L, string=None):
    factors = [string if (string is not None and j < i) else _I2 for j in range(L)]
    factors[i] = op
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), [sp.csr_matrix(f) for f in factors])


def build_spin_hamiltonian(lam: float, L: int) -> np.ndarray:
    """Dense ``-lam sum sz_i - sum sx_i sx_{i+1}`` with periodic closure.

    For ``L = 2`` both bonds ``(1,2)`` and ``(2,1)`` are kept.
    """
    if L > MAX_SPIN_SITES:
        raise ResourceError(f"dense spin Hamiltonian capped at L={MAX_SPIN_SITES}")
    if L < 2:
        raise ConfigError("need at least two sites")
    sz = [_site_op(_SZ, i, L) for i in range(L)]
    sx = [_site_op(_SX, i, L) for i in range(L)]
    H = -lam * sum(sz)
    for i in range(L):
        H = H - sx[i] @ sx[(i + 1) % L]
    return np.asarray(H.toarray(), dtype=float)


def parity_operator(L: int) -> np.ndarray:
    """``prod sz_i`` as a dense diagonal matrix."""
    diag = reduce(np.kron, [np.diag(_SZ)] * L)
    return np.diag(diag)


@lru_cache(maxsize=16)
def fermion_operators(L: int):
    """Sparse annihilators ``a_i`` with the Jordan-Wigner string."""
    if L > MAX_FOCK_MODES:
        raise ResourceError(f"Fock operators capped at {MAX_FOCK_MODES} modes")
    return tuple(_site_op(_SM, i, L, string=-_SZ) for i in range(L))


def build_fock_hamiltonian(A, B, offset: float = 0.0) -> np.ndarray:
    """Dense ``a^T A a + (a^dag B a^dag + h.c.)/2 - tr(A)/2 + offset``.

    ``A`` must be Hermitian and ``B`` antisymmetric.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    L = A.shape[0]
    if A.shape != (L, L) or B.shape != (L, L):
        raise ConfigError("A and B must be square with matching sizes")
    if np.max(np.abs(A - A.conj().T), initial=0) > 1e-12:
        raise ConfigError("A is not Hermitian")
    if np.max(np.abs(B + B.T), initial=0) > 1e-12:
        raise ConfigError("B is not antisymmetric")
    a = fermion_operators(L)
    ad = [x.conj().T.tocsr() for x in a]
    D = 2**L
    H = sp.csr_matrix((D, D), dtype=complex)
    for i in range(L):
        for j in range(L):
            if A[i, j] != 0:
                H = H + A[i, j] * (ad[i] @ a[j])
            if B[i, j] != 0:
                pair = 0.5 * B[i, j] * (ad[i] @ ad[j])
                H = H + pair + pair.conj().T
    H = H.toarray() + (offset - 0.5 * np.trace(A).real) * np.eye(D)
    if np.isrealobj(A) and np.isrealobj(B):
        H = H.real
    return H


@dataclass(frozen=True)
class Eigensystem:
    """Ascending eigenvalues and a canonical orthonormal eigenbasis."""

    E: np.ndarray
    V: np.ndarray


def eigensystem(H, tol: float = DEGENERACY_TOL) -> Eigensystem:
    """Diagonalize ``H`` with a deterministic basis inside degeneracies.

    Eigenvalues are sorted ascending (stable in the solver's order). Inside
    each degenerate cluster the basis is rebuilt by Gram-Schmidt on the
    projected computational basis vectors, taken in index order, which
    makes it independent of the solver's arbitrary rotation.
    """
    if isinstance(H, Eigensystem):
        return H
    H = np.asarray(H)
    E, V = np.linalg.eigh(H)
    order = np.argsort(E, kind="stable")
    E, V = E[order], V[:, order]
    scale = max(1.0, float(np.max(np.abs(E))))
    V = V.astype(complex) if np.iscomplexobj(H) else V.copy()
    start = 0
    n = len(E)
    while start < n:
        stop = start + 1
        while stop < n and E[stop] - E[stop - 1] <= tol * scale:
            stop += 1
        if stop - start > 1:
            V[:, start:stop] = _canonical_basis(V[:, start:stop])
            E[start:stop] = np.mean(E[start:stop])
        start = stop
    return Eigensystem(E, V)


def _canonical_basis(Vc):
    m = Vc.shape[1]
    out = []
    for j in range(Vc.shape[0]):
        v = Vc @ Vc[j].conj()  # projector applied to basis vector j
        for w in out:
            v = v - w * (w.conj() @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            out.append(v / nv)
            if len(out) == m:
                break
    return np.stack(out, axis=1)


def gibbs_state(H, beta: float) -> np.ndarray:
    es = eigensystem(H)
    w = np.exp(-beta * (es.E - es.E[0]))
    w /= w.sum()
    return (es.V * w) @ es.V.conj().T


def coherent_gibbs_state(H, beta: float, phases=None) -> np.ndarray:
    """``Z^{-1/2} sum_j exp(-beta E_j / 2 + i phi_j) |E_j>`` in the canonical basis.

    ``phases`` is an array over the ascending eigenvalue list, a callable of
    the eigenvalue array, or ``None`` for zero phases.
    """
    es = eigensystem(H)
    amp = np.exp(-0.5 * beta * (es.E - es.E[0]))
    if phases is None:
        phi = np.zeros_like(amp)
    elif callable(phases):
        phi = np.asarray(phases(es.E), dtype=float)
    else:
        phi = np.asarray(phases, dtype=float)
    psi = es.V @ (amp * np.exp(1j * phi))
    return psi / np.linalg.norm(psi)


def dephase(rho, H) -> np.ndarray:
    """Diagonal part of ``rho`` in the energy eigenbasis of ``H``."""
    es = eigensystem(H)
    r = np.einsum("ji,jk,ki->i", es.V.conj(), rho, es.V).real
    return (es.V * r) @ es.V.conj().T


def _density(state):
    state = np.asarray(state)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


# --- Bogoliubov-mode constructions -----------------------------------------


def bogoliubov_rows(lam: float, L: int, sector=EVEN):
    """Rows ``g``, ``h`` of ``alpha_k = sum_j g_kj a_j + h_kj a_j^dag``.

    ``alpha_k = cos(theta/2) a_k - i sin(theta/2) a_{-k}^dag`` with
    ``a_k = L^{-1/2} sum_j exp(-i k j) a_j`` (sites ``j = 1..L``) and
    ``theta_k = atan2(sin k, -(lam + cos k))``. Modes follow ``momenta`` order.
    """
    k = momenta(L, sector)
    theta = np.arctan2(np.sin(k), -(lam + np.cos(k)))
    j = np.arange(1, L + 1)
    phase = np.exp(-1j * np.outer(k, j)) / np.sqrt(L)
    g = np.cos(theta / 2)[:, None] * phase
    h = -1j * np.sin(theta / 2)[:, None] * phase
    return g, h


def mode_operators(g, h):
    """Sparse ``alpha_k`` for the rows ``g``, ``h``."""
    L = g.shape[1]
    a = fermion_operators(L)
    ad = [x.conj().T.tocsr() for x in a]
    ops = []
    for r in range(g.shape[0]):
        op = sp.csr_matrix((2**L, 2**L), dtype=complex)
        for j in range(L):
            if g[r, j] != 0:
                op = op + g[r, j] * a[j]
            if h[r, j] != 0:
                op = op + h[r, j] * ad[j]
        ops.append(op.tocsr())
    return ops


def quasiparticle_vacuum(alphas, seed: int = 0) -> np.ndarray:
    """Common null vector of all ``alpha_k`` via ``prod (1 - alpha^dag alpha)``.

    The phase is fixed by making the largest component real positive.
    """
    D = alphas[0].shape[0]
    rng = np.random.default_rng(seed)
    v = rng.normal(size=D) + 1j * rng.normal(size=D)
    for op in alphas:
        v = v - op.conj().T @ (op @ v)
    nv = np.linalg.norm(v)
    if nv < 1e-8:
        raise ArithmeticError("random start vector had no vacuum component")
    v /= nv
    i = np.argmax(np.abs(v))
    return v * (abs(v[i]) / v[i])


def ising_coherent_gibbs_state(spec: QuenchSpec) -> np.ndarray:
    """Coherent Gibbs state of the Ising chain in the Bogoliubov Fock basis.

    Each sector contributes ``prod_k (exp(beta eps/4) + exp(-beta eps/4 + i phi_k)
    alpha_k^dag)`` on its quasiparticle vacuum, applied from the most negative
    momentum upward, then projected on its parity. This fixes the eigenbasis
    inside the momentum degeneracies to free-fermion Fock states, which is the
    basis the per-mode formulas refer to.
    """
    L, beta = spec.L, spec.beta
    P = np.diag(parity_operator(L))
    psi = np.zeros(2**L, dtype=complex)
    for s in (EVEN, ODD):
        g, h = bogoliubov_rows(spec.lambda0, L, s)
        alphas = mode_operators(g, h)
        vac = quasiparticle_vacuum(alphas)
        k = momenta(L, s)
        eps = dispersion(spec.lambda0, k)
        phi = spec.phases.phases(L, s) if spec.coherent else np.zeros(L)
        v = vac
        for idx in _pair_order(k):
            v = np.exp(beta * eps[idx] / 4) * v + np.exp(
                -beta * eps[idx] / 4 + 1j * phi[idx]
            ) * (alphas[idx].conj().T @ v)
        psi += 0.5 * (v + s * P * v)
    return psi / np.linalg.norm(psi)


def _pair_order(k):
    """Apply ``-k`` before ``+k`` for every pair, unpaired modes last."""
    order = []
    for idx in np.argsort(k):
        if 0 < k[idx] < np.pi:
            (neg,) = np.nonzero(np.isclose(k, -k[idx]))
            order += [int(neg[0]), int(idx)]
    order += [int(i) for i in np.nonzero((k == 0) | (k == np.pi))[0]]
    return order


def ising_initial_state(spec: QuenchSpec) -> np.ndarray:
    """Density matrix or state vector for a global-quench spec."""
    if spec.coherent:
        return ising_coherent_gibbs_state(spec)
    return gibbs_state(build_spin_hamiltonian(spec.lambda0, spec.L), spec.beta)


# --- characteristic functions and quasiprobabilities ------------------------


def characteristic_X(state, H, H_prime, u, q: float):
    """``Tr{exp(-iuqH) rho exp(-iu(1-q)H) exp(iuH')}`` on a grid of real ``u``.

    ``state`` may be a state vector or a density matrix.
    """
    es, esp = eigensystem(H), eigensystem(H_prime)
    O = es.V.conj().T @ esp.V  # <E_i|E'_k>
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty(u.shape, dtype=complex)
    state = np.asarray(state)
    if state.ndim == 1:
        c = es.V.conj().T @ state
        for n, un in enumerate(u):
            a = np.exp(-1j * un * q * es.E) * c
            b = np.exp(1j * un * (1 - q) * es.E) * c
            out[n] = np.sum(np.exp(1j * un * esp.E) * (O.conj().T @ a) * (O.conj().T @ b).conj())
        return out
    R = es.V.conj().T @ state @ es.V
    if np.allclose(R, np.diag(np.diag(R)), rtol=0, atol=1e-15):
        # diagonal in the energy basis: sum_ik R_ii |O_ik|^2 exp(iu(E'_k - E_i))
        T = np.diag(R)[:, None] * np.abs(O) ** 2
        pw = np.exp(1j * np.outer(u, esp.E))
        return np.einsum("ni,ik,nk->n", np.exp(-1j * np.outer(u, es.E)), T, pw)
    for n, un in enumerate(u):
        M = np.exp(-1j * un * q * es.E)[:, None] * R * np.exp(-1j * un * (1 - q) * es.E)[None, :]
        # diag(O^dag M O) via one matmul
        out[n] = np.sum(np.exp(1j * un * esp.E) * np.sum(O.conj() * (M @ O), axis=0))
    return out


def characteristic_chi(state, H, H_prime, u, q: float):
    return 0.5 * (characteristic_X(state, H, H_prime, u, q) + characteristic_X(state, H, H_prime, u, 1 - q))


@dataclass(frozen=True)
class WorkAtomList:
    """Discrete (quasi)probability distribution: support ``w`` and ``mass``."""

    w: np.ndarray
    mass: np.ndarray

    def total(self) -> float:
        return float(np.sum(self.mass))

    def moment(self, n: int) -> float:
        return float(np.sum(self.mass * self.w**n))

    def chf(self, u):
        u = np.atleast_1d(u)
        return np.exp(1j * np.outer(u, self.w)) @ self.mass


def merge_atoms(w, mass, tol: float = MERGE_TOL) -> WorkAtomList:
    """Sort and merge support points closer than ``tol`` (chained)."""
    w = np.asarray(w, dtype=float).ravel()
    mass = np.asarray(mass, dtype=float).ravel()
    order = np.argsort(w, kind="stable")
    w, mass = w[order], mass[order]
    if w.size == 0:
        return WorkAtomList(w, mass)
    brk = np.concatenate([[True], np.diff(w) > tol])
    label = np.cumsum(brk) - 1
    msum = np.bincount(label, weights=mass)
    wsum = np.bincount(label, weights=w) / np.bincount(label)
    return WorkAtomList(wsum, msum)


def quasiprobability_direct(state, H, H_prime, q: float) -> WorkAtomList:
    """Atoms ``E'_k - q E_i - (1-q) E_j`` with masses ``Re{rho_ij O_jk O*_ik}``."""
    es, esp = eigensystem(H), eigensystem(H_prime)
    rho = _density(state)
    if rho.shape != (len(es.E), len(es.E)) or len(esp.E) != len(es.E):
        raise ConfigError("dimension mismatch between state and Hamiltonians")
    O = es.V.conj().T @ esp.V
    R = es.V.conj().T @ rho @ es.V
    ws, ms = [], []
    base = -q * es.E[:, None] - (1 - q) * es.E[None, :]
    for k in range(len(esp.E)):
        m = (R * O[:, k].conj()[:, None] * O[:, k][None, :]).real
        keep = m != 0
        ws.append((esp.E[k] + base)[keep])
        ms.append(m[keep])
    return merge_atoms(np.concatenate(ws), np.concatenate(ms))


def moments_closed_form(state, H, H_prime, q: float, n: int) -> float:
    """Work moment from the double-binomial trace formula, symmetrized in q."""
    from math import comb

    if n > 8:
        raise ConfigError("closed-form moments implemented up to n = 8")
    rho = _density(state)
    H = np.asarray(H)
    Hp = np.asarray(H_prime)
    powH = [np.eye(len(H))]
    powHp = [np.eye(len(H))]
    for _ in range(n):
        powH.append(powH[-1] @ H)
        powHp.append(powHp[-1] @ Hp)

    def raw(qq):
        total = 0.0 + 0.0j
        for k in range(n + 1):
            for l in range(n - k + 1):
                m = n - k - l
                t = np.trace(powH[m] @ rho @ powH[l] @ powHp[k])
                total += (-1) ** (n - k) * comb(n, k) * comb(n - k, l) * qq**m * (1 - qq) ** l * t
        return total

    return float((0.5 * (raw(q) + raw(1 - q))).real)


# --- coherence statistics ---------------------------------------------------


def _support(rho, tol=1e-14):
    R, W = np.linalg.eigh(rho)
    keep = R > tol * max(1.0, R.max())
    return R[keep], W[:, keep]


def coherence_distribution(state, H) -> WorkAtomList:
    """Atoms ``C = ln R_n - ln <E_i|rho|E_i>`` with weight ``R_n |<E_i|R_n>|^2``."""
    rho = _density(state)
    es = eigensystem(H)
    R, W = _support(rho)
    pii = np.einsum("ji,jk,ki->i", es.V.conj(), rho, es.V).real
    ov = np.abs(es.V.conj().T @ W) ** 2  # [i, n]
    keep = (pii[:, None] > 0) & (ov > 0)
    C = np.log(R)[None, :] - np.log(np.where(pii > 0, pii, 1.0))[:, None]
    mass = R[None, :] * ov
    return merge_atoms(C[keep], mass[keep])


def relative_entropy_of_coherence(state, H) -> float:
    rho = _density(state)
    R, _ = _support(rho)
    p = np.diag(eigensystem(H).V.conj().T @ rho @ eigensystem(H).V).real
    p = p[p > 1e-300]
    return float(-(p * np.log(p)).sum() + (R * np.log(R)).sum())


@dataclass(frozen=True)
class JointAtoms:
    """Joint quasiprobability atoms of work and coherence at q = 1/2."""

    w: np.ndarray
    C: np.ndarray
    mass: np.ndarray

    def expect(self, f) -> complex:
        return np.sum(self.mass * f(self.w, self.C))


def joint_atoms(state, H, H_prime) -> JointAtoms:
    """Atoms of the symmetric joint (w, C) distribution; ``O(D^4)`` entries."""
    rho = _density(state)
    es, esp = eigensystem(H), eigensystem(H_prime)
    R, W = _support(rho)
    pii = np.einsum("ji,jk,ki->i", es.V.conj(), rho, es.V).real
    A = es.V.conj().T @ W  # <E_i|R_n>
    O = es.V.conj().T @ esp.V  # <E_i|E'_k>
    D = len(es.E)
    ws, Cs, ms = [], [], []
    lp = np.log(np.where(pii > 0, pii, 1.0))
    for n in range(len(R)):
        # mass[i, j, k] = R_n <R_n|E_i><E_i|E'_k><E'_k|E_j><E_j|R_n>
        left = A[:, n].conj()[:, None] * O  # [i, k]
        right = O.conj() * A[:, n][:, None]  # [j, k]
        m = R[n] * np.einsum("ik,jk->ijk", left, right)
        w = esp.E[None, None, :] - 0.5 * (es.E[:, None, None] + es.E[None, :, None])
        C = np.log(R[n]) - 0.5 * (lp[:, None, None] + lp[None, :, None])
        keep = np.abs(m) > 1e-300
        ws.append(np.broadcast_to(w, (D, D, D))[keep])
        Cs.append(np.broadcast_to(C, (D, D, D))[keep])
        ms.append(m[keep])
    mass = np.concatenate(ms)
    return JointAtoms(np.concatenate(ws), np.concatenate(Cs), mass)


def joint_characteristic(state, H, H_prime, u, t) -> complex:
    """``Tr{rho rho^{it} A exp(iuH') A}`` with ``A = exp(-iuH/2 - it ln(Delta rho)/2)``.

    Logarithms are restricted to the support of ``rho`` and its dephasing.
    ``u`` and ``t`` may be complex.
    """
    rho = _density(state)
    es = eigensystem(H)
    R, W = _support(rho)
    pii = np.einsum("ji,jk,ki->i", es.V.conj(), rho, es.V).real
    rho_pow = (W * R ** (1 + 1j * t)) @ W.conj().T
    lp = np.where(pii > 0, np.log(np.where(pii > 0, pii, 1.0)), 0.0)
    a = np.exp(-0.5j * u * es.E - 0.5j * t * lp)
    Amat = (es.V * a) @ es.V.conj().T
    Up = expm(1j * u * np.asarray(H_prime))
    return complex(np.trace(rho_pow @ Amat @ Up @ Amat))


def free_energy_difference(H, H_prime, beta: float) -> float:
    """``Delta F = -ln(Z'/Z)/beta`` from the spectra; ``beta = 0`` uses the trace limit."""
    E = eigensystem(H).E
    Ep = eigensystem(H_prime).E
    if beta == 0:
        return float(np.mean(Ep) - np.mean(E))
    m, mp = E.min(), Ep.min()
    lz = -beta * m + np.log(np.sum(np.exp(-beta * (E - m))))
    lzp = -beta * mp + np.log(np.sum(np.exp(-beta * (Ep - mp))))
    return float(-(lzp - lz) / beta)


# --- qubit detector ----------------------------------------------------------


@dataclass(frozen=True)
class DetectorCouplings:
    """Couplings of the qubit detector to the chain in its two stages."""

    delta_e: float
    delta_g: float
    t_D: float
    delta_e_prime: float
    delta_g_prime: float
    t_D_prime: float
    omega: float = 1.0

    @classmethod
    def for_point(cls, u: float, q: float, t_D: float = 1.0, t_D_prime: float = 1.0, omega: float = 1.0):
        """Couplings with ``(1-de) tD = uq``, ``(1-dg) tD = -u(1-q)``, ``(de'-dg') tD' = u``."""
        return cls(
            delta_e=1 - u * q / t_D,
            delta_g=1 + u * (1 - q) / t_D,
            t_D=t_D,
            delta_e_prime=0.5 * u / t_D_prime,
            delta_g_prime=-0.5 * u / t_D_prime,
            t_D_prime=t_D_prime,
            omega=omega,
        )


def qubit_detector(state, H, H_prime, couplings: DetectorCouplings) -> complex:
    """Simulate the two-stage qubit probe and return its normalized coherence.

    Stage one couples the qubit to ``H`` for ``t_D``, the chain is quenched
    instantaneously, stage two couples it to ``H'`` for ``t_D'``. The qubit
    starts in ``(|e> + |g>)/sqrt 2``; the result is
    ``<e|rho_D(t_f)|g> exp(i omega (t_f - t_i)) / <e|rho_D(t_i)|g>``.
    """
    c = couplings
    rho = _density(state)
    D = rho.shape[0]
    H = np.asarray(H)
    Hp = np.asarray(H_prime)
    Pe = np.diag([1.0, 0.0])
    Pg = np.diag([0.0, 1.0])
    HD = 0.5 * c.omega * np.diag([1.0, -1.0])
    eye = np.eye(D)
    H1 = np.kron(np.eye(2), H) + np.kron(HD, eye) - np.kron(c.delta_e * Pe + c.delta_g * Pg, H)
    H2 = np.kron(np.eye(2), Hp) + np.kron(HD, eye) - np.kron(c.delta_e_prime * Pe + c.delta_g_prime * Pg, Hp)
    plus = np.full((2, 2), 0.5)
    total = np.kron(plus, rho)
    U = expm(-1j * c.t_D_prime * H2) @ expm(-1j * c.t_D * H1)
    final = U @ total @ U.conj().T
    coh = np.trace(final[:D, D:])
    return complex(coh * np.exp(1j * c.omega * (c.t_D + c.t_D_prime)) / plus[0, 1])


# --- local quench in the fermion Fock space ------------------------------------


def local_quench_state(lq) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(psi, H, H')`` of a local-quench setup built densely in Fock space.

    ``psi`` is the quasiparticle vacuum plus ``c_k alpha_k^dag |0>`` (and
    ``c_k c_k' alpha_k^dag alpha_k'^dag |0>`` with ``k > k'`` for ``psi2``),
    normalized to one.
    """
    from .fermion import build_chain_form, momentum_modes

    if lq.L > MAX_FOCK_MODES:
        raise ResourceError(f"Fock oracle is capped at {MAX_FOCK_MODES} modes")
    form, form_p = build_chain_form(lq.lambda0, lq.L, lq.field, lq.site)
    dec = momentum_modes(lq.lambda0, lq.L)
    ops = mode_operators(dec.g, dec.h)
    creators = [op.conj().T.tocsr() for op in ops]
    vac = quasiparticle_vacuum(ops)
    if lq.coefficients is None:
        c = np.exp(-0.5 * lq.beta * dec.eps + 1j * lq.phases.phases(lq.L, EVEN))
    else:
        c = np.asarray(lq.coefficients, dtype=complex)
    psi = vac.copy()
    for k in range(lq.L):
        psi = psi + c[k] * (creators[k] @ vac)
    if lq.state == "psi2":
        for k in range(lq.L):
            for kk in range(k):
                psi = psi + c[k] * c[kk] * (creators[k] @ (creators[kk] @ vac))
    return psi / np.linalg.norm(psi), form.fock_hamiltonian(), form_p.fock_hamiltonian()


def local_characteristic_X(lq, u, q: float):
    """Dense ``X_q(u)`` of a local quench for comparison with the Gaussian engines."""
    psi, H, Hp = local_quench_state(lq)
    return characteristic_X(psi, H, Hp, u, q)
