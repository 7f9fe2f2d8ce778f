"""Self-verification suite: fast paths against the dense oracles, plus invariants.

Each check returns a list of human-readable failures; an empty list passes.
``quick`` keeps chains at L <= 6 and runs in seconds; ``full`` extends the
spin oracle to L = 8, the Fock oracle to L = 8 and adds the Grassmann checks.
"""
from __future__ import annotations

import itertools
import time
from functools import lru_cache

import numpy as np

from . import global_quench as gq
from . import oracle as O
from .errors import ConfigError
from .model import PhaseProfile, QuenchSpec

ORACLE_TOL = 1e-9
FAULTS = ("coherent-sign",)


def _faulty_coherent_kernel(u, eps, epsp, dot, cross, *rest):
    """Sector kernel with the sign of the coherent pair term flipped."""
    return gq._sector_logs_numpy(u, eps, epsp, dot, -cross, *rest)


def _kernel(fault):
    if fault is None:
        return None
    if fault not in FAULTS:
        raise ConfigError(f"unknown fault {fault!r}; known: {FAULTS}")
    return _faulty_coherent_kernel


@lru_cache(maxsize=None)
def _spin_eigensystem(L, lam):
    return O.eigensystem(O.build_spin_hamiltonian(lam, L))


def _spin_pair(L, l0, lt):
    return _spin_eigensystem(L, l0), _spin_eigensystem(L, lt)


def _spin_matrices(L, l0, lt):
    return O.build_spin_hamiltonian(l0, L), O.build_spin_hamiltonian(lt, L)


@lru_cache(maxsize=4096)
def _initial_state(spec: QuenchSpec):
    return O.ising_initial_state(spec)


def global_oracle_error(spec: QuenchSpec, u, kernel=None) -> float:
    """``max_u |X_fast - X_oracle|`` for one spec."""
    H, Hp = _spin_pair(spec.L, spec.lambda0, spec.lambda_tau)
    # the initial state depends on neither q nor the final field
    state = _initial_state(spec.replace(q=0.0, lambda_tau=spec.lambda0))
    ref = O.characteristic_X(state, H, Hp, u, spec.q)
    fast = gq.finite_size_X(spec, u, kernel=kernel)
    return float(np.max(np.abs(fast - ref)))


def global_oracle_grid(Ls, lams, betas, qs, phis, states=("gibbs", "coherent")):
    for L, state, (l0, lt), beta, q, phi in itertools.product(
        Ls, states, itertools.product(lams, lams), betas, qs, phis
    ):
        yield QuenchSpec(L, beta, l0, lt, q, PhaseProfile.constant(phi), state)


def check_global_oracle(level, fault=None):
    Ls = (2, 4, 6) if level == "quick" else (2, 4, 6, 8)
    lams = (0.3, 0.9, 1.8) if level == "quick" else (0.3, 0.6, 0.9, 1.2, 1.8)
    betas = (0.2, 1.0) if level == "quick" else (0.2, 1.0, 5.0)
    qs = (0.0, 0.25, 0.5)
    u = np.linspace(-5, 5, 41)
    kern = _kernel(fault)
    fails = []
    for spec in global_oracle_grid(Ls, lams, betas, qs, (0.0, np.pi / 4)):
        err = global_oracle_error(spec, u, kern)
        if not err <= ORACLE_TOL:
            fails.append(
                f"oracle mismatch {err:.3e} at L={spec.L}, lambda0={spec.lambda0}, "
                f"lambda_tau={spec.lambda_tau}, q={spec.q} (state={spec.state}, beta={spec.beta}, "
                f"phi={spec.phases.values[0]:.4f})"
            )
    return fails


def check_moments(level, fault=None):
    fails = []
    Ls = (4,) if level == "quick" else (4, 6)
    for L in Ls:
        spec = QuenchSpec(L, 1.0, 0.6, 1.3, 0.5, PhaseProfile.constant(np.pi / 4), "coherent")
        H, Hp = _spin_matrices(L, spec.lambda0, spec.lambda_tau)
        psi = O.ising_initial_state(spec)
        for n in (1, 2):
            vals = [gq.moments_fd(spec.replace(q=q), n) for q in (0.0, 0.25, 0.5)]
            ref = O.moments_closed_form(psi, H, Hp, 0.5, n)
            spread = max(vals) - min(vals)
            if spread > 1e-8 * max(1.0, abs(ref)):
                fails.append(f"moment {n} depends on q (spread {spread:.2e}) at L={L}")
            if abs(vals[-1] - ref) > 1e-6 * max(1.0, abs(ref)):
                fails.append(f"moment {n} differs from the trace formula by {abs(vals[-1] - ref):.2e} at L={L}")
    return fails


def check_local_fock(level, fault=None):
    from .fermion import LocalQuench, local_X

    rng = np.random.default_rng(7)
    Ls = (4,) if level == "quick" else (4, 6, 8)
    u = np.array([-1.3, 0.4, 2.2])
    fails = []
    for L in Ls:
        for state in ("psi1", "psi2"):
            lq = LocalQuench(
                L, float(rng.uniform(0.3, 1.5)), float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.1, 2.0)),
                PhaseProfile.alternating(np.pi, 0.0), state, int(rng.integers(1, L + 1)),
            )
            q = float(rng.uniform(0, 1))
            ref = O.local_characteristic_X(lq, u, q)
            for method in ("wick", "gamma"):
                err = float(np.max(np.abs(local_X(lq, u, q, method) - ref)))
                if not err <= ORACLE_TOL:
                    fails.append(f"local {method} engine off by {err:.2e} at L={L}, state={state}, q={q:.3f}")
    return fails


def check_fluctuation(level, fault=None):
    from .coherence import coherence_draw

    fails = []
    for seed in range(5 if level == "quick" else 20):
        _, beta, l0, lt, eta, fr, jz, slack = coherence_draw(4, seed, (0.1, 1.0), (-1.5, 1.5))
        if fr > 1e-10 or jz > 1e-10:
            fails.append(f"fluctuation relation residual {max(fr, jz):.2e} at beta={beta:.3f}, eta={eta:.3f}")
        if slack < 0:
            fails.append(f"coherence inequality violated by {-slack:.2e} at beta={beta:.3f}")
    return fails


def check_detector(level, fault=None):
    rng = np.random.default_rng(3)
    spec = QuenchSpec(4, 1.0, 0.7, 1.4, 0.5, PhaseProfile.constant(0.4), "coherent")
    H, Hp = _spin_matrices(4, spec.lambda0, spec.lambda_tau)
    psi = O.ising_initial_state(spec)
    fails = []
    for _ in range(3 if level == "quick" else 10):
        u, q = float(rng.uniform(-3, 3)), float(rng.uniform(0, 1))
        got = O.qubit_detector(psi, H, Hp, O.DetectorCouplings.for_point(u, q))
        ref = O.characteristic_X(psi, H, Hp, u, q)[0]
        if abs(got - ref) > 1e-10:
            fails.append(f"detector off by {abs(got - ref):.2e} at u={u:.3f}, q={q:.3f}")
    return fails


def check_pfaffian(level, fault=None):
    from .fermion import _pfaffian_numba, _pfaffian_numpy

    rng = np.random.default_rng(11)
    fails = []
    for n in (2, 4, 6, 10):
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        A = A - A.T
        p1, p2 = _pfaffian_numpy(A), _pfaffian_numba(A.copy())
        det = np.linalg.det(A)
        if abs(p1 - p2) > 1e-10 * max(1, abs(p1)) or abs(p1**2 - det) > 1e-9 * max(1, abs(det)):
            fails.append(f"Pfaffian mismatch at n={n}")
    return fails


def check_grassmann(level, fault=None):
    from .grassmann import grassmann_oracle

    fails = []
    for pairs in (1, 2):
        for cplx in (False, True):
            worst = grassmann_oracle(pairs, 20, seed=pairs, complex_entries=cplx)
            for k, v in worst.items():
                if v > 1e-12:
                    fails.append(f"Grassmann {k} residual {v:.2e} at size {2 * pairs}")
    return fails


CHECKS = {
    "quick": [
        ("global_oracle", check_global_oracle),
        ("moments", check_moments),
        ("local_fock", check_local_fock),
        ("fluctuation_relation", check_fluctuation),
        ("qubit_detector", check_detector),
        ("pfaffian", check_pfaffian),
    ],
}
CHECKS["full"] = CHECKS["quick"] + [("grassmann", check_grassmann)]


def run_suite(level: str = "quick", fault: str | None = None, threads: int = 1) -> dict:
    """Run every check of ``level``; returns a JSON-ready report."""
    _kernel(fault)
    checks = []
    for name, fn in CHECKS[level]:
        t0 = time.perf_counter()
        try:
            fails = fn(level, fault)
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            fails = [f"{type(exc).__name__}: {exc}"]
        checks.append({"name": name, "passed": not fails, "failures": fails, "seconds": time.perf_counter() - t0})
    return {"level": level, "fault": fault, "passed": all(c["passed"] for c in checks), "checks": checks}
