"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the status lines are printed
even when output capture is on.
"""
import time
import warnings

import numpy as np
import pytest

from quasiwork import coherence as C
from quasiwork import global_quench as gq
from quasiwork import inversion as inv
from quasiwork import oracle as O
from quasiwork import thermo as T
from quasiwork import verify as V
from quasiwork.fermion import LocalQuench, fourth_moment_sweep, local_X, pfaffian
from quasiwork.grassmann import grassmann_oracle, random_antisymmetric
from quasiwork.model import PhaseProfile, QuenchSpec


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def coherent(L, beta, l0, lt, q, phi):
    return QuenchSpec(L, beta, l0, lt, q, PhaseProfile.constant(phi), "coherent")


def test_01_oracle_equivalence_global(report):
    t0 = time.perf_counter()
    u = np.linspace(-5, 5, 101)
    lams = (0.3, 0.6, 0.9, 1.2, 1.8)
    worst, where, n = 0.0, None, 0
    for spec in V.global_oracle_grid((2, 4, 6, 8), lams, (0.2, 1.0, 5.0), (0.0, 0.25, 0.5), (0.0, np.pi / 4)):
        err = V.global_oracle_error(spec, u)
        n += 1
        if err > worst:
            worst, where = err, spec
    secs = time.perf_counter() - t0
    ok = worst <= 1e-9 and secs < 120
    report(1, ok, f"{n} specs, max |X_fast - X_oracle| = {worst:.2e} (L={where.L}), {secs:.0f}s")


def test_02_moment_contracts(report):
    spread = 0.0
    for L in (4, 10, 50):
        for state in ("gibbs", "coherent"):
            for n in (1, 2):
                s = QuenchSpec(L, 1.0, 0.6, 1.3, 0.0, PhaseProfile.constant(np.pi / 4), state)
                vals = [gq.moments_fd(s.replace(q=q), n) for q in (0.0, 0.25, 0.5, 0.8)]
                spread = max(spread, (max(vals) - min(vals)) / abs(vals[-1]))
    trace_err = 0.0
    for L in (2, 4, 6):
        H, Hp = O.build_spin_hamiltonian(0.6, L), O.build_spin_hamiltonian(1.3, L)
        psi = O.ising_initial_state(coherent(L, 1.0, 0.6, 1.3, 0.0, np.pi / 4))
        for q in (0.0, 0.25, 0.5):
            atoms = O.quasiprobability_direct(psi, H, Hp, q)
            for n in range(1, 5):
                ref = np.sum(atoms.mass * atoms.w**n).real
                trace_err = max(trace_err, abs(O.moments_closed_form(psi, H, Hp, q, n) - ref))
    ok = spread <= 1e-8 and trace_err <= 1e-9
    report(2, ok, f"q spread of <w>, <w^2>: {spread:.1e} rel; trace formula vs atoms: {trace_err:.1e}")


def test_03_negative_lobes_and_negativity(report):
    out = {}
    for q in (0.0, 0.5):
        law = T.gaussian_law(coherent(50, 1.0, 0.9, 1.1, q, 0.0))
        s = np.sqrt(law.sigma2)
        w = np.linspace(law.w_bar - 12 * s, law.w_bar + 12 * s, 20001)
        p = law.pdf(w)
        h = inv.histogram(law.chf, s / 50, 8, inv.default_range(law, 14), law=law)
        out[q] = (p.min() / p.max(), inv.negativity_integral(h))
    ok = out[0.0][0] < -1e-4 and out[0.5][0] >= 0 and out[0.0][1] > 1.01 and abs(out[0.5][1] - 1) <= 1e-4
    report(
        3,
        ok,
        f"min/peak q=0: {out[0.0][0]:.3f}, q=1/2: {out[0.5][0]:.1e}; N(0) = {out[0.0][1]:.4f}, N(1/2) = {out[0.5][1]:.6f}",
    )


def test_04_histograms_against_gaussian(report):
    dev = {}
    for L in (10, 50):
        s = coherent(L, 1.0, 0.5, 1.5, 0.5, np.pi / 4)
        law = T.gaussian_law(s)
        sd = np.sqrt(law.sigma2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", inv.AliasingWarning)
            h = inv.histogram(s, sd / 10, 8, (law.w_bar - 6 * sd, law.w_bar + 6 * sd), law=law)
        g = law.pdf(h.w_centers)
        dev[L] = np.max(np.abs(h.density - g)) / g.max()
    ok = dev[50] < 0.08 and dev[10] > 0.15
    report(4, ok, f"sup deviation / peak: L=50 {dev[50]:.3f} (need < 0.08), L=10 {dev[10]:.2f} (need > 0.15)")


def test_05_finite_chain_convergence(report):
    worst = 0.0
    for l0 in np.linspace(0.05, 1.95, 39):
        if min(abs(l0 - 1), abs(l0 + 0.1 - 1)) < 0.1:
            continue
        s = coherent(100, 1.0, l0, l0 + 0.1, 0.5, np.pi / 4)
        m1, m2 = gq.moments_fd(s, 1), gq.moments_fd(s, 2)
        worst = max(worst, abs(m1 / T.mean_work(s) - 1), abs((m2 - m1 * m1) / T.variance_work(s) - 1))

    def slope(l0, h=1e-3):
        f = lambda x: T.mean_work(coherent(100, 1.0, x, x + 0.1, 0.5, np.pi / 4))  # noqa: E731
        return (f(l0 + h) - f(l0 - h)) / (2 * h)

    jump = abs(slope(1 + 2e-3) - slope(1 - 2e-3))
    smooth = abs(slope(0.8 + 2e-3) - slope(0.8 - 2e-3))
    ok = worst < 0.02 and jump > 10 * smooth
    report(5, ok, f"L=100 vs quadrature: {worst:.1e} rel; slope jump at 1: {jump:.3f} vs {smooth:.1e} at 0.8")


def test_06_local_quench_fourth_moment(report):
    rng = np.random.default_rng(5)
    local_err = 0.0
    for L in (4, 6):
        for state in ("psi1", "psi2"):
            lq = LocalQuench(L, 1.0, float(rng.uniform(0.2, 2)), float(rng.uniform(0.2, 1)),
                             PhaseProfile.alternating(np.pi, 0.0), state, 1)
            u, q = np.linspace(-3, 3, 13), float(rng.uniform(0, 1))
            ref = O.local_characteristic_X(lq, u, q)
            for method in ("wick", "gamma"):
                local_err = max(local_err, float(np.max(np.abs(local_X(lq, u, q, method) - ref))))
    phases = PhaseProfile.alternating(np.pi, 0.0)
    eps = np.linspace(0, 2, 41)
    psi1_min, psi2_min, q_rel = np.inf, np.inf, 0.0
    for state, betas in (("psi1", (0.2, 1.0)), ("psi2", (0.2, 0.5))):
        for beta in betas:
            curves = {q: fourth_moment_sweep(50, 1.0, beta, q, phases, eps, state=state) for q in (0.0, 0.25, 0.5)}
            ref = curves[0.5]
            nz = np.abs(ref) > 0
            for q in (0.0, 0.25):
                q_rel = max(q_rel, float(np.max(np.abs(curves[q][nz] - ref[nz]) / np.abs(ref[nz]))))
            if state == "psi1":
                psi1_min = min(psi1_min, ref.min())
            else:
                psi2_min = min(psi2_min, ref.min())
    ok = local_err <= 1e-9 and psi1_min >= -1e-8 and psi2_min < 0 and q_rel <= 1e-3
    report(
        6,
        ok,
        f"local vs Fock {local_err:.1e}; min <w^4>: psi1 {psi1_min:.2e}, psi2 {psi2_min:.2e} (need < 0); q spread {q_rel:.1e}",
    )


def test_07_fluctuation_relation(report):
    rows = [C.coherence_draw(4, seed, (0.1, 1.0), (-1.5, 1.5)) for seed in range(50)]
    fr = max(r[5] for r in rows)
    jz = max(r[6] for r in rows)
    ok = fr <= 1e-10 and jz <= 1e-10
    report(7, ok, f"50 mixtures at L=4: max FR residual {fr:.1e}, Jarzynski {jz:.1e}")


def test_08_high_temperature_closed_forms(report):
    rng = np.random.default_rng(8)
    L, worst_mean, worst_var, worst_wex, beyond_thermal = 50, 0.0, 0.0, 0.0, 0.0
    for _ in range(20):
        a = rng.uniform(0.2, 2.0)
        while abs(a - 1) < 1e-3:
            a = rng.uniform(0.2, 2.0)
        l0 = a * rng.choice([-1, 1])
        lt = l0 + rng.uniform(-0.5, 0.5)
        s = coherent(L, 1e-3, l0, lt, 0.5, rng.uniform(0, np.pi))
        d1, d2 = T.high_temp_derivatives(s)
        mean_cf, var_cf = (-1j * L * d1).real, -L * d2.real
        worst_mean = max(worst_mean, abs(T.mean_work(s) / mean_cf - 1))
        worst_var = max(worst_var, abs(T.variance_work(s) / var_cf - 1))
        worst_wex = max(worst_wex, abs(-T.mean_work(s) / T.extracted_work_high_temperature(s) - 1))
        # diagnostic only: what is left after the first-order thermal term beta lam0 (lam0 - lam_tau) L
        thermal = 1e-3 * l0 * (l0 - lt) * L
        beyond_thermal = max(beyond_thermal, abs((T.mean_work(s) - thermal) / mean_cf - 1))
    ok = max(worst_mean, worst_var, worst_wex) <= 1e-3
    report(8, ok, (
        f"beta=1e-3, 20 specs: mean {worst_mean:.1e}, variance {worst_var:.1e}, W_ex {worst_wex:.1e} rel"
        f" (mean minus first-order thermal term: {beyond_thermal:.1e})"
    ))


def test_09_fermi_dirac_and_scaling(report):
    fd = max(abs(T.fermi_dirac_integral(x) - 4 / ((1 + np.exp(abs(x))) * abs(x))) for x in (0.1, 1.0, 5.0))
    worst = 0.0
    for a in (1e-2, 3e-3, 1e-3):
        for m, beta in ((1.0, 1.0), (0.5, 2.0)):
            J, l0 = T.scaling_couplings(a, m)
            s = QuenchSpec(50, beta, l0, l0 + 0.01, 0.5, PhaseProfile.constant(np.pi / 4), "coherent", J=J)
            worst = max(worst, abs(T.coherent_work_scaling(s) / T.coherent_work_quadrature(s) - 1))
    ok = fd <= 1e-8 and worst < 0.02
    report(9, ok, f"Fermi-Dirac identity {fd:.1e}; scaling-regime coherent work {worst:.1e} rel")


def test_10_grassmann_pfaffian(report):
    worst = 0.0
    for pairs in (1, 2):
        for cplx in (False, True):
            worst = max(worst, max(grassmann_oracle(pairs, 20, seed=10 + pairs, complex_entries=cplx).values()))
    rng = np.random.default_rng(10)
    pf_det = 0.0
    for n in (2, 4, 6, 8):
        for _ in range(20):
            A = random_antisymmetric(n, rng)
            pf_det = max(pf_det, abs(pfaffian(A) ** 2 - np.linalg.det(A)) / max(1.0, abs(np.linalg.det(A))))
    ok = worst <= 1e-12 and pf_det <= 1e-12
    report(10, ok, f"identity residual {worst:.1e}; Pf^2 - det {pf_det:.1e}")


def test_11_qubit_detector(report):
    rng = np.random.default_rng(11)
    worst = 0.0
    for i in range(10):
        spec = coherent(4, rng.uniform(0.2, 2), rng.uniform(-1.8, 1.8), rng.uniform(-1.8, 1.8), 0.0, rng.uniform(0, np.pi))
        if i % 2:
            spec = spec.replace(state="gibbs")
        H, Hp = O.build_spin_hamiltonian(spec.lambda0, 4), O.build_spin_hamiltonian(spec.lambda_tau, 4)
        state = O.ising_initial_state(spec)
        u, q = float(rng.uniform(-4, 4)), float(rng.uniform(0, 1))
        got = O.qubit_detector(state, H, Hp, O.DetectorCouplings.for_point(u, q))
        worst = max(worst, abs(got - O.characteristic_X(state, H, Hp, u, q)[0]))
    report(11, worst <= 1e-10, f"10 random (u, q) at L=4: max |detector - X_q| = {worst:.1e}")
