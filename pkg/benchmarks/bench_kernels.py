"""Time the numba kernels against their numpy twins and check they agree.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from quasiwork import _accel
from quasiwork import fermion as F
from quasiwork import global_quench as gq
from quasiwork import inversion as inv
from quasiwork.model import EVEN, PhaseProfile, QuenchSpec, mode_table


def _best(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _flat(out):
    parts = out if isinstance(out, tuple) else (out,)
    return np.concatenate([np.ravel(x) for x in parts])


def sector_case():
    spec = QuenchSpec(200, 1.0, 0.5, 1.5, 0.3, PhaseProfile.constant(np.pi / 4), "coherent")
    tab = mode_table(spec, EVEN)
    u = np.linspace(-10, 10, 4001)
    args = (u, *gq._table_args(tab), 1.0, 0.3, True, np.asarray(tab.unpaired_eps, float),
            np.asarray(tab.unpaired_eps_prime, float), np.asarray(tab.unpaired_sign, float))
    return "sector_logs L=200 n_u=4001", gq._sector_logs_numba, gq._sector_logs_numpy, args


def bin_case():
    rng = np.random.default_rng(0)
    amps = rng.normal(size=20001) + 1j * rng.normal(size=20001)
    w = np.linspace(-30, 30, 601)
    return "bin_sums n_u=20001 n_w=601", inv._bin_sums_numba, inv._bin_sums_numpy, (10000, 0.005, amps, w)


def pfaffian_case():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(200, 200)) + 1j * rng.normal(size=(200, 200))
    A = A - A.T
    return "pfaffian n=200", F._pfaffian_numba, F._pfaffian_numpy, (A,)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not importable; nothing to compare")
        return 1
    print(f"{'kernel':32s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s} {'rel max diff':>13s}")
    for case in (sector_case, bin_case, pfaffian_case):
        name, fast, slow, a = case()
        tf, of = _best(lambda: fast(*[x.copy() if isinstance(x, np.ndarray) else x for x in a]), args.repeat)
        ts, os_ = _best(lambda: slow(*a), args.repeat)
        of, os_ = _flat(of), _flat(os_)
        diff = np.max(np.abs(of - os_)) / np.max(np.abs(os_))
        print(f"{name:32s} {1e3 * tf:11.2f} {1e3 * ts:11.2f} {ts / tf:8.1f} {diff:13.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
