"""Command-line entry point: data products, parameter sweeps and self-verification.

``quasiwork <chi|hist|thermo|local|coherence|verify> --config FILE [--threads N] [--out DIR]``

Exit codes: 0 ok, 1 configuration error, 2 numerical failure, 3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__, _accel
from .errors import ConfigError, NumericalError, QuasiworkError
from .model import PhaseProfile, QuenchSpec

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("chi", "hist", "thermo", "local", "coherence", "verify")


# --- configuration with source positions ----------------------------------------------


class Config:
    """Parsed YAML mapping that remembers the line of every key."""

    def __init__(self, data, node, path: str):
        self.data = data
        self.node = node
        self.path = path

    @classmethod
    def load(cls, path) -> "Config":
        path = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            data = yaml.safe_load(text)
        except yaml.MarkedYAMLError as exc:
            m = exc.problem_mark
            where = f"{path}:{m.line + 1}:{m.column + 1}" if m else path
            raise ConfigError(f"{where}: {exc.problem}") from exc
        if data is None:
            data, node = {}, None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}:1: top level must be a mapping")
        return cls(data, node, path)

    def line(self, *keys) -> str:
        """``file:line`` of the deepest key of ``keys`` that exists."""
        node, line = self.node, None
        for key in keys:
            if not isinstance(node, yaml.MappingNode):
                break
            for k, v in node.value:
                if k.value == str(key):
                    line, node = k.start_mark.line + 1, v
                    break
            else:
                break
        return f"{self.path}:{line}" if line else self.path

    def error(self, msg: str, *keys) -> ConfigError:
        return ConfigError(f"{self.line(*keys)}: {msg}")

    def section(self, name: str, required: bool = True) -> dict:
        sec = self.data.get(name)
        if sec is None:
            if required:
                raise self.error(f"missing section '{name}'")
            return {}
        if not isinstance(sec, dict):
            raise self.error(f"section '{name}' must be a mapping", name)
        return sec

    def get(self, section: str, key: str, default=None, kind=None):
        sec = self.section(section, required=False)
        if key not in sec:
            if default is None:
                raise self.error(f"'{section}.{key}' is required", section)
            return default
        val = sec[key]
        if kind is not None:
            try:
                val = kind(val)
            except (TypeError, ValueError) as exc:
                raise self.error(f"'{section}.{key}': {exc}", section, key) from exc
        return val


def _phases(raw):
    if raw is None:
        return PhaseProfile()
    if isinstance(raw, (int, float)):
        return PhaseProfile.constant(float(raw))
    if isinstance(raw, dict):
        return PhaseProfile.from_dict(raw)
    raise ConfigError("phases must be a number or a mapping")


def _spec(cfg: Config, section: str = "spec", **override) -> QuenchSpec:
    raw = dict(cfg.section(section))
    raw.update(override)
    allowed = set(QuenchSpec.__dataclass_fields__)
    for key in raw:
        if key not in allowed:
            raise cfg.error(f"unknown field '{key}'", section, key)
    try:
        raw["phases"] = _phases(raw.get("phases"))
        return QuenchSpec(**raw)
    except (ConfigError, TypeError, ValueError) as exc:
        bad = next((k for k in raw if k in str(exc)), None)
        keys = (section, bad) if bad else (section,)
        raise cfg.error(str(exc), *keys) from exc


def _grid(cfg: Config, section: str, key: str):
    """A list, or ``{start, stop, num}`` expanded with ``linspace``."""
    raw = cfg.get(section, key)
    if isinstance(raw, dict):
        try:
            return np.linspace(float(raw["start"]), float(raw["stop"]), int(raw["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise cfg.error(f"'{section}.{key}' needs start, stop and num", section, key) from exc
    if isinstance(raw, (list, tuple)):
        return np.asarray(raw, dtype=float)
    return np.asarray([float(raw)])


def _list(cfg: Config, section: str, key: str, default, kind=float):
    raw = cfg.get(section, key, default)
    raw = raw if isinstance(raw, (list, tuple)) else [raw]
    try:
        return [kind(x) for x in raw]
    except (TypeError, ValueError) as exc:
        raise cfg.error(f"'{section}.{key}': {exc}", section, key) from exc


# --- output helpers --------------------------------------------------------------------


def _fmt(x) -> str:
    return "nan" if not np.isfinite(x) else repr(float(x))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (complex, np.complexfloating)):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o)}")


def _provenance(cfg: Config, command: str) -> dict:
    return {"command": command, "config": cfg.data, "version": __version__, "backend": _accel.backend()}


def _pmap(fn, items, threads: int):
    """Ordered map; a single thread runs inline so output is bit-identical."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --- commands --------------------------------------------------------------------------


def cmd_chi(cfg: Config, out: Path, threads: int) -> list[Path]:
    from .global_quench import chi
    from .thermo import gaussian_law

    spec = _spec(cfg)
    u_max = cfg.get("grid", "u_max", kind=float)
    n_u = cfg.get("grid", "n_u", 2001, kind=int)
    if not u_max > 0:
        raise cfg.error("u_max must be positive", "grid", "u_max")
    if n_u < 2:
        raise cfg.error("n_u must be at least 2", "grid", "n_u")
    qs = _list(cfg, "grid", "qs", [spec.q])
    u = np.linspace(-u_max, u_max, n_u)
    chunks = np.array_split(u, max(1, threads))
    name = cfg.data.get("name", "chi")
    files = []
    for q in qs:
        sq = spec.replace(q=q)
        vals = np.concatenate(_pmap(lambda c, sq=sq: chi(sq, c).values, chunks, threads))
        stem = f"{name}_q{q:g}_chi" if len(qs) > 1 else f"{name}_chi"
        files.append(write_csv(out / f"{stem}.csv", ["u", "re", "im"], zip(u, vals.real, vals.imag)))
        meta = _provenance(cfg, "chi")
        meta["spec"] = sq.to_dict()
        try:
            law = gaussian_law(sq)
            meta["gaussian_law"] = {"w_bar": law.w_bar, "sigma2": law.sigma2, "r": law.r, "L": law.L}
        except QuasiworkError as exc:
            meta["gaussian_law"] = None
            meta["gaussian_law_error"] = str(exc)
        files.append(write_json(out / f"{stem}.json", meta))
    return files


def cmd_hist(cfg: Config, out: Path, threads: int) -> list[Path]:
    from .inversion import histogram
    from .thermo import gaussian_law

    base = _spec(cfg)
    Ls = _list(cfg, "hist", "L_list", [base.L], int)
    K = cfg.get("hist", "K", 8.0, kind=float)
    n_sigma = cfg.get("hist", "n_sigma", 6.0, kind=float)
    dw_abs = cfg.section("hist", required=False).get("dw")
    dw_sigma = cfg.get("hist", "dw_sigma", 0.1, kind=float)
    name = cfg.data.get("name", "hist")

    def one(L):
        spec = base.replace(L=L)
        law = gaussian_law(spec)
        s = np.sqrt(law.sigma2)
        dw = float(dw_abs) if dw_abs is not None else dw_sigma * s
        h = histogram(spec, dw, K, (law.w_bar - n_sigma * s, law.w_bar + n_sigma * s), law=law)
        return spec, law, h

    files = []
    for spec, law, h in _pmap(one, Ls, threads):
        gauss = law.pdf(h.w_centers) * h.dw
        rows = zip(h.w_centers, h.masses, np.full(h.masses.shape, h.dw), gauss)
        files.append(write_csv(out / f"{name}_L{spec.L}.csv", ["w", "p", "dw", "gauss"], rows))
        meta = _provenance(cfg, "hist")
        meta.update(spec=spec.to_dict(), dw=h.dw, K=h.K, n_u=h.meta["n_u"], chi_checksum=h.meta["chi_checksum"])
        meta["gaussian_law"] = {"w_bar": law.w_bar, "sigma2": law.sigma2, "r": law.r}
        meta["sup_deviation_over_peak"] = float(np.max(np.abs(h.masses - gauss)) / np.max(gauss))
        files.append(write_json(out / f"{name}_L{spec.L}.json", meta))
    return files


def cmd_thermo(cfg: Config, out: Path, threads: int) -> list[Path]:
    from .errors import CriticalityError
    from .global_quench import moments_fd
    from .thermo import gaussian_law, kurtosis_asymptotic, negativity_asymptotic

    base = _spec(cfg, lambda_tau=cfg.section("spec").get("lambda_tau", 0.0))
    lam = _grid(cfg, "thermo", "lambda0_grid")
    dl = cfg.get("thermo", "delta_lambda", kind=float)
    finite = _list(cfg, "thermo", "finite_L", [], int)
    name = cfg.data.get("name", "thermo")

    def asym(l0):
        spec = base.replace(lambda0=l0, lambda_tau=l0 + dl)
        try:
            law = gaussian_law(spec)
        except QuasiworkError:
            return (l0, np.nan, np.nan, np.nan, np.nan, np.nan)
        return (l0, law.w_bar, law.sigma2, law.r, negativity_asymptotic(law), kurtosis_asymptotic(law))

    rows = _pmap(asym, lam, threads)
    header = ["lambda0", "w_bar", "var", "r_q", "negativity", "kurtosis"]
    files = [write_csv(out / f"{name}.csv", header, rows)]
    for L in finite:

        def fin(l0, L=L):
            spec = base.replace(L=L, lambda0=l0, lambda_tau=l0 + dl)
            try:
                m1 = moments_fd(spec, 1)
                m2 = moments_fd(spec, 2)
            except CriticalityError:
                return (l0, np.nan, np.nan)
            return (l0, m1, m2 - m1 * m1)

        files.append(write_csv(out / f"{name}_L{L}.csv", ["lambda0", "w_mean", "var"], _pmap(fin, lam, threads)))
    files.append(write_json(out / f"{name}.json", _provenance(cfg, "thermo")))
    return files


def cmd_local(cfg: Config, out: Path, threads: int) -> list[Path]:
    from .fermion import fourth_moment_sweep

    sec = "local"
    L = cfg.get(sec, "L", kind=int)
    lam0 = cfg.get(sec, "lambda0", kind=float)
    betas = _list(cfg, sec, "betas", [1.0])
    qs = _list(cfg, sec, "qs", [0.5])
    states = _list(cfg, sec, "states", ["psi1", "psi2"], str)
    site = cfg.get(sec, "site", 1, kind=int)
    method = cfg.get(sec, "method", "contour", kind=str)
    try:
        phases = _phases(cfg.section(sec).get("phases"))
    except ConfigError as exc:
        raise cfg.error(str(exc), sec, "phases") from exc
    eps = _grid(cfg, sec, "eps_grid")
    name = cfg.data.get("name", "local")
    files = []
    for state in states:
        for beta in betas:
            for q in qs:

                def one(e, beta=beta, q=q, state=state):
                    return fourth_moment_sweep(L, lam0, beta, q, phases, [e], site, state, method)[0]

                w4 = _pmap(one, eps, threads)
                fname = out / f"{name}_{state}_beta{beta:g}_q{q:g}.csv"
                files.append(write_csv(fname, ["eps", "w4"], zip(eps, w4)))
    files.append(write_json(out / f"{name}.json", _provenance(cfg, "local")))
    return files


def cmd_coherence(cfg: Config, out: Path, threads: int) -> list[Path]:
    sec = "coherence"
    L = cfg.get(sec, "L", 4, kind=int)
    n = cfg.get(sec, "n_draws", 50, kind=int)
    seed = cfg.get(sec, "seed", 0, kind=int)
    br = _list(cfg, sec, "beta_range", [0.1, 1.0])
    lr = _list(cfg, sec, "lambda_range", [-1.5, 1.5])
    if L > 6:
        raise cfg.error("coherence draws use the dense oracle; L must be <= 6", sec, "L")
    from .coherence import coherence_draw

    rows = _pmap(lambda i: coherence_draw(L, seed + i, br, lr), range(n), threads)
    name = cfg.data.get("name", "coherence")
    header = ["seed", "beta", "lambda0", "lambda_tau", "eta", "fr_residual", "jarzynski_residual", "inequality_slack"]
    meta = _provenance(cfg, "coherence")
    arr = np.array(rows)
    meta["max_fr_residual"] = float(arr[:, 5].max())
    meta["max_jarzynski_residual"] = float(arr[:, 6].max())
    meta["min_inequality_slack"] = float(arr[:, 7].min())
    return [write_csv(out / f"{name}.csv", header, rows), write_json(out / f"{name}.json", meta)]


def cmd_verify(cfg: Config | None, out: Path, threads: int, level: str | None = None, fault: str | None = None):
    from .verify import run_suite

    if level is None:
        level = cfg.data.get("level", "quick") if cfg is not None else "quick"
    if level not in ("quick", "full"):
        raise ConfigError(f"verify level must be 'quick' or 'full', got {level!r}")
    report = run_suite(level, fault=fault, threads=threads)
    path = write_json(out / "verify_report.json", report)
    for chk in report["checks"]:
        status = "PASS" if chk["passed"] else "FAIL"
        print(f"{status} {chk['name']} ({chk['seconds']:.2f}s)")
        for f in chk["failures"][:5]:
            print(f"    {f}")
    return [path], report["passed"]


HANDLERS = {"chi": cmd_chi, "hist": cmd_hist, "thermo": cmd_thermo, "local": cmd_local, "coherence": cmd_coherence}


def _threads(arg) -> int:
    raw = arg if arg is not None else os.environ.get("QUASIWORK_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"thread count must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quasiwork", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "verify", help="YAML run configuration")
        s.add_argument("--threads", type=str, default=None, help="worker threads (default: QUASIWORK_THREADS or 1)")
        s.add_argument("--out", default=".", help="output directory")
        if name == "verify":
            s.add_argument("--level", choices=("quick", "full"), default=None)
            s.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        threads = _threads(args.threads)
        if _accel.USE_NUMBA:
            _accel.numba.set_num_threads(min(threads, _accel.numba.config.NUMBA_NUM_THREADS))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg = Config.load(args.config) if args.config else None
        if args.command == "verify":
            fault = args.inject_fault or os.environ.get("QUASIWORK_INJECT_FAULT") or None
            files, ok = cmd_verify(cfg, out, threads, args.level, fault)
            code = EXIT_OK if ok else EXIT_VERIFY
        else:
            files = HANDLERS[args.command](cfg, out, threads)
            code = EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in files:
        print(f)
    print(f"done in {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
