"""Command-line front end.

    multiergodic <command> --potential FILE [options]

Commands: solve, pressure, spectrum, extremal, measure-dim, sample, lln,
invariant.  Tables go to --out as CSV (stdout when --out is absent) with a
header row and 15 significant digits.  A one-line summary goes to stdout
(stderr when the table itself is on stdout).  Errors go to stderr with exit
status 2.

Grids are written lo:hi:step and include both ends.  Negative values are
accepted directly, e.g. ``--alpha-grid -1:1:0.05``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .invariant import ProductPotential, invariant_spectrum
from .measures import (
    Bernoulli,
    CylinderTable,
    EnumerationLimit,
    TelescopicMeasure,
    lebesgue,
    markov_dimension_formula,
    markov_mu_s,
    telescopic_dimension,
)
from .potential import Potential, index_word, load_potential, multiple_ergodic_sum
from .pressure import derivative_and_pressure, endpoint_estimate, extremal_attained, spectrum_curve
from .sampling import lln_experiment, sample_telescopic
from .transfer import SolverConfig, solve_fixed_point

COMMANDS = ("solve", "pressure", "spectrum", "extremal", "measure-dim", "sample", "lln", "invariant")
_GRID_FLAGS = ("--s-grid", "--alpha-grid", "--s")


class CliError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    potential_path: Optional[str] = None
    s: Optional[float] = None
    s_grid: Optional[tuple] = None
    alpha_grid: Optional[tuple] = None
    tol: Optional[float] = None
    n: int = 1000
    trials: int = 10
    seed: int = 0
    output_path: Optional[str] = None
    threads: int = 1
    base: str = "lebesgue"
    m: Optional[int] = None
    q: Optional[int] = None
    report_path: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise CliError(f"unknown command {self.command!r}")
        if self.tol is not None and not self.tol > 0:
            raise CliError("--tol must be > 0")
        if self.n < 1:
            raise CliError("--n must be >= 1")
        if self.threads < 1:
            raise CliError("--threads must be >= 1")


def parse_grid(text: str, flag: str) -> tuple:
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        lo, hi, step = (float(v) for v in parts)
    except ValueError:
        raise CliError(f"{flag}: expected lo:hi:step, got {text!r}") from None
    if not all(math.isfinite(v) for v in (lo, hi, step)):
        raise CliError(f"{flag}: values must be finite")
    if step <= 0 or hi < lo:
        raise CliError(f"{flag}: need step > 0 and hi >= lo")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    # rounding keeps 0.05-style grids free of 1e-17 noise, so rows diff cleanly
    return tuple(float(round(lo + k * step, 12)) for k in range(count))


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v == 0:
            return "0"
        return f"{v:.15g}"
    return str(v)


def _word(w) -> str:
    return "".join(str(int(a)) for a in w) if len(w) else "-"


class Table:
    def __init__(self, header):
        self.header = list(header)
        self.rows = []

    def add(self, *row):
        self.rows.append([fmt(v) for v in row])

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def _load(cfg: RunConfig) -> Potential:
    if not cfg.potential_path:
        raise CliError(f"{cfg.command} needs --potential")
    try:
        return load_potential(Path(cfg.potential_path))
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        raise CliError(f"--potential {cfg.potential_path}: {exc}") from None


def _s_values(cfg: RunConfig) -> tuple:
    if cfg.s_grid is not None:
        return cfg.s_grid
    if cfg.s is not None:
        return (cfg.s,)
    raise CliError(f"{cfg.command} needs --s or --s-grid")


def _single_s(cfg: RunConfig) -> float:
    if cfg.s is None:
        raise CliError(f"{cfg.command} needs --s")
    return cfg.s


def _pmap(fn, items, threads):
    if threads > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _solver(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(tol=cfg.tol) if cfg.tol is not None else SolverConfig()


def cmd_solve(cfg):
    p = _load(cfg)
    scfg = _solver(cfg)
    fps = _pmap(lambda s: solve_fixed_point(p, s, scfg), list(_s_values(cfg)), cfg.threads)
    t = Table(["s", "word", "psi", "log_psi", "residual", "iterations"])
    for fp in fps:
        for k in range(p.ell):
            for idx, lv in enumerate(fp.log_levels[k]):
                t.add(fp.s, _word(index_word(idx, p.m, k)), math.exp(lv), lv, fp.residual, fp.iterations)
    worst = max(fp.residual for fp in fps)
    return t, f"solve: {len(fps)} s-values, max residual {worst:.3g}"


def cmd_pressure(cfg):
    p = _load(cfg)
    scfg = _solver(cfg)
    svals = list(_s_values(cfg))
    res = _pmap(lambda s: derivative_and_pressure(p, s, cfg=scfg), svals, cfg.threads)
    t = Table(["s", "pressure", "derivative"])
    for s, (d, P) in zip(svals, res):
        t.add(s, P, d)
    return t, f"pressure: {len(svals)} s-values on [{fmt(svals[0])}, {fmt(svals[-1])}]"


def cmd_spectrum(cfg):
    p = _load(cfg)
    if cfg.alpha_grid is None:
        raise CliError("spectrum needs --alpha-grid")
    tol = cfg.tol if cfg.tol is not None else 1e-9
    pts = spectrum_curve(p, cfg.alpha_grid, tol=tol, threads=cfg.threads)
    t = Table(["alpha", "s_star", "pressure", "legendre", "dimension", "empty"])
    for pt in pts:
        t.add(pt.alpha, pt.s_star, pt.pressure_at_s, pt.legendre, pt.dimension, pt.empty)
    inside = [pt for pt in pts if not pt.empty]
    top = max((pt.dimension for pt in inside), default=math.nan)
    return t, f"spectrum: {len(inside)}/{len(pts)} alphas in the domain, max dimension {fmt(top)}"


def _approx(v: float) -> str:
    r = round(v, 6)
    return fmt(r + 0.0)


def cmd_extremal(cfg):
    p = _load(cfg)
    tol = cfg.tol if cfg.tol is not None else 1e-6
    t = Table(["which", "extremum", "attained", "witness", "endpoint", "converged"])
    parts = []
    for which, direction, label in (("min", -1, "P'(-inf)"), ("max", 1, "P'(+inf)")):
        ok, witness = extremal_attained(p, which)
        est = endpoint_estimate(p, direction, tol)
        ext = p.alpha_min if which == "min" else p.alpha_max
        t.add(which, ext, ok, _word(witness) if witness else "", est.value, est.converged)
        state = f"attained (period {_word(witness)})" if ok else "not attained"
        parts.append(f"{which}: {state}, {label} ≈ {_approx(est.value)}")
    return t, "; ".join(parts)


def parse_base(spec: str, cfg: RunConfig, p: Optional[Potential]):
    kind, _, arg = spec.partition(":")
    if kind == "lebesgue":
        m = cfg.m or (p.m if p is not None else None)
        if m is None:
            raise CliError("--base lebesgue needs --m or --potential")
        return lebesgue(m)
    if kind == "bernoulli":
        try:
            probs = [float(v) for v in arg.split(",")]
            return Bernoulli(probs)
        except ValueError as exc:
            raise CliError(f"--base {spec}: {exc}") from None
    if kind == "markov-mu-s":
        if p is None:
            raise CliError("--base markov-mu-s needs --potential")
        try:
            s = float(arg)
        except ValueError:
            raise CliError(f"--base {spec}: s must be a number") from None
        return markov_mu_s(p, s, _solver(cfg))
    if kind == "table":
        try:
            doc = json.loads(Path(arg).read_text())
            return CylinderTable(int(doc["m"]), doc["masses"])
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise CliError(f"--base {spec}: {exc}") from None
    raise CliError(f"--base: unknown kind {kind!r} (lebesgue, bernoulli:p,..., markov-mu-s:s, table:path)")


def cmd_measure_dim(cfg):
    p = _load(cfg) if cfg.potential_path else None
    q = cfg.q or (p.q if p is not None else 2)
    base = parse_base(cfg.base, cfg, p)
    tol = cfg.tol if cfg.tol is not None else 1e-10
    t = Table(["base", "q", "dimension", "formula", "truncation_bound"])
    try:
        dim, bound = telescopic_dimension(base, q, tol), tol
    except EnumerationLimit as exc:
        print(f"warning: {exc}", file=sys.stderr)
        dim, bound = exc.value, exc.bound
    formula = math.nan
    if cfg.base.startswith("markov-mu-s:") and q == p.q:
        formula = markov_dimension_formula(p, float(cfg.base.split(":", 1)[1]), _solver(cfg))
    t.add(cfg.base, q, dim, formula, bound)
    return t, f"measure-dim: {cfg.base} with q={q} has dimension {fmt(dim)}"


def cmd_sample(cfg):
    p = _load(cfg) if cfg.potential_path else None
    if cfg.s is not None and p is not None and cfg.base == "lebesgue":
        base = markov_mu_s(p, cfg.s, _solver(cfg))
    else:
        base = parse_base(cfg.base, cfg, p)
    q = cfg.q or (p.q if p is not None else 2)
    x = sample_telescopic(TelescopicMeasure(base, q), cfg.n, cfg.seed)
    t = Table(["position", "symbol"])
    for k, a in enumerate(x, start=1):
        t.add(k, int(a))
    msg = f"sample: {cfg.n} symbols, seed {cfg.seed}"
    if p is not None:
        n_avg = cfg.n // p.q ** (p.ell - 1)
        if n_avg >= 1:
            msg += f", A_{n_avg} = {fmt(multiple_ergodic_sum(p, x, n_avg)[1])}"
    return t, msg


def cmd_lln(cfg):
    p = _load(cfg)
    rep = lln_experiment(p, _single_s(cfg), cfg.n, cfg.trials, cfg.seed, _solver(cfg), cfg.threads)
    t = Table(["trial", "average", "local_dimension"])
    for row in rep.rows():
        t.add(*row)
    if cfg.report_path:
        Path(cfg.report_path).write_text(rep.to_text())
    sm = rep.summary()
    return t, (
        f"lln: mean A_n {fmt(sm['average_mean'])} vs P'(s) {fmt(sm['average_target'])} (z {sm['average_z']:.3f}); "
        f"local dim {fmt(sm['local_dim_mean'])} vs {fmt(sm['local_dim_target'])}"
    )


def _product_from_file(cfg) -> ProductPotential:
    if not cfg.potential_path:
        raise CliError("invariant needs --potential")
    try:
        doc = json.loads(Path(cfg.potential_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"--potential {cfg.potential_path}: {exc}") from None
    if "f" in doc and "g" in doc:
        try:
            return ProductPotential(len(doc["f"]), doc["f"], doc["g"])
        except ValueError as exc:
            raise CliError(f"--potential {cfg.potential_path}: {exc}") from None
    try:
        return ProductPotential.from_potential(load_potential(doc))
    except ValueError as exc:
        raise CliError(f"--potential {cfg.potential_path}: {exc}") from None


def cmd_invariant(cfg):
    pp = _product_from_file(cfg)
    if cfg.alpha_grid is None:
        raise CliError("invariant needs --alpha-grid")
    tol = cfg.tol if cfg.tol is not None else 1e-12
    pts = _pmap(lambda a: invariant_spectrum(pp, a, tol), list(cfg.alpha_grid), cfg.threads)
    t = Table(["alpha", "F_inv", "feasible"])
    for pt in pts:
        t.add(pt.alpha, pt.value, pt.feasible)
    ok = sum(pt.feasible for pt in pts)
    return t, f"invariant: {ok}/{len(pts)} alphas feasible"


HANDLERS = {
    "solve": cmd_solve,
    "pressure": cmd_pressure,
    "spectrum": cmd_spectrum,
    "extremal": cmd_extremal,
    "measure-dim": cmd_measure_dim,
    "sample": cmd_sample,
    "lln": cmd_lln,
    "invariant": cmd_invariant,
}


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        table, summary = HANDLERS[cfg.command](cfg)
        text = table.render()
        if cfg.output_path:
            Path(cfg.output_path).write_text(text)
            print(summary, file=stdout)
        else:
            stdout.write(text)
            print(summary, file=stderr)
    except CliError as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    except (ValueError, RuntimeError, OSError, ArithmeticError) as exc:
        print(f"error: {cfg.command}: {type(exc).__name__}: {exc}", file=stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="multiergodic", description="Spectra of multiple ergodic averages on full shifts.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--potential", help="JSON file with m, q, ell, phi (or f, g for invariant)")
        sp.add_argument("--s", type=float)
        sp.add_argument("--s-grid", help="lo:hi:step")
        sp.add_argument("--alpha-grid", help="lo:hi:step")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--n", type=int, default=1000)
        sp.add_argument("--trials", type=int, default=10)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--base", default="lebesgue", help="lebesgue | bernoulli:p0,p1,... | markov-mu-s:s | table:path")
        sp.add_argument("--m", type=int)
        sp.add_argument("--q", type=int)
        sp.add_argument("--report", help="lln: also write the structured text report here")
    return ap


def _join_negative(argv):
    # let "--alpha-grid -1:1:0.05" through argparse's option detection
    out = []
    it = iter(argv)
    for a in it:
        if a in _GRID_FLAGS:
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-") and len(nxt) > 1 and (nxt[1].isdigit() or nxt[1] == "."):
                out.append(f"{a}={nxt}")
                continue
            out.append(a)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(a)
    return out


def config_from_args(ns) -> RunConfig:
    return RunConfig(
        command=ns.command,
        potential_path=ns.potential,
        s=ns.s,
        s_grid=parse_grid(ns.s_grid, "--s-grid") if ns.s_grid else None,
        alpha_grid=parse_grid(ns.alpha_grid, "--alpha-grid") if ns.alpha_grid else None,
        tol=ns.tol,
        n=ns.n,
        trials=ns.trials,
        seed=ns.seed,
        output_path=ns.out,
        threads=ns.threads,
        base=ns.base,
        m=ns.m,
        q=ns.q,
        report_path=ns.report,
    )


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ns = build_parser().parse_args(_join_negative(argv))
    try:
        cfg = config_from_args(ns)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
