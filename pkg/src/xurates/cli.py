"""Command-line front end: ``xurates {solve,rates,verify,compare-yamada,oracle}``.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys

import click
import numpy as np

from . import engine
from .asreg import Variant
from .config import Config, ConfigError, load, parse_tau
from .meta import Counterfunction, MetaParams, Omega, TheoremVariant, E_bound
from .nonexp import has_tau, tilde
from .ratekit import DEFAULT_CAP, ExtNat
from .verify import (COMBINATORS, Report, falsify_tau, randomized_xu_lemma, sweep, verify_meta,
                     write_atomic)

EXIT_FAIL = 1
EXIT_CONFIG = 2


_COMMON = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), required=True,
                 help="JSON configuration document."),
    click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                 help="Directory for CSV/JSON artifacts."),
    click.option("--cap", type=int, default=DEFAULT_CAP, show_default=True,
                 help="Saturation cap for rate arithmetic."),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--kmax", type=int, default=None, help="Largest k to evaluate."),
    click.option("--budget", type=int, default=None, help="Simulation budget (iterations)."),
]


def common_options(fn):
    for opt in reversed(_COMMON):
        fn = opt(fn)
    return fn


def _load(path: str, cap: int) -> Config:
    try:
        return load(path, cap)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _fail_config(msg: str):
    click.echo(f"config error: {msg}", err=True)
    sys.exit(EXIT_CONFIG)


def _variants(cfg: Config, explicit: str | None) -> list[Variant]:
    sched = cfg.instance.schedule
    name = explicit or cfg.verify.get("variant") or cfg.run.get("variant")
    if name:
        try:
            v = Variant.parse(name)
        except ValueError as exc:
            _fail_config(str(exc))
        missing = [w for w in v.required if getattr(sched, w) is None]
        if missing:
            _fail_config(f"variant {v.value} needs witnesses: {', '.join(missing)}")
        return [v]
    found = [v for v in Variant if all(getattr(sched, w) is not None for w in v.required)]
    if not found:
        have = [w for w in ("sigma1", "sigma2", "sigma2star", "sigma3", "sigma4") if getattr(sched, w)]
        _fail_config(f"no rate variant is supported by the witnesses present ({', '.join(have) or 'none'})")
    return found


def _emit(out_dir: str | None, name: str, text: str) -> None:
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_atomic(os.path.join(out_dir, name), text)


def _finish(report: Report, out_dir: str | None, stem: str) -> None:
    if out_dir:
        report.write(out_dir, stem)
    click.echo(json.dumps({"suite": stem, **report.summary()}, sort_keys=True))
    for r in report.failed_rows()[:20]:
        click.echo("FAIL " + ",".join(r.as_list()), err=True)
    sys.exit(0 if report.ok else EXIT_FAIL)


@click.group()
def main():
    """Rates and empirical checks for Xu's iteration."""


# -- solve --------------------------------------------------------------------

def oracle_point(cfg: Config):
    """``x*`` from the configured oracle, or ``None`` when none applies."""
    spec = cfg.oracle
    if not spec:
        return None
    inst = cfg.instance
    if "affine" in spec:
        aff = spec["affine"] or {}
        return engine.kkt_oracle(inst.A, inst.u, aff.get("basis"), aff.get("offset"))
    if spec.get("projection"):
        if not np.allclose(inst.A.matrix, np.eye(inst.dim)) or inst.l != 1:
            _fail_config("the projection oracle needs A = I and a single map")
        return inst.family.maps[0](inst.u)
    _fail_config("oracle section needs 'affine' or 'projection'")


@main.command()
@common_options
def solve(config_path, out_dir, cap, seed, kmax, budget):
    """Run the iteration and write n, alpha, rTilde, gapL (and distToOracle)."""
    cfg = _load(config_path, cap)
    inst = cfg.instance
    N = budget if budget is not None else int(cfg.run.get("N", 1000))
    every = int(cfg.run.get("every", 1))
    x_star = oracle_point(cfg)
    try:
        traj = engine.run(inst, N + inst.l, monitor=inst.schedule.sigma1 is not None)
    except ValueError as exc:
        _fail_config(str(exc))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["n", "alpha", "rTilde", "gapL"] + (["distToOracle"] if x_star is not None else [])
    w.writerow(header)
    for n in range(0, N + 1, every):
        x = traj.x(n)
        row = [n, repr(float(inst.schedule.alpha(n))),
               repr(float(np.linalg.norm(x - tilde(inst.family, n)(x)))),
               repr(float(np.linalg.norm(traj.x(n + inst.l) - x)))]
        if x_star is not None:
            row.append(repr(float(np.linalg.norm(x - x_star))))
        w.writerow(row)
    _emit(out_dir, "solve.csv", buf.getvalue())
    if not out_dir:
        click.echo(buf.getvalue(), nl=False)
    summary = {"N": N, "x_N": traj.x(N).tolist()}
    if x_star is not None:
        summary["x_star"] = x_star.tolist()
        summary["distToOracle"] = float(np.linalg.norm(traj.x(N) - x_star))
    viol = 0
    if traj.monitor is not None:
        summary["invariants"] = traj.monitor.summary()
        viol = traj.monitor.violations
    click.echo(json.dumps(summary, sort_keys=True), err=bool(not out_dir))
    sys.exit(EXIT_FAIL if viol else 0)


# -- rates --------------------------------------------------------------------

RATE_COLUMNS = ["variant", "k", "Q", "K", "Psi", "psi", "Sigma", "Phi", "phiTilde", "N4", "E", "Omega"]


def rates_table(cfg: Config, variants: list[Variant], kmax: int, cap: int) -> list[list[str]]:
    inst = cfg.instance
    b = inst.bounds
    f_spec = (cfg.verify.get("meta", {}) or {}).get("f")
    f = Counterfunction.from_config(f_spec[0]) if f_spec else Counterfunction.constant(0)
    rows = []
    for v in variants:
        r = inst.rates(v)
        tv = TheoremVariant.for_variant(v)
        tau_ok = has_tau(inst.family)
        try:
            params = MetaParams.build(b, inst.schedule, tv, tau=inst.family.tau, cap=cap)
        except ValueError:
            params = None
        for k in range(kmax + 1):
            row = [v.value, str(k), str(b.Q), str(b.K), str(r.Psi(k)),
                   str(r.psi(k)) if inst.schedule.sigma3 else "n/a",
                   str(r.Sigma(k)), str(r.Phi(k)),
                   str(r.phi_tilde(k)) if tau_ok else "n/a",
                   str(r.N4(k)) if inst.schedule.sigma4 else "n/a",
                   str(E_bound(b, k, cap)),
                   str(Omega(params, k, f)) if (params is not None and tau_ok) else "n/a"]
            rows.append(row)
    return rows


def parse_rate_cell(text: str):
    """Inverse of the table formatting: int, ``Exceeded(cap)`` or ``n/a``."""
    if text == "n/a":
        return None
    if text.startswith("Exceeded(") and text.endswith(")"):
        return ExtNat.exceeded(int(text[len("Exceeded("):-1]))
    return ExtNat(int(text), 10**400)


@main.command()
@common_options
@click.option("--variant", default=None, help="Rate variant, e.g. C3+C2* (default: all available).")
def rates(config_path, out_dir, cap, seed, kmax, budget, variant):
    """Tabulate Q, K, Psi, psi, Sigma, Phi, phi~, N4, E and Omega for k <= kmax."""
    cfg = _load(config_path, cap)
    variants = _variants(cfg, variant)
    try:
        rows = rates_table(cfg, variants, 5 if kmax is None else kmax, cap)
    except ValueError as exc:
        _fail_config(str(exc))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RATE_COLUMNS)
    w.writerows(rows)
    _emit(out_dir, "rates.csv", buf.getvalue())
    click.echo(buf.getvalue(), nl=False)


# -- verify -------------------------------------------------------------------

YAMADA_TOL = 1e-10
SUITES = ("asreg", "gap", "meta", "xulemma", "tau", "embedding")


@main.command()
@common_options
@click.option("--suite", type=click.Choice(SUITES), required=True)
@click.option("--variant", default=None)
def verify(config_path, out_dir, cap, seed, kmax, budget, suite, variant):
    """Run one verification suite and write <suite>.csv / <suite>.json."""
    cfg = _load(config_path, cap)
    inst = cfg.instance
    vcfg = cfg.verify
    report = Report(suite)
    try:
        if suite in ("asreg", "gap"):
            k_max = kmax if kmax is not None else int(vcfg.get("kmax", 24))
            bud = budget if budget is not None else int(vcfg.get("budget", 10**6))
            report = sweep(inst, _variants(cfg, variant), k_max, bud, (suite,))
            for name, st in report.invariants.items():
                report.add(f"invariant:{name}", "", st["checked"], st["worst_excess"], 0.0,
                           st["violations"] == 0)
        elif suite == "meta":
            mcfg = vcfg.get("meta", {}) or {}
            ks = [kmax] if kmax is not None else list(mcfg.get("k", [0]))
            fs = {json.dumps(s, sort_keys=True): Counterfunction.from_config(s)
                  for s in mcfg.get("f", [{"kind": "affine", "a": 1, "b": 10}])}
            bud = budget if budget is not None else int(mcfg.get("budget", 10**5))
            omega = None
            tv_name = mcfg.get("omega_variant")
            if tv_name and has_tau(inst.family):
                tv = TheoremVariant.for_variant(Variant.parse(tv_name))
                params = MetaParams.build(inst.bounds, inst.schedule, tv, tau=inst.family.tau, cap=cap)
                omega = lambda k, f: Omega(params, k, f)  # noqa: E731
            report = verify_meta(inst, ks, fs, bud, omega)
            for r in report.rows:
                if r.passed:
                    click.echo(f"k={r.k} f={r.check[5:-1]} N={r.index}")
        elif suite == "xulemma":
            cases = int((vcfg.get("xulemma", {}) or {}).get("cases", 100))
            for c in COMBINATORS:
                report.extend(randomized_xu_lemma(c, cases, seed, 3 if kmax is None else kmax))
        elif suite == "tau":
            tcfg = vcfg.get("tau", {}) or {}
            tau = parse_tau(tcfg.get("tau"))
            if tau is None and not has_tau(inst.family):
                tau = int  # probe the identity modulus
            ce = falsify_tau(inst.family, inst.bounds.K, samples=int(tcfg.get("samples", 5000)), tau=tau,
                             k_max=kmax if kmax is not None else int(tcfg.get("kmax", 20)), seed=seed)
            if ce is None:
                report.add("tau", "", "", "no counterexample", "", True)
            else:
                report.add("tau", ce.k, ce.m, ce.composite_residual, max(ce.individual_residuals), False)
                report.notes.append(f"counterexample x={ce.x.tolist()}")
        else:
            ecfg = vcfg.get("embedding", {}) or {}
            N = budget if budget is not None else int(ecfg.get("N", 10**4))
            for mu in ecfg.get("mu", [1.0]):
                dev = engine.check_embedding(inst, N, float(mu))
                tol = float(ecfg.get("tol", 1e-10))
                report.add(f"embedding[mu={mu}]", "", N, dev, tol, dev <= tol)
    except engine.EmbeddingHypothesisViolated as exc:
        _fail_config(str(exc))
    except ValueError as exc:
        _fail_config(str(exc))
    _finish(report, out_dir, suite)


@main.command("compare-yamada")
@common_options
@click.option("--mu", type=float, default=1.0, show_default=True)
def compare_yamada(config_path, out_dir, cap, seed, kmax, budget, mu):
    """Largest distance between Xu's and Yamada's trajectories."""
    cfg = _load(config_path, cap)
    N = budget if budget is not None else 10**4
    try:
        dev = engine.check_embedding(cfg.instance, N, mu)
    except (engine.EmbeddingHypothesisViolated, ValueError) as exc:
        _fail_config(str(exc))
    tol = YAMADA_TOL
    out = {"N": N, "mu": mu, "max_deviation": dev, "tolerance": tol, "pass": dev <= tol}
    _emit(out_dir, "compare-yamada.json", json.dumps(out, indent=2, sort_keys=True) + "\n")
    click.echo(json.dumps(out, sort_keys=True))
    sys.exit(0 if dev <= tol else EXIT_FAIL)


@main.command()
@common_options
def oracle(config_path, out_dir, cap, seed, kmax, budget):
    """Closed-form minimizer and its variational-inequality residual."""
    cfg = _load(config_path, cap)
    inst = cfg.instance
    x_star = oracle_point(cfg)
    if x_star is None:
        _fail_config("no oracle section in config")
    rng = np.random.default_rng(seed)
    spec = cfg.oracle
    pts = rng.standard_normal((200, inst.dim)) * 10
    if "affine" in spec and (spec["affine"] or {}).get("basis") is not None:
        aff = spec["affine"]
        B = np.array(aff["basis"], dtype=float).reshape(inst.dim, -1)
        off = np.array(aff.get("offset") or np.zeros(inst.dim), dtype=float)
        samples = off + (rng.standard_normal((200, B.shape[1])) * 10) @ B.T
    elif "affine" in spec:
        samples = pts
    else:
        samples = np.array([inst.family.maps[0](p) for p in pts])
    res = engine.vip_residual(inst.A, inst.u, x_star, samples)
    out = {"x_star": x_star.tolist(), "vip_residual": res, "pass": res <= 1e-8}
    _emit(out_dir, "oracle.json", json.dumps(out, indent=2, sort_keys=True) + "\n")
    click.echo(json.dumps(out, sort_keys=True))
    sys.exit(0 if res <= 1e-8 else EXIT_FAIL)


if __name__ == "__main__":  # pragma: no cover
    main()
