"""Command-line orchestration: experiments, reports, rate fits, plot data.

Subcommands: train, props, stability, margin, sweep, fit, plots,
selftest.  Common flags: --config PATH (TOML), --out DIR, --seed N,
--jobs N, --quiet.  The environment variable SBWC_LAB_OUT overrides the
output directory.  Every run echoes its fully resolved configuration to
<out>/config.json.  Exit code 0 iff every applicable property check
passed; not-applicable checks never fail a run.
"""

from __future__ import annotations

import argparse
import csv as _csv
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .activations import activation
from .config import ConfigError, ExperimentConfig, load_config
from .datasets import (Dataset, gen_xor, init_output_bound, load_csv,
                       make_scenario, ntk_features, ntk_margin,
                       build_realizability_linear, build_realizability_ntk)
from .losses import parse_loss
from .model import NetworkShape
from .objective import Objective, MinEigError
from .properties import (NOT_APPLICABLE, PropertyReport, check_expansiveness,
                         check_glqc, check_interpolation, check_sbwc,
                         check_train_bounds)
from .rng import substream
from .stability import gen_gap_estimate, run_loo_stability
from .trainer import GDConfig, init_weights, train, verify_descent

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Rate fitting


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log y against log x."""

    slope: float
    intercept: float
    r2: float
    points: int


def fit_rate(series) -> RateFit:
    """Fit log y = slope * log x + intercept; needs >= 4 points, y > 0."""
    pts = [(float(x), float(y)) for x, y in series]
    if len(pts) < 4:
        raise ValueError(f"rate fit needs at least 4 points, got {len(pts)}")
    if any(x <= 0 for x, _ in pts):
        raise ValueError("rate fit needs positive x values")
    if any(y <= 0 for _, y in pts):
        raise ValueError("rate fit needs positive y values")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, _, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return RateFit(slope=float(coef[0]), intercept=float(coef[1]), r2=r2,
                   points=len(pts))


# ---------------------------------------------------------------------------
# Scenario / objective assembly


def build_dataset(cfg: ExperimentConfig, seed: int, n: int | None = None,
                  gamma: float | None = None):
    """Dataset (plus planted direction for linsep) for the configured scenario."""
    n = n if n is not None else cfg.scenario_n
    gamma = gamma if gamma is not None else cfg.scenario_gamma
    if cfg.scenario_kind == "xor":
        return gen_xor(cfg.scenario_d, n, substream(seed, "data")), None
    if cfg.scenario_kind == "linsep":
        scen = make_scenario("linsep", cfg.scenario_d, gamma, seed=seed)
        return scen.sample(n, substream(seed, "data")), scen.v_star
    if cfg.scenario_kind == "csv":
        return load_csv(cfg.scenario_path), None
    raise ConfigError(f"scenario.kind: unknown {cfg.scenario_kind!r}")


def build_objective(cfg: ExperimentConfig, dataset: Dataset,
                    m: int | None = None) -> Objective:
    m = m if m is not None else cfg.m
    shape = NetworkShape(m=m, d=dataset.d)
    return Objective(dataset=dataset, loss=parse_loss(cfg.loss),
                     activation=activation(cfg.activation), shape=shape)


def build_gd_config(cfg: ExperimentConfig, seed: int, T: int | None = None,
                    record_every: int | None = None) -> GDConfig:
    return GDConfig(step_policy=cfg.gd_policy, step_size=cfg.gd_step_size,
                    T=T if T is not None else cfg.gd_T, init=cfg.gd_init,
                    init_scale=cfg.gd_init_scale, seed=seed,
                    record_every=cfg.gd_record_every if record_every is None else record_every)


def _linear_cert(cfg, obj, v_star, T):
    """Realizability certificate at eps = 1/T for linsep scenarios, if valid."""
    if v_star is None or cfg.activation != "tanh" or cfg.loss != "logistic":
        return None
    eps = 1.0 / T
    if obj.shape.m < 4.0 * np.log(1.0 / eps) ** 2:
        return None
    return build_realizability_linear(obj, v_star, cfg.scenario_gamma, eps)


# ---------------------------------------------------------------------------
# Output plumbing


def resolve_out(cfg: ExperimentConfig, args) -> Path:
    out = os.environ.get("SBWC_LAB_OUT") or args.out or cfg.out
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def echo_config(cfg: ExperimentConfig, out: Path) -> None:
    (out / "config.json").write_text(cfg.to_json())


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def _report_lines(args, reports):
    for r in reports:
        _say(args, f"  [{r.status:>14}] {r.name:<16} worst_slack={r.worst_slack:.3e}")


def _write_reports(reports, out: Path, name="properties.json"):
    payload = [json.loads(r.to_json()) for r in reports]
    (out / name).write_text(json.dumps(payload, indent=2))


def _exit_code(reports) -> int:
    return 1 if any(r.failed for r in reports) else 0


# ---------------------------------------------------------------------------
# Subcommands


def cmd_train(cfg: ExperimentConfig, args) -> int:
    out = resolve_out(cfg, args)
    echo_config(cfg, out)
    seed = cfg.seed
    dataset, v_star = build_dataset(cfg, seed)
    obj = build_objective(cfg, dataset)
    gd = build_gd_config(cfg, seed)
    trace = train(obj, gd)
    trace.to_csv(out / "trace.csv")
    trace.to_json(out / "summary.json")
    reports = []
    for t in sorted(trace.checkpoints):
        try:
            reports.append(check_sbwc(obj, trace.checkpoints[t]))
        except MinEigError as exc:
            reports.append(PropertyReport(name="sbwc", status="fails",
                                          worst_slack=float("-inf"),
                                          witness={"error": str(exc), "t": t}, params={}))
    cert = _linear_cert(cfg, obj, v_star, gd.T)
    if cert is not None:
        reports.append(check_train_bounds(trace, cert))
    frac = check_interpolation(obj.activation, trace.final_weights, dataset)
    _say(args, f"train: risk {trace.risk[0]:.6f} -> {trace.risk[-1]:.6f} in T={gd.T} "
               f"(eta={trace.eta:.4g}); misclassified fraction {frac:.4f}")
    _report_lines(args, reports)
    _write_reports(reports, out)
    return _exit_code(reports)


def cmd_props(cfg: ExperimentConfig, args) -> int:
    out = resolve_out(cfg, args)
    echo_config(cfg, out)
    seed = cfg.seed
    dataset, v_star = build_dataset(cfg, seed)
    obj = build_objective(cfg, dataset)
    stride = max(1, cfg.gd_T // 8)
    gd = build_gd_config(cfg, seed, record_every=stride)
    trace = train(obj, gd)
    trace.to_csv(out / "trace.csv")
    ts = sorted(trace.checkpoints)
    reports = []
    for t in ts:
        reports.append(check_sbwc(obj, trace.checkpoints[t]))
    for t0, t1 in zip(ts[:-1], ts[1:]):
        reports.append(check_glqc(obj, trace.checkpoints[t0], trace.checkpoints[t1],
                                  grid_size=200))
    rng = substream(seed, "props")
    for t in ts[: max(1, len(ts) // 2)]:
        w = trace.checkpoints[t]
        w2 = w + 0.05 * rng.standard_normal(w.shape)
        form = "self_bounded" if cfg.loss == "logistic" else "general"
        reports.append(check_expansiveness(obj, w, w2, trace.eta, grid_size=200,
                                           form=form))
    cert = _linear_cert(cfg, obj, v_star, gd.T)
    if cert is not None:
        reports.append(check_train_bounds(trace, cert))
    frac = check_interpolation(obj.activation, trace.final_weights, dataset)
    descent = verify_descent(trace)
    _say(args, f"props: descent slack {descent:.3e}; misclassified fraction {frac:.4f}")
    _report_lines(args, reports)
    _write_reports(reports, out)
    applicable = [r for r in reports if r.status != NOT_APPLICABLE]
    _say(args, f"props: {sum(r.holds for r in applicable)}/{len(applicable)} applicable checks hold")
    return _exit_code(reports)


def cmd_stability(cfg: ExperimentConfig, args) -> int:
    out = resolve_out(cfg, args)
    echo_config(cfg, out)
    seed = cfg.seed
    dataset, _ = build_dataset(cfg, seed)
    obj = build_objective(cfg, dataset)
    gd = build_gd_config(cfg, seed)
    full, report = run_loo_stability(obj, gd, check_expansion=not args.fast_stability)
    (out / "stability.json").write_text(report.to_json())
    full.to_csv(out / "trace.csv")
    _say(args, f"stability: average {report.average:.6g} vs bound {report.bound:.6g} "
               f"(width conds: {report.width_cond_iterates}, {report.width_cond_regret})")
    ok = report.satisfied or not (report.width_cond_iterates and report.width_cond_regret)
    if report.expansion_worst_slack is not None:
        _say(args, f"stability: per-step expansion worst slack {report.expansion_worst_slack:.3e}")
        ok = ok and report.expansion_worst_slack >= -1e-8

    if cfg.scenario_kind in ("xor", "linsep"):
        scen = make_scenario(cfg.scenario_kind, cfg.scenario_d, cfg.scenario_gamma, seed=seed)
        ns = list(cfg.sweep_n) or [cfg.scenario_n]
        rows = []
        fits_input = []
        for n in ns:
            rep = gen_gap_estimate(scen, gd, n, obj.shape, obj.activation, obj.loss,
                                   trials=cfg.stability_trials,
                                   test_size=cfg.stability_test_size, seed=seed)
            gaps = rep.test_losses - rep.train_losses
            for k, gap in enumerate(gaps):
                rows.append((n, k, float(gap), rep.theoretical))
            _say(args, f"gap: n={n} mean {rep.mean_gap:.6g} (se {rep.se_gap:.2g}) "
                       f"bound {rep.theoretical}")
            if rep.theoretical is not None and rep.mean_gap > rep.theoretical + 3 * rep.se_gap:
                ok = False
            if rep.mean_gap > 0:
                fits_input.append((n, rep.mean_gap))
        with open(out / "gap_sweep.csv", "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["n", "trial", "gap", "bound"])
            for row in rows:
                w.writerow([row[0], row[1], repr(row[2]), repr(row[3]) if row[3] is not None else ""])
        if len(fits_input) >= 4:
            fit = fit_rate(fits_input)
            (out / "gap_rate.json").write_text(json.dumps({
                "schema_version": SCHEMA_VERSION, "slope": fit.slope,
                "intercept": fit.intercept, "r2": fit.r2, "points": fit.points}))
            _say(args, f"gap rate: slope {fit.slope:.3f} (r2 {fit.r2:.3f})")
    return 0 if ok else 1


def cmd_margin(cfg: ExperimentConfig, args) -> int:
    out = resolve_out(cfg, args)
    echo_config(cfg, out)
    seed = cfg.seed
    dataset, _ = build_dataset(cfg, seed)
    obj = build_objective(cfg, dataset)
    w0 = init_weights(obj.shape, "gaussian", seed=seed, scale=cfg.gd_init_scale)
    feats = ntk_features(obj.shape, obj.activation, w0, dataset)
    cert = ntk_margin(feats, dataset.y, max_iters=args.margin_iters)
    bound = init_output_bound(obj.shape, obj.activation, w0, dataset, cfg.delta)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "gamma_hat": cert.gamma_hat,
        "separated": cert.separated,
        "iterations": cert.iterations,
        "init_bound_C": bound.C,
        "init_bound_theoretical": bound.theoretical,
        "delta": cfg.delta,
    }
    mu = obj.activation.mu
    if mu:
        d = dataset.d
        payload["prop_margin_width"] = (80.0**2 * d**3 * obj.activation.ell**2
                                        / (2.0 * mu**2) * np.log(2.0 / cfg.delta))
        payload["prop_margin_gamma"] = mu / (80.0 * d)
    if not cert.separated:
        _say(args, f"margin: not separated at this width/seed (gamma_hat={cert.gamma_hat:.3e})")
    else:
        _say(args, f"margin: gamma_hat={cert.gamma_hat:.6g}, C={bound.C:.4g} "
                   f"(theoretical {bound.theoretical:.4g})")
        if cfg.loss == "logistic":
            rcert = build_realizability_ntk(obj, w0, cert, bound.C, cfg.eps)
            (out / "realizability.json").write_text(rcert.to_json())
            payload["realizability"] = {
                "eps": rcert.eps, "g_eps": rcert.g_eps,
                "measured_risk": rcert.measured_risk,
                "width_required": rcert.width_required, "width_ok": rcert.width_ok,
            }
            _say(args, f"margin: realizability risk {rcert.measured_risk:.4g} at "
                       f"g_eps {rcert.g_eps:.4g} (width ok: {rcert.width_ok})")
    (out / "margin.json").write_text(json.dumps(payload, indent=2))
    (out / "margin_cert.json").write_text(cert.to_json())
    return 0


def _sweep_point(cfg, T, n, m, gamma, seed):
    dataset, v_star = build_dataset(cfg, seed, n=n, gamma=gamma)
    obj = build_objective(cfg, dataset, m=m)
    gd = build_gd_config(cfg, seed, T=T)
    trace = train(obj, gd)
    return {
        "T": T, "n": n, "m": m, "gamma": gamma if gamma is not None else "",
        "seed": seed, "eta": trace.eta, "risk_final": float(trace.risk[-1]),
        "regret": trace.regret, "dist_init_max": float(np.max(trace.dist_init)),
        "grad_norm_final": float(trace.grad_norm[-1]),
    }


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    out = resolve_out(cfg, args)
    echo_config(cfg, out)
    Ts = list(cfg.sweep_T) or [cfg.gd_T]
    ns = list(cfg.sweep_n) or [cfg.scenario_n]
    ms = list(cfg.sweep_m) or [cfg.m]
    gammas = list(cfg.sweep_gamma) or [cfg.scenario_gamma]
    seeds = list(cfg.sweep_seeds)
    points = list(itertools.product(Ts, ns, ms, gammas, seeds))
    _say(args, f"sweep: {len(points)} points on {args.jobs} workers")
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(lambda p: _sweep_point(cfg, *p), points))
    else:
        rows = [_sweep_point(cfg, *p) for p in points]
    cols = ["T", "n", "m", "gamma", "seed", "eta", "risk_final", "regret",
            "dist_init_max", "grad_norm_final"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([row[c] if isinstance(row[c], (int, str)) else repr(row[c])
                        for c in cols])
    fits = []
    if len(Ts) >= 4:
        for (n, m, gamma) in itertools.product(ns, ms, gammas):
            series = []
            for T in Ts:
                vals = [r["risk_final"] for r in rows
                        if r["T"] == T and r["n"] == n and r["m"] == m]
                if vals and np.mean(vals) > 0:
                    series.append((T, float(np.mean(vals))))
            if len(series) >= 4:
                fit = fit_rate(series)
                fits.append({"n": n, "m": m, "gamma": gamma, "axis": "T",
                             "slope": fit.slope, "intercept": fit.intercept,
                             "r2": fit.r2, "points": fit.points})
                _say(args, f"sweep fit: risk_final vs T at n={n} m={m}: "
                           f"slope {fit.slope:.3f} (r2 {fit.r2:.3f})")
    if fits:
        (out / "fits.json").write_text(json.dumps(
            {"schema_version": SCHEMA_VERSION, "fits": fits}, indent=2))
    return 0


def cmd_fit(cfg: ExperimentConfig, args) -> int:
    with open(args.csv, newline="") as fh:
        reader = _csv.DictReader(fh)
        series = [(float(row[args.x]), float(row[args.y]))
                  for row in reader if row[args.y] not in ("", None)]
    fit = fit_rate(series)
    payload = {"schema_version": SCHEMA_VERSION, "slope": fit.slope,
               "intercept": fit.intercept, "r2": fit.r2, "points": fit.points,
               "x": args.x, "y": args.y, "csv": str(args.csv)}
    print(json.dumps(payload))
    if args.out:
        out = resolve_out(cfg, args)
        (out / "fit.json").write_text(json.dumps(payload, indent=2))
    return 0


_RENDER_SCRIPT = '''#!/usr/bin/env python3
"""Render every tidy CSV in plot_data/ (columns x, y, series) to PNG."""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

base = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
for path in sorted((base / "plot_data").glob("*.csv")):
    series = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            series[row["series"]].append((float(row["x"]), float(row["y"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                markersize=3, label=name)
    if all(y > 0 for pts in series.values() for _, y in pts):
        ax.set_yscale("log")
        if all(x > 0 for pts in series.values() for x, _ in pts):
            ax.set_xscale("log")
    ax.set_title(path.stem)
    ax.legend()
    fig.tight_layout()
    fig.savefig(base / (path.stem + ".png"), dpi=130)
    plt.close(fig)
    print("rendered", path.stem + ".png")
'''


def emit_plots(result_dir: Path, quiet: bool = False) -> list:
    """Write tidy (x, y, series) data files and a standalone renderer.

    No rendering happens here; run the emitted render_plots.py (needs
    matplotlib) to produce images.
    """
    result_dir = Path(result_dir)
    plot_dir = result_dir / "plot_data"
    written = []

    def tidy(name, rows):
        plot_dir.mkdir(parents=True, exist_ok=True)
        path = plot_dir / name
        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["x", "y", "series"])
            for row in rows:
                w.writerow(row)
        written.append(path)

    trace = result_dir / "trace.csv"
    if trace.exists():
        rows = []
        with open(trace, newline="") as fh:
            for rec in _csv.DictReader(fh):
                for col in ("risk", "grad_norm", "dist_init"):
                    rows.append((rec["t"], rec[col], col))
        tidy("trace.csv", rows)
    gap = result_dir / "gap_sweep.csv"
    if gap.exists():
        by_n = {}
        bounds = {}
        with open(gap, newline="") as fh:
            for rec in _csv.DictReader(fh):
                by_n.setdefault(int(rec["n"]), []).append(float(rec["gap"]))
                if rec["bound"]:
                    bounds[int(rec["n"])] = float(rec["bound"])
        rows = [(n, float(np.mean(v)), "mean_gap") for n, v in sorted(by_n.items())]
        rows += [(n, b, "bound") for n, b in sorted(bounds.items())]
        tidy("gap_vs_n.csv", rows)
    sweep = result_dir / "sweep.csv"
    if sweep.exists():
        rows = []
        with open(sweep, newline="") as fh:
            for rec in _csv.DictReader(fh):
                label = f"n={rec['n']},m={rec['m']},seed={rec['seed']}"
                rows.append((rec["T"], rec["risk_final"], label))
        tidy("risk_vs_T.csv", rows)

    if not written:
        if not quiet:
            print("nothing to plot in", result_dir)
        return []
    script = result_dir / "render_plots.py"
    script.write_text(_RENDER_SCRIPT)
    written.append(script)
    if not quiet:
        for p in written:
            print("wrote", p)
    return written


def cmd_plots(cfg: ExperimentConfig, args) -> int:
    out = resolve_out(cfg, args)
    emit_plots(out, quiet=args.quiet)
    return 0


def cmd_selftest(cfg: ExperimentConfig, args) -> int:
    """Fast sanity battery plus a negative control (injected fault)."""
    from .datasets import gen_linsep
    ok = True

    # 1. analytic gradient vs. central finite differences, tiny instance
    ds, _ = gen_linsep(2, 0.5, 3, 7)
    shape = NetworkShape(m=2, d=2)
    obj = Objective(dataset=ds, loss=parse_loss("logistic"),
                    activation=activation("tanh"), shape=shape)
    rng = substream(7, "init")
    w = 0.5 * rng.standard_normal(shape.param_dim)
    _, g = obj.risk_and_grad(w)
    h = 1e-6
    fd = np.array([(obj.risk(w + h * e) - obj.risk(w - h * e)) / (2 * h)
                   for e in np.eye(shape.param_dim)])
    rel = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-30)
    ok &= rel <= 1e-5
    _say(args, f"selftest: gradient vs finite differences rel err {rel:.2e} "
               f"({'ok' if rel <= 1e-5 else 'FAIL'})")

    # 2. descent property on a short run
    gd = GDConfig(step_policy="smoothness", T=32, init="zero", seed=0)
    trace = train(obj, gd)
    slack = verify_descent(trace)
    ok &= slack >= -1e-12
    _say(args, f"selftest: descent worst slack {slack:.2e} "
               f"({'ok' if slack >= -1e-12 else 'FAIL'})")

    # 3. curvature lower bound at a point with negative curvature,
    #    then the same check with the sign of kappa deliberately flipped:
    #    the flipped predicate must FAIL, proving the checker can fail.
    found = False
    for s in range(10):
        rng = substream(s, "init")
        w = rng.standard_normal(shape.param_dim)
        rep = check_sbwc(obj, w, method="dense")
        lam = rep.witness["lambda_min"]
        if lam < -1e-10:
            found = True
            ok &= rep.holds
            _say(args, f"selftest: curvature bound slack {rep.worst_slack:.2e} "
                       f"({'ok' if rep.holds else 'FAIL'})")
            bad_slack = lam - obj.kappa * rep.witness["risk"]
            fault_detected = bad_slack < 0
            ok &= fault_detected
            _say(args, f"selftest: negative control (flipped kappa sign) "
                       f"{'detected' if fault_detected else 'MISSED'}")
            break
    if not found:
        ok = False
        _say(args, "selftest: FAIL could not find a negative-curvature witness")

    _say(args, "selftest: PASS" if ok else "selftest: FAIL")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# Entry point


_COMMON_DEFAULTS = {"config": None, "out": None, "seed": None, "jobs": 1,
                    "quiet": False, "fast_stability": False, "margin_iters": 2000}


def make_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps subcommand parsing from clobbering flags given before
    # the subcommand; main() fills in the defaults afterwards.
    sup = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=sup, help="TOML config file")
    common.add_argument("--out", type=str, default=sup, help="output directory")
    common.add_argument("--seed", type=int, default=sup, help="override top-level seed")
    common.add_argument("--jobs", type=int, default=sup, help="worker pool size for sweeps")
    common.add_argument("--quiet", action="store_true", default=sup)
    parser = argparse.ArgumentParser(prog="sbwc-lab", parents=[common],
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common],
                   help="train once; emit trace + property reports")
    sub.add_parser("props", parents=[common],
                   help="run the inequality-checker suite along a run")
    st = sub.add_parser("stability", parents=[common],
                        help="leave-one-out stability + generalization gaps")
    st.add_argument("--fast-stability", action="store_true",
                    help="skip the per-step expansion-factor check")
    mg = sub.add_parser("margin", parents=[common],
                        help="tangent-feature margin and certificates")
    mg.add_argument("--margin-iters", type=int, default=2000)
    sub.add_parser("sweep", parents=[common],
                   help="cross-product sweep over configured axes")
    ft = sub.add_parser("fit", parents=[common],
                        help="log-log rate fit of a CSV column pair")
    ft.add_argument("--csv", required=True)
    ft.add_argument("--x", required=True)
    ft.add_argument("--y", required=True)
    sub.add_parser("plots", parents=[common],
                   help="emit tidy plot data + renderer script")
    sub.add_parser("selftest", parents=[common],
                   help="sanity battery incl. fault-injection control")
    return parser


_HANDLERS = {
    "train": cmd_train,
    "props": cmd_props,
    "stability": cmd_stability,
    "margin": cmd_margin,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "plots": cmd_plots,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    for key, value in _COMMON_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
