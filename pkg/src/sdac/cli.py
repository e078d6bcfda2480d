"""
``sdac-sim`` command line.

    sdac-sim run     --config scenario.yaml --out results/
    sdac-sim compare --config scenario.yaml --out results/
    sdac-sim check   --config scenario.yaml [--out results/]

Structured errors are reported on stderr with exit code 2.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import controllability, lyapunov_monotonicity, maneuverable, stabilizability
from .config import load_config
from .dynamics import find_trim
from .errors import SdacError
from .sim import ScenarioConfig, SimLog, build_reference, metrics, run_scenario


def _phases(cfg: ScenarioConfig):
    t_ev = cfg.uncertainty.t_event
    phases = [("pre_sdac", 0.0, min(cfg.t_on, cfg.duration))]
    if np.isfinite(t_ev):
        phases += [("sdac_nominal", cfg.t_on, t_ev), ("post_event", t_ev, cfg.duration)]
        if t_ev + 5.0 < cfg.duration:
            phases.append(("post_event_settled", t_ev + 5.0, cfg.duration))
    else:
        phases.append(("sdac", cfg.t_on, cfg.duration))
    return [(name, a, b) for name, a, b in phases if b > a]


def _metric_rows(log: SimLog, cfg: ScenarioConfig, label: str):
    rows = []
    for phase, a, b in _phases(cfg):
        for row in metrics(log, a, b).as_rows(label):
            rows.append([row[0], phase, a, b] + row[1:])
    return rows


def _write_metrics(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "phase", "t_from", "t_to", "metric", "axis", "value"])
        for r in rows:
            w.writerow(r[:6] + [repr(float(r[6]))])


def _model_table(log: SimLog):
    lines = ["window  t[s]    valid  residual   crank  ctrb  published  rho(A-BK)"]
    for m in log.models:
        rho = f"{m.gain.spectral_radius:.4f}" if m.gain is not None else "-"
        lines.append(
            f"{m.model.window_id:6d}  {m.t:6.2f}  {int(m.model.valid):5d}  {m.model.residual:.3e}"
            f"  {m.rank:4d}  {int(m.controllable):4d}  {int(m.published):9d}  {rho}"
        )
    return lines


def _events(log: SimLog, cfg: ScenarioConfig):
    ev = [m.t for m in log.models if m.published]
    if np.isfinite(cfg.uncertainty.t_event):
        ev.append(cfg.uncertainty.t_event)
    return ev


def _summary(log: SimLog, cfg: ScenarioConfig):
    d = log.col("delta", 4)
    lo, hi = cfg.params.delta_min, cfg.params.delta_max
    ctrb = log.col("ctrb")
    lines = [
        f"mode: {log.mode}",
        f"samples: {len(log.t)}  duration: {cfg.duration} s  dt: {cfg.dt} s  Ts: {cfg.Ts} s",
        f"commands within bounds: {bool(np.all((d >= lo) & (d <= hi)))}",
        f"saturated samples per effector: {log.col('sat', 4).sum(axis=0).astype(int).tolist()}",
        f"controllability flag after first window: {sorted(set(ctrb[log.t >= cfg.P_w].astype(int).tolist()))}",
        f"gains published: {sum(m.published for m in log.models)} of {len(log.models)} windows",
    ]
    if log.mode == "sdac":
        V = log.col("V_smc") + log.col("V_lqr")
        chk = lyapunov_monotonicity(log.t, V, _events(log, cfg), cfg.dt, cfg.Ts)
        lines.append(
            f"composite Lyapunov non-increasing between events: {chk.ok} "
            f"({chk.n_violations} of {chk.n_steps} steps above tol {chk.tol:.3e})"
        )
    return lines


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    log = run_scenario(cfg)
    elapsed = time.perf_counter() - t0
    log.to_csv(out / "log.csv")
    rows = _metric_rows(log, cfg, log.mode)
    _write_metrics(out / "metrics.csv", rows)
    lines = _summary(log, cfg) + [f"runtime: {elapsed:.2f} s", ""] + _model_table(log)
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines[:7]))
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    t0 = time.perf_counter()
    trim = find_trim(cfg.params, cfg.airspeed)
    ref = build_reference(cfg, trim)
    logs = {}
    for mode in ("sdac", "smc_only"):
        run_cfg = ScenarioConfig(**{**cfg.__dict__, "mode": mode})
        logs[mode] = run_scenario(run_cfg, reference=ref)
        sub = out / mode
        sub.mkdir(parents=True, exist_ok=True)
        logs[mode].to_csv(sub / "log.csv")
    elapsed = time.perf_counter() - t0
    rows = []
    for mode, log in logs.items():
        rows += _metric_rows(log, cfg, mode)
    _write_metrics(out / "metrics.csv", rows)

    lines = [f"paired runtime: {elapsed:.2f} s", ""]
    lines.append("momentum tracking RMS ||L - L_d||")
    lines.append(f"{'phase':20s} {'t_from':>7s} {'t_to':>7s} {'sdac':>12s} {'smc_only':>12s} {'ratio':>9s}")
    for phase, a, b in _phases(cfg):
        r_s = metrics(logs["sdac"], a, b).momentum_rms
        r_b = metrics(logs["smc_only"], a, b).momentum_rms
        ratio = r_b / r_s if r_s > 0 else np.inf
        lines.append(f"{phase:20s} {a:7.2f} {b:7.2f} {r_s:12.5g} {r_b:12.5g} {ratio:9.3g}")
    t = logs["sdac"].t
    t_ev = cfg.uncertainty.t_event
    sel = (t > cfg.t_on + cfg.P_w) & (t < t_ev)
    if np.any(sel):
        span = cfg.params.delta_max - cfg.params.delta_min
        diff = np.abs(logs["sdac"].col("delta", 4)[sel] - logs["smc_only"].col("delta", 4)[sel]).max(axis=0)
        lines.append("")
        lines.append(f"max |delta_sdac - delta_smc| / range before the event: {np.round(diff / span, 4).tolist()}")
    for mode, log in logs.items():
        lines += ["", f"[{mode}]"] + _summary(log, cfg) + [""] + _model_table(log)
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines[: 5 + len(_phases(cfg))]))
    return 0


def certify(cfg: ScenarioConfig, log: SimLog = None):
    """Controllability, stabilizability and maneuverability of every
    identified window along a run.

    Returns ``(ok, window_rows, sample_rows)``.  Each valid window is
    checked against the reference momentum of the span it governs (the
    following ``P_w`` seconds).
    """
    log = run_scenario(cfg) if log is None else log
    t = log.t
    grid = np.abs(t / cfg.Ts - np.round(t / cfg.Ts)) < 1e-9
    tg, Ld, Lo = t[grid], log.col("L_d", 6)[grid], log.col("L_obs", 6)[grid]
    bounds = (cfg.params.delta_min, cfg.params.delta_max)
    ok = True
    windows, samples = [], []
    for m in log.models:
        model = m.model
        rank, ctrb = controllability(model.A, model.B, cfg.rank_tol)
        stab = stabilizability(model.A, model.B, cfg.rank_tol)
        row = {"window_id": model.window_id, "t": m.t, "valid": model.valid, "rank": rank, "controllable": ctrb, "stabilizable": stab}
        span = (tg >= m.t - 1e-9) & (tg < m.t + cfg.P_w - 1e-9) & (tg >= cfg.t_on - 1e-9)
        idx = np.flatnonzero(span)
        idx = idx[idx + 1 < len(tg)]
        if model.valid and idx.size:
            traj = [(Ld[i], (Ld[i + 1] - Ld[i]) / cfg.Ts) for i in idx]
            man = maneuverable(model, traj, bounds, delta_base=m.delta_base, L_ref=Lo[idx[0]])
            row.update(maneuverable=man.ok, margin=man.margin)
            for i, res, mar in zip(idx, man.residuals, man.margins):
                samples.append([tg[i], model.window_id, res, mar, bool(res < 1e-6)])
            ok &= man.ok
        else:
            row.update(maneuverable=None, margin=np.nan)
        ok &= bool(ctrb or not model.valid)
        windows.append(row)
    return bool(ok), windows, samples


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    ok, windows, samples = certify(cfg)
    lines = ["window  t[s]    valid crank  ctrb  stab  maneuverable  margin"]
    for w in windows:
        man = "-" if w["maneuverable"] is None else str(int(w["maneuverable"]))
        lines.append(
            f"{w['window_id']:6d}  {w['t']:6.2f}  {int(w['valid']):5d}  {w['rank']:4d}  {int(w['controllable']):4d}"
            f"  {int(w['stabilizable']):4d}  {man:>12s}  {w['margin']:.4f}"
        )
    lines.append("")
    lines.append(f"certified: {ok}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        with open(out / "margins.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "window_id", "residual", "margin", "ok"])
            for s in samples:
                w.writerow([repr(float(s[0])), s[1], repr(float(s[2])), repr(float(s[3])), int(s[4])])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdac-sim", description="Sequential data-assisted control workbench")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = (
        ("run", cmd_run, True, "simulate one scenario"),
        ("compare", cmd_compare, True, "run sdac and smc_only on the same reference"),
        ("check", cmd_check, False, "controllability and maneuverability of every window"),
    )
    for name, func, need_out, text in commands:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="YAML scenario file")
        p.add_argument("--out", required=need_out, default=None, help="output directory")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SdacError as exc:
        print(f"sdac-sim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
