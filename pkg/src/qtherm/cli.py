"""Command-line front end.

Subcommands: trajectory, ensemble, jarzynski, sweep, verify.  Parameters come
from an INI-style config file (key = value sections, units in the key names)
overridden by flags.  All physical quantities carry unit suffixes
(gamma_per_us, dt_ns, ...) to keep the us/ns bookkeeping explicit.

Example config:

    [physics]
    gamma_per_us = 1.7
    omega_mhz = 1.0
    eta = 0.35
    beta = 3.5

    [numerics]
    dt_ns = 20
    tau_us = 8.0
    seed = 1
    scheme = ito-euler

    [feedback]
    mode = none
    gain = 34.0
    offset = -1.0
    delay_ns = 100

    [run]
    n_traj = 10000
    workers = 1
    out_dir = runs
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from pathlib import Path

import numpy as np

from .config import FeedbackConfig, SimConfig, delay_steps_for
from .ensemble import run_ensemble
from .experiments import run_efficacy_protocol, sweep_gain_offset
from .io import (
    RunManifest,
    config_snapshot,
    timer,
    write_csv,
    write_json,
    write_trajectory_csv,
    write_trajectory_sidecar,
)
from .oracle import ensemble_vs_oracle, lindblad_evolve
from .sme import rng_for_trajectory, simulate_trajectory
from .stats import (
    InsufficientSpanError,
    pooled_pearson_r,
    rabi_contrast,
    transition_probabilities,
)
from .bloch import GROUND, closed_rabi_probabilities

#: Per-trajectory step series are only kept when the total footprint stays
#: reasonable (doubles per series).
MAX_SERIES_VALUES = 20_000_000

_FEEDBACK_ALIASES = {"pll": "phase_locked", "phase_locked": "phase_locked",
                     "optimal": "optimal", "none": "none"}


class ConfigError(Exception):
    """Bad config file or flag combination, with field diagnostics."""


def _parse_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    known = {
        "physics": {"gamma_per_us": float, "omega_mhz": float, "eta": float,
                    "beta": float},
        "numerics": {"dt_ns": float, "tau_us": float, "seed": int,
                     "scheme": str, "initial_state": str},
        "feedback": {"mode": str, "gain": float, "offset": float,
                     "delay_ns": float, "phi": float},
        "run": {"n_traj": int, "workers": int, "out_dir": str,
                "sample_final": bool},
    }
    values: dict = {}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in known[section]:
                raise ConfigError(f"{path}: unknown key '{key}' in [{section}]")
            caster = known[section][key]
            try:
                if caster is bool:
                    values[key] = parser.getboolean(section, key)
                else:
                    values[key] = caster(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"{path}: [{section}] {key} = {raw!r}: {exc}"
                ) from exc
    return values


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="qtherm",
        description="Heat and work along trajectories of a monitored, driven qubit",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="INI config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--n-traj", type=int, dest="n_traj")
        p.add_argument("--eta", type=float)
        p.add_argument("--gamma-per-us", type=float, dest="gamma_per_us")
        p.add_argument("--omega-mhz", type=float, dest="omega_mhz")
        p.add_argument("--dt-ns", type=float, dest="dt_ns")
        p.add_argument("--tau-us", type=float, dest="tau_us")
        p.add_argument("--beta", type=float)
        p.add_argument("--feedback", choices=sorted(_FEEDBACK_ALIASES))
        p.add_argument("--delay-ns", type=float, dest="delay_ns")
        p.add_argument("--gain", type=float)
        p.add_argument("--offset", type=float)
        p.add_argument("--scheme", choices=("ito-euler", "kraus"))
        p.add_argument("--initial-state", dest="initial_state",
                       help="0, 1 or thermal")
        p.add_argument("--sample-final", action="store_true", default=None,
                       dest="sample_final")
        p.add_argument("--out-dir", default=None, dest="out_dir")
        p.add_argument("--workers", type=int)

    p = sub.add_parser("trajectory", help="one trajectory -> CSV + sidecar")
    common(p)
    p = sub.add_parser("ensemble", help="ensemble statistics -> CSVs + summary")
    common(p)
    p = sub.add_parser("jarzynski", help="efficacy vs time for a list of eta")
    common(p)
    p.add_argument("--eta-list", default="0.35,0.6,0.8,1.0", dest="eta_list")
    p = sub.add_parser("sweep", help="phase-locked (gain, offset) contrast grid")
    common(p)
    p.add_argument("--gain-grid", default="15,20,25,30,35,40,45", dest="gain_grid")
    p.add_argument("--offset-grid", default="-1.5,-1.25,-1,-0.75,-0.5",
                   dest="offset_grid")
    p = sub.add_parser("verify", help="run the invariant suite, nonzero exit on failure")
    common(p)
    return top


def _assemble(args) -> tuple[SimConfig, FeedbackConfig, dict]:
    values = _parse_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed, "n_traj": args.n_traj, "eta": args.eta,
        "gamma_per_us": args.gamma_per_us, "omega_mhz": args.omega_mhz,
        "dt_ns": args.dt_ns, "tau_us": args.tau_us, "beta": args.beta,
        "mode": args.feedback, "delay_ns": args.delay_ns, "gain": args.gain,
        "offset": args.offset, "scheme": args.scheme,
        "initial_state": args.initial_state, "sample_final": args.sample_final,
        "out_dir": args.out_dir, "workers": args.workers,
    }
    for key, val in overrides.items():
        if val is not None:
            values[key] = val

    initial = values.get("initial_state", 0)
    if isinstance(initial, str):
        initial = initial.strip()
        initial = int(initial) if initial in ("0", "1") else initial
    dt_us = values.get("dt_ns", 20.0) * 1e-3
    try:
        sim = SimConfig(
            gamma=values.get("gamma_per_us", 1.7),
            omega_r=2.0 * math.pi * values.get("omega_mhz", 1.0),
            eta=values.get("eta", 0.35),
            dt=dt_us,
            tau=values.get("tau_us", 8.0),
            phi=values.get("phi"),
            seed=values.get("seed", 1),
            initial_state=initial,
            beta=values.get("beta", 3.5),
            scheme=values.get("scheme", "ito-euler"),
            sample_final=values.get("sample_final", False),
        )
        mode = _FEEDBACK_ALIASES[values.get("mode", "none")]
        fb = FeedbackConfig(
            mode=mode,
            gain=values.get("gain", 34.0),
            offset=values.get("offset", -1.0),
            delay_steps=delay_steps_for(values.get("delay_ns", 0.0), dt_us)
            if mode != "none"
            else 0,
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    run = {
        "n_traj": int(values.get("n_traj", 1000)),
        "workers": int(values.get("workers", 1)),
        "out_dir": Path(values.get("out_dir", "runs")),
    }
    return sim, fb, run


def _float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"{flag}: {exc}") from exc


def cmd_trajectory(args) -> int:
    sim, fb, run = _assemble(args)
    out = run["out_dir"]
    out.mkdir(parents=True, exist_ok=True)
    with timer() as t:
        record = simulate_trajectory(sim.with_(sample_final=True), fb)
        write_trajectory_csv(record, out / "trajectory.csv")
        write_trajectory_sidecar(record, out / "trajectory_config.json")
    manifest = RunManifest(
        command="trajectory",
        config=config_snapshot(sim, fb),
        seed=sim.seed,
        outputs=["trajectory.csv", "trajectory_config.json"],
        n_steps=sim.n_steps,
        n_traj=1,
        wall_seconds=t.seconds,
    )
    manifest.write(out)
    w, wf, q = record.work_heat_totals()
    print(
        f"trajectory: {sim.n_steps} steps, W={w:+.4f} WF={wf:+.4f} Q={q:+.4f} "
        f"residual={record.first_law_residual():.2e} -> {out}"
    )
    return 0


def cmd_ensemble(args) -> int:
    sim, fb, run = _assemble(args)
    out = run["out_dir"]
    out.mkdir(parents=True, exist_ok=True)
    n = run["n_traj"]
    record_series = []
    if fb.mode != "none" and n * sim.n_steps <= MAX_SERIES_VALUES:
        record_series.append("ledger")
    with timer() as t:
        res = run_ensemble(
            sim.with_(sample_final=True), fb, n,
            record=record_series, workers=run["workers"],
        )
        write_csv(
            out / "timeseries.csv",
            ("t", "p00_mean", "p00_sem", "dW_mean", "dWF_mean", "dQ_mean"),
            (
                (
                    float(res.times[i]),
                    float(res.p00_mean[i]),
                    float(res.p00_sem[i]),
                    float(res.dw_mean[i - 1]) if i else 0.0,
                    float(res.dwf_mean[i - 1]) if i else 0.0,
                    float(res.dq_mean[i - 1]) if i else 0.0,
                )
                for i in range(sim.n_steps + 1)
            ),
        )
        write_csv(
            out / "trajectories.csv",
            ("traj", "initial_label", "pW00", "pQ00", "pF00", "p00_final", "outcome"),
            (
                (
                    k,
                    int(res.initial_labels[k]),
                    float(-res.w[k]),
                    float(-res.q[k]),
                    float(-res.wf[k]),
                    float(res.final_p00[k]),
                    int(res.outcomes[k]),
                )
                for k in range(n)
            ),
        )
        summary: dict = {
            "n_traj": n,
            "max_first_law_residual": float(res.residuals.max()),
            "p_sum00_range": [float(res.p_sum_00().min()), float(res.p_sum_00().max())],
            "manifest": "manifest.json",
        }
        p, sem = transition_probabilities(res, m=0, n=int(res.initial_labels[0]))
        summary["p00_final"] = p
        summary["p00_final_sem"] = sem
        try:
            summary["contrast"] = rabi_contrast(res.times, res.p00_mean, sim.omega_r,
                                                window=(2.0, sim.tau))
        except InsufficientSpanError:
            summary["contrast"] = None
        if "ledger" in record_series:
            summary["r_wf_q_lag0"] = pooled_pearson_r(
                res.series["dwf"], res.series["dq"], lag=0
            )
            if fb.delay_steps:
                summary[f"r_wf_q_lag{fb.delay_steps}"] = pooled_pearson_r(
                    res.series["dwf"], res.series["dq"], lag=fb.delay_steps
                )
        write_json(out / "summary.json", summary)
    manifest = RunManifest(
        command="ensemble",
        config=config_snapshot(sim, fb),
        seed=sim.seed,
        outputs=["timeseries.csv", "trajectories.csv", "summary.json"],
        n_steps=sim.n_steps,
        n_traj=n,
        wall_seconds=t.seconds,
    )
    manifest.write(out)
    print(f"ensemble: {n} trajectories, P00(tau)={summary['p00_final']:.4f} -> {out}")
    return 0


def cmd_jarzynski(args) -> int:
    sim, fb, run = _assemble(args)
    if sim.beta <= 0:
        raise ConfigError("jarzynski requires beta > 0")
    etas = _float_list(args.eta_list, "--eta-list")
    out = run["out_dir"]
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    summary: dict = {"etas": etas, "per_eta": {}, "manifest": "manifest.json"}
    with timer() as t:
        for eta in etas:
            # The kraus dissipator keeps eta = 1 exact and the eta family
            # comparable; an explicit --scheme still wins.
            scheme = args.scheme or "kraus"
            prot = run_efficacy_protocol(
                sim.with_(eta=eta, scheme=scheme),
                fb,
                n_traj=run["n_traj"],
                workers=run["workers"],
            )
            tr = prot.trajectory_route
            name = f"efficacy_eta{eta:g}.csv"
            write_csv(
                out / name,
                ("t", "gamma_traj", "stderr_traj", "gamma_wd", "stderr_wd",
                 "c00", "c11"),
                (
                    (
                        float(prot.times[i]),
                        float(tr.gamma_q[i]),
                        float(tr.stderr[i]),
                        float(prot.wd_route_gamma[i]),
                        float(prot.wd_route_stderr[i]),
                        float(tr.c00[i]),
                        float(tr.c11[i]),
                    )
                    for i in range(len(prot.times))
                ),
            )
            outputs.append(name)
            summary["per_eta"][f"{eta:g}"] = {
                "gamma0": float(tr.gamma_q[0]),
                "msd_to_1us": tr.mean_sq_deviation(1.0),
            }
        write_json(out / "summary.json", summary)
        outputs.append("summary.json")
    manifest = RunManifest(
        command="jarzynski",
        config=config_snapshot(sim, fb),
        seed=sim.seed,
        outputs=outputs,
        n_steps=sim.n_steps,
        n_traj=run["n_traj"],
        wall_seconds=t.seconds,
    )
    manifest.write(out)
    print(f"jarzynski: eta={etas} -> {out}")
    return 0


def cmd_sweep(args) -> int:
    sim, fb, run = _assemble(args)
    gains = _float_list(args.gain_grid, "--gain-grid")
    offsets = _float_list(args.offset_grid, "--offset-grid")
    out = run["out_dir"]
    out.mkdir(parents=True, exist_ok=True)
    with timer() as t:
        result = sweep_gain_offset(
            gains, offsets, sim, fb, n_traj=run["n_traj"], workers=run["workers"]
        )
        write_csv(out / "sweep.csv", ("gain", "offset", "contrast"), result.rows())
        write_json(
            out / "summary.json",
            {
                "best_gain": result.best_gain,
                "best_offset": result.best_offset,
                "best_contrast": float(result.contrast.max()),
                "manifest": "manifest.json",
            },
        )
    manifest = RunManifest(
        command="sweep",
        config=config_snapshot(sim, fb),
        seed=sim.seed,
        outputs=["sweep.csv", "summary.json"],
        n_steps=sim.n_steps,
        n_traj=run["n_traj"],
        wall_seconds=t.seconds,
    )
    manifest.write(out)
    print(
        f"sweep: argmax (A={result.best_gain:g}, B={result.best_offset:g}) -> {out}"
    )
    return 0


def cmd_verify(args) -> int:
    sim, fb, run = _assemble(args)
    checks: list[tuple[str, bool, str]] = []

    def check(name: str, ok: bool, detail: str) -> None:
        checks.append((name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")

    # First law + decomposition on a paper-parameter ensemble.
    res = run_ensemble(sim.with_(tau=2.0, sample_final=True), n_traj=500)
    resid = float(res.residuals.max())
    check("first-law", resid < 1e-9, f"max residual {resid:.2e} (< 1e-9)")
    sums = res.p_sum_00()
    check(
        "bounded-decomposition",
        bool((sums >= -1.0).all() and (sums <= 0.0).all()),
        f"P~W+P~Q+P~F in [{sums.min():.3f}, {sums.max():.3f}] (within [-1, 0])",
    )

    # Unitary limit: gamma = 0 reproduces the closed transition probabilities.
    closed_cfg = sim.with_(gamma=0.0, eta=0.0, tau=sim.dt * 400)
    rec = simulate_trajectory(closed_cfg)
    want = closed_rabi_probabilities(closed_cfg.omega_r / 2.0, closed_cfg.tau).p00
    got = 0.5 * (1.0 + rec.z[-1])
    err = abs(got - want)
    # Renormalization touches the rotation's 1-ulp overshoot of the unit
    # circle, so Q is zero only to accumulated rounding.
    q_tot = abs(float(rec.dq.sum()))
    check(
        "unitary-limit",
        err < 1e-6 and q_tot < 1e-12,
        f"|P00 - cos^2| = {err:.2e} (< 1e-6), Q = {q_tot:.1e} (< 1e-12)",
    )

    # Conditional ensemble mean vs the Lindblad oracle: projective sampling
    # on a 0.1 us comb, binomial errors under the oracle null.
    cfg_o = sim.with_(dt=0.005, tau=4.0)
    res_o = run_ensemble(cfg_o, n_traj=2000, record=("pop",), workers=run["workers"])
    comb = np.arange(0, cfg_o.n_steps + 1, int(round(0.1 / cfg_o.dt)))
    rng = rng_for_trajectory(sim.seed, 0x0FF5E7)
    p00 = res_o.series["p00"][:, comb]
    hits = (rng.random(p00.shape) < p00).mean(axis=0)
    sol = lindblad_evolve(GROUND, cfg_o, t_grid=res_o.times[comb])
    sem = np.sqrt(sol.p00 * (1.0 - sol.p00) / 2000)
    zmax = float(ensemble_vs_oracle(res_o.times[comb], hits, sem, sol))
    check("oracle-agreement", zmax < 5.0, f"max z-score {zmax:.2f} (< 5)")

    # Purity at eta = 1 with the measurement-operator scheme.
    rec = simulate_trajectory(sim.with_(eta=1.0, tau=sim.dt * 1000, scheme="kraus"))
    perr = float(np.abs(purity_series(rec) - 1.0).max())
    check("purity-eta1", perr < 1e-6, f"max |purity - 1| = {perr:.1e} (< 1e-6)")

    # Determinism: bit-identical reruns and worker invariance.
    r1 = simulate_trajectory(sim.with_(tau=2.0))
    r2 = simulate_trajectory(sim.with_(tau=2.0))
    same_traj = bool(np.array_equal(r1.z, r2.z) and np.array_equal(r1.dv, r2.dv))
    e1 = run_ensemble(sim.with_(tau=1.0), n_traj=300, workers=1, chunk_size=128)
    e2 = run_ensemble(sim.with_(tau=1.0), n_traj=300, workers=3, chunk_size=128)
    same_ens = bool(
        np.array_equal(e1.p00_mean, e2.p00_mean) and np.array_equal(e1.w, e2.w)
    )
    check("determinism", same_traj and same_ens,
          f"trajectory rerun identical: {same_traj}, worker invariance: {same_ens}")

    failed = [name for name, ok, _ in checks if not ok]
    print(f"verify: {len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def purity_series(record) -> np.ndarray:
    return 0.5 * (1.0 + record.x**2 + record.z**2)


_COMMANDS = {
    "trajectory": cmd_trajectory,
    "ensemble": cmd_ensemble,
    "jarzynski": cmd_jarzynski,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
