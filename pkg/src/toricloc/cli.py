"""Command-line orchestration.

Subcommands: evolve, relative, decode-experiment, qmc, scan, analyze, rerun.
Every run resolves its JSON config, validates it, writes outputs atomically,
and always leaves a manifest tying outputs to the exact inputs (the manifest
is written even on failure, with the error recorded). Re-running a manifest
in single-worker mode reproduces every CSV/JSON byte for byte.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    load_config,
    validate_config,
    write_csv,
    write_json,
)
from .decoder import memory_experiment, paired_failure_z
from .dynamics import fit_localization_length, localization_study
from .errors import InsufficientDataError
from .geometry import LatticeGeometry, dual_path_through
from .perturbations import field_preset
from .qmc import BoseModel, run_qmc, tune_mu
from .relative_motion import (
    HopClass,
    ballistic_escape_probe,
    build_fiber,
    gaussian_packet,
    random_short_range_inhomogeneity,
)
from .scaling import (
    ScalingCurve,
    beta_for,
    collapse_table,
    consecutive_intersections,
    extrapolate_critical,
)
from .seeds import seed_derive

SUBCOMMANDS = ("evolve", "relative", "decode-experiment", "qmc", "scan", "analyze")


# -- manifest -----------------------------------------------------------------

def _manifest_name(label: str) -> str:
    return f"{label}_manifest.json"


def _write_manifest(out_dir, label, subcommand, config, seed, outputs, workers,
                    t_start, status, error=None, derived=None):
    doc = {
        "subcommand": subcommand,
        "config": config,
        "master_seed": seed,
        "derived_seeds": derived or {},
        "version": __version__,
        "outputs": sorted(outputs),
        "wallclock_s": time.time() - t_start,
        "workers": workers,
        "status": status,
    }
    if error is not None:
        doc["error"] = error
    write_json(os.path.join(out_dir, _manifest_name(label)), doc)


# -- evolve ---------------------------------------------------------------------

def _default_x0(L: int, n_defects: int):
    c = L // 2
    if n_defects == 2:
        return [[c - 1, c], [c, c]]
    return [[c, c]]


def _build_string(geom: LatticeGeometry, spec):
    if spec is None:
        return None
    waypoints = [tuple(spec["from"])]
    for w in spec.get("waypoints", []):
        waypoints.append(tuple(w))
    waypoints.append(tuple(spec["to"]))
    return dual_path_through(waypoints, geom)


def _run_evolve(config, out_dir, label, workers):
    geom = LatticeGeometry(config["L"])
    terms = field_preset(geom, config["hop"], (0.0, 0.0, 1.0))
    x0 = config.get("x0") or _default_x0(config["L"], config["n_defects"])
    x0 = [tuple(p) for p in x0]
    string = _build_string(geom, config.get("string"))
    profile = localization_study(
        geom,
        terms,
        config["n_defects"],
        x0,
        np.arange(1, config["t_max"] + 1, dtype=float),
        delta=config["delta"],
        realizations=config["realizations"],
        master_seed=config["seed"],
        string=string,
        metric=config.get("metric", "auto"),
        method=config.get("propagator", "auto"),
        workers=workers,
    )
    try:
        fit = fit_localization_length(profile)
        fit_doc = {
            "amplitude": fit.amplitude,
            "xi_loc": fit.xi_loc if np.isfinite(fit.xi_loc) else None,
            "residual": fit.residual,
            "delocalized": fit.delocalized,
        }
    except InsufficientDataError as exc:
        fit_doc = {"error": str(exc)}

    csv_name = f"{label}_profile.csv"
    json_name = f"{label}_profile.json"
    manifest = _manifest_name(label)
    rows = []
    for r, row in enumerate(profile.per_realization):
        rows.extend(
            (int(d), float(a), r) for d, a in zip(profile.distances, row)
        )
    rows.extend(
        (int(d), float(a), "mean")
        for d, a in zip(profile.distances, profile.amplitudes)
    )
    write_csv(
        os.path.join(out_dir, csv_name),
        ["distance", "sup_amplitude", "realization_id"],
        rows,
        manifest_name=manifest,
    )
    bins, env = profile.envelope()
    write_json(
        os.path.join(out_dir, json_name),
        {
            "manifest": manifest,
            "metadata": profile.metadata,
            "fit": fit_doc,
            "envelope": {
                "distance": [int(b) for b in bins],
                "sup_amplitude": [float(e) for e in env],
            },
        },
    )
    return [csv_name, json_name], {"realization_seeds": profile.metadata["seeds"]}


# -- relative -------------------------------------------------------------------

def _run_relative(config, out_dir, label, workers):
    hop = config["hop"]
    classes = [HopClass((1, 0), hop), HopClass((0, 1), hop)]
    fiber = build_fiber(tuple(config["k"]), classes, config["box_radius"])
    inho = config.get("inhomogeneity")
    if inho:
        fiber = fiber.with_inhomogeneity(
            random_short_range_inhomogeneity(
                config["box_radius"],
                inho["support_radius"],
                inho["strength"],
                seed=config["seed"],
                hop_range=inho.get("hop_range", 1),
            )
        )
    packet = config["packet"]
    psi0 = gaussian_packet(
        fiber, tuple(packet["center"]), packet["sigma"], tuple(packet["q"])
    )
    if config.get("times"):
        times = np.asarray(config["times"], dtype=float)
    else:
        probe0 = ballistic_escape_probe(
            fiber, psi0, [0.0], region_halfwidth=config["region_halfwidth"]
        )
        times = np.linspace(
            0.0, 0.95 * probe0.reflection_time, config.get("n_times", 13)
        )
    report = ballistic_escape_probe(
        fiber,
        psi0,
        times,
        region_halfwidth=config["region_halfwidth"],
        threshold=config.get("threshold", 0.05),
    )
    csv_name = f"{label}_escape.csv"
    json_name = f"{label}_escape.json"
    manifest = _manifest_name(label)
    write_csv(
        os.path.join(out_dir, csv_name),
        ["t", "in_region_probability"],
        list(zip([float(t) for t in report.times],
                 [float(p) for p in report.in_region_probability])),
        manifest_name=manifest,
    )
    write_json(
        os.path.join(out_dir, json_name),
        {
            "manifest": manifest,
            "k": list(fiber.k),
            "box_radius": fiber.box_radius,
            "region_halfwidth": report.region_halfwidth,
            "reflection_time": report.reflection_time,
            "contaminated": report.contaminated,
            "threshold": report.threshold,
            "threshold_time": report.threshold_time,
            "escaped": report.escaped,
        },
    )
    return [csv_name, json_name], {}


# -- decode-experiment ------------------------------------------------------------

def _run_decode(config, out_dir, label, workers):
    geom = LatticeGeometry(config["L"])
    terms = field_preset(geom, config["hop"], (0.0, 0.0, 1.0))
    arms = []
    results = []
    for delta in config["deltas"]:
        res = memory_experiment(
            geom,
            terms,
            delta=delta,
            t_readout=config["t_readout"],
            trials=config["trials"],
            seed=config["seed"],
        )
        results.append(res)
        arms.append(
            {
                "delta": res.delta,
                "failure_rate": res.failure_rate,
                "stderr": res.stderr,
                "n_trials": res.n_trials,
                "failures": [bool(f) for f in res.failures],
                "metadata": res.metadata,
            }
        )
    z_table = []
    for i in range(len(results)):
        for j in range(len(results)):
            if i != j:
                z_table.append(
                    {
                        "more_failures": results[i].delta,
                        "fewer_failures": results[j].delta,
                        "z": paired_failure_z(results[i], results[j]),
                    }
                )
    json_name = f"{label}_memory.json"
    write_json(
        os.path.join(out_dir, json_name),
        {
            "manifest": _manifest_name(label),
            "t_readout": config["t_readout"],
            "master_seed": config["seed"],
            "arms": arms,
            "paired_z": z_table,
        },
    )
    return [json_name], {"trial_seeds": results[0].seeds if results else []}


# -- qmc ---------------------------------------------------------------------------

def _run_qmc_cmd(config, out_dir, label, workers):
    model = BoseModel(
        L=config["L"],
        beta=config["beta"],
        mu=config.get("mu", 0.0),
        delta=config["delta"],
        t=config.get("t", 1.0),
        seed=config["seed"],
    )
    mu_doc = {"mode": "given", "mu": model.mu}
    if "density" in config:
        mu = tune_mu(
            model,
            config["density"],
            tolerance=config.get("mu_tolerance", 0.005),
            master_seed=seed_derive(config["seed"], 0xA11CE),
        )
        model = model.with_mu(mu)
        mu_doc = {"mode": "tuned", "target_density": config["density"], "mu": mu}
    sw = config["sweeps"]
    ckpt = None
    if config.get("checkpoint_every"):
        ckpt = os.path.join(out_dir, f"{label}_qmc.ckpt.npz")
    obs = run_qmc(
        model,
        thermalization=sw["thermalization"],
        sweeps=sw["measurement"],
        bins=sw["bins"],
        chain_seed=seed_derive(config["seed"], 0xC0FFEE),
        track_patterns=config.get("track_patterns", False),
        checkpoint_path=ckpt,
        checkpoint_every=config.get("checkpoint_every", 0),
        resume=config.get("resume", False),
    )
    csv_name = f"{label}_qmc.csv"
    json_name = f"{label}_qmc.json"
    manifest = _manifest_name(label)
    write_csv(
        os.path.join(out_dir, csv_name),
        ["bin", "sweep_start", "sweep_end", "count", "density", "w2", "energy",
         "kinks"],
        [
            (
                row["bin"], row["sweep_start"], row["sweep_end"], row["count"],
                *(float(row[k]) if row[k] is not None else "" for k in
                  ("density", "w2", "energy", "kinks")),
            )
            for row in obs.bin_table
        ],
        manifest_name=manifest,
    )
    doc = obs.summary_dict()
    doc["manifest"] = manifest
    doc["mu_tuning"] = mu_doc
    write_json(os.path.join(out_dir, json_name), doc)
    outputs = [csv_name, json_name]
    if ckpt:
        outputs.append(os.path.basename(ckpt))
    return outputs, {}


# -- scan ----------------------------------------------------------------------------

def _scan_task(args):
    (density, L, delta, realization, beta_rule, t, sweeps_doc, mu_tol,
     disorder_seed, warm_mu) = args
    beta = beta_for(beta_rule, L)
    model = BoseModel(L=L, beta=beta, mu=0.0, delta=delta, t=t, seed=disorder_seed)
    bracket = None if warm_mu is None else (warm_mu - 1.5, warm_mu + 1.5)
    mu = tune_mu(
        model,
        density,
        tolerance=mu_tol,
        master_seed=seed_derive(disorder_seed, 1),
        initial_bracket=bracket,
    )
    obs = run_qmc(
        model.with_mu(mu),
        thermalization=sweeps_doc["thermalization"],
        sweeps=sweeps_doc["measurement"],
        bins=sweeps_doc["bins"],
        chain_seed=seed_derive(disorder_seed, 2),
    )
    return {
        "density": density,
        "L": L,
        "beta": beta,
        "delta": delta,
        "realization": realization,
        "disorder_seed": disorder_seed,
        "mu": mu,
        "measured_density": obs.density,
        "w2": obs.w2,
        "w2_err": obs.w2_err,
        "rho_s": obs.rho_s,
        "rho_s_err": obs.rho_s_err,
        "energy": obs.energy,
        "thermalized": obs.thermalized,
    }


def _run_scan(config, out_dir, label, workers):
    densities = config["densities"]
    sizes = sorted(config["sizes"])
    deltas = sorted(config["deltas"])
    reals = config["realizations"]
    sweeps_doc = config["sweeps"]
    master = config["seed"]
    t = config.get("t", 1.0)
    mu_tol = config.get("mu_tolerance", 0.005)

    tasks = []
    index = 0
    for density in densities:
        for L in sizes:
            for r in range(reals):
                for delta in deltas:
                    tasks.append(
                        (density, L, delta, r, config["beta_rule"], t, sweeps_doc,
                         mu_tol, seed_derive(master, index), None)
                    )
                    index += 1

    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_task, tasks))
    else:
        warm: dict = {}
        for task in tasks:
            key = (task[0], task[1], task[3])  # (density, L, realization)
            task = task[:-1] + (warm.get(key),)
            row = _scan_task(task)
            warm[key] = row["mu"]
            results.append(row)

    runs_name = f"{label}_runs.json"
    manifest = _manifest_name(label)
    write_json(
        os.path.join(out_dir, runs_name),
        {"manifest": manifest, "runs": results},
    )

    curves_doc = {"schema": "toricloc/scan-curves/v1",
                  "manifest": manifest,
                  "beta_rule": config["beta_rule"],
                  "disorder_convention": "epsilon ~ U[-delta, delta]; a uniform "
                  "[0, 2*delta] potential differs only by a mu shift",
                  "densities": {}}
    outputs = [runs_name]
    for density in densities:
        dkey = repr(float(density))
        curves_doc["densities"][dkey] = {}
        for L in sizes:
            rows = [
                r for r in results if r["density"] == density and r["L"] == L
            ]
            w2_mean, w2_err = [], []
            for delta in deltas:
                vals = [r["w2"] for r in rows if r["delta"] == delta]
                w2_mean.append(float(np.mean(vals)))
                w2_err.append(float(np.std(vals, ddof=1) / np.sqrt(len(vals))))
            curves_doc["densities"][dkey][str(L)] = {
                "deltas": [float(d) for d in deltas],
                "w2": w2_mean,
                "stderr": w2_err,
                "n_realizations": reals,
            }
            csv_name = f"{label}_curve_n{density}_L{L}.csv"
            write_csv(
                os.path.join(out_dir, csv_name),
                ["delta", "w2_mean", "stderr", "n_realizations"],
                list(zip([float(d) for d in deltas], w2_mean, w2_err,
                         [reals] * len(deltas))),
                manifest_name=manifest,
            )
            outputs.append(csv_name)
    curves_name = f"{label}_curves.json"
    write_json(os.path.join(out_dir, curves_name), curves_doc)
    outputs.append(curves_name)
    derived = {"task_seeds": [t[8] for t in tasks[:64]]}
    return outputs, derived


# -- analyze --------------------------------------------------------------------------

def _load_curves(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != "toricloc/scan-curves/v1":
        raise ValueError(f"unknown curves schema {doc.get('schema')!r}")
    out = {}
    for dkey, by_l in doc["densities"].items():
        density = float(dkey)
        out[density] = [
            ScalingCurve(
                L=int(lkey),
                beta_rule=doc["beta_rule"],
                density=density,
                deltas=np.asarray(c["deltas"]),
                w2=np.asarray(c["w2"]),
                stderr=np.asarray(c["stderr"]),
                n_realizations=c.get("n_realizations", 0),
            )
            for lkey, c in sorted(by_l.items(), key=lambda kv: int(kv[0]))
        ]
    return out, doc


def _run_analyze(config, out_dir, label, workers):
    curves_by_density, curves_doc = _load_curves(config["curves"])
    mode = config["mode"]
    boots = config.get("bootstrap", 256)
    bseed = config.get("bootstrap_seed", 1)
    nu = config.get("nu", 1.0)
    manifest = _manifest_name(label)

    inter_rows = []
    points = []
    failures = {}
    outputs = []
    for density, curves in sorted(curves_by_density.items()):
        try:
            inters = consecutive_intersections(
                curves, bootstrap=boots, bootstrap_seed=bseed
            )
            for it in inters:
                inter_rows.append(
                    (density, it.pair[0], it.pair[1], it.delta_star, it.err)
                )
            cp = extrapolate_critical(
                inters,
                mode=mode,
                density=density,
                drop_smallest=config.get("drop_smallest", False),
            )
            points.append(cp)
            collapse_name = f"{label}_collapse_n{density}.csv"
            write_csv(
                os.path.join(out_dir, collapse_name),
                ["L", "delta", "scaling_x", "w2", "stderr"],
                collapse_table(curves, cp.delta_c, nu=nu),
                manifest_name=manifest,
            )
            outputs.append(collapse_name)
        except Exception as exc:
            failures[repr(density)] = f"{type(exc).__name__}: {exc}"

    inter_name = f"{label}_intersections.csv"
    write_csv(
        os.path.join(out_dir, inter_name),
        ["density", "L_small", "L_large", "delta_star", "err"],
        inter_rows,
        manifest_name=manifest,
    )
    phase_name = f"{label}_phase_diagram.csv"
    write_csv(
        os.path.join(out_dir, phase_name),
        ["density", "delta_c", "err", "mode", "n_intersections"],
        [
            (p.density, p.delta_c, p.err, p.mode, len(p.intersections))
            for p in points
        ],
        manifest_name=manifest,
    )
    json_name = f"{label}_analyze.json"
    write_json(
        os.path.join(out_dir, json_name),
        {
            "manifest": manifest,
            "mode": mode,
            "nu_for_collapse": nu,
            "z_assumed": 2,
            "disorder_convention": curves_doc.get("disorder_convention"),
            "critical_points": [
                {
                    "density": p.density,
                    "delta_c": p.delta_c,
                    "err": p.err,
                    "residual": p.residual,
                    "intersections": [
                        {"pair": list(pair), "delta_star": d, "err": e}
                        for pair, d, e in p.intersections
                    ],
                }
                for p in points
            ],
            "failures": failures,
        },
    )
    outputs.extend([inter_name, phase_name, json_name])
    return outputs, {}


_HANDLERS = {
    "evolve": _run_evolve,
    "relative": _run_relative,
    "decode-experiment": _run_decode,
    "qmc": _run_qmc_cmd,
    "scan": _run_scan,
    "analyze": _run_analyze,
}


# -- argument plumbing ---------------------------------------------------------------

def _apply_overrides(config: dict, pairs: list[str]) -> dict:
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError([f"override {pair!r} is not key=value"])
        key, _, raw = pair.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return config


def _dispatch(subcommand, config, seed_override, out_dir, workers) -> int:
    t_start = time.time()
    label = config.get("label", subcommand.replace("-", "_"))
    os.makedirs(out_dir, exist_ok=True)
    try:
        if seed_override is not None:
            config["seed"] = seed_override
        validate_config(subcommand, config)
    except ConfigError as exc:
        _write_manifest(out_dir, label, subcommand, config, config.get("seed"),
                        [], workers, t_start, "config-error", error=str(exc))
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        outputs, derived = _HANDLERS[subcommand](config, out_dir, label, workers)
    except Exception as exc:  # runtime failure: manifest records the error
        _write_manifest(out_dir, label, subcommand, config, config.get("seed"),
                        [], workers, t_start, "error",
                        error=f"{type(exc).__name__}: {exc}")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _write_manifest(out_dir, label, subcommand, config, config.get("seed"),
                    outputs, workers, t_start, "ok", derived=derived)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="toricloc",
        description="Toric-code defect localization toolkit",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out-dir", default=".")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path config override (JSON-typed value)")
    rerun = sub.add_parser("rerun", help="re-run a manifest's subcommand")
    rerun.add_argument("manifest")
    rerun.add_argument("--out-dir", default=".")
    rerun.add_argument("--workers", type=int, default=1)

    args = parser.parse_args(argv)
    if args.subcommand == "rerun":
        with open(args.manifest) as fh:
            doc = json.load(fh)
        return _dispatch(doc["subcommand"], doc["config"], None, args.out_dir,
                         args.workers)
    try:
        config = load_config(args.config)
        config = _apply_overrides(config, args.set)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return _dispatch(args.subcommand, config, args.seed, args.out_dir, args.workers)


if __name__ == "__main__":
    sys.exit(main())
