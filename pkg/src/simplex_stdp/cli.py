"""Scenario-driven command line front end.

Usage: simplex-stdp <scenario> [--config FILE] [--seed N] [--out DIR]
                    [--threads N] [--set key=value]...

Each scenario writes a manifest.json (config digest, seed, file list), its CSV
outputs, and for *-verify scenarios a report.json with pass/fail checks.
Outputs are byte-identical across reruns and across --threads settings; the
worker pool only shards independent trajectories.

Exit codes: 0 success, 2 configuration error (unknown scenario / override),
3 precondition violation (invalid parameter values, unwritable output),
4 verification failure.
"""

import argparse
import concurrent.futures
import copy
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .simplex import InvalidInputError, barycentric_embedding, landscape_grid
from .dynamics import DynamicsConfig, NoiseModel, run_trajectory
from . import theory
from . import multi as multi_mod
from . import mirror as mirror_mod
from . import spiking as spiking_mod
from .flow import FlowSpec, flow_bound, flow_gap, integrate


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _shards(n, threads):
    threads = max(1, min(threads, n)) if n else 1
    base, extra = divmod(n, threads)
    out = []
    start = 0
    for i in range(threads):
        count = base + (1 if i < extra else 0)
        if count:
            out.append((start, count))
        start += count
    return out


def _run_sharded(fn, n, threads):
    """fn(index_start, count) -> result; shards are concatenated in order."""
    shards = _shards(n, threads)
    if len(shards) == 1:
        return [fn(*shards[0])]
    with concurrent.futures.ThreadPoolExecutor(max_workers=len(shards)) as pool:
        futures = [pool.submit(fn, s, c) for s, c in shards]
        return [f.result() for f in futures]


DEFAULTS = {
    "fig2-trajectories": {
        "alpha": 0.01,
        "n_steps": 2000,
        "record_stride": 1,
        "p0_list": [[0.7, 0.2, 0.1], [0.1, 0.6, 0.3], [0.25, 0.35, 0.4]],
        "grid_step": 0.01,
    },
    "fig2-ensemble": {
        "alpha": 0.01,
        "n_steps": 2000,
        "p0": [0.3, 0.3, 0.4],
        "n_traj": 100,
        "record_stride": 20,
        "n_full_trajectories": 3,
    },
    "fig3-algorithm1": {
        "lam": [10.0, 7.5, 5.0],
        "base_alpha": 1e-3,
        "rate_scale": [1.0, 0.75, 0.5],
        "n_steps": 40000,
        "record_stride": 100,
    },
    "correlated-figure": {
        "alpha": 0.01,
        "n_steps": 2000,
        "n_traj": 50,
        "p0": [0.3, 0.3, 0.4],
        "gamma": [[1.0, 0.1, 0.1], [0.1, 1.0, 0.0], [0.1, 0.0, 1.0]],
        "record_stride": 20,
        "grid_step": 0.01,
    },
    "priming": {
        "lam_first": [10.0, 5.0],
        "lam_second": [5.0, 10.0],
        "w0": [1.0, 1.0],
        "alpha": 1e-3,
        "epsilon": 0.2,
        "n_traj": 200,
        "settle_steps": 120000,
        "slack": 0.05,
    },
    "thm22-verify": {
        "p0": [0.9, 0.1],
        "epsilon": 0.5,
        "q_bound": 2.0,
        "n_traj": 200,
        "n_steps": 200000,
        "checkpoints": [0, 50000, 100000, 150000, 200000],
        "probability_slack": 0.05,
        "bound_slack": 1.1,
    },
    "thm23-verify": {
        "n_cases": 100,
        "dims": [2, 3, 5],
        "min_gap": 0.05,
        "horizon": 10.0,
        "dt": 0.01,
        "record_stride": 10,
    },
    "thm-corr-verify": {
        "p0": [0.8, 0.1, 0.1],
        "gamma": [[1.0, 0.1, 0.1], [0.1, 1.0, 0.0], [0.1, 0.0, 1.0]],
        "epsilon": 0.5,
        "q_bound": 2.0,
        "n_traj": 50,
        "n_steps": 2500000,
        "checkpoints": [0, 500000, 1000000, 1500000, 2000000, 2500000],
        "probability_slack": 0.07,
        "bound_slack": 1.1,
    },
    "alg2-verify": {
        "lam": [10.0, 7.5, 5.0],
        "w0": [1.0, 1.0, 1.0],
        "alpha": 1e-3,
        "epsilon": 0.2,
        "delta": 0.25,
        "n_seeds": 200,
        "slack": 0.05,
    },
    "spiking-validate": {
        "lam": [10.0, 7.5, 5.0],
        "weights": [1.0, 1.0, 1.0],
        "thresholds": [5.0, 30.0],
        "n_events": [100000, 30000],
        "tolerance": 0.01,
        "noise_samples": 1000000,
    },
    "mirror-compare": {
        "alphas": [1e-2, 1e-3, 1e-4],
        "n_points": 100,
        "d": 3,
        "ratio_low": 80.0,
        "ratio_high": 120.0,
    },
    "landscape-grid": {
        "grid_step": 0.005,
        "loss_kind": "cubic-quartic",
        "gamma": None,
    },
}


def _trajectory_rows(record, with_embedding=False):
    rows = []
    for i, k in enumerate(record.recorded_steps):
        row = [int(k)] + list(record.states[i])
        if with_embedding:
            x, y = barycentric_embedding(record.states[i])
            row += [x, y]
        rows.append(row)
    return rows


def _write_landscape(path, grid_step, gamma=None):
    pts, x, y, vals = landscape_grid(grid_step)
    if gamma is not None:
        g = np.asarray(gamma, dtype=float)
        vals = -0.5 * np.einsum("ni,ij,nj->n", pts, g, pts)
    write_csv(path, ["x", "y", "value"], zip(x, y, vals))


def scenario_fig2_trajectories(cfg, out, seed, threads):
    files = []
    d = len(cfg["p0_list"][0])
    header = ["k"] + ["p_%d" % (i + 1) for i in range(d)] + ["x", "y"]
    for i, p0 in enumerate(cfg["p0_list"]):
        config = DynamicsConfig(
            alpha=cfg["alpha"], n_steps=cfg["n_steps"], p0=p0,
            record_stride=cfg["record_stride"],
        )
        rec = run_trajectory(config, (seed, i))
        path = os.path.join(out, "trajectory_%d.csv" % i)
        write_csv(path, header, _trajectory_rows(rec, with_embedding=True))
        files.append(path)
    path = os.path.join(out, "landscape.csv")
    _write_landscape(path, cfg["grid_step"])
    files.append(path)
    return files, None, True


def scenario_fig2_ensemble(cfg, out, seed, threads):
    files = []
    d = len(cfg["p0"])
    n = cfg["n_traj"]
    header = ["k"] + ["p_%d" % (i + 1) for i in range(d)]

    def shard(start, count):
        finals = np.empty((count, d))
        for i in range(count):
            config = DynamicsConfig(
                alpha=cfg["alpha"], n_steps=cfg["n_steps"], p0=cfg["p0"],
                record_stride=cfg["n_steps"],
            )
            rec = run_trajectory(config, (seed, start + i))
            finals[i] = rec.states[-1]
        return finals

    finals = np.concatenate(_run_sharded(shard, n, threads), axis=0)
    for i in range(min(cfg["n_full_trajectories"], n)):
        config = DynamicsConfig(
            alpha=cfg["alpha"], n_steps=cfg["n_steps"], p0=cfg["p0"],
            record_stride=cfg["record_stride"],
        )
        rec = run_trajectory(config, (seed, i))
        path = os.path.join(out, "trajectory_%d.csv" % i)
        write_csv(path, header, _trajectory_rows(rec))
        files.append(path)
    path = os.path.join(out, "final_states.csv")
    rows = [[i] + list(finals[i]) + [int(np.argmax(finals[i]))] for i in range(n)]
    write_csv(path, ["trajectory"] + header[1:] + ["winner"], rows)
    files.append(path)
    return files, None, True


def scenario_fig3_algorithm1(cfg, out, seed, threads):
    lam = np.asarray(cfg["lam"], dtype=float)
    d = lam.size
    config = multi_mod.MultiRunConfig(
        lam=lam,
        w0=np.ones((d, d)),
        alphas=cfg["base_alpha"] * np.asarray(cfg["rate_scale"], dtype=float),
        n_steps=cfg["n_steps"],
        record_stride=cfg["record_stride"],
    )
    rec = multi_mod.joint_run(config, seed)
    rows = []
    for i, k in enumerate(rec.recorded_steps):
        rows.append([int(k), multi_mod.frobenius_half_error(rec.probabilities[i])])
    path = os.path.join(out, "frobenius_error.csv")
    write_csv(path, ["k", "half_squared_error"], rows)
    return [path], {"clip_events": rec.clip_events}, True


def scenario_correlated_figure(cfg, out, seed, threads):
    files = []
    d = len(cfg["p0"])
    n = cfg["n_traj"]
    header = ["k"] + ["p_%d" % (i + 1) for i in range(d)]

    def shard(start, count):
        finals = np.empty((count, d))
        for i in range(count):
            config = DynamicsConfig(
                alpha=cfg["alpha"], n_steps=cfg["n_steps"], p0=cfg["p0"],
                variant="correlated", gamma=cfg["gamma"],
                record_stride=cfg["n_steps"],
            )
            rec = run_trajectory(config, (seed, start + i))
            finals[i] = rec.states[-1]
        return finals

    finals = np.concatenate(_run_sharded(shard, n, threads), axis=0)
    path = os.path.join(out, "final_states.csv")
    rows = [[i] + list(finals[i]) + [int(np.argmax(finals[i]))] for i in range(n)]
    write_csv(path, ["trajectory"] + header[1:] + ["winner"], rows)
    files.append(path)
    path = os.path.join(out, "landscape_shahshahani.csv")
    _write_landscape(path, cfg["grid_step"], gamma=cfg["gamma"])
    files.append(path)
    return files, None, True


def scenario_priming(cfg, out, seed, threads):
    lam_a = np.asarray(cfg["lam_first"], dtype=float)
    lam_b = np.asarray(cfg["lam_second"], dtype=float)
    w0 = np.asarray(cfg["w0"], dtype=float)
    d = w0.size
    eps = cfg["epsilon"]
    p_a = lam_a * w0 / float(np.dot(lam_a, w0))
    delta = 0.99 * theory.priming_delta_max(lam_a, lam_b)
    params = theory.GapParams(p0=p_a, epsilon=eps)
    k_star = theory.iterations_for(params, cfg["alpha"], delta)
    results = {}
    for label, k_switch in (("unprimed", 0), ("primed", k_star)):
        n_steps = k_switch + cfg["settle_steps"]

        def shard(start, count):
            p_final, _ = theory.priming_experiment(
                lam_a, lam_b, w0, cfg["alpha"], k_switch, n_steps,
                count, seed, index_start=start,
            )
            return p_final

        p_final = np.concatenate(_run_sharded(shard, cfg["n_traj"], threads), axis=0)
        winners = np.argmax(p_final, axis=1)
        fractions = np.bincount(winners, minlength=d) / cfg["n_traj"]
        results[label] = fractions
    floor = 1.0 - 2.0 * eps - cfg["slack"]
    ok = results["unprimed"][d - 1] >= floor and results["primed"][0] >= floor
    report = {
        "delta": delta,
        "k_star": int(k_star),
        "required_frequency": floor,
        "unprimed_fractions": list(results["unprimed"]),
        "primed_fractions": list(results["primed"]),
        "passed": bool(ok),
    }
    path = os.path.join(out, "priming.csv")
    rows = [["unprimed"] + list(results["unprimed"]), ["primed"] + list(results["primed"])]
    with open(path, "w") as fh:
        fh.write("phase," + ",".join("fraction_%d" % (i + 1) for i in range(d)) + "\n")
        for row in rows:
            fh.write(row[0] + "," + ",".join(_fmt(v) for v in row[1:]) + "\n")
    return [path], report, ok


def _gap_verify(cfg, out, seed, threads, correlated):
    if correlated:
        params = theory.CorrelatedParams(
            p0=cfg["p0"], gamma=cfg["gamma"], q_bound=cfg["q_bound"], epsilon=cfg["epsilon"]
        )
        alpha = theory.max_alpha_correlated(params)
        gamma = params.gamma
        gap_params = None
    else:
        params = theory.GapParams(p0=cfg["p0"], q_bound=cfg["q_bound"], epsilon=cfg["epsilon"])
        alpha = theory.max_alpha(params)
        gamma = None
        gap_params = params

    def shard(start, count):
        return theory.run_gap_ensemble(
            cfg["p0"], alpha, cfg["n_steps"], count, seed,
            gamma=gamma, checkpoints=cfg["checkpoints"], index_start=start,
        )

    parts = _run_sharded(shard, cfg["n_traj"], threads)
    result = theory.EnsembleVerification(
        checkpoints=parts[0].checkpoints,
        p1_checkpoints=np.concatenate([p.p1_checkpoints for p in parts], axis=0),
        martingale_checkpoints=np.concatenate(
            [p.martingale_checkpoints for p in parts], axis=0
        ),
        theta_hat=np.concatenate([p.theta_hat for p in parts]),
        ek_violations=sum(p.ek_violations for p in parts),
        final_states=np.concatenate([p.final_states for p in parts], axis=0),
    )
    report = theory.verification_report(
        gap_params, alpha, result,
        correlated_params=params if correlated else None,
    )
    prob_floor = 1.0 - cfg["epsilon"] / 2.0 - cfg["probability_slack"]
    checks = {
        "gap_event_probability": report["empirical_gap_event_probability"] >= prob_floor,
        "bound_domination": all(
            row["on_event_mean_l1_error"] <= cfg["bound_slack"] * row["bound"]
            for row in report["checkpoints"]
        ),
        "inclusion": result.ek_violations == 0,
    }
    report["probability_floor"] = prob_floor
    report["checks"] = checks
    ok = all(checks.values())
    report["passed"] = bool(ok)
    path = os.path.join(out, "checkpoints.csv")
    write_csv(
        path,
        ["k", "bound", "on_event_mean_l1_error"],
        [[r["k"], r["bound"], r["on_event_mean_l1_error"]] for r in report["checkpoints"]],
    )
    return [path], report, ok


def scenario_thm22_verify(cfg, out, seed, threads):
    return _gap_verify(cfg, out, seed, threads, correlated=False)


def scenario_thm_corr_verify(cfg, out, seed, threads):
    return _gap_verify(cfg, out, seed, threads, correlated=True)


def scenario_thm23_verify(cfg, out, seed, threads):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    dims = list(cfg["dims"])
    violations = 0
    worst_margin = np.inf
    rows = []
    for case in range(cfg["n_cases"]):
        d = dims[case % len(dims)]
        while True:
            p0 = rng.dirichlet(np.ones(d))
            gap, star = flow_gap(p0)
            if gap >= cfg["min_gap"]:
                break
        spec = FlowSpec(
            p0=p0, horizon=cfg["horizon"], dt=cfg["dt"], record_stride=cfg["record_stride"]
        )
        traj = integrate(spec)
        target = np.zeros(d)
        target[star] = 1.0
        err = np.abs(traj.states - target).sum(axis=1)
        bound = flow_bound(p0, traj.times)
        margin = float((bound - err).min())
        # the bound is an equality at t = 0, so allow rounding noise there
        violations += int(np.sum(err > bound + 1e-12))
        worst_margin = min(worst_margin, margin)
        rows.append([case, d, gap, margin])
    path = os.path.join(out, "cases.csv")
    write_csv(path, ["case", "d", "gap", "min_bound_margin"], rows)
    ok = violations == 0
    report = {
        "n_cases": cfg["n_cases"],
        "violations": int(violations),
        "worst_margin": worst_margin,
        "passed": bool(ok),
    }
    return [path], report, ok


def scenario_alg2_verify(cfg, out, seed, threads):
    lam = np.asarray(cfg["lam"], dtype=float)
    w0 = np.asarray(cfg["w0"], dtype=float)
    d = lam.size
    delta_cap = multi_mod.admissible_delta(lam)
    if not cfg["delta"] < delta_cap:
        raise InvalidInputError(
            "delta=%g not below the admissible cap %g" % (cfg["delta"], delta_cap)
        )
    # minimal leading gap across the sequence of deflated subproblems,
    # assuming earlier columns landed on their axes
    gaps = []
    w = w0.copy()
    for j in range(d):
        num = lam * w
        p = num / num.sum()
        order = np.argsort(p)[::-1]
        gaps.append(p[order[0]] - p[order[1]])
        w[order[0]] = 0.0
        if j == d - 2:
            break
    gap = min(gaps)
    k_per_column = multi_mod.required_iterations(
        d, cfg["alpha"], gap, cfg["epsilon"], cfg["delta"]
    )

    def shard(start, count):
        return multi_mod.sequential_success_ensemble(
            lam, w0, cfg["alpha"], k_per_column, count, seed, index_start=start
        )

    success = np.concatenate(_run_sharded(shard, cfg["n_seeds"], threads))
    rate = float(success.mean())
    floor = (1.0 - cfg["epsilon"]) ** d - cfg["slack"]
    ok = rate >= floor
    report = {
        "k_per_column": int(k_per_column),
        "minimal_gap": gap,
        "success_rate": rate,
        "required_rate": floor,
        "passed": bool(ok),
    }
    path = os.path.join(out, "successes.csv")
    write_csv(path, ["seed_index", "success"], [[i, bool(s)] for i, s in enumerate(success)])
    return [path], report, ok


def scenario_spiking_validate(cfg, out, seed, threads):
    lam = np.asarray(cfg["lam"], dtype=float)
    w = np.asarray(cfg["weights"], dtype=float)
    target = lam * w / float(np.dot(lam, w))
    rows = []
    ok = True
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    for thresh, n_events in zip(cfg["thresholds"], cfg["n_events"]):
        ids = spiking_mod.collect_triggers(lam, w, thresh, n_events, rng)
        freqs = np.bincount(ids, minlength=lam.size) / ids.size
        dev = float(np.abs(freqs - target).max())
        ok = ok and dev <= cfg["tolerance"]
        rows.append([thresh, ids.size, dev] + list(freqs))
    mean, lo, hi = spiking_mod.centered_noise_stats(0.0, 1.0, cfg["noise_samples"], rng)
    noise_ok = abs(mean) < 0.002 and lo >= -1.0 and hi <= 1.0
    ok = ok and noise_ok
    path = os.path.join(out, "trigger_frequencies.csv")
    write_csv(
        path,
        ["threshold", "n_events", "max_deviation"]
        + ["freq_%d" % (i + 1) for i in range(lam.size)],
        rows,
    )
    report = {
        "target": list(target),
        "noise_mean": mean,
        "noise_min": lo,
        "noise_max": hi,
        "passed": bool(ok),
    }
    return [path], report, ok


def scenario_mirror_compare(cfg, out, seed, threads):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    alphas = np.asarray(cfg["alphas"], dtype=float)
    sup = np.zeros(alphas.size)
    for _ in range(cfg["n_points"]):
        p = rng.dirichlet(np.ones(cfg["d"]))
        sup = np.maximum(sup, mirror_mod.order_comparison(p, alphas))
    ratios = sup[:-1] / sup[1:]
    ok = bool(np.all((ratios >= cfg["ratio_low"]) & (ratios <= cfg["ratio_high"])))
    path = os.path.join(out, "mirror.csv")
    write_csv(path, ["alpha", "sup_difference"], zip(alphas, sup))
    report = {"ratios": list(ratios), "passed": ok}
    return [path], report, ok


def scenario_landscape_grid(cfg, out, seed, threads):
    path = os.path.join(out, "landscape.csv")
    _write_landscape(path, cfg["grid_step"], gamma=cfg.get("gamma"))
    pts, x, y, vals = landscape_grid(cfg["grid_step"])
    ok = True
    if cfg.get("gamma") is None:
        ok = abs(float(vals.min()) - (-1.0 / 12.0)) <= 1e-5
    return [path], {"min_value": float(vals.min()), "passed": bool(ok)}, ok


SCENARIOS = {
    "fig2-trajectories": scenario_fig2_trajectories,
    "fig2-ensemble": scenario_fig2_ensemble,
    "fig3-algorithm1": scenario_fig3_algorithm1,
    "correlated-figure": scenario_correlated_figure,
    "priming": scenario_priming,
    "thm22-verify": scenario_thm22_verify,
    "thm23-verify": scenario_thm23_verify,
    "thm-corr-verify": scenario_thm_corr_verify,
    "alg2-verify": scenario_alg2_verify,
    "spiking-validate": scenario_spiking_validate,
    "mirror-compare": scenario_mirror_compare,
    "landscape-grid": scenario_landscape_grid,
}


def _parse_set(item):
    if "=" not in item:
        raise ValueError("--set expects key=value, got %r" % item)
    key, _, raw = item.partition("=")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_config(scenario, config_path, overrides):
    cfg = copy.deepcopy(DEFAULTS[scenario])
    if config_path:
        with open(config_path) as fh:
            file_cfg = json.load(fh)
        for key, value in file_cfg.items():
            if key not in cfg:
                raise KeyError("unknown config key %r for %s" % (key, scenario))
            cfg[key] = value
    for key, value in overrides:
        if key not in cfg:
            raise KeyError("unknown config key %r for %s" % (key, scenario))
        cfg[key] = value
    return cfg


def main(argv=None):
    parser = argparse.ArgumentParser(prog="simplex-stdp", description=__doc__)
    parser.add_argument("scenario", help="one of: " + ", ".join(sorted(SCENARIOS)))
    parser.add_argument("--config", help="JSON file with parameter overrides")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = parser.parse_args(argv)
    if args.scenario not in SCENARIOS:
        print("unknown scenario %r" % args.scenario, file=sys.stderr)
        return 2
    try:
        overrides = [_parse_set(item) for item in args.set]
        cfg = build_config(args.scenario, args.config, overrides)
    except (ValueError, KeyError, OSError) as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return 2
    out = args.out or os.environ.get("SIMPLEX_STDP_OUT") or "."
    out = os.path.join(out, args.scenario)
    try:
        os.makedirs(out, exist_ok=True)
        probe = os.path.join(out, ".write-probe")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        print("output directory not writable: %s" % exc, file=sys.stderr)
        return 3
    started = time.time()
    try:
        files, report, ok = SCENARIOS[args.scenario](cfg, out, args.seed, args.threads)
    except InvalidInputError as exc:
        print("precondition violated: %s" % exc, file=sys.stderr)
        return 3
    if report is not None:
        report_path = os.path.join(out, "report.json")
        with open(report_path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        files = files + [report_path]
    digest = hashlib.sha256(
        json.dumps({"scenario": args.scenario, "cfg": cfg, "seed": args.seed},
                   sort_keys=True).encode()
    ).hexdigest()
    manifest = {
        "scenario": args.scenario,
        "seed": args.seed,
        "threads": args.threads,
        "config": cfg,
        "config_digest": digest,
        "version": __version__,
        "files": [os.path.basename(f) for f in files],
        "elapsed_seconds": round(time.time() - started, 3),
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    summary = "%s: wrote %d file(s) to %s" % (args.scenario, len(files) + 1, out)
    if report is not None and "passed" in report:
        summary += "; passed=%s" % report["passed"]
    print(summary)
    if not ok:
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
