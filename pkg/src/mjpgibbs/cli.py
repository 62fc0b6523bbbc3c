"""Command-line interface: forward simulation, inference on model files,
replication experiments and summary recomputation.

All output files are byte-deterministic for a fixed seed: JSON goes through
the canonical dumper and CSV floats use the same 17-significant-digit
format. Wall-clock measurements are opt-in via ``--timing`` because they
would break byte-for-byte reproducibility; without the flag every wall_ms
field is written as 0.0 and timings only appear on stderr.

Exit codes: 0 success, 2 configuration or unsupported-model error,
3 runtime sampling error, 4 output-validation failure. Failures emit a
one-line JSON object on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .augment import HomogeneousVirtual, ScaledExit, Uniformization
from .ctbn import simulate_ctbn
from .diagnostics import ess_summary
from .errors import ConfigError, MjpGibbsError, UnsupportedModelError
from .mcmc import (ChainConfig, CtbnProblem, MjpProblem,
                   _initial_mjp_trajectory, run_chain)
from .presets import PRESETS
from .serialize import (_fmt_float, canonical_dumps,
                        ctbn_evidence_to_jsonable, ctbn_model_to_jsonable,
                        lv_evidence_to_jsonable, lv_model_to_jsonable,
                        problem_from_jsonables, trajectory_to_jsonable)
from .simulate import simulate_gillespie

_STAT_COLUMNS = ("iteration", "node", "state", "occupation_time",
                 "jump_count", "wall_ms")
_LV_GRID_POINTS = 101


class ValidationError(MjpGibbsError):
    """Merged outputs failed an internal consistency check."""


# ---------------------------------------------------------------------------
# Small helpers
# ---------------------------------------------------------------------------

def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return _fmt_float(value)
    return str(value)


def _stats_csv(rows, with_replication: bool) -> str:
    cols = (("replication",) if with_replication else ()) + _STAT_COLUMNS
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_cell(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _parse_policy(text: str):
    kind, _, value = text.partition(":")
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(
            f"--virtual expects KIND:VALUE, got {text!r}") from None
    if kind == "uniformization":
        return Uniformization(v)
    if kind == "homogeneous":
        return HomogeneousVirtual(v)
    if kind == "scaled":
        return ScaledExit(v)
    raise ConfigError(
        "--virtual kind must be uniformization, homogeneous or scaled, "
        f"got {kind!r}")


def _derive_seed(base: int, rep: int) -> int:
    return int(np.random.SeedSequence([base, rep]).generate_state(1)[0])


def _describe_config(cfg: ChainConfig) -> dict:
    policy = cfg.policy
    if isinstance(policy, Uniformization):
        pol = f"uniformization:{policy.lam:g}"
    elif isinstance(policy, HomogeneousVirtual):
        pol = f"homogeneous:{policy.theta:g}"
    elif isinstance(policy, ScaledExit):
        pol = f"scaled:{policy.factor:g}"
    else:
        pol = str(policy)
    return {"method": cfg.method, "n_particles": cfg.n_particles,
            "policy": pol, "iterations": cfg.iterations,
            "burn_in": cfg.burn_in, "seed": cfg.seed}


# ---------------------------------------------------------------------------
# Replication runners (top level so worker processes can import them)
# ---------------------------------------------------------------------------

def _build_experiment(preset_name: str, kwargs: dict, virtual,
                      rep_seed=None):
    preset = PRESETS[preset_name](**kwargs)
    cfg = preset.config
    if virtual:
        cfg = dataclasses.replace(cfg, policy=_parse_policy(virtual))
    if rep_seed is not None:
        cfg = dataclasses.replace(cfg, seed=rep_seed)
    return preset, cfg


def _run_lv_chain(problem: MjpProblem, cfg: ChainConfig):
    """Particle-sweep chain for the predator-prey model.

    Returns (records, metadata, grid_rows). Each post-burn-in iteration
    yields one record per population with the time-integrated count in the
    occupation_time column, plus the sampled counts on a fixed evaluation
    grid for credible-band summaries.
    """
    from .engine_lv import CompiledLvEngine

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    meta = {"seed": cfg.seed, "method": cfg.method,
            "iterations": cfg.iterations, "burn_in": cfg.burn_in,
            "engine": "compiled"}
    traj0 = _initial_mjp_trajectory(problem, cfg, rng, meta)
    t0 = time.perf_counter()
    engine = CompiledLvEngine(problem, cfg, traj0)
    engine.seed(cfg.seed)
    if cfg.burn_in:
        engine.run_sweeps(cfg.burn_in)
    grid = np.linspace(0.0, problem.t_max, _LV_GRID_POINTS)
    keep = cfg.iterations - cfg.burn_in
    out_x, out_y, out_jumps = engine.run_sweeps(keep, grid)
    wall = time.perf_counter() - t0
    meta["wall_s"] = wall
    per_ms = wall * 1e3 / cfg.iterations
    records, grid_rows = [], []
    for i in range(keep):
        it = cfg.burn_in + i
        jumps = int(out_jumps[i])
        for name, series in (("prey", out_x), ("predator", out_y)):
            records.append({
                "iteration": it, "node": name, "state": 0,
                "occupation_time": float(np.trapezoid(series[i], grid)),
                "jump_count": jumps, "wall_ms": per_ms})
        for j in range(len(grid)):
            grid_rows.append((it, float(grid[j]), int(out_x[i, j]),
                              int(out_y[i, j])))
    return records, meta, grid_rows


def _run_replication(job):
    preset_name, kwargs, virtual, rep, rep_seed = job
    preset, cfg = _build_experiment(preset_name, kwargs, virtual, rep_seed)
    problem = preset.problem
    if isinstance(problem, MjpProblem):
        records, meta, grid_rows = _run_lv_chain(problem, cfg)
    else:
        result = run_chain(problem, cfg)
        records, meta, grid_rows = result.records, result.metadata, []
    return rep, records, meta, grid_rows


# ---------------------------------------------------------------------------
# Output assembly
# ---------------------------------------------------------------------------

def _check_conservation(rows, n_iterations_expected, with_replication):
    keys = set()
    per_rep_iters: dict = {}
    for row in rows:
        rep = row.get("replication", 0) if with_replication else 0
        key = (rep, row["iteration"], str(row["node"]), row["state"])
        if key in keys:
            raise ValidationError(
                f"duplicate statistics row for {key}")
        keys.add(key)
        per_rep_iters.setdefault(rep, set()).add(row["iteration"])
    for rep, iters in per_rep_iters.items():
        if len(iters) != n_iterations_expected:
            raise ValidationError(
                f"replication {rep} recorded {len(iters)} iterations, "
                f"expected {n_iterations_expected}")


def _zero_walls(rows):
    for row in rows:
        row["wall_ms"] = 0.0


def _summary_for(records, wall_s, timing: bool) -> dict:
    out = ess_summary(records)
    med = out["median_ess"]
    if not np.isfinite(med):
        out["median_ess"] = 0.0
    t100 = (wall_s * 100.0 / med
            if timing and np.isfinite(med) and med > 0 else 0.0)
    out["time_to_ess_100_s"] = t100
    return out


def _model_and_evidence_jsonables(problem):
    if isinstance(problem, CtbnProblem):
        return (ctbn_model_to_jsonable(problem.model, problem.t_max),
                ctbn_evidence_to_jsonable(problem))
    return (lv_model_to_jsonable(problem.q, problem.init, problem.t_max),
            lv_evidence_to_jsonable(problem))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _preset_kwargs(args) -> dict:
    kw = {"seed": args.seed, "method": args.method}
    if args.particles is not None:
        kw["n_particles"] = args.particles
    if args.iters is not None:
        kw["iterations"] = args.iters
    if args.burnin is not None:
        kw["burn_in"] = args.burnin
    if args.preset == "chain":
        kw.update(m_nodes=args.M, n_states=args.S, t_max=args.T)
    elif args.preset == "lotka_volterra":
        kw.update(t_max=args.t_max, obs_t_max=args.obs_t_max,
                  n_obs=args.n_obs)
    return kw


def _cmd_experiment(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kwargs = _preset_kwargs(args)
    preset, cfg0 = _build_experiment(args.preset, kwargs, args.virtual)
    problem = preset.problem
    reps = (args.replications if args.replications is not None
            else preset.replications)
    if reps < 1:
        raise ConfigError("need at least one replication")

    model_obj, evidence_obj = _model_and_evidence_jsonables(problem)
    _write_text(out / "model.json", canonical_dumps(model_obj))
    _write_text(out / "evidence.json", canonical_dumps(evidence_obj))

    seeds = [_derive_seed(args.seed, r) for r in range(reps)]
    jobs = [(args.preset, kwargs, args.virtual, r, seeds[r])
            for r in range(reps)]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_run_replication, jobs))
    else:
        results = [_run_replication(job) for job in jobs]
    results.sort(key=lambda item: item[0])

    rows, grid_rows = [], []
    per_rep_summary, per_rep_wall = {}, {}
    for rep, records, meta, grids in results:
        wall = meta.get("wall_s", 0.0)
        sys.stderr.write(
            f"replication {rep}: {cfg0.iterations} sweeps, "
            f"{wall * 1e6 / max(cfg0.iterations, 1):.1f} us/sweep\n")
        for rec in records:
            rows.append({"replication": rep, **rec})
        per_rep_summary[str(rep)] = _summary_for(records, wall, args.timing)
        per_rep_wall[str(rep)] = wall
        grid_rows.extend((rep,) + g for g in grids)

    _check_conservation(rows, cfg0.iterations - cfg0.burn_in, True)
    if not args.timing:
        _zero_walls(rows)
    _write_text(out / "statistics.csv", _stats_csv(rows, True))

    medians = [s["median_ess"] for s in per_rep_summary.values()
               if np.isfinite(s["median_ess"])]
    summary = {
        "replications": per_rep_summary,
        "median_ess": float(np.median(medians)) if medians else 0.0,
        "time_to_ess_100_s": (float(np.median(
            [s["time_to_ess_100_s"] for s in per_rep_summary.values()]))
            if args.timing else 0.0),
    }
    _write_text(out / "summary.json", canonical_dumps(summary))

    metadata = {"command": "experiment", "preset": args.preset,
                "parameters": kwargs, "config": _describe_config(cfg0),
                "replications": reps, "base_seed": args.seed,
                "replication_seeds": seeds, "threads": args.threads,
                "preset_metadata": preset.metadata}
    _write_text(out / "metadata.json", canonical_dumps(metadata))
    if args.timing:
        timing = {"per_replication_wall_s": per_rep_wall,
                  "total_wall_s": float(sum(per_rep_wall.values()))}
        _write_text(out / "timing.json", canonical_dumps(timing))
    if grid_rows:
        lines = ["replication,iteration,t,prey,predator"]
        for rep, it, t, x, y in grid_rows:
            lines.append(f"{rep},{it},{_fmt_float(t)},{x},{y}")
        _write_text(out / "grid.csv", "\n".join(lines) + "\n")
    return 0


def _cmd_infer(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = problem_from_jsonables(_load_json(args.model),
                                    _load_json(args.evidence))
    if args.virtual:
        policy = _parse_policy(args.virtual)
    elif isinstance(problem, CtbnProblem):
        policy = ScaledExit(2.0)
    else:
        policy = HomogeneousVirtual(30.0)
    cfg = ChainConfig(
        method=args.method,
        n_particles=args.particles if args.particles is not None else 10,
        policy=policy,
        iterations=args.iters if args.iters is not None else 1000,
        burn_in=args.burnin if args.burnin is not None else 100,
        seed=args.seed)

    grid_rows = []
    if isinstance(problem, MjpProblem):
        records, meta, grid_rows = _run_lv_chain(problem, cfg)
    else:
        result = run_chain(problem, cfg)
        records, meta = result.records, result.metadata
    wall = meta.get("wall_s", 0.0)
    sys.stderr.write(
        f"{cfg.iterations} sweeps, "
        f"{wall * 1e6 / max(cfg.iterations, 1):.1f} us/sweep\n")

    _check_conservation(records, cfg.iterations - cfg.burn_in, False)
    if not args.timing:
        _zero_walls(records)
    _write_text(out / "statistics.csv", _stats_csv(records, False))
    _write_text(out / "summary.json",
                canonical_dumps(_summary_for(records, wall, args.timing)))
    metadata = {"command": "infer", "model": str(args.model),
                "evidence": str(args.evidence),
                "config": _describe_config(cfg)}
    _write_text(out / "metadata.json", canonical_dumps(metadata))
    if args.timing:
        _write_text(out / "timing.json",
                    canonical_dumps({"wall_s": wall}))
    if grid_rows:
        lines = ["iteration,t,prey,predator"]
        for it, t, x, y in grid_rows:
            lines.append(f"{it},{_fmt_float(t)},{x},{y}")
        _write_text(out / "grid.csv", "\n".join(lines) + "\n")
    return 0


def _cmd_simulate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kwargs = _preset_kwargs(args)
    preset, _ = _build_experiment(args.preset, kwargs, None)
    problem = preset.problem
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    if isinstance(problem, CtbnProblem):
        path = simulate_ctbn(problem.model, problem.t_max, rng)
        traj_obj = {"kind": "ctbn",
                    "nodes": {str(w): trajectory_to_jsonable(path.trajs[w])
                              for w in problem.model.nodes}}
    else:
        traj = simulate_gillespie(problem.q, problem.init, problem.t_max,
                                  rng)
        traj_obj = {"kind": "lotka_volterra",
                    "trajectory": trajectory_to_jsonable(traj)}
    model_obj, _ = _model_and_evidence_jsonables(problem)
    _write_text(out / "model.json", canonical_dumps(model_obj))
    _write_text(out / "trajectory.json", canonical_dumps(traj_obj))
    return 0


def _cmd_diag(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with open(args.stats, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.stats}: {exc}") from exc
    if not lines:
        raise ConfigError(f"{args.stats} is empty")
    header = lines[0].split(",")
    missing = [c for c in _STAT_COLUMNS if c not in header]
    if missing:
        raise ConfigError(
            f"{args.stats} lacks required columns: {', '.join(missing)}")
    idx = {c: header.index(c) for c in header}
    with_rep = "replication" in idx
    per_rep: dict = {}
    seen: set = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ConfigError(
                f"{args.stats}:{lineno} has {len(parts)} fields, "
                f"expected {len(header)}")
        rec = {"iteration": int(parts[idx["iteration"]]),
               "node": parts[idx["node"]],
               "state": parts[idx["state"]],
               "occupation_time": float(parts[idx["occupation_time"]]),
               "jump_count": int(float(parts[idx["jump_count"]])),
               "wall_ms": float(parts[idx["wall_ms"]])}
        rep = parts[idx["replication"]] if with_rep else "0"
        key = (rep, rec["iteration"], rec["node"], rec["state"])
        if key in seen:
            raise ValidationError(
                f"{args.stats}:{lineno} duplicates statistics row {key}")
        seen.add(key)
        per_rep.setdefault(rep, []).append(rec)
    summaries = {rep: _summary_for(records, 0.0, False)
                 for rep, records in sorted(per_rep.items())}
    medians = [s["median_ess"] for s in summaries.values()
               if np.isfinite(s["median_ess"])]
    summary = {"replications": summaries,
               "median_ess": float(np.median(medians)) if medians else 0.0,
               "time_to_ess_100_s": 0.0}
    _write_text(out / "summary.json", canonical_dumps(summary))
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default=".")
    parser.add_argument("--method", choices=("pgas", "ffbs"),
                        default="pgas")
    parser.add_argument("--particles", type=int, default=None)
    parser.add_argument("--virtual", default=None, metavar="KIND:VALUE",
                        help="augmentation policy: uniformization:LAMBDA, "
                             "homogeneous:THETA or scaled:FACTOR")
    parser.add_argument("--iters", type=int, default=None)
    parser.add_argument("--burnin", type=int, default=None)
    parser.add_argument("--replications", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--timing", action="store_true",
                        help="record wall-clock times in output files "
                             "(breaks byte-for-byte determinism)")


def _add_preset_params(parser):
    parser.add_argument("preset", choices=sorted(PRESETS))
    parser.add_argument("--M", type=int, default=3,
                        help="chain preset: number of nodes")
    parser.add_argument("--S", type=int, default=2,
                        help="chain preset: states per node")
    parser.add_argument("--T", type=float, default=5.0,
                        help="chain preset: time horizon")
    parser.add_argument("--t-max", type=float, default=3000.0,
                        help="predator-prey preset: time horizon")
    parser.add_argument("--obs-t-max", type=float, default=1500.0,
                        help="predator-prey preset: last observation time")
    parser.add_argument("--n-obs", type=int, default=50,
                        help="predator-prey preset: observation count")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mjpgibbs",
                     description="Posterior sampling of hidden Markov "
                                 "jump-process trajectories")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p_sim = sub.add_parser("simulate",
                           help="forward-sample a preset model")
    _add_preset_params(p_sim)
    _add_common(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_inf = sub.add_parser("infer",
                           help="run the sampler on model/evidence files")
    p_inf.add_argument("--model", required=True)
    p_inf.add_argument("--evidence", required=True)
    _add_common(p_inf)
    p_inf.set_defaults(func=_cmd_infer)

    p_exp = sub.add_parser("experiment",
                           help="run a preset with replications")
    _add_preset_params(p_exp)
    _add_common(p_exp)
    p_exp.set_defaults(func=_cmd_experiment)

    p_diag = sub.add_parser("diag",
                            help="recompute summaries from a statistics "
                                 "CSV")
    p_diag.add_argument("--stats", required=True)
    _add_common(p_diag)
    p_diag.set_defaults(func=_cmd_diag)
    return parser


def _fail(exc, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc),
               "exit_code": code}
    sys.stderr.write(canonical_dumps(payload))
    return code


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigError, UnsupportedModelError) as exc:
        return _fail(exc, 2)
    except ValidationError as exc:
        return _fail(exc, 4)
    except MjpGibbsError as exc:
        return _fail(exc, 3)


if __name__ == "__main__":
    sys.exit(main())
