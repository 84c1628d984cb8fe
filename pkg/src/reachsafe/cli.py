"""Command-line entry point.

Subcommands mirror the library workflow: solve a value grid, train an
estimator, run a closed-loop scenario, validate it with projected rollouts,
compute vulnerability fields, check the filter's assumptions, and summarize
per-step timing.  Scenario files are TOML; every plant parameter has its
benchmark default and can be overridden per run.  Exit code 0 means every
audit asserted by the command passed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from reachsafe import harness
from reachsafe.bounds import Box
from reachsafe.hjgrid import load_grid, save_grid
from reachsafe.nets import load_model, save_model
from reachsafe.robust import check_safe_cone
from reachsafe.sensitivity import (
    FIM_KAPPA,
    NNV_VOLUME,
    field_rank_correlation,
    heatmap,
    save_field_csv,
)
from reachsafe.systems import DoubleIntParams, LANDMARK_LAYOUTS


def scenario_from_toml(path) -> harness.Scenario:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    run = doc.get("run", {})
    system = doc.get("system", {})
    attack = doc.get("attack", {})
    fp = doc.get("filter_params", {})
    name = doc.get("name", Path(path).stem)
    overrides = {k: v for k, v in system.items() if k not in ("name", "landmark_layout")}
    return harness.Scenario(
        name=name,
        system=system.get("name", "scalar"),
        filter_name=run.get("filter", "none"),
        seed=int(run.get("seed", 0)),
        horizon=int(run.get("horizon", 150)),
        x0=tuple(run["x0"]) if "x0" in run else None,
        attack_kind=attack.get("kind", "none"),
        attack_eps=float(attack.get("eps", 0.0)),
        attack_alpha=attack.get("alpha"),
        attack_iters=int(attack.get("iters", 20)),
        attack_target=attack.get("target", ""),
        lattice_density=int(fp.get("lattice_density", 5)),
        delta_band_cells=float(fp.get("delta_band_cells", 3.0)),
        mc_rollouts=int(run.get("mc_rollouts", 10_000)),
        cbf_gamma=float(fp.get("cbf_gamma", 0.5)),
        cbf_design_eps=float(fp.get("cbf_design_eps", 0.1)),
        cbf_margin=fp.get("cbf_margin"),
        landmark_layout=system.get("landmark_layout", "square"),
        system_overrides=overrides,
    )


def _grid_kind(sc: harness.Scenario) -> str:
    return {"scalar": "scalar", "taxi": "taxi", "landmarks": "di-axis"}[sc.system]


def _prepare_runtime(sc: harness.Scenario, args) -> harness.Runtime:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid_path = Path(args.grid) if getattr(args, "grid", None) else out_dir / f"{_grid_kind(sc)}.grid"
    if grid_path.exists():
        grid = load_grid(grid_path)
    else:
        print(f"solving value grid -> {grid_path}")
        grid = harness.solve_default_grid(_grid_kind(sc), **sc.system_overrides)
        save_grid(grid, grid_path)
    estimator = None
    est_err = None
    if sc.system != "scalar":
        model_path = (
            Path(args.estimator)
            if getattr(args, "estimator", None)
            else out_dir / f"{sc.system}-{sc.landmark_layout}-estimator.json"
        )
        meta_path = Path(str(model_path) + ".meta.json")
        if model_path.exists() and meta_path.exists():
            estimator = load_model(model_path)
            est_err = np.asarray(json.loads(meta_path.read_text())["est_err"])
        else:
            print(f"training estimator -> {model_path}")
            estimator, est_err = _train_for(sc)
            save_model(estimator, model_path)
            meta_path.write_text(json.dumps({"est_err": est_err.tolist()}))
    return harness.build_runtime(sc, grid, estimator, est_err)


def _train_for(sc: harness.Scenario):
    if sc.system == "taxi":
        return harness.train_taxi_estimator(seed=sc.seed)
    params = DoubleIntParams(
        landmarks=LANDMARK_LAYOUTS[sc.landmark_layout].copy(), **sc.system_overrides
    )
    return harness.train_landmark_estimator(params, seed=sc.seed)


def cmd_solve_hj(args) -> int:
    grid = harness.solve_default_grid(args.system, tol=args.tol, max_iters=args.max_iters)
    save_grid(grid, args.out)
    print(
        f"grid {args.system}: iterations={grid.iterations} "
        f"residual={grid.residual:.3g} converged={grid.converged}"
    )
    return 0 if grid.converged else 2


def cmd_train_estimator(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.system == "taxi":
        model, est_err = harness.train_taxi_estimator(seed=seed)
    elif args.system == "landmarks":
        params = DoubleIntParams(landmarks=LANDMARK_LAYOUTS[args.layout].copy())
        model, est_err = harness.train_landmark_estimator(params, seed=seed)
    else:
        print("only taxi and landmarks have trainable estimators", file=sys.stderr)
        return 2
    save_model(model, args.out)
    Path(str(args.out) + ".meta.json").write_text(
        json.dumps({"est_err": est_err.tolist()})
    )
    print(f"estimator saved to {args.out}; error bound per dim: {est_err}")
    return 0


def cmd_run_scenario(args) -> int:
    sc = scenario_from_toml(args.config)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    runtime = _prepare_runtime(sc, args)
    result = harness.run_scenario(sc, runtime)
    out = Path(args.out) if args.out else Path(args.out_dir) / f"{sc.name}.csv"
    harness.write_csv(result.log, out)
    c_min = float(np.min(result.log.array("c_true")))
    print(f"trajectory -> {out}; min safety margin {c_min:.4f}; audits {result.audits}")
    return 0 if result.ok else 2


def cmd_mc_validate(args) -> int:
    sc = scenario_from_toml(args.config)
    if sc.filter_name == "none":
        print("mc-validate needs a filtered reference scenario", file=sys.stderr)
        return 2
    runtime = _prepare_runtime(sc, args)
    result = harness.run_scenario(sc, runtime)
    n = args.rollouts if args.rollouts is not None else sc.mc_rollouts
    summary = harness.monte_carlo_rollouts(runtime, result, n)
    summary["reference_audits"] = result.audits
    out = Path(args.out) if args.out else Path(args.out_dir) / f"{sc.name}-mc.json"
    out.write_text(json.dumps(summary, indent=2, default=bool))
    print(f"{summary['violations']} of {summary['rollouts']} projected rollouts violated")
    return 0 if summary["violations"] == 0 and result.ok else 2


def cmd_heatmap(args) -> int:
    params = DoubleIntParams(landmarks=LANDMARK_LAYOUTS[args.layout].copy())
    model = None
    if args.metric == NNV_VOLUME:
        if args.estimator:
            model = load_model(args.estimator)
        else:
            model, _ = harness.train_landmark_estimator(params, seed=args.seed or 0)
    field = heatmap(args.metric, params, eps=args.eps, model=model, n=args.nodes)
    save_field_csv(field, args.out, extra_meta={"layout": args.layout})
    print(f"{args.metric} field ({args.nodes}x{args.nodes}) -> {args.out}")
    if args.compare_to:
        other = _read_field_csv(args.compare_to)
        rho = field_rank_correlation(field, other)
        print(f"rank correlation vs {args.compare_to}: {rho:.3f}")
    return 0


def _read_field_csv(path):
    from reachsafe.sensitivity import ScalarField

    raw = np.genfromtxt(path, delimiter=",", skip_header=1)
    xs = np.unique(raw[:, 0])
    ys = np.unique(raw[:, 1])
    vals = raw[:, 2].reshape(len(xs), len(ys))
    return ScalarField(xs, ys, vals, "loaded", 0.0)


def cmd_check_assumptions(args) -> int:
    sc = scenario_from_toml(args.config)
    runtime = _prepare_runtime(sc, args)
    report: dict = {"scenario": sc.name}
    # offline: cone classification on boxes straddling each level-set crossing
    axis = runtime.axes[0]
    grid = axis.grid
    nbhd = axis.nbhd
    cones = []
    nodes = grid.spec.nodes()
    values = grid.values.ravel()
    rng = np.random.default_rng(sc.seed)
    near_zero = nodes[np.abs(values) <= nbhd.delta_band]
    for _ in range(min(args.samples, len(near_zero))):
        center = near_zero[rng.integers(len(near_zero))]
        half = 0.5 * grid.spec.spacing
        box = Box(center - half, center + half)
        cones.append(check_safe_cone(grid, axis.system, box, nbhd))
    report["cone_counts"] = {c: cones.count(c) for c in set(cones)}
    # runtime: replay the scenario and collect the bounded-uncertainty flags
    result = harness.run_scenario(sc, runtime)
    active = result.log.array("filter_active") == 1
    if "asm2_all" in result.log.columns:
        asm2 = result.log.array("asm2_all") == 1
        report["active_steps"] = int(active.sum())
        report["asm2_failures_on_active"] = int(np.sum(active & ~asm2))
    out = Path(args.out) if args.out else Path(args.out_dir) / f"{sc.name}-assumptions.json"
    out.write_text(json.dumps(report, indent=2))
    print(json.dumps(report, indent=2))
    ok = report.get("asm2_failures_on_active", 0) == 0 and "empty" not in report["cone_counts"]
    return 0 if ok else 2


def cmd_timing(args) -> int:
    data = harness.read_csv(args.infile)
    cols = list(data.keys())
    log = harness.TrajectoryLog(
        columns=cols,
        rows=[{c: data[c][i] for c in cols} for i in range(len(data[cols[0]]))],
    )
    report = harness.timing_report(log)
    print(json.dumps(report, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="reachsafe",
        description="uncertainty-aware reachability safety filtering benchmarks",
    )
    parser.add_argument("--seed", type=int, default=None, help="override scenario seed")
    parser.add_argument("--out-dir", default="runs", help="artifact directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-hj", help="solve a value grid")
    p.add_argument("--system", required=True, choices=("scalar", "taxi", "di-axis"))
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=500)
    p.set_defaults(func=cmd_solve_hj)

    p = sub.add_parser("train-estimator", help="train a state estimator")
    p.add_argument("--system", required=True, choices=("taxi", "landmarks"))
    p.add_argument("--layout", default="square", choices=tuple(LANDMARK_LAYOUTS))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_estimator)

    p = sub.add_parser("run-scenario", help="run a closed-loop scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--estimator", default=None)
    p.set_defaults(func=cmd_run_scenario)

    p = sub.add_parser("mc-validate", help="projected-rollout validation")
    p.add_argument("--config", required=True)
    p.add_argument("--rollouts", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--estimator", default=None)
    p.set_defaults(func=cmd_mc_validate)

    p = sub.add_parser("heatmap", help="vulnerability field over the workspace")
    p.add_argument("--metric", required=True, choices=(FIM_KAPPA, NNV_VOLUME))
    p.add_argument("--layout", default="triangular", choices=tuple(LANDMARK_LAYOUTS))
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--nodes", type=int, default=15)
    p.add_argument("--estimator", default=None)
    p.add_argument("--compare-to", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("check-assumptions", help="cone and uncertainty-bound checks")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--out", default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--estimator", default=None)
    p.set_defaults(func=cmd_check_assumptions)

    p = sub.add_parser("timing", help="per-step timing report from a trajectory CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_timing)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
