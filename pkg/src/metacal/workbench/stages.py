"""The workflow stages, callable from Python or through the CLI.

Each stage checks its upstream stages in the manifest, reads verified
artifacts, writes CSV/JSON outputs into the project directory and records
them.  Random draws use seeds derived from the master seed and the stage
name, so any stage can be re-run in isolation with the same result.
"""

from __future__ import annotations

import json
import re

import numpy as np

from .. import diagnostics, doe, kriging, sobol
from ..errors import ConfigurationError, StageError
from ..estuary import ParameterBounds
from ..optimize import (ForwardEvaluator, GradientConfig, NSGA2Config, ObjectiveSpec, PSOConfig,
                        SurrogateEvaluator, build_objective, calibrate as run_calibration, nsga2,
                        validate_optimum)
from ..scenario import Scenario, default_scenario, load_scenario, read_series_csv, save_scenario, write_series_csv
from .project import Project, load_models, save_models

SCENARIO_FILE = "scenario.json"
OBS_FILE = "observations.csv"
DESIGN_FILE = "design.csv"
TABLE_FILE = "error_table.csv"
BIAS_FILE = "bias_table.csv"
NASH_FILE = "nash_table.csv"
REPORT_FILE = "report.json"


def _write_json(project: Project, name: str, data) -> None:
    project.path(name).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _read_json(project: Project, name: str):
    return json.loads(project.read_text(name))


def scenario_of(project: Project) -> Scenario:
    return load_scenario(project.verify(SCENARIO_FILE))


def observations_of(project: Project):
    _, series = read_series_csv(project.verify(OBS_FILE))
    return series


def table_of(project: Project, bounds: ParameterBounds) -> doe.ErrorTable:
    return doe.read_table_csv(project.verify(TABLE_FILE), bounds)


def _tag(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_")


def parse_objective(scenario: Scenario, text: str) -> ObjectiveSpec:
    return ObjectiveSpec.parse(text, scenario.station_index)


def spec_tag(scenario: Scenario, spec: ObjectiveSpec) -> str:
    if spec.station is None:
        return spec.kind.removesuffix("_rmse")
    return f"{spec.kind}_{scenario.stations[spec.station].id}"


# -- stages ------------------------------------------------------------------

def synth_obs(project: Project, noise: float | None = None, discrepancy: bool = True,
              scenario_path=None) -> dict:
    """Set up the scenario (default unless given) and write its observations."""
    if scenario_path is not None:
        scenario = load_scenario(scenario_path)
    elif project.has_file(SCENARIO_FILE) and project.path(SCENARIO_FILE).exists():
        scenario = scenario_of(project)
        if not discrepancy:
            scenario = scenario.without_discrepancy()
    else:
        scenario = default_scenario(discrepancy=discrepancy)
    if noise is not None:
        scenario = scenario.with_noise(noise)
    project.root.mkdir(parents=True, exist_ok=True)
    save_scenario(scenario, project.path(SCENARIO_FILE))
    obs = scenario.observations()
    write_series_csv(project.path(OBS_FILE), obs, scenario.station_ids)
    project.complete("synth-obs", [SCENARIO_FILE, OBS_FILE], {"station_ids": list(scenario.station_ids)})
    return {"stations": len(obs), "samples": len(obs[0])}


def design(project: Project, n: int | None = None) -> dict:
    project.require("design")
    scenario = scenario_of(project)
    n = doe.default_design_size(scenario.bounds.dim) if n is None else n
    seed = project.seed("design")
    dm = doe.lhs_sample(n, scenario.bounds, seed)
    doe.write_design_csv(project.path(DESIGN_FILE), dm)
    project.complete("design", [DESIGN_FILE], {"n": n, "seed": seed})
    return {"n": n}


def evaluate(project: Project, workers: int | None = None) -> dict:
    project.require("evaluate")
    scenario = scenario_of(project)
    dm = doe.read_design_csv(project.verify(DESIGN_FILE), scenario.bounds)
    res = doe.evaluate_design_metrics(dm, scenario, observations_of(project), workers)
    doe.write_table_csv(project.path(TABLE_FILE), res.rmse)
    doe.write_metric_csv(project.path(BIAS_FILE), dm, res.bias, scenario.station_ids, "BIAS")
    doe.write_metric_csv(project.path(NASH_FILE), dm, res.nash, scenario.station_ids, "NASH")
    project.complete("evaluate", [TABLE_FILE, BIAS_FILE, NASH_FILE])
    return {"rows": dm.n, "mean_rmse_range": [float(res.rmse.mean_response().min()),
                                              float(res.rmse.mean_response().max())]}


def fit(project: Project, kernel: str = "matern52", basis: str = "constant", restarts: int = 8) -> dict:
    project.require("fit")
    scenario = scenario_of(project)
    table = table_of(project, scenario.bounds)
    config = kriging.KrigingConfig(kernel=kernel, basis=basis, restarts=restarts, seed=project.seed("fit"))
    models = kriging.fit_all(table, config)
    names = save_models(project, models)
    meta = {"station_ids": list(table.station_ids), "kernel": kernel, "basis": basis, "restarts": restarts,
            "seed": config.seed, "log_likelihood": [m.log_likelihood for m in models],
            "nugget": [m.nugget for m in models]}
    project.complete("fit", names, meta)
    return {"models": len(models)}


def validate(project: Project, n_test: int = 10) -> dict:
    project.require("validate")
    scenario = scenario_of(project)
    models = load_models(project)
    seed = project.seed("validate")
    test = doe.evaluate_design(doe.lhs_sample(n_test, scenario.bounds, seed), scenario, observations_of(project))
    rep = kriging.validate_mean(models, test)
    per_station = {str(sid): kriging.validate(m, test, k) for k, (m, sid) in enumerate(zip(models, test.station_ids))}
    pred = kriging.predict_all(models, test.design.points).mean(axis=1)
    with open(project.path("validation.csv"), "w") as fh:
        fh.write("point,predicted,observed\n")
        for i, (p, o) in enumerate(zip(pred, test.mean_response())):
            fh.write(f"{i},{float(p)!r},{float(o)!r}\n")
    doe.write_table_csv(project.path("validation_table.csv"), test)
    meta = {"mse": rep.mse, "r2": rep.r2, "n_test": rep.n_test, "seed": seed,
            "stations": {k: {"mse": v.mse, "r2": v.r2} for k, v in per_station.items()}}
    _write_json(project, "validation.json", meta)
    project.complete("validate", ["validation.csv", "validation_table.csv", "validation.json"], meta)
    return {"mse": rep.mse, "r2": rep.r2}


def run_sobol(project: Project, n_mc: int = 4096, second_order: bool = False, workers: int | None = None,
              threshold: float = 0.05) -> dict:
    project.require("sobol")
    scenario = scenario_of(project)
    objective = build_objective(ObjectiveSpec("mean_rmse"), load_models(project))
    seed = project.seed("sobol")
    res = sobol.sobol_indices(objective, scenario.bounds, n_mc, seed, second_order, workers=workers or 1)
    sobol.write_sobol_csv(project.path("sobol.csv"), res)
    rank = sobol.rank_parameters(res, threshold)
    meta = {"n_mc": n_mc, "seed": seed, "estimator": res.estimator, "threshold": threshold,
            "first": dict(zip(res.names, res.first.tolist())), "total": dict(zip(res.names, res.total.tolist())),
            "significant": [n for n, _ in rank.significant], "negligible": list(rank.negligible)}
    project.complete("sobol", ["sobol.csv"], meta)
    return {"significant": meta["significant"]}


def run_pca(project: Project) -> dict:
    project.require("pca")
    scenario = scenario_of(project)
    table = table_of(project, scenario.bounds)
    res = diagnostics.pca(table)
    diagnostics.write_explained_csv(project.path("pca_explained.csv"), res)
    diagnostics.write_circle_csv(project.path("pca_circle.csv"), res)
    diagnostics.write_scatter_csv(project.path("scatter.csv"), table)
    meta = {"explained_ratio": res.explained_ratio.tolist()}
    project.complete("pca", ["pca_explained.csv", "pca_circle.csv", "scatter.csv"], meta)
    return {"explained_first_two": float(res.explained_ratio[:2].sum())}


def run_stats(project: Project) -> dict:
    project.require("stats")
    scenario = scenario_of(project)
    stats = diagnostics.summary_stats(table_of(project, scenario.bounds))
    diagnostics.write_stats_csv(project.path("stats.csv"), stats)
    meta = {"stations": {str(k): v for k, v in stats.items()}}
    project.complete("stats", ["stats.csv"], meta)
    return {"stations": len(stats)}


def run_calibrate(project: Project, goal: str = "mean", algo: str = "both", swarm: int = 40, iters: int = 200,
                  starts: int = 10) -> dict:
    project.require("calibrate")
    scenario = scenario_of(project)
    spec = parse_objective(scenario, goal)
    if spec.kind not in ("mean_rmse", "station_rmse", "std_rmse", "max_rmse"):
        raise ConfigurationError(f"calibration goal must be mean, std, max or station:<id>, got {goal!r}")
    tag = spec_tag(scenario, spec)
    objective = build_objective(spec, load_models(project))

    # per-station goals also start from the shared optimum, when one exists
    extra = []
    info = project.stage_info("calibrate")
    if tag != "mean" and info is not None and "mean" in info["meta"] and project.is_current("calibrate"):
        extra.append(np.array(info["meta"]["mean"]["best_x"]))

    pso_cfg = PSOConfig(swarm=swarm, iters=iters, seed=project.seed(f"calibrate/{tag}/pso"))
    grad_cfg = GradientConfig(seed=project.seed(f"calibrate/{tag}/grad"))
    cal = run_calibration(objective, scenario.bounds, algo, pso_cfg, grad_cfg, starts, extra)
    outputs = []
    runs_meta = {}
    for name, run in cal.runs.items():
        fname = f"calibrate_{tag}_{name}.csv"
        run.write_history_csv(project.path(fname))
        outputs.append(fname)
        runs_meta[name] = {"best_f": run.best_f, "best_x": run.best_x.tolist(), "evals": run.evals,
                           "seed": run.seed, "iterations": len(run.history)}
    best = cal.best
    best_name = f"calibrate_{tag}.csv"
    best.write_best_csv(project.path(best_name), scenario.bounds.names)
    outputs.append(best_name)
    meta = {"goal": goal, "objective": spec.label, "algorithm": algo, "best_algorithm": best.algorithm,
            "best_f": best.best_f, "best_x": best.best_x.tolist(), "runs": runs_meta,
            "config": {"swarm": swarm, "iters": iters, "starts": starts}}
    _write_json(project, f"calibrate_{tag}.json", meta)
    outputs.append(f"calibrate_{tag}.json")
    project.complete("calibrate", outputs, {tag: meta}, merge=True)
    return {"goal": tag, "best_f": best.best_f, **{k: v["best_f"] for k, v in runs_meta.items()}}


def _metric_models(project: Project, scenario: Scenario, kind: str, station: int):
    """Surrogate of the signed bias or Nash score at one station, fitted on demand."""
    sid = scenario.stations[station].id
    name = f"models/{kind}_{sid}.json"
    if project.has_file(name) and project.stage_info("pareto") and name in project.stage_info("pareto")["outputs"] \
            and project.is_current("pareto"):
        return kriging.KrigingModel.loads(project.read_text(name)), name
    fname, prefix = (BIAS_FILE, "BIAS") if kind == "bias" else (NASH_FILE, "NASH")
    dm, values, ids = doe.read_metric_csv(project.verify(fname), scenario.bounds, prefix)
    fit_meta = project.stage_info("fit")["meta"]
    config = kriging.KrigingConfig(kernel=fit_meta["kernel"], basis=fit_meta["basis"], restarts=fit_meta["restarts"],
                                   seed=project.seed(f"pareto/{kind}/{sid}"))
    model = kriging.fit_xy(dm.points, values[:, ids.index(sid)], scenario.bounds, config, station_id=sid)
    save_models(project, [model], kind)
    return model, name


def run_pareto(project: Project, objectives: str, pop: int = 100, gens: int = 150) -> dict:
    project.require("pareto")
    scenario = scenario_of(project)
    specs = [parse_objective(scenario, t) for t in objectives.split(",") if t.strip()]
    if not 2 <= len(specs) <= 3:
        raise ConfigurationError(f"pareto needs 2 or 3 objectives, got {len(specs)}")
    outputs = []
    bias_models, nash_models = {}, {}
    for spec in specs:
        if spec.kind == "abs_bias":
            bias_models[spec.station], name = _metric_models(project, scenario, "bias", spec.station)
            outputs.append(name)
        elif spec.kind == "neg_nash":
            nash_models[spec.station], name = _metric_models(project, scenario, "nash", spec.station)
            outputs.append(name)
    ev = SurrogateEvaluator(load_models(project), bias_models, nash_models)
    funcs = [build_objective(s, ev) for s in specs]
    tag = "__".join(spec_tag(scenario, s) for s in specs)
    cfg = NSGA2Config(pop=pop, gens=gens, seed=project.seed(f"pareto/{tag}"))
    front = nsga2(funcs, scenario.bounds, cfg)
    fname = f"front_{tag}.csv"
    front.write_csv(project.path(fname))
    outputs.append(fname)
    meta = {"objectives": [s.label for s in specs], "points": len(front), "seed": cfg.seed,
            "config": {"pop": pop, "gens": gens}, "file": fname}
    _write_json(project, f"front_{tag}.json", meta)
    outputs.append(f"front_{tag}.json")
    project.complete("pareto", sorted(set(outputs)), {tag: meta}, merge=True)
    return {"front": fname, "points": len(front)}


def check_optimum(project: Project, goal: str = "mean", tolerance: float = 0.01) -> dict:
    project.require("check-optimum")
    scenario = scenario_of(project)
    spec = parse_objective(scenario, goal)
    tag = spec_tag(scenario, spec)
    info = project.stage_info("calibrate")["meta"]
    if tag not in info:
        raise StageError(f"no calibration for goal {goal!r}; run calibrate --goal {goal} first")
    x = np.array(info[tag]["best_x"])
    obs = observations_of(project)
    surrogate = build_objective(spec, load_models(project))
    forward = build_objective(spec, forward=ForwardEvaluator(scenario.forward_model(obs), obs), backing="forward")
    chk = validate_optimum(x, surrogate, forward, tolerance, bounds=scenario.bounds)
    meta = {"goal": goal, "f_hat": chk.f_hat, "f_true": chk.f_true, "rel_gap": chk.rel_gap,
            "tolerance": tolerance, "passed": chk.passed}
    _write_json(project, f"check_{tag}.json", meta)
    project.complete("check-optimum", [f"check_{tag}.json"], {tag: meta}, merge=True)
    return meta


def report(project: Project) -> dict:
    """Collect the results of every completed, current stage into ``report.json``."""
    done = [s for s in project.completed_stages() if project.is_current(s)]
    if not done:
        raise StageError("nothing to report: no stage has been run")
    meta = {s: project.stage_info(s)["meta"] for s in done}
    doc = {"master_seed": project.master_seed, "stages": done}
    if "validate" in meta:
        v = meta["validate"]
        doc["validation"] = {"mse": v["mse"], "r2": v["r2"], "n_test": v["n_test"], "file": "validation.csv"}
    if "sobol" in meta:
        s = meta["sobol"]
        doc["sobol"] = {"n_mc": s["n_mc"], "estimator": s["estimator"], "first": s["first"], "total": s["total"],
                        "significant": s["significant"], "file": "sobol.csv"}
    if "stats" in meta:
        doc["quantiles"] = {"stations": meta["stats"]["stations"], "file": "stats.csv"}
    if "pca" in meta:
        doc["pca"] = {"explained_ratio": meta["pca"]["explained_ratio"], "file": "pca_circle.csv"}
    if "calibrate" in meta:
        checks = meta.get("check-optimum", {})
        doc["calibration"] = {
            tag: {"best_f": c["best_f"], "best_x": c["best_x"], "algorithm": c["best_algorithm"],
                  "rel_gap": checks.get(tag, {}).get("rel_gap"), "file": f"calibrate_{tag}.csv"}
            for tag, c in sorted(meta["calibrate"].items())
        }
    if "pareto" in meta:
        doc["fronts"] = {tag: {"objectives": p["objectives"], "points": p["points"], "file": p["file"]}
                         for tag, p in sorted(meta["pareto"].items())}
    _write_json(project, REPORT_FILE, doc)
    return doc
