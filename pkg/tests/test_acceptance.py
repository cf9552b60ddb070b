"""End-to-end acceptance criteria, each checked at its stated tolerance and runtime.

Every test prints one ``criterion N: PASS|FAIL`` line; the lines are also
collected into the terminal summary.
"""

import csv
import json
import math
import shutil
import time

import numpy as np
import pytest

import conftest
from metacal import doe, metrics, sobol
from metacal.estuary import ParameterBounds
from metacal.optimize import NSGA2Config, ObjectiveSpec, build_objective, nondominated_sort, nsga2
from metacal.optimize.objectives import ForwardEvaluator
from metacal.workbench import Project, load_models, main
from metacal.workbench.stages import observations_of, parse_objective, scenario_of, spec_tag, table_of


def verdict(n, ok, detail, elapsed=None, limit=None):
    if limit is not None:
        detail = f"{detail}; {elapsed:.1f} s (limit {limit} s)"
        ok = ok and elapsed < limit
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    conftest.ACCEPTANCE.append((n, ok, detail))
    assert ok, line


def cli(root, *args):
    t = time.perf_counter()
    code = main([*args, "--project", str(root)])
    assert code == 0, (args, code)
    return time.perf_counter() - t


def read_json(path):
    return json.loads(path.read_text())


def read_history(path):
    with open(path) as fh:
        return np.array([float(r["best_f"]) for r in csv.DictReader(fh)])


class Pipeline:
    """Default-seed project shared by the criteria; stage timings are kept."""

    def __init__(self, root):
        self.root = root
        self.times = {}
        for cmd in ("synth-obs", "design", "evaluate", "fit"):
            self.times[cmd] = cli(root, cmd)
        self.project = Project(root)
        self.scenario = scenario_of(self.project)

    def calibrated(self, goal):
        """Calibration record for ``goal``, running the stage on first use."""
        tag = spec_tag(self.scenario, parse_objective(self.scenario, goal))
        path = self.root / f"calibrate_{tag}.json"
        if not path.exists():
            if goal != "mean":
                self.calibrated("mean")
            self.times[f"calibrate {goal}"] = cli(self.root, "calibrate", "--goal", goal)
        return read_json(path)

    def models(self):
        return load_models(Project(self.root))


@pytest.fixture(scope="module")
def pipe(tmp_path_factory):
    return Pipeline(tmp_path_factory.mktemp("default"))


# 1 -------------------------------------------------------------------------

def test_criterion_01_lhs_exactness():
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(50):
        n, d, seed = int(rng.integers(2, 201)), int(rng.integers(1, 13)), int(rng.integers(2**31))
        dm = doe.lhs_sample(n, ParameterBounds.unit(d), seed)
        strata = np.floor(dm.points * n).astype(int)
        ok = all(np.array_equal(np.sort(col), np.arange(n)) for col in strata.T)
        bad += not ok
    size = doe.default_design_size(9)
    verdict(1, bad == 0 and size == 90, f"{50 - bad}/50 designs exact, default size {size}",
            time.perf_counter() - t, 5)


# 2 -------------------------------------------------------------------------

def test_criterion_02_interpolation(pipe):
    t = time.perf_counter()
    table = table_of(pipe.project, pipe.scenario.bounds)
    models = pipe.models()
    worst_y, worst_v = 0.0, 0.0
    for k, m in enumerate(models):
        y = table.responses[:, k]
        worst_y = max(worst_y, np.max(np.abs(m.predict_mean(table.design.points) - y)) / np.max(np.abs(y)))
        worst_v = max(worst_v, np.max(m.predict_variance(table.design.points)) / (10 * m.nugget * m.process_variance))
    elapsed = pipe.times["fit"] + time.perf_counter() - t
    verdict(2, table.design.n == 90 and worst_y <= 1e-6 and worst_v <= 1.0,
            f"max rel residual {worst_y:.2e} (<= 1e-6), max var/(10 nugget sigma2) {worst_v:.2e} (<= 1)",
            elapsed, 30)


# 3 -------------------------------------------------------------------------

def test_criterion_03_validation(pipe):
    elapsed = cli(pipe.root, "validate")
    v = read_json(pipe.root / "validation.json")
    verdict(3, v["n_test"] == 10 and v["r2"] >= 0.99 and v["mse"] <= 1e-4,
            f"R2 {v['r2']:.5f} (>= 0.99), MSE {v['mse']:.2e} m2 (<= 1e-4)", elapsed, 60)


# 4 -------------------------------------------------------------------------

def ishigami(X, a=7.0, b=0.1):
    return np.sin(X[:, 0]) + a * np.sin(X[:, 1]) ** 2 + b * X[:, 2] ** 4 * np.sin(X[:, 0])


def test_criterion_04_sobol_oracle():
    t = time.perf_counter()
    a, b = 7.0, 0.1
    v1 = 0.5 * (1 + b * math.pi**4 / 5) ** 2
    v2 = a**2 / 8
    v13 = b**2 * math.pi**8 * (1 / 18 - 1 / 50)
    var = v1 + v2 + v13
    exact_first = np.array([v1, v2, 0.0]) / var
    exact_t3 = v13 / var
    box = ParameterBounds((-math.pi,) * 3, (math.pi,) * 3)
    res = sobol.sobol_indices(ishigami, box, 2**14, seed=1, vectorized=True)
    err_first = np.max(np.abs(res.first - exact_first))
    err_t3 = abs(res.total[2] - exact_t3)
    lin = sobol.sobol_indices(lambda X: X[:, 0] + 2 * X[:, 1], ParameterBounds.unit(2), 2**14, seed=2,
                              vectorized=True)
    err_lin = np.max(np.abs(lin.first - [0.2, 0.8]))
    verdict(4, err_first <= 0.05 and err_t3 <= 0.05 and err_lin <= 0.02,
            f"Ishigami first-order err {err_first:.4f}, S_T3 err {err_t3:.4f} (<= 0.05); "
            f"linear err {err_lin:.4f} (<= 0.02)", time.perf_counter() - t, 30)


# 5 -------------------------------------------------------------------------

def test_criterion_05_sensitivity_ranking(pipe):
    t = time.perf_counter()
    sc = pipe.scenario
    obs = observations_of(pipe.project)
    n_mc, seed = 4096, 5
    sur = sobol.sobol_indices(build_objective(ObjectiveSpec("mean_rmse"), pipe.models()), sc.bounds, n_mc, seed)
    fwd_obj = build_objective(ObjectiveSpec("mean_rmse"), forward=ForwardEvaluator(sc.forward_model(obs), obs),
                              backing="forward")
    fwd = sobol.sobol_indices(fwd_obj, sc.bounds, n_mc, seed)
    rank = sobol.rank_parameters(sur, 0.05)
    sig = {n for n, _ in rank.significant}
    gap = max(np.max(np.abs(sur.first - fwd.first)), np.max(np.abs(sur.total - fwd.total)))
    ok = {"alpha", "gamma"} <= sig and "beta" not in sig and gap <= 0.1
    verdict(5, ok, f"significant {sorted(sig)}, beta S_T {sur.total[1]:.3f}; "
                   f"max |surrogate - forward| {gap:.3f} (<= 0.1)", time.perf_counter() - t, 300)


# 6 -------------------------------------------------------------------------

def test_criterion_06_optimizer_agreement(pipe):
    rec = pipe.calibrated("mean")
    f_pso, f_grad = rec["runs"]["pso"]["best_f"], rec["runs"]["grad"]["best_f"]
    rel = abs(f_pso - f_grad) / max(abs(f_pso), abs(f_grad))
    hist = [read_history(pipe.root / f"calibrate_mean_{a}.csv") for a in ("pso", "grad")]
    mono = all(np.all(np.diff(h) <= 0) for h in hist)
    ok = rel <= 1e-3 and mono and rec["config"] == {"swarm": 40, "iters": 200, "starts": 10}
    verdict(6, ok, f"PSO {f_pso:.6f} vs BFGS {f_grad:.6f}, rel {rel:.1e} (<= 1e-3); histories nonincreasing {mono}",
            pipe.times["calibrate mean"], 120)


# 7 -------------------------------------------------------------------------

def test_criterion_07_trust_gate(pipe):
    pipe.calibrated("mean")
    elapsed = cli(pipe.root, "check-optimum", "--goal", "mean")
    chk = read_json(pipe.root / "check_mean.json")
    verdict(7, chk["rel_gap"] <= 0.01,
            f"surrogate {chk['f_hat']:.6f} vs forward {chk['f_true']:.6f}, rel_gap {chk['rel_gap']:.4f} (<= 0.01)",
            elapsed, 30)


# 8 -------------------------------------------------------------------------

def test_criterion_08_recovery(tmp_path):
    t = time.perf_counter()
    out = {}
    for noise in (0.02, 0.0):
        root = tmp_path / f"noise{noise}"
        cli(root, "synth-obs", "--no-discrepancy", "--noise", str(noise))
        for cmd in ("design", "evaluate", "fit"):
            cli(root, cmd)
        cli(root, "calibrate", "--goal", "mean")
        cli(root, "check-optimum", "--goal", "mean")
        out[noise] = read_json(root / "check_mean.json")["f_true"]
    ok = out[0.02] <= 1.1 * 0.02 and out[0.0] <= 1e-3
    verdict(8, ok, f"calibrated mean RMSE {out[0.02]:.4f} m at noise 0.02 (<= 0.022), "
                   f"{out[0.0]:.4f} m at noise 0 (<= 0.001)", time.perf_counter() - t, 300)


# 9 -------------------------------------------------------------------------

def test_criterion_09_station_calibration(pipe):
    t = time.perf_counter()
    before = pipe.times.get("calibrate mean", 0.0)
    x_mean = np.array(pipe.calibrated("mean")["best_x"])
    models = pipe.models()
    worst = -np.inf
    for k, sid in enumerate(pipe.scenario.station_ids):
        rec = pipe.calibrated(f"station:{sid}")
        at_mean = build_objective(ObjectiveSpec("station_rmse", k), models)(x_mean)
        worst = max(worst, rec["best_f"] - at_mean)
    elapsed = time.perf_counter() - t - (pipe.times.get("calibrate mean", 0.0) - before)
    verdict(9, worst <= 1e-9, f"max (J_s at station optimum - J_s at mean optimum) {worst:.2e} (<= 1e-9)",
            elapsed, 600)


# 10 ------------------------------------------------------------------------

def brute_fronts(F):
    left = set(range(len(F)))
    fronts = []
    while left:
        front = [i for i in sorted(left)
                 if not any(np.all(F[j] <= F[i]) and np.any(F[j] < F[i]) for j in left if j != i)]
        fronts.append(front)
        left -= set(front)
    return fronts


def mutually_nondominated(F):
    return not any(np.all(F[j] <= F[i]) and np.any(F[j] < F[i]) for i in range(len(F)) for j in range(len(F)))


def test_criterion_10_nsga2_oracle():
    t = time.perf_counter()

    def zdt1(X):
        g = 1 + 9 * X[:, 1:].mean(axis=1)
        return g * (1 - np.sqrt(X[:, 0] / g))

    front = nsga2([lambda X: X[:, 0], zdt1], ParameterBounds.unit(10), NSGA2Config(pop=100, gens=150, seed=1),
                  vectorized=True)
    f1 = np.linspace(0, 1, 100001)
    dist = float(np.mean([np.min(np.hypot(f1 - a, 1 - np.sqrt(f1) - b)) for a, b in front.F]))
    rng = np.random.default_rng(10)
    sort_ok = 0
    for _ in range(100):
        n, m = int(rng.integers(1, 80)), int(rng.integers(2, 4))
        F = rng.integers(0, 8, size=(n, m)).astype(float) if rng.random() < 0.5 else rng.random((n, m))
        sort_ok += nondominated_sort(F) == brute_fronts(F)
    ok = dist <= 0.05 and mutually_nondominated(front.F) and sort_ok == 100
    verdict(10, ok, f"ZDT1 mean distance {dist:.2e} (<= 0.05), front nondominated {mutually_nondominated(front.F)}, "
                    f"sort oracle {sort_ok}/100", time.perf_counter() - t, 120)


# 11 ------------------------------------------------------------------------

def test_criterion_11_trade_offs(pipe):
    t = time.perf_counter()
    before = sum(v for k, v in pipe.times.items() if k.startswith("calibrate"))
    models = pipe.models()
    sc = pipe.scenario
    cases = (("station:4", "station:3"), ("max", "mean"), ("std", "mean"))
    details, ok = [], True
    for a, b in cases:
        cli(pipe.root, "pareto", "--objectives", f"{a},{b}")
        specs = [parse_objective(sc, g) for g in (a, b)]
        tag = "__".join(spec_tag(sc, s) for s in specs)
        with open(pipe.root / f"front_{tag}.csv") as fh:
            F = np.array([[float(r["f1"]), float(r["f2"])] for r in csv.DictReader(fh)])
        fa, fb = (build_objective(s, models) for s in specs)
        xa, xb = (np.array(pipe.calibrated(g)["best_x"]) for g in (a, b))
        # how much each single-objective optimum costs on the other objective
        differ = max(fb(xa) - fb(xb), fa(xb) - fa(xa))
        ideal = np.array([fa(xa), fb(xb)])
        joint = bool(np.any(np.all(F <= ideal + 1e-9, axis=1)))
        strict = not joint and np.argmin(F[:, 0]) != np.argmin(F[:, 1])
        case_ok = len(F) >= 10 and mutually_nondominated(F) and (strict or differ <= 1e-3)
        ok &= case_ok
        details.append(f"{a} vs {b}: {len(F)} pts, optima differ by {differ:.2e}, strict {strict}")
    extra = sum(v for k, v in pipe.times.items() if k.startswith("calibrate")) - before
    verdict(11, ok, "; ".join(details), time.perf_counter() - t - extra, 300)


# 12 ------------------------------------------------------------------------

def test_criterion_12_metric_oracles():
    t = time.perf_counter()
    sim, obs = [1.0, 2.0, 3.0], [0.0, 2.0, 4.0]
    checks = [
        abs(metrics.rmse(sim, obs) - math.sqrt(2 / 3)) <= 1e-12,
        metrics.rmse(sim, sim) == 0.0,
        abs(metrics.bias([3.0, 3.0], [1.0, 1.0]) - 2.0) <= 1e-12,
        abs(metrics.bias(sim, obs)) <= 1e-12,
        metrics.nash(sim, sim) == 1.0,
        abs(metrics.nash(sim, obs) - 0.0) <= 1e-12,
    ]
    rng = np.random.default_rng(12)
    holds = 0
    for _ in range(1000):
        n = int(rng.integers(1, 200))
        a, b = rng.normal(size=n) * rng.uniform(0.01, 3), rng.normal(size=n) + rng.normal()
        holds += metrics.rmse(a, b) >= abs(metrics.bias(a, b)) - 1e-15
    verdict(12, all(checks) and holds == 1000, f"{sum(checks)}/{len(checks)} hand values, rmse >= |bias| on {holds}/1000",
            time.perf_counter() - t, 5)


# 13 ------------------------------------------------------------------------

FULL = (["synth-obs"], ["design"], ["evaluate", "--workers", "{w}"], ["fit"], ["validate"],
        ["sobol", "--workers", "{w}"], ["pca"], ["stats"], ["calibrate", "--goal", "mean"],
        ["calibrate", "--goal", "station:6"], ["pareto", "--objectives", "max,mean"],
        ["check-optimum", "--goal", "mean"], ["report"])


def test_criterion_13_determinism(tmp_path):
    t = time.perf_counter()
    roots = []
    for w in (1, 4):
        root = tmp_path / f"workers{w}"
        for cmd in FULL:
            cli(root, *(c.format(w=w) for c in cmd))
        roots.append(root)
    names = sorted(p.relative_to(roots[0]) for p in roots[0].rglob("*.csv"))
    other = sorted(p.relative_to(roots[1]) for p in roots[1].rglob("*.csv"))
    same = [n for n in names if (roots[0] / n).read_bytes() == (roots[1] / n).read_bytes()]
    ok = names == other and len(same) == len(names) and len(names) >= 15
    shutil.rmtree(tmp_path, ignore_errors=True)
    verdict(13, ok, f"{len(same)}/{len(names)} CSV artifacts byte-identical across 1 and 4 workers",
            time.perf_counter() - t, 600)
