"""Config-driven experiment runner.

    bsdegame <subcommand> --config run.json [--out DIR] [--seed N]

Each run writes ``<subcommand>.csv`` and ``<subcommand>.json`` into ``--out``.
Exit status: 0 all tolerances pass, 1 a tolerance failed, 2 bad config,
3 positivity guard or brute-force budget refused the run.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .affine_rep import GridConfig, fenchel_dual, maxmin_scan
from .bsde import (ControlPolicy, SolutionField, dual_expectation, dual_expectation_paths,
                   solve_bsde, solve_linear_bsde)
from .errors import BudgetExceeded, PositivityViolation
from .evaluations import (EvaluationOperator, check_axioms, check_domination,
                          dual_representation, evaluate)
from .game import brute_force_count, concave_inf_value, game_dpp_value, open_loop_bruteforce
from .generators import BSDEProblem, catalog, obstacle_fields, terminal_field
from .lattice import build
from .reflected import mixed_game_dpp, skorokhod_sum, solve_rbsde

SUBCOMMANDS = ("lemma-check", "solve", "dual", "game", "reflected-game", "axioms",
               "concave", "bruteforce")

DEFAULT_TOL = {
    "identity": 1e-12,
    "duality": 1e-12,
    "gap": 1e-12,
    "axioms": 1e-12,
    "skorokhod": 0.0,
}


class ConfigError(ValueError):
    pass


def _named(spec, what):
    if isinstance(spec, str):
        return spec, {}
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"{what} must be a name or an object with a 'name' key")
    params = {k: v for k, v in spec.items() if k != "name"}
    return spec["name"], params


class Experiment:
    """Parsed configuration with the lattice, problem and grids it describes."""

    def __init__(self, cfg: dict, seed: int | None = None):
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        self.cfg = cfg
        try:
            lat = cfg.get("lattice", {})
            self.lat = build(lat.get("T", 1.0), lat.get("N", 16), lat.get("d", 1))
            gname, gparams = _named(cfg.get("generator", "zero"), "generator")
            self.generator = catalog(gname, d=self.lat.d, **gparams)
            tname, tparams = _named(cfg.get("terminal", "bt"), "terminal")
            xi = terminal_field(self.lat, tname, **tparams)
            oname, oparams = _named(cfg.get("obstacle", "none"), "obstacle")
            self.problem = BSDEProblem(self.generator, xi,
                                       obstacle_fields(self.lat, oname, **oparams))
            self.grids = GridConfig(**{k: (tuple(map(tuple, v)) if k.endswith("points") else
                                          tuple(v) if isinstance(v, list) else v)
                                       for k, v in cfg.get("grids", {}).items()})
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        self.seed = int(cfg.get("seed", 0) if seed is None else seed)
        levels = cfg.get("levels", {})
        self.s = int(levels.get("s", 0))
        self.t = int(levels.get("t", self.lat.N))
        if not 0 <= self.s <= self.t <= self.lat.N:
            raise ConfigError(f"levels need 0 <= s <= t <= N, got {self.s}, {self.t}")
        self.tol = {**DEFAULT_TOL, **cfg.get("tolerances", {})}
        self.expect = cfg.get("expect")

    def params(self) -> dict:
        return {"lattice": {"T": self.lat.T, "N": self.lat.N, "d": self.lat.d},
                "generator": {"name": self.generator.name, **self.generator.params,
                              "c_l1": self.generator.c_l1, "c_rep": self.generator.c_rep},
                "terminal": self.cfg.get("terminal", "bt"),
                "obstacle": self.cfg.get("obstacle", "none"),
                "grids": self.cfg.get("grids", {}),
                "levels": {"s": self.s, "t": self.t},
                "seed": self.seed,
                "tolerances": self.tol}


def _f(x):
    return float(x)


def solution_rows(sol: SolutionField, d: int, stop: list | None = None):
    header = ["level", "node_index", "y"] + [f"z_{i + 1}" for i in range(d)] + ["a"]
    if stop is not None:
        header.append("stop")
    rows = []
    for j, y in enumerate(sol.y):
        k = sol.start + j
        yv = np.ravel(y)
        zv = np.reshape(sol.z[j], (-1, d)) if j < len(sol.z) else None
        av = np.ravel(sol.a[j]) if j < len(sol.a) else np.zeros(len(yv))
        sv = None if stop is None or stop[k] is None else np.ravel(stop[k])
        for n in range(len(yv)):
            row = [k, n, repr(_f(yv[n]))]
            row += [repr(_f(v)) for v in zv[n]] if zv is not None else [""] * d
            row.append(repr(_f(av[n])))
            if stop is not None:
                row.append("" if sv is None else int(sv[n]))
            rows.append(row)
    return header, rows


def _write(out: Path, name: str, header, rows, summary: dict):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    with open(out / f"{name}.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


def _check_expect(ex: Experiment, values: dict, checks: dict):
    if ex.expect:
        tol = float(ex.expect.get("tol", 1e-12))
        for key, want in ex.expect.items():
            if key == "tol":
                continue
            checks[f"expect_{key}"] = abs(values[key] - float(want)) <= tol


# -- subcommands ---------------------------------------------------------------

def run_lemma_check(ex: Experiment):
    cfg = ex.cfg
    n = int(cfg.get("samples", 100))
    bound = float(cfg.get("x_bound", 3.0))
    rng = np.random.default_rng(ex.seed)
    m = ex.lat.d + 1
    ts = rng.uniform(0.0, ex.lat.T, size=n)
    xs = rng.uniform(-bound, bound, size=(n, m))
    g = ex.generator
    vals = np.array([maxmin_scan(g, t, x[None, :], ex.grids).value[0] for t, x in zip(ts, xs)])
    exact = np.array([float(g.at_point(t, x)) for t, x in zip(ts, xs)])
    err = np.abs(vals - exact)
    header = ["sample", "t"] + [f"x_{i}" for i in range(m)] + ["f", "minmax", "error"]
    rows = [[i, repr(ts[i])] + [repr(v) for v in xs[i]] + [repr(exact[i]), repr(vals[i]),
                                                              repr(err[i])] for i in range(n)]
    tol = ex.tol["identity"]
    summary = {"values": {"max_error": float(err.max())}, "gaps": {},
               "violations": {"identity": float(err.max())},
               "checks": {"identity": bool(err.max() <= tol)}}
    return header, rows, summary


def run_solve(ex: Experiment):
    p, lat = ex.problem, ex.lat
    checks, violations = {}, {}
    if p.obstacle is None:
        sol = solve_bsde(p, lat)
        header, rows = solution_rows(sol, lat.d)
    else:
        sol = solve_rbsde(p, lat)
        header, rows = solution_rows(sol, lat.d, sol.stop)
        violations["skorokhod"] = skorokhod_sum(sol, p)
        violations["dominance"] = max(float(np.max(p.obstacle[k] - sol.y[k]))
                                      for k in range(lat.N + 1))
        checks["skorokhod"] = violations["skorokhod"] <= ex.tol["skorokhod"]
        checks["dominance"] = violations["dominance"] <= 0.0
        checks["increments_nonnegative"] = all(np.all(a >= 0) for a in sol.a)
    values = {"root": sol.root}
    _check_expect(ex, values, checks)
    return header, rows, {"values": values, "gaps": {}, "violations": violations,
                          "checks": checks}


def run_dual(ex: Experiment):
    p, lat = ex.problem, ex.lat
    lat.check_positivity(p.generator.c_rep)
    rng = np.random.default_rng(ex.seed)
    n = int(ex.cfg.get("policies", 20))
    scale = float(ex.cfg.get("alpha_scale", 2.0))
    enumerate_paths = lat.N - ex.s <= 8
    header = ["policy", "level", "node_index", "linear", "dual"] + (["paths"] if enumerate_paths else [])
    rows, worst, worst_paths = [], 0.0, 0.0
    for i in range(n):
        ctrl = ControlPolicy.random(lat, rng, scale)
        lin = solve_linear_bsde(ctrl, p, lat, start=ex.s).y_at(ex.s)
        dual = dual_expectation(ctrl, p, lat, ex.s)
        worst = max(worst, float(np.max(np.abs(lin - dual))))
        paths = None
        if enumerate_paths:
            paths = dual_expectation_paths(ctrl, p, lat, ex.s)
            worst_paths = max(worst_paths, float(np.max(np.abs(paths - dual))))
        for j in range(lin.size):
            row = [i, ex.s, j, repr(float(lin.flat[j])), repr(float(dual.flat[j]))]
            if paths is not None:
                row.append(repr(float(paths.flat[j])))
            rows.append(row)
    tol = ex.tol["duality"]
    gaps = {"linear_vs_dual": worst}
    if enumerate_paths:
        gaps["paths_vs_dual"] = worst_paths
    checks = {k: v <= tol for k, v in gaps.items()}
    return header, rows, {"values": {"policies": n}, "gaps": gaps, "violations": {},
                          "checks": checks}


def _root_controls(res):
    k = res.start
    return {"alpha": np.reshape(res.alpha.alpha[k], (-1, res.alpha.alpha[k].shape[-1]))[0],
            "beta": np.reshape(res.alpha.beta[k], (-1, res.alpha.beta[k].shape[-1]))[0]}


def run_game(ex: Experiment):
    p, lat = ex.problem, ex.lat
    res = game_dpp_value(p, lat, ex.grids, ex.s, ex.t,
                         terminal=None if ex.t == lat.N else _sub_terminal(ex),
                         infsup=bool(ex.cfg.get("infsup", False)))
    sol = SolutionField(res.y, res.z, [np.zeros(lat.shape(k)) for k in range(ex.s, ex.t)], ex.s)
    header, rows = solution_rows(sol, lat.d)
    gaps = {"game_vs_primal": res.gap_to_primal}
    if res.infsup_gap is not None:
        gaps["infsup_minus_supinf"] = res.infsup_gap
    checks = {"gap": res.gap_to_primal <= ex.tol["gap"]}
    values = {"root": res.root, "primal_root": res.primal.root, **_root_controls(res)}
    _check_expect(ex, values, checks)
    return header, rows, {"values": values, "gaps": gaps, "violations": {}, "checks": checks}


def _sub_terminal(ex: Experiment):
    tname, tparams = _named(ex.cfg.get("terminal", "bt"), "terminal")
    if tname == "custom":
        raise ConfigError("custom terminal tables must live on level N")
    sub = build(ex.lat.T * ex.t / ex.lat.N, ex.t, ex.lat.d)
    return terminal_field(sub, tname, **tparams)


def run_reflected_game(ex: Experiment):
    p, lat = ex.problem, ex.lat
    if p.obstacle is None:
        raise ConfigError("reflected-game needs an obstacle")
    res = mixed_game_dpp(p, lat, ex.grids)
    sol = res.primal
    header, rows = solution_rows(SolutionField(res.y, res.z, sol.a, 0), lat.d, res.stop)
    violations = {
        "skorokhod": skorokhod_sum(sol, p),
        "dominance": max(float(np.max(p.obstacle[k] - res.y[k])) for k in range(lat.N + 1)),
    }
    checks = {"gap": res.gap_to_primal <= ex.tol["gap"],
              "skorokhod": violations["skorokhod"] <= ex.tol["skorokhod"],
              "dominance": violations["dominance"] <= 0.0}
    values = {"root": res.root, "primal_root": sol.root,
              "stopping_region_size": int(sum(int(np.sum(s)) for s in res.stop[:-1]))}
    _check_expect(ex, values, checks)
    return header, rows, {"values": values, "gaps": {"game_vs_primal": res.gap_to_primal},
                          "violations": violations, "checks": checks}


def run_axioms(ex: Experiment):
    op = EvaluationOperator(ex.generator, ex.lat)
    n = int(ex.cfg.get("samples", 50))
    ax = check_axioms(op, n, ex.seed)
    mu = float(ex.cfg.get("mu", ex.generator.c_l1))
    dom = check_domination(op, mu, samples=n, seed=ex.seed)
    B = ex.lat.brownian(ex.t)[..., 0]
    xi = B ** 2
    rep_gap = float(np.max(np.abs(dual_representation(op, ex.s, ex.t, xi, ex.grids)
                                  - evaluate(op, ex.s, ex.t, xi))))
    tol = ex.tol["axioms"]
    violations = {**{f"axiom_{k}": v for k, v in ax["violations"].items()},
                  **{f"domination_{k}": v for k, v in dom["violations"].items()}}
    checks = {k: v <= tol for k, v in violations.items()}
    checks["dual_representation"] = rep_gap <= ex.tol["gap"]
    header = ["check", "violation"]
    rows = [[k, repr(float(v))] for k, v in sorted(violations.items())]
    return header, rows, {"values": {"samples": n, "mu": mu,
                                     "comparison_margin": ax["comparison_margin"]},
                          "gaps": {"dual_representation": rep_gap},
                          "violations": violations, "checks": checks}


def run_concave(ex: Experiment):
    p, lat = ex.problem, ex.lat
    dcfg = ex.cfg.get("dual", {})
    step = float(dcfg.get("step", 0.01))
    box = np.asarray(dcfg.get("box", [[0.0, 0.0]] + [[-1.0, 1.0]] * lat.d), dtype=float)
    axes = [np.round(lo + step * np.arange(int(np.floor((hi - lo) / step + 1e-9)) + 1), 12)
            for lo, hi in box]
    cand = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=-1)
    dual = fenchel_dual(p.generator, 0.0, cand)
    cv = concave_inf_value(p, lat, dual)
    primal = solve_bsde(p, lat)
    game = game_dpp_value(p, lat, ex.grids)
    zmax = max(float(np.max(np.linalg.norm(z, axis=-1))) for z in primal.z)
    tol_concave = step * (1.0 + zmax) * lat.T
    gaps = {"concave_vs_primal": abs(cv.root - primal.root),
            "game_vs_primal": game.gap_to_primal}
    checks = {"concave": gaps["concave_vs_primal"] <= tol_concave,
              "game": gaps["game_vs_primal"] <= ex.tol["gap"]}
    values = {"root": primal.root, "concave_root": cv.root, "game_root": game.root,
              "concave_tolerance": tol_concave, "dual_points": int(len(dual.points))}
    _check_expect(ex, values, checks)
    header, rows = solution_rows(cv.solution, lat.d)
    return header, rows, {"values": values, "gaps": gaps, "violations": {}, "checks": checks}


def run_bruteforce(ex: Experiment):
    p, lat = ex.problem, ex.lat
    budget = int(ex.cfg.get("budget", 10 ** 6))
    brute = open_loop_bruteforce(p, lat, ex.grids, ex.s, budget)
    dpp = game_dpp_value(p, lat, ex.grids, start=ex.s).value
    gap = float(np.max(np.abs(brute - dpp)))
    header = ["level", "node_index", "open_loop", "dpp"]
    rows = [[ex.s, j, repr(float(brute.flat[j])), repr(float(dpp.flat[j]))]
            for j in range(brute.size)]
    checks = {"gap": gap <= ex.tol["gap"]}
    values = {"root": float(brute.flat[0]), "dpp_root": float(dpp.flat[0]),
              "policy_pairs": brute_force_count(lat, ex.grids, ex.s)}
    _check_expect(ex, values, checks)
    return header, rows, {"values": values, "gaps": {"open_loop_vs_dpp": gap},
                          "violations": {}, "checks": checks}


RUNNERS = {
    "lemma-check": run_lemma_check,
    "solve": run_solve,
    "dual": run_dual,
    "game": run_game,
    "reflected-game": run_reflected_game,
    "axioms": run_axioms,
    "concave": run_concave,
    "bruteforce": run_bruteforce,
}


def run(subcommand: str, cfg: dict, out: Path, seed: int | None = None) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    try:
        ex = Experiment(cfg, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        header, rows, summary = RUNNERS[subcommand](ex)
    except (PositivityViolation, BudgetExceeded) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    checks = summary.pop("checks")
    summary = {"subcommand": subcommand, "params": ex.params(), **summary,
               "checks": checks, "pass": all(checks.values())}
    _write(out, subcommand, header, rows, summary)
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if summary["pass"] else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bsdegame", description=__doc__.split("\n")[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", type=Path, default=Path("."))
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        cfg = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(args.subcommand, cfg, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
