"""Acceptance criteria, one test each.  Every test prints a single PASS/FAIL line.

Run standalone with ``python3 tests/test_acceptance.py`` for just the eight lines.
"""
import json
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from bsdegame import (BSDEProblem, ControlPolicy, EvaluationOperator, GridConfig,
                      PositivityViolation, build, catalog, check_axioms, check_domination,
                      dual_expectation, dual_expectation_paths, dual_representation, evaluate,
                      fenchel_dual, game_dpp_value, gamma_path, minmax_eval, mixed_game_dpp,
                      obstacle_fields, skorokhod_sum, solve_bsde, solve_linear_bsde, solve_rbsde,
                      terminal_field)
from bsdegame.cli import run
from bsdegame.game import concave_inf_value

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"

LIPSCHITZ = [("zero", {}), ("constant", {"c": 0.7}), ("affine", {"a": 0.3, "b1": -0.5, "b2": 0.8}),
             ("mu_abs_z", {"mu": 1.0}), ("mu_norm", {"mu": 1.0})]


def report(num, title, ok, detail, elapsed, limit=None):
    timing = f"{elapsed:.2f}s" + (f" (< {limit}s)" if limit else "")
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {num}: {title} | {detail} | {timing}")
    assert ok, detail


def criterion_1():
    rng = np.random.default_rng(101)
    grids = GridConfig()
    worst = 0.0
    for name, kw in LIPSCHITZ:
        g = catalog(name, **kw)
        for _ in range(100):
            t, x = rng.uniform(0, 1), rng.uniform(-3, 3, size=2)
            worst = max(worst, abs(minmax_eval(g, t, x, grids) - float(g.at_point(t, x))))
    return worst <= 1e-12, f"max |minmax - f| = {worst:.3e}"


def criterion_2():
    rng = np.random.default_rng(202)
    worst_lin = worst_path = 0.0
    for lat, mu in ((build(1.0, 16, 1), 1.0), (build(0.5, 6, 2), 1.0)):
        p = BSDEProblem(catalog("mu_norm", d=lat.d, mu=mu), terminal_field(lat, "bt_squared"))
        for i in range(20):
            ctrl = ControlPolicy.random(lat, rng)
            lin = solve_linear_bsde(ctrl, p, lat)
            for t in range(lat.N + 1):
                dual = dual_expectation(ctrl, p, lat, t)
                worst_lin = max(worst_lin, float(np.max(np.abs(lin.y_at(t) - dual))))
            if lat.N <= 8 or i < 2:
                # path enumeration; on N=16 only a root check for two policies
                ts = range(lat.N) if lat.N <= 8 else [0]
                for t in ts:
                    paths = dual_expectation_paths(ctrl, p, lat, t)
                    worst_path = max(worst_path, float(np.max(np.abs(paths - lin.y_at(t)))))
    ok = worst_lin <= 1e-12 and worst_path <= 1e-12
    return ok, f"linear vs dual {worst_lin:.3e}, paths vs linear {worst_path:.3e}"


def criterion_3():
    lat = build(1.0, 32, 1)
    worst = 0.0
    for name, kw in LIPSCHITZ:
        for term in ("bt", "bt_squared", "put"):
            p = BSDEProblem(catalog(name, **kw), terminal_field(lat, term, K=1.0))
            worst = max(worst, game_dpp_value(p, lat, GridConfig()).gap_to_primal)
    anchor = game_dpp_value(BSDEProblem(catalog("mu_abs_z", mu=1.0), terminal_field(lat, "bt")),
                            lat, GridConfig()).root
    ok = worst <= 1e-12 and abs(anchor - 1.0) <= 1e-12
    return ok, f"max gap {worst:.3e}, mu|z| anchor root {anchor!r}"


def criterion_4():
    lat = build(1.0, 8, 1)
    g = catalog("mu_norm", mu=1.0)
    p = BSDEProblem(g, terminal_field(lat, "bt_squared"))
    primal = solve_bsde(p, lat)
    yt = max(float(np.max(np.abs(lat.cond_expect(y)))) for y in primal.y[1:])
    zn = max(float(np.max(np.linalg.norm(z, axis=-1))) for z in primal.z)
    gaps, bounds = [], []
    for h in (0.2, 0.1, 0.05):
        # uniform alpha grid; the inner beta minimum is taken exactly
        grids = GridConfig(alpha_box=((-1, 10), (-6, 6)), alpha_step=h, adaptive=False,
                           inject_beta=True)
        gaps.append(game_dpp_value(p, lat, grids).gap_to_primal)
        bounds.append(2 * g.c_rep * h * (1 + yt + zn) * lat.T)
    ok = all(b <= a for a, b in zip(gaps, gaps[1:])) and all(a <= b for a, b in zip(gaps, bounds))
    return ok, "gaps " + ", ".join(f"{a:.2e}<={b:.2f}" for a, b in zip(gaps, bounds))


def criterion_5():
    lat = build(1.0, 16, 1)
    xi = terminal_field(lat, "put", K=1.0)
    cases = {"inactive": obstacle_fields(lat, "constant", c=-1e9),
             "1-t": obstacle_fields(lat, "linear", a=1.0, b=-1.0),
             "(1-B)+": obstacle_fields(lat, "put_payoff", K=1.0)}
    worst, sk, dom = 0.0, 0.0, True
    for S in cases.values():
        for name in ("zero", "mu_norm"):
            p = BSDEProblem(catalog(name, mu=1.0), xi, S)
            worst = max(worst, mixed_game_dpp(p, lat, GridConfig()).gap_to_primal)
            sol = solve_rbsde(p, lat)
            sk = max(sk, skorokhod_sum(sol, p))
            dom = dom and all(np.all(y >= s) for y, s in zip(sol.y, S))
    ok = worst <= 1e-12 and sk == 0.0 and dom
    return ok, f"max gap {worst:.3e}, Skorokhod {sk!r}, y>=S {dom}"


def criterion_6():
    lat = build(1.0, 16, 1)
    g = catalog("neg_mu_abs_z", mu=1.0)
    p = BSDEProblem(g, terminal_field(lat, "bt"))
    primal = solve_bsde(p, lat)
    step = 0.05
    axis = np.round(-1 + step * np.arange(41), 12)
    cand = np.stack([np.zeros_like(axis), axis], axis=-1)
    cv = concave_inf_value(p, lat, fenchel_dual(g, 0.0, cand))
    zn = max(float(np.max(np.abs(z))) for z in primal.z)
    tol = step * (1 + zn) * lat.T
    game_gap = game_dpp_value(p, lat, GridConfig()).gap_to_primal
    cgap = abs(cv.root - primal.root)
    ok = abs(primal.root + 1.0) <= 1e-12 and cgap <= tol and game_gap <= 1e-12
    return ok, (f"primal root {primal.root!r}, concave gap {cgap:.2e} <= {tol:.2e}, "
                f"game gap {game_gap:.1e}")


def criterion_7():
    lat = build(1.0, 12, 1)
    worst_ax = worst_dom = worst_rep = 0.0
    for name, kw in (("zero", {}), ("mu_norm", {"mu": 1.0}), ("mu_abs_z", {"mu": 0.5})):
        op = EvaluationOperator(catalog(name, **kw), lat)
        worst_ax = max(worst_ax, max(check_axioms(op, 50, seed=7)["violations"].values()))
        worst_dom = max(worst_dom, max(check_domination(op, op.generator.c_l1, samples=50,
                                                        seed=7)["violations"].values()))
        for s, t in ((0, 12), (2, 9), (4, 4)):
            xi = lat.brownian(t)[..., 0] ** 2
            worst_rep = max(worst_rep, float(np.max(np.abs(
                dual_representation(op, s, t, xi) - evaluate(op, s, t, xi)))))
    ok = max(worst_ax, worst_dom, worst_rep) <= 1e-12
    return ok, f"axioms {worst_ax:.1e}, domination {worst_dom:.1e}, dual rep {worst_rep:.1e}"


def criterion_8():
    results = []
    for T, N, d in ((1.0, 8, 1), (0.5, 6, 2), (0.3, 5, 3)):
        lat = build(T, N, d)
        # walk to the first float where C(sqrt(d dt) + dt) >= 1, then probe both neighbours
        edge = 1.0 / (np.sqrt(lat.dt * d) + lat.dt)
        hi, steps = edge, 0
        while hi * (np.sqrt(d * lat.dt) + lat.dt) < 1.0:
            hi, steps = np.nextafter(hi, np.inf), steps + 1
        while np.nextafter(hi, 0) * (np.sqrt(d * lat.dt) + lat.dt) >= 1.0:
            hi, steps = np.nextafter(hi, 0), steps + 1
        lo = np.nextafter(hi, 0)
        zero = ControlPolicy.constant(lat)
        try:
            gamma_path(zero, lat, 0, lo)
            below_ok = True
        except PositivityViolation:
            below_ok = False
        try:
            gamma_path(zero, lat, 0, hi)
            above_ok = False
        except PositivityViolation:
            above_ok = True
        results.append(below_ok and above_ok and steps <= 4)
    with tempfile.TemporaryDirectory() as out:
        cfg = json.loads((CONFIGS / "bruteforce_over_budget.json").read_text())
        code = run("bruteforce", cfg, Path(out))
    ok = all(results) and code == 3
    return ok, f"guard boundary exact {results}, over-budget exit {code}"


CRITERIA = [
    (1, "min-max identity", criterion_1, 5),
    (2, "discrete duality", criterion_2, 10),
    (3, "game = primal", criterion_3, 60),
    (4, "uniform-grid degradation", criterion_4, 60),
    (5, "reflected game = RBSDE", criterion_5, 30),
    (6, "concave cross-check", criterion_6, 10),
    (7, "axioms and domination", criterion_7, 30),
    (8, "guards", criterion_8, None),
]


@pytest.mark.parametrize("num,title,fn,limit", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(num, title, fn, limit, capsys):
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    if limit is not None and elapsed >= limit:
        ok, detail = False, f"{detail}; too slow"
    with capsys.disabled():
        report(num, title, ok, detail, elapsed, limit)


if __name__ == "__main__":
    failed = 0
    for num, title, fn, limit in CRITERIA:
        start = time.perf_counter()
        ok, detail = fn()
        elapsed = time.perf_counter() - start
        ok = ok and (limit is None or elapsed < limit)
        failed += not ok
        try:
            report(num, title, ok, detail, elapsed, limit)
        except AssertionError:
            pass
    raise SystemExit(1 if failed else 0)
