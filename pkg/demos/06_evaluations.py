"""Dynamic evaluations E_{s,t}[X] induced by a driver.

They are monotone, leave time-t quantities unchanged, compose over time and are
local.  They are dominated by the mu|z|-type evaluation with mu the Lipschitz
constant, and each has a game representation.
"""
from bsdegame import (EvaluationOperator, build, catalog, check_axioms, check_domination,
                      dual_representation, evaluate)

lat = build(1.0, 12, 1)
for name, kw in (("zero", {}), ("mu_norm", {"mu": 1.0}), ("mu_abs_z", {"mu": 0.5})):
    op = EvaluationOperator(catalog(name, **kw), lat)
    ax = check_axioms(op, samples=20, seed=0)["violations"]
    dom = check_domination(op, op.generator.c_l1, samples=20)["violations"]
    xi = lat.brownian(9)[..., 0] ** 2
    rep = abs(dual_representation(op, 2, 9, xi) - evaluate(op, 2, 9, xi)).max()
    print(f"{name:8s} axioms {max(ax.values()):.1e}  domination {max(dom.values()):.1e}  "
          f"game representation {rep:.1e}")
