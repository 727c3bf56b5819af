import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsdegame import (BSDEProblem, ComparisonWarning, ControlPolicy, PositivityViolation,
                      build, catalog, dual_expectation, dual_expectation_paths, gamma_path,
                      phi_expectation, solve_bsde, solve_linear_bsde, terminal_field)
from bsdegame.bsde import linear_solve


def expect(lat, field, k):
    return float(np.sum(lat.node_probs(k) * field))


def cond_from(lat, field, k, t):
    for _ in range(k - t):
        field = lat.cond_expect(field)
    return field


def test_zero_driver_martingale():
    lat = build(1.0, 10, 1)
    sol = solve_bsde(BSDEProblem(catalog("zero"), terminal_field(lat, "bt")), lat)
    assert abs(sol.root) < 1e-15
    assert all(np.allclose(z, 1.0, atol=1e-14) for z in sol.z)


@pytest.mark.parametrize("term", ["bt", "bt_squared", "put"])
def test_constant_driver_drift(term):
    lat = build(0.8, 12, 1)
    xi = terminal_field(lat, term, K=0.2)
    sol = solve_bsde(BSDEProblem(catalog("constant", c=1.7), xi), lat)
    assert sol.root == pytest.approx(expect(lat, xi, lat.N) + 1.7 * 0.8, abs=1e-12)


@pytest.mark.filterwarnings("ignore::bsdegame.ComparisonWarning")
@pytest.mark.parametrize("N", [1, 2, 5, 16, 33])
@pytest.mark.parametrize("mu", [0.5, 1.0])
def test_mu_abs_z_closed_form(N, mu):
    # y_t = B_t + mu (T - t), z = 1 solves dy = -mu|z| dt + z dB, y_T = B_T
    lat = build(1.0, N, 1)
    sol = solve_bsde(BSDEProblem(catalog("mu_abs_z", mu=mu), terminal_field(lat, "bt")), lat)
    assert sol.root == pytest.approx(mu * 1.0, abs=1e-12)
    for k in range(N + 1):
        closed = lat.brownian(k)[..., 0] + mu * (lat.T - lat.time(k))
        assert np.allclose(sol.y[k], closed, atol=1e-12)


def test_terminal_consistency(lat1):
    xi = terminal_field(lat1, "put", K=0.3)
    sol = solve_bsde(BSDEProblem(catalog("mu_norm", mu=1.0), xi), lat1)
    assert np.array_equal(sol.y[-1], xi)
    assert sol.end == lat1.N and len(sol.z) == lat1.N


def test_comparison_warning():
    lat = build(1.0, 2, 1)
    with pytest.warns(ComparisonWarning):
        solve_bsde(BSDEProblem(catalog("mu_norm", mu=1.0), terminal_field(lat, "bt")), lat)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from(["mu_norm", "mu_abs_z", "neg_mu_abs_z"]),
       st.integers(1, 2))
def test_comparison(seed, name, d):
    lat = build(1.0, 6 if d == 1 else 12, d)
    assert lat.comparison_margin(1.0) <= 1
    rng = np.random.default_rng(seed)
    xi2 = rng.normal(size=lat.shape(lat.N))
    xi1 = xi2 + np.abs(rng.normal(size=xi2.shape))
    g = catalog(name, d=d, mu=1.0)
    y1 = solve_bsde(BSDEProblem(g, xi1), lat).y
    y2 = solve_bsde(BSDEProblem(g, xi2), lat).y
    assert all(np.all(a >= b - 1e-12) for a, b in zip(y1, y2))


# -- Gamma ------------------------------------------------------------------------

def test_gamma_zero_control(lat1):
    gam = gamma_path(ControlPolicy.constant(lat1), lat1, 2, 1.0)
    assert all(np.array_equal(f, np.ones_like(f)) for f in gam.factors)
    assert np.array_equal(gam.expectation(lat1.N), np.ones(3))


def test_gamma_deterministic_drift(lat1):
    c, b1 = 1.3, 0.6
    gam = gamma_path(ControlPolicy.constant(lat1, beta=[b1, 0.0]), lat1, 1, c)
    for k in range(1, lat1.N + 1):
        assert np.allclose(gam.expectation(k), (1 + c * b1 * lat1.dt) ** (k - 1), rtol=1e-14)
        # deterministic: the weighted measure is the plain transition law times one number
        m = gam.measure(k)
        assert np.allclose(m.sum(axis=1), (1 + c * b1 * lat1.dt) ** (k - 1))


@pytest.mark.parametrize("d,N,T", [(1, 9, 1.0), (2, 5, 0.5), (3, 4, 0.25)])
def test_gamma_martingale(d, N, T):
    lat = build(T, N, d)
    b2 = np.full(d, 0.9 / np.sqrt(d))
    gam = gamma_path(ControlPolicy.constant(lat, beta=np.r_[0.0, b2]), lat, 0, 1.0)
    assert gam.expectation(N).ravel()[0] == pytest.approx(1.0, abs=1e-14)
    assert all(np.all(f > 0) for f in gam.factors)


def test_gamma_positivity_guard(lat1):
    c_edge = 1.0 / (np.sqrt(lat1.dt) + lat1.dt)
    gamma_path(ControlPolicy.constant(lat1), lat1, 0, c_edge * (1 - 1e-9))
    with pytest.raises(PositivityViolation):
        gamma_path(ControlPolicy.constant(lat1), lat1, 0, c_edge * (1 + 1e-9))


# -- linear BSDE and its dual --------------------------------------------------------

def test_linear_constant_driver(lat1):
    xi = terminal_field(lat1, "bt_squared")
    p = BSDEProblem(catalog("constant", c=0.4), xi)
    Y = solve_linear_bsde(ControlPolicy.constant(lat1), p, lat1)
    assert Y.root == pytest.approx(expect(lat1, xi, lat1.N) + 0.4, abs=1e-12)


def test_linear_zero_beta_integrates_F(lat1, rng):
    g = catalog("mu_norm", mu=1.0)
    xi = terminal_field(lat1, "bt")
    ctrl = ControlPolicy.random(lat1, rng)
    ctrl.beta = [np.zeros_like(b) for b in ctrl.beta]
    Y = solve_linear_bsde(ctrl, BSDEProblem(g, xi), lat1)
    oracle = expect(lat1, xi, lat1.N) + sum(
        expect(lat1, g.at_point(lat1.time(k), ctrl.alpha[k]), k) * lat1.dt for k in range(lat1.N))
    assert Y.root == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("name", ["mu_abs_z", "mu_norm"])
def test_linear_collapses_at_alpha_equal_state(name, lat1, rng):
    g = catalog(name, mu=1.0)
    p = BSDEProblem(g, terminal_field(lat1, "bt" if name == "mu_abs_z" else "bt_squared"))
    sol = solve_bsde(p, lat1)
    alpha = [np.concatenate([lat1.cond_expect(sol.y[k + 1])[..., None], sol.z[k]], axis=-1)
             for k in range(lat1.N)]
    ctrl = ControlPolicy(alpha, ControlPolicy.random(lat1, rng).beta)
    Y = solve_linear_bsde(ctrl, p, lat1)
    assert all(np.allclose(a, b, atol=1e-12) for a, b in zip(Y.y, sol.y))


@pytest.mark.parametrize("t", [0, 3, 8])
def test_dual_zero_controls(lat1, t):
    xi = terminal_field(lat1, "put", K=0.5)
    zero = ControlPolicy.constant(lat1)
    v = dual_expectation(zero, BSDEProblem(catalog("zero"), xi), lat1, t)
    assert np.allclose(v, cond_from(lat1, xi, lat1.N, t), atol=1e-14)
    v = dual_expectation(zero, BSDEProblem(catalog("constant", c=2.0), xi), lat1, t)
    assert np.allclose(v, cond_from(lat1, xi, lat1.N, t) + 2.0 * (lat1.T - lat1.time(t)),
                       atol=1e-13)


@pytest.mark.parametrize("t", [0, 1, 4, 7])
def test_dual_equals_linear_and_paths(lat1, rng, t):
    p = BSDEProblem(catalog("mu_norm", mu=1.0), terminal_field(lat1, "bt_squared"))
    ctrl = ControlPolicy.random(lat1, rng)
    lin = solve_linear_bsde(ctrl, p, lat1, start=t).y_at(t)
    dual = dual_expectation(ctrl, p, lat1, t)
    paths = dual_expectation_paths(ctrl, p, lat1, t)
    assert np.max(np.abs(lin - dual)) <= 1e-12
    assert np.max(np.abs(paths - dual)) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([(1, 10, 1.0), (2, 5, 0.5), (3, 3, 0.2)]))
def test_exact_discrete_duality(seed, dims):
    d, N, T = dims
    lat = build(T, N, d)
    rng = np.random.default_rng(seed)
    p = BSDEProblem(catalog("mu_abs_z", d=d, mu=1.0), terminal_field(lat, "bt_squared"))
    ctrl = ControlPolicy.random(lat, rng, alpha_scale=3.0)
    t = int(rng.integers(0, N))
    assert np.max(np.abs(solve_linear_bsde(ctrl, p, lat, start=t).y_at(t)
                         - dual_expectation(ctrl, p, lat, t))) <= 1e-12


def test_dual_propagates_positivity():
    lat = build(1.0, 4, 1)
    p = BSDEProblem(catalog("mu_norm", mu=1.0), terminal_field(lat, "bt"))
    with pytest.raises(PositivityViolation):
        dual_expectation(ControlPolicy.constant(lat), p, lat)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_solver_is_affine(seed, a, b):
    lat = build(1.0, 7, 1)
    rng = np.random.default_rng(seed)
    beta = ControlPolicy.random(lat, rng).beta
    xi1, xi2 = rng.normal(size=(2, lat.N + 1))
    F1 = [rng.normal(size=lat.shape(k)) for k in range(lat.N)]
    F2 = [rng.normal(size=lat.shape(k)) for k in range(lat.N)]
    mix = linear_solve(lat, beta, [a * f + b * g for f, g in zip(F1, F2)], a * xi1 + b * xi2, 1.2)
    y1 = linear_solve(lat, beta, F1, xi1, 1.2)
    y2 = linear_solve(lat, beta, F2, xi2, 1.2)
    for k in range(lat.N + 1):
        assert np.allclose(mix.y[k], a * y1.y[k] + b * y2.y[k], atol=1e-12)


def test_phi_form_with_unconstrained_beta(lat1, rng):
    beta = [np.stack([rng.uniform(-3, 3, lat1.shape(k)), rng.uniform(-1.5, 1.5, lat1.shape(k))],
                     axis=-1) for k in range(lat1.N)]
    F = [rng.normal(size=lat1.shape(k)) for k in range(lat1.N)]
    xi = terminal_field(lat1, "bt_squared")
    Y = linear_solve(lat1, beta, F, xi, 1.0)
    assert phi_expectation(beta, F, xi, lat1)[0] == pytest.approx(Y.root, abs=1e-12)
    with pytest.raises(PositivityViolation):
        phi_expectation([b * 10 for b in beta], F, xi, lat1)
