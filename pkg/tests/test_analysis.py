import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from afmrestart import analysis as an
from afmrestart.engine import afm_run
from afmrestart.oracles import QuadraticProblem, gen_quadratic
from afmrestart.schedules import ScheduleKind

Q_GRID = np.logspace(-6, math.log10(0.9), 25)
GAMMA_GRID = np.linspace(0.0, 1.0, 21)


# --- characteristic roots ------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.05, 2.0), st.floats(0.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.0, 1.0),
)
def test_roots_satisfy_vieta(alpha, beta, gamma, lam):
    r1, r2 = an.char_roots(alpha, beta, gamma, lam)
    s = (1 + beta) * (1 - alpha * lam) - gamma * alpha * lam
    p = beta * (1 - alpha * lam)
    assert abs((r1 + r2) - s) <= 1e-12 * max(1.0, abs(s))
    assert abs(r1 * r2 - p) <= 1e-12 * max(1.0, abs(p))
    assert abs(r1) >= abs(r2)
    assert an.rho_T_lambda(alpha, beta, gamma, lam) == pytest.approx(abs(r1), rel=1e-9, abs=1e-12)


def test_roots_at_largest_eigenvalue():
    r1, r2 = an.char_roots(1.0, 0.37, 0.81, 1.0)
    assert {round(r1.real, 15), round(r2.real, 15)} == {0.0, -0.81}
    assert an.rho_T_lambda(1.0, 0.2, 0.6, 1.0) == pytest.approx(0.6, abs=1e-15)


@pytest.mark.parametrize("lam", [0.0, 0.2, 0.7, 1.0])
def test_gm_roots(lam):
    r1, r2 = an.char_roots(1.0, 0.0, 0.0, lam)
    assert sorted([abs(r1), abs(r2)]) == pytest.approx(sorted([abs(1 - lam), 0.0]), abs=1e-15)


def test_optimal_pair_double_root():
    r1, r2 = an.char_roots(1.0, 0.4, 0.6, 0.1)
    assert abs(r1 - 0.6) < 1e-12 and abs(r2 - 0.6) < 1e-12
    assert abs(an.discriminant(1.0, 0.4, 0.6, 0.1)) < 1e-14


def test_rho_under_negative_discriminant():
    alpha, beta, gamma, lam = 1.0, 0.9, 0.1, 0.05
    assert an.discriminant(alpha, beta, gamma, lam) < 0
    assert an.rho_T_lambda(alpha, beta, gamma, lam) == pytest.approx(math.sqrt(beta * (1 - lam)))


@pytest.mark.parametrize("q", [0.01, 0.1, 0.5])
@pytest.mark.parametrize("gamma", [0.0, 0.3, 0.9])
def test_rho_at_mu_with_critical_beta(q, gamma):
    b = an.beta_star_of_gamma(q, gamma)
    assert an.rho_T_lambda(1.0, b, gamma, q) == pytest.approx(abs(1 - math.sqrt(q * (1 + gamma))), abs=1e-12)


def test_gm_q_rate_at_both_ends():
    q = 0.1
    a = 2 / (1 + q)
    for lam in (q, 1.0):
        assert an.rho_T_lambda(a, 0.0, 0.0, lam) == pytest.approx((1 - q) / (1 + q), abs=1e-15)


def test_rho_continuous_in_lambda():
    lam = np.linspace(0.01, 1.0, 20001)
    rho = np.array([an.rho_T_lambda(1.0, 0.4, 0.6, x) for x in lam])
    assert np.max(np.abs(np.diff(rho))) < 1e-2


# --- optimal pair -------------------------------------------------------------------


@pytest.mark.parametrize("q", Q_GRID)
@pytest.mark.parametrize("gamma", GAMMA_GRID)
def test_discriminant_zero_at_critical_beta(q, gamma):
    b = an.beta_star_of_gamma(q, gamma)
    assert abs(an.discriminant(1.0, b, gamma, q)) <= 1e-12


@pytest.mark.parametrize("q", Q_GRID)
def test_optimal_fixed_point(q):
    b, g, r = an.ogm_q_coeffs(q)
    assert abs(1 - math.sqrt(q * (1 + g)) - g) <= 1e-12
    assert r == g
    assert an.rho_T(an.QuadSystem(q, 1.0, b, g)) == pytest.approx(g, abs=1e-12)


def test_optimal_pair_values():
    b, g, r = an.ogm_q_coeffs(0.1)
    assert b == pytest.approx(0.4, abs=1e-12)
    assert g == pytest.approx(0.6, abs=1e-12)
    assert an.ogm_q_coeffs(1.0) == (0.0, 0.0, 0.0)
    # closed form gives 0.8634903 (the rounded value 0.863489 is off in the 6th digit)
    assert an.ogm_q_coeffs(0.01)[1] == pytest.approx((2.01 - math.sqrt(0.0801)) / 2, abs=1e-15)
    assert an.ogm_q_coeffs(0.01)[1] == pytest.approx(0.863489, abs=2e-6)


@pytest.mark.parametrize("q", [0.01, 0.1, 0.4])
def test_optimal_pair_beats_brute_force_grid(q):
    # the closed form should not be beaten by any (beta, gamma) on a fine grid,
    # and the grid optimum should be close to it
    _, g_star, rho_star = an.ogm_q_coeffs(q)
    betas = np.linspace(0.0, 1.0, 201)
    gammas = np.linspace(0.0, 1.0, 201)
    best = math.inf
    for b in betas:
        for g in gammas:
            rho = max(an.rho_T_lambda(1.0, b, g, q), an.rho_T_lambda(1.0, b, g, 1.0))
            best = min(best, rho)
    assert best >= rho_star - 1e-9
    assert best <= rho_star + 0.02


@pytest.mark.parametrize("q", [0.01, 0.1])
def test_gamma_minimax_one_dimensional(q):
    # along beta = beta*(gamma), the worst-endpoint radius is minimized at gamma*
    grid = np.linspace(0.0, 1.0, 100001)
    vals = [max(abs(1 - math.sqrt(q * (1 + g))), g) for g in grid]
    g_best = grid[int(np.argmin(vals))]
    assert g_best == pytest.approx(an.ogm_q_coeffs(q)[1], abs=2e-5)


def test_beta_star_special_values():
    assert an.beta_star_of_gamma(0.1, 0.0) == pytest.approx(0.519493, abs=1e-6)
    assert an.beta_star_of_gamma(0.1, 0.6) == pytest.approx(0.4, abs=1e-12)
    assert an.beta_star_of_gamma(0.1, 1 / 0.1 - 1) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        an.beta_star_of_gamma(1.0, 0.0)
    with pytest.raises(ValueError):
        an.beta_star_of_gamma(0.1, -2.0)


# --- spectral radius over the spectrum -------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-4, 0.9), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.3, 1.9))
def test_endpoint_maximality(q, beta, gamma, alpha):
    grid = np.linspace(q, 1.0, 1000)
    dense = max(an.rho_T_lambda(alpha, beta, gamma, x) for x in grid)
    assert an.rho_T(an.QuadSystem(q, alpha, beta, gamma)) == pytest.approx(dense, abs=1e-10)


def test_rate_examples():
    b, g, _ = an.ogm_q_coeffs(0.1)
    assert an.rho_T(an.QuadSystem(0.1, 1.0, b, g)) == pytest.approx(0.6, abs=1e-12)
    fb = (1 - math.sqrt(0.1)) / (1 + math.sqrt(0.1))
    assert an.rho_T(an.QuadSystem(0.1, 1.0, fb, 0.0)) == pytest.approx(0.683772, abs=1e-6)
    assert an.rho_T(an.QuadSystem(1.0, 1.0, *an.ogm_q_coeffs(1.0)[:2])) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10_000), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
       st.floats(0.2, 1.8))
def test_assembled_matrix_radius(d, seed, beta, gamma, alpha):
    prob = gen_quadratic(d, 0.05, seed)
    T = an.system_matrix(prob.Q, alpha, beta, gamma)
    eig = np.max(np.abs(np.linalg.eigvals(T)))
    sys = an.QuadSystem(0.05, alpha, beta, gamma, tuple(prob.eigenvalues))
    exact = max(an.rho_T_lambda(alpha, beta, gamma, x) for x in sys.lambdas)
    # nearly defective blocks lose about sqrt(eps) in the numeric eigensolve
    assume(min(abs(an.discriminant(alpha, beta, gamma, x)) for x in sys.lambdas) > 1e-6)
    assert eig == pytest.approx(exact, abs=1e-10)
    assert exact == pytest.approx(an.rho_T(sys), abs=1e-12)


def test_quad_system_normalizes():
    sys = an.QuadSystem(0.5, 1.0, 0.1, 0.2, lambdas=(4.0, 2.0, 8.0))
    assert sys.lambdas == (0.25, 0.5, 1.0)
    assert an.QuadSystem(0.3, 1.0, 0, 0).lambdas == (0.3, 1.0)
    with pytest.raises(ValueError):
        an.QuadSystem(0.3, 1.0, 0.0, -1.5)


# --- mode analysis ---------------------------------------------------------------------


def test_beta_i_star_values():
    assert an.beta_i_star(0.25, 0.0) == pytest.approx(1 / 3)
    assert an.beta_i_star(0.1, 0.3) == an.beta_star_of_gamma(0.1, 0.3)
    b, g, _ = an.ogm_q_coeffs(0.05)
    assert an.beta_i_star(0.05, g) == pytest.approx(b, rel=1e-12)
    assert an.repeated_root(0.1, 0.6) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        an.beta_i_star(1.0, 0.2)


def test_regime_labels():
    b = an.beta_i_star(0.1, 0.2)
    assert an.regime(b, 0.2, 0.1) == "optimal"
    assert an.regime(b - 0.01, 0.2, 0.1) == "low"
    assert an.regime(b + 0.01, 0.2, 0.1) == "high"
    assert an.regime(0.99, 0.2, 1.0) == "low"


def test_psi_values():
    assert an.psi(1.0, 0.0, 0.5) == pytest.approx(math.pi / 4)
    b = an.beta_i_star(0.2, 0.3)
    assert an.psi(b, 0.3, 0.2) == pytest.approx(0.0, abs=1e-5)
    with pytest.raises(an.NotUnderdampedError):
        an.psi(0.1, 0.0, 0.2)


def test_oscillation_period_matches_zero_crossings():
    beta, lam = 0.95, 0.01
    period = 2 * math.pi / an.psi(beta, 0.0, lam)
    tr = an.simulate_modes(an.QuadSystem(lam, 1.0, beta, 0.0, (lam, 1.0)), [1.0, 0.0], 2000)
    w = tr.w[:, 0]
    ups = np.nonzero((w[:-1] < 0) & (w[1:] >= 0))[0]
    assert len(ups) > 5
    assert np.mean(np.diff(ups)) == pytest.approx(period, abs=1.0)


@pytest.mark.parametrize("gamma", [0.0, 0.5])
def test_regime_boundary_behaviour(gamma):
    lam = 0.02
    b = an.beta_i_star(lam, gamma)

    def sign_changes(beta):
        tr = an.simulate_modes(an.QuadSystem(lam, 1.0, beta, gamma, (lam, 1.0)), [1.0, 0.0], 3000)
        w = tr.w[200:, 0]
        w = w[np.abs(w) > 1e-300]
        return int(np.sum(np.sign(w[1:]) != np.sign(w[:-1])))

    assert sign_changes(b + 0.02) > 0
    assert sign_changes(b - 0.02) == 0


def test_largest_mode_closed_form():
    beta, gamma = 0.3, 0.7
    tr = an.simulate_modes(an.QuadSystem(0.1, 1.0, beta, gamma), [0.5, 2.0], 30)
    assert np.all(tr.w[1:, 1] == 0.0)
    k = np.arange(1, 31)
    np.testing.assert_allclose(tr.v[1:, 1], 2.0 * (1 + beta / gamma) * (-gamma) ** k, rtol=1e-12, atol=1e-300)


def test_mode_recurrence_holds():
    sys = an.QuadSystem(0.05, 1.0, 0.6, 0.4, (0.05, 0.3, 0.7, 1.0))
    tr = an.simulate_modes(sys, [1.0, -2.0, 0.5, 3.0], 100)
    lam = sys.ratios
    s = 1.6 * (1 - lam) - 0.4 * lam
    p = 0.6 * (1 - lam)
    for arr in (tr.w, tr.v):
        lhs = arr[2:]
        rhs = s * arr[1:-1] - p * arr[:-2]
        assert np.all(np.abs(lhs - rhs) <= 1e-10 * np.maximum(np.abs(lhs), 1e-300) + 1e-300)
    assert tr.regimes[-1] == "low"


@pytest.mark.parametrize("kind", [ScheduleKind("ogm-q", q=0.1), ScheduleKind("fgm-q", q=0.1),
                                  ScheduleKind("gm-q", q=0.1)])
def test_mode_simulation_matches_direct_run(kind):
    prob = gen_quadratic(6, 0.1, seed=2)
    prob = QuadraticProblem(prob.Q, np.zeros(6), prob.eigenvalues, prob.eigenvectors)
    x0 = np.linspace(-1, 1, 6)
    tr = afm_run(prob, kind, x0, 200, keep_iterates=True)
    from afmrestart.schedules import coefficients
    c = coefficients(kind, 0)
    sys = an.QuadSystem(0.1, c.alpha, c.beta, c.gamma, tuple(prob.eigenvalues))
    V = prob.eigenvectors
    modes = an.simulate_modes(sys, V.T @ x0, 200)
    Y = np.array(tr.ys) @ V
    X = np.array(tr.xs) @ V
    for got, ref in ((Y, modes.w), (X, modes.v)):
        err = np.linalg.norm(got - ref, axis=1) / np.maximum(np.linalg.norm(ref, axis=1), 1e-300)
        assert np.max(err[np.linalg.norm(ref, axis=1) > 1e-250]) <= 1e-10


def test_observables_match_direct_quantities():
    q = 0.01
    b, g, _ = an.ogm_q_coeffs(q)
    sys = an.QuadSystem(q, 1.0, b, g)
    tr = an.simulate_modes(sys, [0.2, 1.0], 40)
    obs = an.mode_observables(tr)
    lam = np.array([q, 1.0])
    gx = tr.v * lam
    np.testing.assert_allclose(obs["f_y"], 0.5 * np.sum(lam * tr.w ** 2, axis=1))
    np.testing.assert_allclose(obs["gd"], np.sum(gx[1:] * gx[:-1], axis=1))
    np.testing.assert_allclose(obs["gr"], -np.sum(gx[:-1] * (tr.w[1:] - tr.w[:-1]), axis=1))
    # the large-eigenvalue mode of x alternates sign, so successive gradients oppose early on
    assert np.all(obs["gd"][:5] < 0)


# --- summary tables -------------------------------------------------------------------


def test_tuned_rates_at_q_tenth():
    rows = an.tuned_rates(0.1)
    names = [r[0] for r in rows]
    assert names == ["OGM-q", "FGM'-q", "FGM-q", "GM-q"]
    np.testing.assert_allclose([r[4] for r in rows], [0.6, 0.640789, 0.683772, 0.818182], atol=1e-6)
    ogm = rows[0]
    assert ogm[1:4] == pytest.approx((1.0, 0.4, 0.6), abs=1e-12)


def test_tuned_rates_rates_match_spectral_radius():
    q = 0.03
    for name, a, b, g, rho in an.tuned_rates(q):
        assert an.rho_T(an.QuadSystem(q, a, b, g)) == pytest.approx(rho, abs=1e-7), name


def test_tuned_rates_rates_vanish_near_one():
    prev = None
    for q in np.linspace(0.5, 0.999999, 30):
        rhos = [r[4] for r in an.tuned_rates(q)]
        if prev is not None:
            assert all(r <= p + 1e-15 for r, p in zip(rhos, prev))
        prev = sorted(rhos)
        rhos.sort()
    assert max(prev) < 1e-5


def test_rate_chain_over_q():
    for q in np.logspace(-6, math.log10(0.99), 100):
        rho = {r[0]: r[4] for r in an.tuned_rates(q)}
        assert rho["OGM-q"] < rho["FGM'-q"] < rho["FGM-q"]


def test_rho_curve_examples():
    rows = an.rho_curve(0.1, 0.4, 0.6, 200)
    rho = np.array([r[3] for r in rows])
    assert rows[0][0] == pytest.approx(0.1) and rows[-1][0] == 1.0
    assert rho.max() == pytest.approx(0.6, abs=1e-12)
    assert rho[0] == pytest.approx(0.6, abs=1e-12) and rho[-1] == pytest.approx(0.6, abs=1e-12)
    gm = an.rho_curve(0.1, 0.0, 0.0, 5)
    assert gm[0][3] == pytest.approx(0.9)
    with pytest.raises(ValueError):
        an.rho_curve(0.1, 0.4, 0.6, 1)


def test_rho_curve_branch_merge():
    # find the discriminant sign change by bisection and compare to the root type switch
    beta, gamma, q = 0.6, 0.2, 0.1
    lo, hi = q, 1.0
    f = lambda x: an.discriminant(1.0, beta, gamma, x)
    assert f(lo) * f(hi) < 0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    left = an.char_roots(1.0, beta, gamma, lo - 1e-6)
    right = an.char_roots(1.0, beta, gamma, hi + 1e-6)
    complex_left = abs(left[0].imag) > 0
    complex_right = abs(right[0].imag) > 0
    assert complex_left != complex_right
