import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlsground.functionals import energy_J, lagrange_multiplier, pde_residual
from nlsground.grid import build_grid, grad_norm_sq, integrate, l2_norm_sq
from nlsground.minimizer import (FlowConfig, Verdict, best_state, make_gaussian, make_plateau,
                                 make_scaled_plateau, minimize_on_sphere, plateau_mass,
                                 rearrange_decreasing, scan_rho)
from nlsground.potentials import PotentialSpec, evaluate

QQ = PotentialSpec.quartic_quintic()


def quiet_minimize(*args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return minimize_on_sphere(*args, **kwargs)


# --- explicit profiles ------------------------------------------------------


def test_plateau_shape():
    g = build_grid(3, 20, 2000)
    u = make_plateau(g, 1.0, 5.0)
    assert np.all(u[g.r <= 5.0] == 1.0)
    assert u[550] == pytest.approx(0.5, abs=1e-12)  # r = 5.5
    assert np.all(u[g.r >= 6.0 - 1e-12] == 0.0)
    collar = (g.r[:-1] >= 5.0 - 1e-12) & (g.r[1:] <= 6.0 + 1e-12)
    slopes = np.abs(np.diff(u))[collar] / g.h
    np.testing.assert_allclose(slopes, 1.0, rtol=1e-9)


def test_zero_height_plateau():
    g = build_grid(3, 20, 200)
    assert not np.any(make_plateau(g, 0.0, 5.0))


def test_plateau_needs_room():
    g = build_grid(3, 20, 200)
    with pytest.raises(ValueError):
        make_plateau(g, 1.0, 19.0)


@given(s0=st.floats(0.1, 3.0), R=st.floats(0.5, 20.0))
def test_plateau_mass_matches_quadrature(s0, R):
    g = build_grid(3, 25, 5000)
    m = l2_norm_sq(g, make_plateau(g, s0, R))
    assert m == pytest.approx(plateau_mass(3, s0, R), rel=2e-4)


def test_scaled_plateau_height():
    g = build_grid(3, 40, 400)
    u = make_scaled_plateau(g, 1.0, 10.0)
    assert u[0] == pytest.approx(10 ** -1.5, rel=1e-15)


def test_scaled_plateau_errors():
    g = build_grid(3, 40, 400)
    with pytest.raises(ValueError):
        make_scaled_plateau(g, 1.0, 20.0)
    with pytest.raises(ValueError):
        make_scaled_plateau(g, 0.0, 5.0)


def test_scaled_plateau_mass_is_scale_free():
    # continuum mass = gamma omega (1/3 + int_1^2 (2 - t)^2 t^2 dt) = gamma 4 pi (1/3 + 8/15)
    g = build_grid(3, 40, 8000)
    limit = 4 * math.pi * (1 / 3 + 8 / 15)
    for R in (4.0, 8.0, 16.0):
        assert l2_norm_sq(g, make_scaled_plateau(g, 1.0, R)) == pytest.approx(limit, rel=2e-3)
    assert l2_norm_sq(g, make_scaled_plateau(g, 1e-6, 8.0)) == pytest.approx(1e-6 * limit, rel=2e-3)


def test_scaled_plateau_energy_negative_for_rational():
    g = build_grid(3, 40, 2000)
    pot = PotentialSpec.rational(2.5, 3.0)
    J = [energy_J(g, pot, make_scaled_plateau(g, 1.0, R)) for R in (2.0, 5.0, 10.0, 19.0)]
    assert J[-1] < 0
    assert J[0] > 0  # the gradient term wins on small balls


# --- rearrangement ------------------------------------------------------------


def test_rearrangement_keeps_sorted_fields():
    g = build_grid(3, 20, 400)
    u = np.exp(-g.r ** 2 / 3)
    assert rearrange_decreasing(g, u) is not u
    np.testing.assert_array_equal(rearrange_decreasing(g, u), u)
    flat = np.where(g.r < 5, 1.0, 0.0)
    np.testing.assert_array_equal(rearrange_decreasing(g, flat), flat)


def test_rearrangement_moves_bump_to_origin():
    g = build_grid(3, 20, 2000)
    u = 1.2 * np.exp(-(g.r - 6) ** 2 / 2)
    v = rearrange_decreasing(g, u)
    assert v[0] == pytest.approx(1.2, rel=1e-6)
    assert l2_norm_sq(g, v) == pytest.approx(l2_norm_sq(g, u), rel=1e-12)
    assert grad_norm_sq(g, v) <= grad_norm_sq(g, u)
    assert energy_J(g, QQ, v) <= energy_J(g, QQ, u)
    # distribution functions agree up to the one cell each level set cuts
    for t in (0.1, 0.5, 1.0):
        cut = g.weights[np.argmax(v <= t)]
        assert abs(integrate(g, (v > t) * 1.0) - integrate(g, (u > t) * 1.0)) <= 2 * cut


def test_rearrangement_potential_integral_second_order():
    errs = []
    for M in (500, 1000, 2000):
        g = build_grid(3, 20, M)
        u = 1.2 * np.exp(-(g.r - 6) ** 2 / 2)
        v = rearrange_decreasing(g, u)
        errs.append(abs(integrate(g, evaluate(QQ, v, 0)) / integrate(g, evaluate(QQ, u, 0)) - 1))
    assert errs[0] / errs[1] >= 3.0 and errs[1] / errs[2] >= 3.0
    assert errs[-1] < 1e-5


@given(u=arrays(np.float64, 128, elements=st.floats(-3, 3)))
def test_rearrangement_properties(u):
    g = build_grid(3, 12.8, 128)
    v = rearrange_decreasing(g, u)
    assert np.all(v >= 0)
    assert np.all(np.diff(v) <= 0)
    m = l2_norm_sq(g, u)
    assert abs(l2_norm_sq(g, v) - m) <= 1e-12 * max(m, 1e-300)
    assert v[0] <= np.abs(u).max() * (1 + 1e-14)


# --- gradient flow ------------------------------------------------------------


def test_ground_state_contract(ground_state):
    gs = ground_state
    g, u = gs.grid, gs.u.values
    assert gs.verdict is Verdict.CONVERGED and gs.converged
    assert l2_norm_sq(g, u) == pytest.approx(gs.rho ** 2, rel=1e-12)
    assert pde_residual(g, QQ, u, lagrange_multiplier(g, QQ, u)) <= 1e-10 * gs.rho
    assert np.all(u >= 0) and u[0] > 0
    assert np.all(np.diff(u) <= 1e-12 * u[0])
    assert gs.lam == gs.diagnostics.lambda_rayleigh
    assert gs.omega == gs.lam
    assert gs.diagnostics.j_value < 0


def test_flow_history_descends_on_the_sphere(qq):
    g = build_grid(3, 40, 1000)
    gs = quiet_minimize(g, qq, 25.0, FlowConfig(residual_tol=1e-9))
    J = np.array(gs.j_history)
    # strict Armijo descent, except at the roundoff floor of J
    floor = 1e-12 * np.abs(J).max()
    assert np.all(np.diff(J) <= floor)
    assert J[-1] < J[0]
    np.testing.assert_allclose(gs.mass_history, 625.0, rtol=1e-12)
    assert len(gs.j_history) == gs.iterations + 1


def test_frequency_shift_reported(qq):
    g = build_grid(3, 40, 1000)
    gs = quiet_minimize(g, qq, 25.0, FlowConfig(omega_shift=0.25))
    assert gs.omega == pytest.approx(gs.lam - 0.25, abs=1e-15)


def test_free_problem_vanishes():
    g = build_grid(3, 40, 1000)
    for rho in (0.5, 5.0, 50.0):
        gs = quiet_minimize(g, PotentialSpec.zero(), rho)
        assert gs.verdict is Verdict.VANISHING and not gs.converged
        assert gs.lam >= 0


def test_defocusing_power_vanishes_with_warning():
    g = build_grid(3, 40, 1000)
    with pytest.warns(RuntimeWarning, match="no minimizer"):
        gs = minimize_on_sphere(g, PotentialSpec.pure_power(4.0), 10.0)
    assert gs.verdict is Verdict.VANISHING


def test_subthreshold_mass_vanishes(qq):
    g = build_grid(3, 40, 1000)
    gs = quiet_minimize(g, qq, 10.0)
    assert gs.verdict is Verdict.VANISHING
    assert gs.diagnostics.j_value > 0


def test_iteration_limit(qq):
    g = build_grid(3, 40, 1000)
    gs = quiet_minimize(g, qq, 30.0, FlowConfig(max_iters=2))
    assert gs.verdict is Verdict.ITER_LIMIT and gs.iterations == 2


def test_every_initial_profile_reaches_the_same_state(qq):
    g = build_grid(3, 40, 1000)
    values = [quiet_minimize(g, qq, 30.0, FlowConfig(init_profile=k)).diagnostics.j_value
              for k in ("gaussian", "plateau", "scaled_plateau")]
    np.testing.assert_allclose(values, values[0], rtol=1e-9)


def test_explicit_start_is_used(qq):
    g = build_grid(3, 40, 1000)
    gs = quiet_minimize(g, qq, 30.0, u0=make_gaussian(g, 7.0))
    assert gs.converged


@pytest.mark.parametrize("kwargs", [
    dict(initial_step=0.0), dict(backtrack_factor=1.0), dict(residual_tol=-1.0),
    dict(max_iters=0), dict(rearrange_every=-1), dict(init_profile="spiral"),
    dict(init_profile="file"), dict(growth_factor=0.5),
])
def test_flow_config_validation(kwargs):
    with pytest.raises(ValueError):
        FlowConfig(**kwargs).validate()


def test_bad_rho(qq):
    g = build_grid(3, 40, 100)
    with pytest.raises(ValueError):
        minimize_on_sphere(g, qq, 0.0)


# --- scan ---------------------------------------------------------------------


def test_best_state_is_lowest_of_multistart(qq):
    g = build_grid(3, 40, 500)
    best = best_state(g, qq, 19.0)
    for kind in ("gaussian", "plateau", "scaled_plateau"):
        gs = quiet_minimize(g, qq, 19.0, FlowConfig(init_profile=kind))
        assert best.diagnostics.j_value <= gs.diagnostics.j_value


def test_scan_brackets_threshold(qq):
    g = build_grid(3, 40, 500)
    scan = scan_rho(g, qq, [14.0, 18.0, 22.0, 26.0, 32.0], thetas=(2.0,))
    lo, hi = scan.rho_bar_bracket
    assert 18.0 <= lo < hi <= 22.0 and hi - lo <= 0.01 * hi
    assert lo < scan.rho_bar_estimate < hi
    assert len(scan.rho_values) == len(scan.i_values) == len(scan.lambda_values) == 5
    # 2 * rho^2 <= 32^2 admits rho in {14, 18, 22}; only 22 carries a minimizer
    assert [c.rho for c in scan.subadditivity_checks] == [22.0]
    assert all(c.holds for c in scan.subadditivity_checks)


def test_scan_without_minimizers():
    g = build_grid(3, 40, 300)
    scan = scan_rho(g, PotentialSpec.zero(), [1.0, 2.0, 3.0])
    assert scan.rho_bar_estimate is None and scan.subadditivity_checks == []
    assert all(i >= -1e-6 for i in scan.i_values)
    assert set(scan.verdicts) == {"Vanishing"}


@pytest.mark.parametrize("rhos,thetas", [([], (2.0,)), ([2.0, 1.0], (2.0,)), ([1.0, 2.0], (1.0,)),
                                         ([-1.0, 2.0], (2.0,))])
def test_scan_argument_errors(rhos, thetas):
    with pytest.raises(ValueError):
        scan_rho(build_grid(3, 10, 100), QQ, rhos, thetas)
