"""Constitutive laws, Kirchhoff transform, and the two parametrizations."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from richards.hydromodel import (
    BrooksCoreyModel,
    check_nondegeneracy,
    derive_params,
    kirchhoff_closed_form,
    kirchhoff_quadrature_oracle,
    make_parametrization,
    mobility,
    mobility_derivative,
    sat_of_kirchhoff,
    saturation_of_pressure,
    select_eta_mode,
    tau_formulation,
    u_formulation,
)

BETAS = [1.0, 2.0, 4.0, 8.0, 16.0]

model_strategy = st.builds(
    BrooksCoreyModel,
    beta=st.floats(0.5, 20.0),
    p_b=st.floats(-1.0, -1e-4),
)


# -- derived constants ---------------------------------------------------------


def test_derive_params_legacy_mode_beta4():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01, eta_mode="legacy")
    p = derive_params(m)
    assert p.eta == pytest.approx(7.25)
    assert p.u_b == pytest.approx(0.01 / 29.0)
    assert p.eta * p.u_b == pytest.approx(2.5e-3)
    assert p.tau_star == 1.0


def test_derive_params_legacy_mode_beta1():
    m = BrooksCoreyModel(beta=1.0, p_b=-0.01, eta_mode="legacy")
    p = derive_params(m)
    assert p.eta == pytest.approx(5.0)
    assert p.u_b == pytest.approx(0.002)
    # (eta*u_b)^(1/(1-eta)) = 0.01^(-1/4) > 1, so tau_star clamps to 1
    assert (p.eta * p.u_b) ** (1.0 / (1.0 - p.eta)) > 1.0
    assert p.tau_star == 1.0


def test_derive_params_derived_mode():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    p = derive_params(m)
    assert p.eta == pytest.approx(3.25)
    assert p.u_b == pytest.approx(0.01 / 13.0)


@given(model_strategy, st.sampled_from(["legacy", "derived"]))
def test_u_continuous_at_branch_switch(m, mode):
    m = BrooksCoreyModel(beta=m.beta, p_b=m.p_b, eta_mode=mode)
    p = derive_params(m)
    param = tau_formulation(m)
    _, u_left, _, _ = param.eval(p.tau_star * (1.0 - 1e-13))
    _, u_right, _, _ = param.eval(p.tau_star)
    assert abs(float(u_left) - float(u_right)) <= 1e-12 * max(1.0, abs(float(u_right)))
    assert float(u_right) == pytest.approx(p.u_b * p.tau_star**p.eta, rel=1e-12)


def test_model_validation():
    with pytest.raises(ValueError):
        BrooksCoreyModel(beta=4.0, p_b=0.01)
    with pytest.raises(ValueError):
        BrooksCoreyModel(beta=-1.0, p_b=-0.01)
    with pytest.raises(ValueError):
        BrooksCoreyModel(beta=4.0, p_b=-0.01, eta_mode="bogus")


# -- pointwise laws ------------------------------------------------------------


def test_saturation_of_pressure_values():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    assert saturation_of_pressure(m, m.p_b) == 1.0
    assert saturation_of_pressure(m, 2 * m.p_b) == pytest.approx(2.0**-4)
    assert saturation_of_pressure(m, 1.0) == 1.0


def test_mobility_values():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    assert mobility(m, 0.0) == 0.0
    assert mobility(m, 1.0) == 1.0
    assert mobility(m, 0.5) == pytest.approx(0.5**3.5)
    # clamping outside [0, 1]
    assert mobility(m, -0.5) == 0.0
    assert mobility(m, 1.5) == 1.0
    assert mobility_derivative(m, -0.5) == 0.0
    assert mobility_derivative(m, 1.5) == 0.0


def test_sat_of_kirchhoff_values():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    p = derive_params(m)
    assert sat_of_kirchhoff(m, p.u_b) == 1.0
    assert sat_of_kirchhoff(m, p.u_b / 2.0**p.eta) == pytest.approx(0.5)
    assert sat_of_kirchhoff(m, -0.3) == 0.0


# -- parametrization maps ------------------------------------------------------


def test_tau_form_lower_branch_legacy_values():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01, eta_mode="legacy")
    p = derive_params(m)
    s, u, sp, up = tau_formulation(m).eval(0.5)
    assert float(s) == 0.5
    assert float(u) == pytest.approx(p.u_b * 0.5**7.25, rel=1e-14)
    assert float(sp) == 1.0
    assert float(up) == pytest.approx(7.25 * p.u_b * 0.5**6.25, rel=1e-14)


@pytest.mark.parametrize("mode", ["legacy", "derived"])
def test_tau_form_upper_branch_dirichlet_value(mode):
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01, eta_mode=mode)
    p = derive_params(m)
    s, u, _, up = tau_formulation(m).eval(2.01)
    assert float(s) == 1.0
    assert float(u) == pytest.approx(2.01 - 1.0 + p.u_b, rel=1e-14)
    # p(2.01) = p_b + u - u_b = 1 exactly, the Dirichlet pressure of the
    # injection test
    assert m.p_b + float(u) - p.u_b == pytest.approx(1.0, rel=1e-14)
    assert float(up) == 1.0


def test_u_form_singularity_at_zero():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    s, u, sp, up = u_formulation(m).eval(0.0)
    assert float(s) == 0.0
    assert float(u) == 0.0
    assert math.isinf(float(sp))
    assert float(up) == 1.0


def test_extension_below_zero():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    for param in (tau_formulation(m), u_formulation(m)):
        s, u, sp, up = param.eval(-0.7)
        assert float(s) == 0.0
        assert float(sp) == 0.0
        assert float(u) == -0.7
        assert float(up) == 1.0


def test_sat_inverse_examples():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01, eta_mode="legacy")
    p = derive_params(m)
    tau_p = tau_formulation(m)
    assert tau_p.sat_inverse(0.0) == 0.0
    assert tau_p.sat_inverse(1e-6) == pytest.approx(1e-6, rel=1e-14)
    u_p = u_formulation(m)
    assert u_p.sat_inverse(1e-6) == pytest.approx(p.u_b * (1e-6) ** p.eta, rel=1e-12)
    with pytest.raises(ValueError):
        tau_p.sat_inverse(1.5)


@pytest.mark.parametrize("mode", ["legacy", "derived"])
def test_tau_of_pressure_examples(mode):
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01, eta_mode=mode)
    p = derive_params(m)
    tau_p = tau_formulation(m)
    assert tau_p.tau_of_pressure(m.p_b) == pytest.approx(p.tau_sat, rel=1e-14)
    # tau_D for the injection pressure is 2.01 in either eta mode: the u_b
    # dependence cancels on the affine saturated branch
    assert tau_p.tau_of_pressure(1.0) == pytest.approx(2.01, rel=1e-14)
    u_p = u_formulation(m)
    assert u_p.tau_of_pressure(1.0) == pytest.approx(p.u_b + 1.0 - m.p_b, rel=1e-14)


def test_u_form_dirichlet_value_legacy_mode():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01, eta_mode="legacy")
    assert u_formulation(m).tau_of_pressure(1.0) == pytest.approx(1.0103448, rel=1e-6)


# -- quadrature oracle and eta resolution -------------------------------------


def test_oracle_dry_limit():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    p = derive_params(m)
    assert kirchhoff_quadrature_oracle(m, -1e6 * abs(m.p_b)) <= 1e-8 * p.u_b


def test_oracle_validates_derived_u_b():
    for beta in BETAS:
        m = BrooksCoreyModel(beta=beta, p_b=-0.01)
        p = derive_params(m)
        u_quad = kirchhoff_quadrature_oracle(m, m.p_b)
        assert u_quad == pytest.approx(p.u_b, rel=1e-10)
        assert p.u_b == pytest.approx(-m.p_b / (3 * beta + 1), rel=1e-14)


def test_oracle_saturated_region_affine():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    p = derive_params(m)
    for pr in (0.0, 0.5, 1.0):
        assert kirchhoff_quadrature_oracle(m, pr) == pytest.approx(
            p.u_b + (pr - m.p_b), rel=1e-10
        )


def test_select_eta_mode_prefers_derived():
    for beta in BETAS:
        assert select_eta_mode(beta, -0.01) == "derived"


def test_closed_form_matches_oracle():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    for pr in np.concatenate([-np.logspace(1, -6, 25), [m.p_b, 0.0, 1.0]]):
        cf = float(kirchhoff_closed_form(m, pr))
        qd = kirchhoff_quadrature_oracle(m, float(pr))
        assert cf == pytest.approx(qd, rel=1e-8)


# -- non-degeneracy ------------------------------------------------------------


def test_tau_form_nondegenerate():
    grid = np.linspace(-1.0, 3.0, 4001)
    for beta in BETAS:
        m = BrooksCoreyModel(beta=beta, p_b=-0.01)
        lo, hi = check_nondegeneracy(tau_formulation(m), grid)
        assert abs(lo - 1.0) <= 1e-12
        assert abs(hi - 1.0) <= 1e-12


def test_u_form_degenerate_near_zero():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    grid = np.concatenate([[1e-12], np.linspace(1e-6, 2.0, 100)])
    _, hi = check_nondegeneracy(u_formulation(m), grid)
    assert hi > 1e6


def test_extension_region_slope_is_one():
    m = BrooksCoreyModel(beta=4.0, p_b=-0.01)
    grid = np.linspace(-2.0, -1e-9, 50)
    for param in (tau_formulation(m), u_formulation(m)):
        lo, hi = check_nondegeneracy(param, grid)
        assert lo == 1.0 and hi == 1.0


# -- property tests ------------------------------------------------------------


@given(model_strategy, st.sampled_from(["tau", "u"]))
@settings(max_examples=50)
def test_maps_monotone_and_bounded(m, kind):
    param = make_parametrization(kind, m)
    grid = np.linspace(-0.5, 3.0, 400)
    s, u, _, _ = param.eval(grid)
    assert np.all(np.diff(s) >= -1e-14)
    assert np.all(np.diff(u) >= -1e-14)
    assert np.all((s >= 0.0) & (s <= 1.0))
    s0, u0, _, _ = param.eval(0.0)
    assert float(s0) == 0.0 and float(u0) == 0.0


@given(model_strategy, st.sampled_from(["tau", "u"]), st.floats(0.0, 3.0))
@settings(max_examples=100)
def test_composition_identity(m, kind, tau):
    param = make_parametrization(kind, m)
    s, u, _, _ = param.eval(tau)
    assert abs(float(s) - float(sat_of_kirchhoff(m, u))) <= 1e-12


@given(
    st.sampled_from(BETAS),
    st.sampled_from(["tau", "u"]),
    st.floats(1e-3, 3.0),
)
@settings(max_examples=100)
def test_derivatives_match_finite_differences(beta, kind, tau):
    m = BrooksCoreyModel(beta=beta, p_b=-0.01)
    param = make_parametrization(kind, m)
    p = param.params
    # stay away from branch points, where only one-sided slopes exist
    for kink in (0.0, p.tau_star, p.tau_sat, p.u_b):
        if abs(tau - kink) < 1e-3:
            tau += 2e-3
    h = 1e-7 * (1.0 + abs(tau))
    s_p, u_p = param.eval(tau)[2], param.eval(tau)[3]
    s_fd = (param.s(tau + h) - param.s(tau - h)) / (2 * h)
    u_fd = (param.u(tau + h) - param.u(tau - h)) / (2 * h)
    assert float(s_fd) == pytest.approx(float(s_p), rel=2e-6, abs=1e-12)
    assert float(u_fd) == pytest.approx(float(u_p), rel=2e-6, abs=1e-12)


@given(model_strategy, st.floats(0.0, 1.0))
@settings(max_examples=100)
def test_sat_inverse_roundtrip(m, s):
    for kind in ("tau", "u"):
        param = make_parametrization(kind, m)
        tau = param.sat_inverse(s)
        assert tau >= 0.0
        assert abs(float(param.s(tau)) - s) <= 1e-12
