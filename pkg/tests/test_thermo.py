import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbrot.errors import DomainError, StabilityError
from rbrot.thermo import (
    EosSpec,
    check_hypotheses,
    coefficients,
    entropy,
    identity_suite,
    internal_energy,
    pressure,
    pressure_derivatives,
    sound_speed,
    transport,
    verify_gibbs,
)

IDEAL = EosSpec()
CAPPED = EosSpec(gas_law="builtin_capped", p_inf=1.0, a=1e-3)

positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


def test_pressure_examples():
    assert pressure(IDEAL, 1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert pressure(EosSpec(a=0.3), 0.0, 1.0) == pytest.approx(0.1, abs=1e-15)
    assert pressure(IDEAL, 2.0, 4.0) == pytest.approx(8.0, rel=1e-14)


def test_internal_energy_examples():
    assert internal_energy(IDEAL, 1.0, 1.0) == pytest.approx(1.5, rel=1e-14)
    assert internal_energy(EosSpec(a=1.0), 1.0, 1.0) == pytest.approx(2.5, rel=1e-14)
    assert internal_energy(IDEAL, 2.0, 1.0) == pytest.approx(1.5, rel=1e-14)


def test_entropy_examples():
    assert entropy(IDEAL, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert entropy(IDEAL, 1.0, math.exp(2.0 / 3.0)) == pytest.approx(1.0, rel=1e-14)
    for law in ("builtin_ideal", "builtin_capped"):
        d = entropy(EosSpec(gas_law=law, a=0.75), 1.0, 1.0) - entropy(EosSpec(gas_law=law), 1.0, 1.0)
        assert d == pytest.approx(1.0, rel=1e-14)


def test_pressure_derivative_examples():
    assert np.allclose(pressure_derivatives(IDEAL, 1.0, 1.0), (1.0, 1.0), atol=1e-15)
    assert np.allclose(pressure_derivatives(EosSpec(a=3.0), 1.0, 1.0), (1.0, 5.0), atol=1e-14)
    assert np.allclose(pressure_derivatives(IDEAL, 3.0, 2.0), (2.0, 3.0), atol=1e-14)


def test_domain_errors():
    with pytest.raises(DomainError):
        pressure(IDEAL, 1.0, 0.0)
    with pytest.raises(DomainError):
        pressure(IDEAL, float("nan"), 1.0)
    with pytest.raises(DomainError):
        internal_energy(IDEAL, 0.0, 1.0)
    with pytest.raises(DomainError):
        entropy(IDEAL, -1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(positive, positive)
def test_ideal_closed_forms(rho, theta):
    assert pressure(IDEAL, rho, theta) == pytest.approx(rho * theta, rel=1e-12)
    assert internal_energy(IDEAL, rho, theta) == pytest.approx(1.5 * theta, rel=1e-12)
    s = -math.log(rho / theta**1.5)
    assert entropy(IDEAL, rho, theta) == pytest.approx(s, rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.5, 2.0))
def test_sound_speed_positive_and_ideal_value(rho, theta):
    for eos in (IDEAL, CAPPED):
        assert sound_speed(eos, rho, theta) > 0
    assert sound_speed(IDEAL, rho, theta) == pytest.approx(math.sqrt(5.0 / 3.0 * theta), rel=1e-12)


def test_sound_speed_at_unit_state():
    assert abs(float(sound_speed(IDEAL, 1.0, 1.0)) - math.sqrt(5.0 / 3.0)) <= 1e-12


def test_coefficients_examples():
    for rho_bar in (1.0, 2.0):
        b = coefficients(IDEAL, rho_bar, 1.0)
        assert b.c_v == pytest.approx(1.5, rel=1e-14)
        assert b.c_p == pytest.approx(2.5, rel=1e-14)
        assert b.lam == pytest.approx(0.4, rel=1e-14)
    assert coefficients(IDEAL, 1.0, 1.0).alpha == pytest.approx(1.0, rel=1e-14)


def test_alpha_ideal_gas_is_inverse_temperature():
    # alpha = p_theta/(rho p_rho) = 1/theta for p = rho theta
    assert coefficients(IDEAL, 2.0, 1.0).alpha == pytest.approx(1.0, rel=1e-14)
    assert coefficients(IDEAL, 1.0, 2.0).alpha == pytest.approx(0.5, rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.5, 2.0), st.sampled_from([0.0, 1e-3, 1.0]),
       st.sampled_from(["builtin_ideal", "builtin_capped"]))
def test_lambda_in_unit_interval_and_identities(rho_bar, theta_bar, a, law):
    eos = EosSpec(gas_law=law, a=a)
    b = coefficients(eos, rho_bar, theta_bar)
    assert 0.0 < b.lam < 1.0
    assert b.lam / (1 - b.lam) == pytest.approx(b.c_p / b.c_v - 1.0, rel=1e-12)
    res = identity_suite(b, eos)
    assert max(res.values()) <= 1e-8


def test_identity_suite_ideal_closed_form():
    res = identity_suite(coefficients(IDEAL, 1.0, 1.0), IDEAL)
    assert set(res) == {"maxwell", "lambda_definition", "lambda_ratio",
                        "vanishing_combination", "kappa_combination"}
    assert max(res.values()) <= 1e-12


def test_identity_suite_capped():
    res = identity_suite(coefficients(CAPPED, 1.0, 1.0), CAPPED)
    assert max(res.values()) <= 1e-8


@pytest.mark.parametrize("eos", [IDEAL, EosSpec(a=1.0), CAPPED], ids=["ideal", "ideal_a1", "capped"])
def test_gibbs_residual_small(eos):
    assert verify_gibbs(eos) <= 1e-6


class PerturbedEnergy:
    """Wraps an EOS and inflates the internal energy by one percent."""

    def __init__(self, eos):
        self.eos = eos

    def pressure(self, rho, theta):
        return self.eos.pressure(rho, theta)

    def entropy(self, rho, theta):
        return self.eos.entropy(rho, theta)

    def internal_energy(self, rho, theta):
        return 1.01 * self.eos.internal_energy(rho, theta)


def _ideal_table():
    z = np.logspace(-3, 3, 61)
    return EosSpec(gas_law="tabulated", table_z=tuple(z), table_p=tuple(z))


def test_tabulated_law_matches_ideal():
    tab = _ideal_table()
    rho = np.linspace(0.5, 2.0, 7)
    assert np.allclose(tab.pressure(rho, 1.3), IDEAL.pressure(rho, 1.3), rtol=1e-10)
    assert np.allclose(tab.internal_energy(rho, 1.3), IDEAL.internal_energy(rho, 1.3), rtol=1e-10)
    # entropy up to an additive constant
    ds = tab.entropy(rho, 1.3) - IDEAL.entropy(rho, 1.3)
    assert np.ptp(ds) < 1e-6
    assert verify_gibbs(tab) <= 1e-6


def test_gibbs_detects_perturbed_energy():
    assert verify_gibbs(PerturbedEnergy(_ideal_table())) > 1e-3
    assert verify_gibbs(PerturbedEnergy(IDEAL)) > 1e-3


def test_tabulated_derivatives_by_differences():
    tab = _ideal_table()
    p_rho, p_theta = tab.pressure_derivatives(1.2, 0.9)
    assert p_rho == pytest.approx(0.9, rel=1e-7)
    assert p_theta == pytest.approx(1.2, rel=1e-7)


def test_transport_examples():
    mu, eta, kappa = transport(EosSpec(mu0=0.01), 1.0)
    assert mu == pytest.approx(0.02)
    assert transport(EosSpec(kappa0=0.1, beta_cond=7.0), 1.0)[2] == pytest.approx(0.2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.0, 2.0))
def test_transport_nondecreasing(theta, dtheta):
    eos = EosSpec(mu0=0.01, eta0=0.02, kappa0=0.1)
    lo = transport(eos, theta)
    hi = transport(eos, theta + dtheta)
    assert all(h >= l for h, l in zip(hi, lo))


def test_beta_cond_must_exceed_six():
    with pytest.raises(ValueError):
        EosSpec(beta_cond=6.0)


def test_capped_law_structure():
    chk = check_hypotheses(CAPPED)
    assert chk["p_zero"] == 0.0
    assert chk["dp_positive"]
    assert chk["heat_ratio_positive"]
    assert chk["scaled_nonincreasing"]
    assert chk["p_over_z_min_large"] > 0
    assert chk["beta_ok"]
    assert not chk["third_law"]


def test_capped_entropy_matches_integrated_derivative():
    from scipy.integrate import quad

    law = CAPPED.law
    z0, z1 = 0.2, 7.0
    integral, _ = quad(law.dS, z0, z1, epsabs=1e-13, epsrel=1e-13)
    assert law.S(np.array([z1]))[0] - law.S(np.array([z0]))[0] == pytest.approx(integral, rel=1e-10)


def test_temperature_inversion_roundtrip():
    for eos in (IDEAL, CAPPED, EosSpec(a=1.0)):
        rho = np.array([0.6, 1.0, 1.7])
        theta = np.array([0.7, 1.0, 1.9])
        e = eos.internal_energy(rho, theta)
        out = eos.temperature_from_energy(rho, e, np.ones(3))
        assert np.allclose(out, theta, rtol=1e-11)


def test_stability_violation_raised():
    with pytest.raises(StabilityError):
        # pressure decreasing in density
        coefficients(EosSpec(gas_law="tabulated", table_z=(0.1, 0.5, 1.0, 5.0, 10.0),
                             table_p=(1.0, 0.8, 0.5, 0.2, 0.1)), 1.0, 1.0)
