"""Moduli: transform values, Osgood classification, submultiplicativity."""

import math

import numpy as np
import pytest

from freqlab.modulus import (
    ExponentTriple,
    Modulus,
    OsgoodClass,
    check_phi_integrable,
    check_phi_submultiplicative,
    check_submultiplicative_psi,
    classify_osgood,
    eval_phi,
    eval_psi,
    select_exponents,
)


# ---------------------------------------------------------------------------
# omega / phi / psi pointwise values
# ---------------------------------------------------------------------------


def test_phi_linear_is_one():
    m = Modulus.linear()
    assert eval_phi(m, 0.5) == 1.0
    assert np.allclose(eval_phi(m, np.array([0.1, 0.9, 1.0])), 1.0)


def test_phi_power_closed_form():
    m = Modulus.power(0.5)
    assert eval_phi(m, 0.25) == pytest.approx(2.0, rel=1e-14)


def test_phi_log_power_closed_form():
    # below t_cut = 1/e the raw formula applies: phi(s) = log(1/s)
    m = Modulus.log_power(1.0)
    assert eval_phi(m, math.exp(-2.0)) == pytest.approx(2.0, rel=1e-14)


def test_psi_values():
    assert eval_psi(Modulus.linear(), 10.0) == pytest.approx(1.0)
    assert eval_psi(Modulus.power(0.5), 4.0) == pytest.approx(2.0, rel=1e-14)
    assert eval_psi(Modulus.log_power(1.0), math.exp(2.0)) == pytest.approx(
        2.0, rel=1e-14
    )


def test_log_power_constant_extension():
    # beyond t_cut the modulus freezes at omega(t_cut) = p^p e^-p
    m = Modulus.log_power(1.0)
    assert float(m.omega(1.0)) == pytest.approx(1.0 / math.e, rel=1e-14)
    assert float(m.omega(0.9)) == pytest.approx(1.0 / math.e, rel=1e-14)
    ts = np.linspace(0.0, 1.0, 201)
    w = m.omega(ts)
    assert np.all(np.diff(w) >= -1e-15)
    slopes = np.diff(w) / np.diff(ts)
    assert np.all(np.diff(slopes) <= 1e-9)  # concave


def test_domain_errors():
    m = Modulus.linear()
    with pytest.raises(ValueError):
        eval_phi(m, 0.0)
    with pytest.raises(ValueError):
        eval_phi(m, 1.5)
    with pytest.raises(ValueError):
        eval_psi(m, 0.5)
    with pytest.raises(ValueError):
        m.omega(-0.1)


def test_monotonicity_properties_on_grids():
    rng = np.random.default_rng(0)
    for m in (Modulus.linear(), Modulus.power(0.3), Modulus.log_power(2.0)):
        s = np.sort(rng.uniform(1e-6, 1.0, 200))
        assert np.all(np.diff(m.phi(s)) <= 1e-12)  # phi nonincreasing
        x = np.sort(rng.uniform(1.0, 1e6, 200))
        assert np.all(np.diff(m.psi(x)) >= -1e-12)  # psi nondecreasing
        # 1/(s psi(s)) nonincreasing
        v = 1.0 / (x * m.psi(x))
        assert np.all(np.diff(v) <= 1e-12)


def test_tabulated_roundtrip_and_validation():
    ts = np.logspace(-6, 0, 30)
    m = Modulus.tabulated(ts, ts**0.5)
    assert np.allclose(m.omega(ts), ts**0.5, rtol=1e-12)
    # power-law extrapolation below the data
    assert float(m.omega(1e-8)) == pytest.approx(1e-4, rel=1e-10)
    with pytest.raises(ValueError):
        Modulus.tabulated([0.5, 0.25], [0.1, 0.2])  # decreasing abscissae
    with pytest.raises(ValueError):
        Modulus.tabulated([0.25, 0.5], [0.2, 0.1])  # omega decreasing
    with pytest.raises(ValueError):
        Modulus.tabulated([0.25, 0.5], [0.0, 0.1])  # vanishing on an interval
    with pytest.raises(ValueError):
        Modulus.tabulated([0.1, 0.5, 1.0], [0.01, 0.02, 0.2])  # convex


def test_config_roundtrip():
    for m in (
        Modulus.linear(),
        Modulus.power(0.4),
        Modulus.log_power(1.5),
        Modulus.tabulated([0.1, 1.0], [0.2, 0.5]),
    ):
        m2 = Modulus.from_config(m.to_config())
        ts = np.linspace(0.05, 1.0, 17)
        assert np.allclose(m.omega(ts), m2.omega(ts))


# ---------------------------------------------------------------------------
# Osgood classification
# ---------------------------------------------------------------------------

OSGOOD_FAMILY = [
    (Modulus.linear(), OsgoodClass.OSGOOD),
    (Modulus.power(0.3), OsgoodClass.NON_OSGOOD),
    (Modulus.power(0.7), OsgoodClass.NON_OSGOOD),
    (Modulus.log_power(1.0), OsgoodClass.OSGOOD),
    (Modulus.log_power(1.5), OsgoodClass.NON_OSGOOD),
    (Modulus.log_power(3.0), OsgoodClass.NON_OSGOOD),
]


@pytest.mark.parametrize("m,expected", OSGOOD_FAMILY)
def test_classify_osgood_analytic(m, expected):
    assert classify_osgood(m) is expected


@pytest.mark.parametrize("m,expected", OSGOOD_FAMILY)
def test_classify_osgood_numeric_engine(m, expected):
    # the dyadic condensation engine must agree with the closed forms
    assert classify_osgood(m, numeric_only=True) is expected


def test_classify_osgood_tabulated():
    ts = np.logspace(-8, 0, 60)
    assert classify_osgood(Modulus.tabulated(ts, ts)) is OsgoodClass.OSGOOD
    assert (
        classify_osgood(Modulus.tabulated(ts, ts**0.5)) is OsgoodClass.NON_OSGOOD
    )


def test_classify_osgood_depth_validation():
    with pytest.raises(ValueError):
        classify_osgood(Modulus.linear(), depth=3)


# ---------------------------------------------------------------------------
# submultiplicativity and integrability
# ---------------------------------------------------------------------------


def test_psi_submultiplicative_exact_families():
    rep = check_submultiplicative_psi(Modulus.linear(), 1.01)
    assert rep.holds and rep.worst_ratio == pytest.approx(1.0, abs=1e-12)
    rep = check_submultiplicative_psi(Modulus.power(0.5), 1.01)
    assert rep.holds and rep.worst_ratio == pytest.approx(1.0, abs=1e-9)


def test_psi_submultiplicative_log_power():
    # worst ratio for the extended family is 1/psi(1) = e, attained near x=1;
    # restricted to x, y >= e the classical bound log(xy) <= 2 log x log y
    # holds with constant 2
    m = Modulus.log_power(1.0)
    rep = check_submultiplicative_psi(m, 2.8)
    assert rep.holds
    assert rep.worst_ratio == pytest.approx(math.e, rel=1e-6)
    rep = check_submultiplicative_psi(m, 2.0)
    assert not rep.holds
    grid = np.logspace(1.0, 6.0, 64)  # log10(e) > 0.43, start at 10 >= e
    ratios = m.psi(np.outer(grid, grid).ravel()) / np.outer(
        m.psi(grid), m.psi(grid)
    ).ravel()
    assert ratios.max() <= 2.0 + 1e-12


def test_phi_submultiplicative():
    rep = check_phi_submultiplicative(Modulus.linear(), 1.01)
    assert rep.holds and rep.worst_ratio == pytest.approx(1.0, abs=1e-9)
    # the extended log family needs c = e; c = 2 fails at the (1/2, 1/2) corner
    m = Modulus.log_power(1.0)
    rep = check_phi_submultiplicative(m, 2.0)
    assert not rep.holds
    corner = math.log(4.0) / (2.0 / math.e) ** 2
    assert rep.worst_ratio == pytest.approx(corner, rel=1e-6)
    rep = check_phi_submultiplicative(m, math.e)
    assert rep.holds
    assert rep.worst_ratio == pytest.approx(2.0, rel=1e-6)
    with pytest.raises(ValueError):
        check_phi_submultiplicative(m, 0.5)


def test_phi_integrable_values():
    rep = check_phi_integrable(Modulus.linear())
    assert rep.finite and rep.value == pytest.approx(1.0, rel=1e-7)
    rep = check_phi_integrable(Modulus.power(0.5))
    assert rep.finite and rep.value == pytest.approx(2.0, rel=1e-6)
    # extended log family: int_0^1 phi = 2/e + 1/e = 3/e
    rep = check_phi_integrable(Modulus.log_power(1.0))
    assert rep.finite and rep.value == pytest.approx(3.0 / math.e, rel=1e-6)
    rep = check_phi_integrable(Modulus.log_power(2.0))
    assert rep.finite  # integrability of phi is weaker than Osgood failure


def test_sample_count_validation():
    with pytest.raises(ValueError):
        check_submultiplicative_psi(Modulus.linear(), 2.0, sample_count=8)


# ---------------------------------------------------------------------------
# exponent selection
# ---------------------------------------------------------------------------


def test_select_exponents_constraints_hold():
    for alpha in (0.68, 0.7, 0.75, 0.8, 0.9, 0.99):
        tr = select_exponents(alpha)
        assert tr.tau * (2.0 - tr.beta) + tr.eta < 1.0
        assert tr.beta * tr.tau > 0.5 + 2.0 * tr.eta
        assert 2.0 / 3.0 < tr.beta < alpha
        assert 0.0 < tr.eta < 1.0


def test_select_exponents_reference_point():
    tr = select_exponents(0.7)
    assert tr.beta == pytest.approx(0.68333333, rel=1e-6)
    assert 0.74 < tr.tau < 0.76
    assert 0.0005 < tr.eta < 0.002


def test_select_exponents_domain():
    with pytest.raises(ValueError):
        select_exponents(0.6667)
    with pytest.raises(ValueError):
        select_exponents(0.5)
    with pytest.raises(ValueError):
        select_exponents(1.0)


def test_exponent_triple_rejects_bad_values():
    with pytest.raises(ValueError):
        ExponentTriple(beta=0.7, tau=0.99, eta=0.2)
