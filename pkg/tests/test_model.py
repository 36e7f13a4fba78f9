import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from kinnet import (AbsorptionProfile, DelayMeasure, NetworkSpec, SchemaError,
                    ScatteringKernel, ValidationError, load_network,
                    measure_laplace, measure_total_variation, network_bounds,
                    routing_norm)
from kinnet.presets import conservation_spec, single_circle


# ---------------------------------------------------------------------------
# delay measures

def test_measure_validation():
    with pytest.raises(ValidationError):
        DelayMeasure(kind="uniform", r=1.0)
    with pytest.raises(ValidationError):
        DelayMeasure(kind="dirac", r=0.0)
    with pytest.raises(ValidationError):
        DelayMeasure(kind="exponential", r=1.0, theta_rate=0.0)
    with pytest.raises(ValidationError):
        DelayMeasure(kind="piecewise", r=1.0, atoms=((-2.0, 1.0),))
    with pytest.raises(ValidationError):
        DelayMeasure(kind="piecewise", r=1.0, atoms=((-0.5, -1.0),))
    with pytest.raises(ValidationError):
        DelayMeasure(kind="piecewise", r=1.0, density_edges=(-1.0, -1.5, 0.0),
                     density_values=(1.0, 1.0))


def test_atom_at_zero_warns():
    with pytest.warns(UserWarning, match="atom at theta=0"):
        DelayMeasure(kind="piecewise", r=1.0, atoms=((0.0, 0.5),))


def test_total_variation_closed_forms():
    assert measure_total_variation(DelayMeasure(kind="dirac", r=0.7)) == 1.0
    m = DelayMeasure(kind="exponential", r=0.8, theta_rate=2.5)
    assert measure_total_variation(m) == pytest.approx(
        (1.0 - math.exp(-2.5 * 0.8)) / 2.5, abs=1e-14)
    m = DelayMeasure(kind="piecewise", r=1.0, atoms=((-0.3, 0.4),),
                     density_edges=(-1.0, -0.5, 0.0), density_values=(1.0, 2.0))
    assert measure_total_variation(m) == pytest.approx(0.4 + 0.5 + 1.0, abs=1e-14)


def test_laplace_against_quadrature():
    m = DelayMeasure(kind="exponential", r=0.9, theta_rate=1.7)
    for lam in (-1.0, 0.0, 0.5, 3.0):
        ref, _ = quad(lambda th: math.exp(lam * th) * math.exp(1.7 * th), -0.9, 0.0)
        assert measure_laplace(m, lam) == pytest.approx(ref, rel=1e-10)
    m = DelayMeasure(kind="piecewise", r=1.0, atoms=((-0.25, 0.3),),
                     density_edges=(-0.8, -0.2), density_values=(1.5,))
    for lam in (-0.5, 0.0, 2.0):
        ref, _ = quad(lambda th: 1.5 * math.exp(lam * th), -0.8, -0.2)
        ref += 0.3 * math.exp(-0.25 * lam)
        assert measure_laplace(m, lam) == pytest.approx(ref, rel=1e-10)


def test_laplace_degenerate_rate():
    m = DelayMeasure(kind="exponential", r=0.6, theta_rate=2.0)
    assert measure_laplace(m, -2.0) == pytest.approx(0.6, abs=1e-12)


def test_laplace_at_zero_is_total_variation():
    for m in (DelayMeasure(kind="dirac", r=0.4),
              DelayMeasure(kind="exponential", r=1.2, theta_rate=0.7),
              DelayMeasure(kind="piecewise", r=1.0, atoms=((-1.0, 2.0),),
                           density_edges=(-1.0, 0.0), density_values=(0.5,))):
        assert measure_laplace(m, 0.0) == pytest.approx(
            measure_total_variation(m), abs=1e-13)


@given(st.floats(0.1, 2.0), st.floats(-3.0, 3.0).filter(lambda x: abs(x) > 1e-3),
       st.floats(-2.0, 2.0), st.floats(0.0, 3.0))
def test_laplace_monotone_in_shift(r, rate, lam, dlam):
    # support in [-r, 0] makes e^{lam*theta} nonincreasing in lam
    m = DelayMeasure(kind="exponential", r=r, theta_rate=rate)
    assert measure_laplace(m, lam + dlam) <= measure_laplace(m, lam) + 1e-12


# ---------------------------------------------------------------------------
# coefficients

def test_tabulated_absorption():
    a = AbsorptionProfile(kind="tabulated", x_edges=(0.0, 0.5, 1.0),
                          v_edges=(1.0, 2.0), values=((0.2,), (0.8,)))
    assert a.q(0.25, 1.5) == 0.2
    assert a.q(0.75, 1.5) == 0.8
    assert a.integral_x(1.0, 1.5) == pytest.approx(0.5 * 0.2 + 0.5 * 0.8)
    assert a.integral_x(0.7, 1.5) == pytest.approx(0.5 * 0.2 + 0.2 * 0.8)
    assert a.min_value() == 0.2 and a.max_value() == 0.8


def test_constant_absorption_integral():
    a = AbsorptionProfile(kind="constant", value=0.3)
    assert a.integral_x(2.0, 1.0) == pytest.approx(0.6)


def test_scattering_kernels():
    c = ScatteringKernel(kind="constant", value=2.0)
    assert c.beta(1.1, 1.9) == 2.0
    assert c.out_integral(1.5, 1.0, 2.0) == pytest.approx(2.0)
    s = ScatteringKernel(kind="separable", v_edges=(1.0, 1.5, 2.0),
                         out_values=(1.0, 3.0), in_values=(0.5, 0.25))
    assert s.beta(1.2, 1.8) == pytest.approx(1.0 * 0.25)
    assert s.out_integral(1.2, 1.0, 2.0) == pytest.approx((1.0 + 3.0) * 0.5 * 0.5)
    assert not s.is_zero()
    t = ScatteringKernel(kind="tabulated", v_edges=(1.0, 2.0), values=((0.0,),))
    assert t.is_zero()


# ---------------------------------------------------------------------------
# routing and bounds

def test_routing_norm_column_sums():
    assert routing_norm([[0.5, 2.0], [1.0, 0.5]]) == pytest.approx(2.5)
    with pytest.raises(ValidationError):
        routing_norm([[1.0, 2.0]])


@given(st.floats(-5.0, 5.0), st.integers(1, 4), st.integers(0, 10))
def test_routing_norm_homogeneous(c, n, seed):
    m = np.random.default_rng(seed).random((n, n))
    assert routing_norm(c * m) == pytest.approx(abs(c) * routing_norm(m), rel=1e-12)


def test_network_bounds_values():
    spec = conservation_spec()
    b = network_bounds(spec)
    assert b.l_bar == 1.5 and b.l_under == 1.0
    assert b.r_bar == 0.5
    assert b.var_bar == 1.0
    assert b.gamma_bar == 0.0
    assert b.routing_norm == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# config loading

def test_config_round_trip():
    spec = conservation_spec()
    doc = spec.to_config()
    again = load_network(json.dumps(doc))
    assert again.to_config() == doc
    assert again.n_circles == 2
    assert np.allclose(again.routing, spec.routing)


def test_config_schema_errors():
    with pytest.raises(SchemaError):
        load_network({"circles": []})
    with pytest.raises(SchemaError):
        load_network({"velocity": {"v_min": 1.0, "v_max": 2.0}, "circles": []})
    doc = single_circle(0.5).to_config()
    del doc["circles"][0]["absorption"]["value"]
    with pytest.raises(SchemaError, match="value"):
        load_network(doc)


def test_config_validation_errors():
    doc = single_circle(0.5).to_config()
    doc["velocity"]["v_min"] = -1.0
    with pytest.raises(ValidationError):
        load_network(doc)
    doc = single_circle(0.5).to_config()
    doc["routing"] = [[-0.2]]
    with pytest.raises(ValidationError, match="routing"):
        load_network(doc)
    doc = single_circle(0.5).to_config()
    doc["circles"][0]["scattering"]["value"] = 5.0  # breaks the unit integral
    with pytest.raises(ValidationError, match="mass-preserving"):
        load_network(doc)


def test_config_declared_absorption_bounds():
    doc = single_circle(0.5, gamma=0.5).to_config()
    doc["absorption_bounds"] = {"gamma1": 0.0, "gamma2": 0.4}
    with pytest.raises(ValidationError, match="gamma2"):
        load_network(doc)
    doc["absorption_bounds"] = {"gamma1": 0.0, "gamma2": 1.0}
    spec = load_network(doc)
    assert spec.absorption_range() == (0.0, 1.0)
