import math

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from krylov_mqm.special import (agm, elliptic_K, elliptic_K_quadrature, elliptic_params, nome,
                                quartic_params)

from oracles import parameter_from_nome, quartic_quarter_period, quartic_turning_point

# Frozen from mpmath.ellipk / mpmath.qfrom at 40 digits.
K_TABLE = {
    0.0: 1.5707963267948966192,
    0.5: 1.8540746773013719184,
    0.9: 2.5780921133481731882,
    -0.2: 1.5000268912867475206,
    -3.0: 1.0782578237498216177,
}
Q_TABLE = {
    0.5: 0.043213918263772249774,
    0.9: 0.14017312695426155241,
    -0.2: -0.01139312524885567544,
    -3.0: -0.085795733702194766517,
}
# Quarter period and turning point of the quartic well, from direct quadrature.
L_TABLE = {1.0: 0.8947829990928167172, 2.0: 0.80403881689020157248, 10.0: 0.58507450021194799316}
LAMBDA_TABLE = {1.0: 0.60500033370605560912, 2.0: 0.55589297025142117199,
                10.0: 0.4232360863014778426}


def test_agm_known_value():
    assert agm(1.0, math.sqrt(2.0)) == pytest.approx(float(mpmath.agm(1, mpmath.sqrt(2))), rel=1e-15)


def test_agm_rejects_nonpositive():
    with pytest.raises(ValueError):
        agm(0.0, 1.0)


@pytest.mark.parametrize("m, K", sorted(K_TABLE.items()))
def test_elliptic_K_frozen(m, K):
    assert elliptic_K(m) == pytest.approx(K, rel=1e-14)


@pytest.mark.parametrize("m", [-10.0, -0.7, -1e-9, 0.0, 0.3, 0.75, 0.99])
def test_agm_and_quadrature_agree(m):
    assert elliptic_K(m) == pytest.approx(elliptic_K_quadrature(m), rel=1e-12)


@pytest.mark.parametrize("m", [1.0, 1.5])
def test_elliptic_K_domain(m):
    with pytest.raises(ValueError):
        elliptic_K(m)
    with pytest.raises(ValueError):
        nome(m)


@pytest.mark.parametrize("m, q", sorted(Q_TABLE.items()))
def test_nome_frozen(m, q):
    assert nome(m) == pytest.approx(q, rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-20.0, max_value=0.98).filter(lambda m: abs(m) > 1e-6))
def test_nome_inverts_theta_product(m):
    # m(q) from the theta-product identity must return the input parameter
    assert float(parameter_from_nome(nome(m))) == pytest.approx(m, rel=1e-11)


def test_negative_parameter_transformation():
    m = -0.6
    ep = elliptic_params(m)
    mu = m / (m - 1)
    assert ep.mu == pytest.approx(mu)
    assert ep.K == pytest.approx(elliptic_K(mu) / math.sqrt(1 - m), rel=1e-15)
    assert abs(ep.q) == pytest.approx(math.exp(-math.pi * ep.K_comp / ep.K), rel=1e-13)
    assert ep.q < 0


@pytest.mark.parametrize("g", sorted(L_TABLE))
def test_quartic_params_match_quadrature(g):
    p = quartic_params(g)
    assert p.L == pytest.approx(L_TABLE[g], rel=1e-14)
    assert p.Lambda == pytest.approx(LAMBDA_TABLE[g], rel=1e-14)
    assert p.m < 0 and p.q < 0
    assert p.omega_c == pytest.approx(math.pi / (2 * p.L))


@pytest.mark.parametrize("g", [1e-8, 0.3, 5.0, 100.0])
def test_quartic_params_live_oracle(g):
    p = quartic_params(g)
    assert p.L == pytest.approx(float(mpmath.re(quartic_quarter_period(g))), rel=1e-12)
    assert p.Lambda == pytest.approx(float(quartic_turning_point(g)), rel=1e-13)


def test_quartic_small_g_limit():
    assert quartic_params(1e-6).L == pytest.approx(math.pi / (2 * math.sqrt(2)), abs=1e-6)
    # no cancellation: m ~ -g/2 at tiny g
    assert quartic_params(1e-12).m == pytest.approx(-0.5e-12, rel=1e-9)


@pytest.mark.parametrize("g", [0.0, -1.0])
def test_quartic_params_rejects_nonpositive(g):
    with pytest.raises(ValueError):
        quartic_params(g)
