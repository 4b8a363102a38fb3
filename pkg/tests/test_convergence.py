import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from krylov_mqm.convergence import (ConvergenceReport, NoPeakError, convergence_report,
                                    first_peak, ratio_radius)
from krylov_mqm.evolution import evolve
from krylov_mqm.lanczos import lanczos_coefficients
from krylov_mqm.models import MQMQuarticSpec, mqm_quartic_spectrum, quartic_mode_amplitudes
from krylov_mqm.spectral import SpectralMeasure, normalize
from krylov_mqm.special import quartic_params

# Extrapolated t* from the first build (g = 1); it equals the -2 ln|q| value to ~1e-10.
TSTAR_G1 = 4.797350948061918


def test_geometric_toy_estimates_closed_form():
    q, L = 0.3, 1.0
    c = [q ** n for n in range(1, 41)]
    r = ratio_radius(c, L)
    n = np.arange(1, 40)
    ref = (2 * L / math.pi) * np.log((n / (n + 1)) * q ** -2)
    assert np.allclose(r.tstar_estimates, ref, rtol=1e-13)
    assert r.tstar == pytest.approx((2 * L / math.pi) * (-2 * math.log(q)), rel=1e-6)
    assert r.t_half == r.tstar / 2
    assert r.converged and not r.flags


def test_constant_coefficients_flagged():
    r = ratio_radius([1.0] * 30, 1.0)
    assert not r.converged
    assert r.tstar_estimates[-1] < 0
    assert abs(r.tstar) < 1e-4


def test_too_few_coefficients():
    with pytest.raises(ArithmeticError, match="precision"):
        ratio_radius([0.5 ** n for n in range(1, 8)], 1.0)
    # underflow truncates the usable sequence
    with pytest.raises(ArithmeticError):
        ratio_radius([1e-100 ** n for n in range(1, 20)], 1.0)


def test_box_L_validation():
    with pytest.raises(ValueError):
        ratio_radius([0.5 ** n for n in range(1, 20)], 0.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.1, max_value=10.0))
def test_tstar_linear_in_L(L):
    c = [0.2 ** n * n for n in range(1, 40)]
    assert ratio_radius(c, L).tstar == pytest.approx(L * ratio_radius(c, 1.0).tstar, rel=1e-10)


def test_quartic_ratio_test_g1():
    p = quartic_params(1.0)
    r = ratio_radius(quartic_mode_amplitudes(1.0, 64), p.L, p.q)
    est = np.array(r.tstar_estimates)
    # monotone approach from below
    assert np.all(np.diff(est) > 0)
    assert r.tstar == pytest.approx(TSTAR_G1, rel=1e-9)
    assert r.tstar == pytest.approx(r.tstar_asymptotic, rel=1e-8)


def test_asymptote_mismatch_flagged():
    p = quartic_params(1.0)
    r = ratio_radius(quartic_mode_amplitudes(1.0, 40), p.L, p.q * 0.5)
    assert any("differs" in f for f in r.flags)


def test_first_peak_sin_squared():
    w = 1.7
    t = np.linspace(0, 2 * math.pi / w, 777)
    assert first_peak(t, np.sin(w * t) ** 2) == pytest.approx(math.pi / (2 * w), rel=1e-5)


def test_first_peak_is_first_not_global():
    t = np.linspace(0, 10, 2001)
    c = np.sin(t) ** 2 * (1 + t)
    assert first_peak(t, c) < 2.0


def test_first_peak_errors():
    t = np.linspace(0, 1, 50)
    with pytest.raises(NoPeakError, match="no peak in range"):
        first_peak(t, np.zeros_like(t))
    with pytest.raises(NoPeakError):
        first_peak(t, t ** 2)
    with pytest.raises(NoPeakError):
        first_peak(t, 1e-15 * np.sin(40 * t))
    with pytest.raises(ValueError):
        first_peak(t, t[:-1])


@pytest.fixture(scope="module")
def reports():
    return {g: convergence_report(MQMQuarticSpec(g)) for g in (1.0, 2.0, 10.0)}


def test_report_fields(reports):
    for g, r in reports.items():
        L = quartic_params(g).L
        assert r.tstar > 0 and r.t_half == r.tstar / 2
        assert r.t_half < 4 * L
        assert r.ratio_peak == pytest.approx(r.t_first_peak / r.t_half)
        # ground-state C_K is symmetric about half its period, so the first peak sits at 2L
        assert r.t_first_peak == pytest.approx(2 * L, rel=1e-6)


def test_report_round_trip(reports):
    r = reports[2.0]
    assert ConvergenceReport.from_text(r.to_text()) == r
    assert ConvergenceReport.from_dict(r.to_dict()) == r
    assert set(r.row()) >= {"tstar", "t_first_peak", "ratio_peak"}


def test_ratio_peak_scale_invariant():
    # omega -> lam omega (L -> L/lam) leaves t_peak / (t*/2) unchanged
    c = quartic_mode_amplitudes(2.0, 48)
    L = quartic_params(2.0).L
    base = mqm_quartic_spectrum(MQMQuarticSpec(2.0, j_max=48))
    r1 = ratio_radius(c, L)
    e1 = evolve(lanczos_coefficients(base), 4 * L, L / 512)
    ratio1 = first_peak(e1.t_grid, e1.c_k) / r1.t_half
    for lam in (0.5, 3.0):
        scaled = normalize(SpectralMeasure.from_pairs(lam * base.frequencies, base.weights))
        r2 = ratio_radius(c, L / lam)
        assert r2.tstar * lam == pytest.approx(r1.tstar, rel=1e-12)
        e2 = evolve(lanczos_coefficients(scaled), 4 * L / lam, L / lam / 512)
        assert first_peak(e2.t_grid, e2.c_k) / r2.t_half == pytest.approx(ratio1, rel=1e-9)
