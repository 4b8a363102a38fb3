import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from krylov_mqm.spectral import (GROUND, InnerProduct, PrecisionError, SpectralLine,
                                 SpectralMeasure, correlator, kms, moments, normalize, read_table,
                                 required_precision, thermalize, write_table)

from oracles import exact_moments

line_sets = st.lists(
    st.tuples(st.floats(min_value=0.05, max_value=20.0), st.floats(min_value=1e-6, max_value=10.0)),
    min_size=1, max_size=8, unique_by=lambda p: round(p[0], 6))


def measure_of(pairs, ip=GROUND):
    f, w = zip(*pairs)
    return normalize(SpectralMeasure.from_pairs(f, w, ip))


def test_line_rejects_negative_weight():
    with pytest.raises(ValueError):
        SpectralLine(1.0, -0.1)


def test_inner_product_validation():
    assert kms(2.0).is_kms and not GROUND.is_kms
    with pytest.raises(ValueError):
        InnerProduct("kms", None)
    with pytest.raises(ValueError):
        kms(-1.0)


def test_from_pairs_sorts_and_merges():
    m = SpectralMeasure.from_pairs([2.0, 1.0, 1.0 + 1e-15], [1.0, 0.5, 0.25])
    assert list(m.frequencies) == [1.0, 2.0]
    assert m.weights[0] == pytest.approx(0.75)


def test_normalize_sums_to_one_exactly():
    m = normalize(SpectralMeasure.from_pairs([1, 2, 3], [0.1, 0.2, 0.3]))
    assert math.fsum(m.weights) == 1.0
    assert m.metadata["normalization"] == pytest.approx(0.6)


def test_normalize_degenerate():
    with pytest.raises(ValueError, match="degenerate"):
        normalize(SpectralMeasure.from_pairs([1.0], [0.0]))


def test_normalized_flag_is_checked():
    with pytest.raises(ValueError):
        SpectralMeasure((SpectralLine(1.0, 0.5),), GROUND, True)


def test_correlator_at_zero_and_single_line():
    m = normalize(SpectralMeasure.from_pairs([2.0], [3.0]))
    assert correlator(m, 0.0) == pytest.approx(1.0)
    t = np.linspace(0, 5, 11)
    assert np.allclose(correlator(m, t), np.exp(-2j * t))


def test_correlator_needs_normalized():
    with pytest.raises(ValueError):
        correlator(SpectralMeasure.from_pairs([1.0], [2.0]), 0.0)


def test_moments_exact_rational_case():
    m = normalize(SpectralMeasure.from_pairs([1, 2, 3], [1, 2, 1]))
    mom = moments(m, 6, 256)
    ref = exact_moments([1, 2, 3], [1, 2, 1], 6)
    assert mom[0] == 1
    for n in range(7):
        assert float(mom[n]) == pytest.approx(float(ref[n]), rel=1e-15)
    assert ref[1] == Fraction(-2)   # a_0 = M_1 is negative for positive frequencies


def test_moments_precision_guard():
    m = normalize(SpectralMeasure.from_pairs([50.0], [1.0]))
    need = required_precision(m, 40)
    assert need > 256
    with pytest.raises(PrecisionError) as err:
        moments(m, 40, need - 1)
    assert err.value.required_bits == need


def test_moments_independent_of_caller_precision():
    import mpmath
    m = normalize(SpectralMeasure.from_pairs([1.0, 3.0], [0.3, 0.7]))
    before = mpmath.mp.prec
    mom = moments(m, 10, 300)
    assert mpmath.mp.prec == before
    assert mom.precision_bits == 300


def test_thermalize_single_oscillator():
    th = thermalize(normalize(SpectralMeasure.from_pairs([1.0], [1.0])), 2.0)
    assert th.inner_product == kms(2.0)
    assert list(th.frequencies) == [-1.0, 1.0]
    assert th.weights == pytest.approx([0.5, 0.5])


def test_thermalize_weights_follow_sinh():
    gs = normalize(SpectralMeasure.from_pairs([1.0, 2.0], [1.0, 1.0]))
    th = thermalize(gs, 1.0)
    w1, w2 = th.weights[2], th.weights[3]
    assert w2 / w1 == pytest.approx(math.sinh(0.5) / math.sinh(1.0), rel=1e-14)


def test_thermalize_drops_underflowed_lines():
    gs = normalize(SpectralMeasure.from_pairs([1.0, 2000.0], [1.0, 1.0]))
    th = thermalize(gs, 1.0)
    assert list(th.frequencies) == [-1.0, 1.0]
    assert any("underflow" in w for w in th.metadata["warnings"])


def test_thermalize_rejects_nonpositive_frequency():
    with pytest.raises(ValueError):
        thermalize(normalize(SpectralMeasure.from_pairs([0.0, 1.0], [1, 1])), 1.0)


def test_kms_measure_must_be_symmetric():
    with pytest.raises(ValueError):
        SpectralMeasure.from_pairs([-1.0, 2.0], [1, 1], kms(1.0))


def test_table_round_trip(tmp_path):
    th = thermalize(normalize(SpectralMeasure.from_pairs([0.7, 1.9], [0.3, 0.2])), 3.0)
    p = tmp_path / "m.txt"
    write_table(th, p)
    back = read_table(p)
    assert back == th


@settings(max_examples=40, deadline=None)
@given(line_sets, st.floats(min_value=0.1, max_value=10.0))
def test_moment_scaling_covariance(pairs, lam):
    # omega -> lam omega scales M_n by lam^n
    m = measure_of(pairs)
    ms = measure_of([(lam * f, w) for f, w in pairs])
    a = moments(m, 6, 400)
    b = moments(ms, 6, 400)
    for n in range(7):
        assert float(b[n]) == pytest.approx(lam ** n * float(a[n]), rel=1e-12, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(line_sets, st.floats(min_value=0.05, max_value=20.0))
def test_kms_correlator_real_and_odd_moments_zero(pairs, beta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        th = thermalize(measure_of(pairs), beta)
    t = np.linspace(-3, 3, 13)
    c = correlator(th, t)
    assert np.max(np.abs(c.imag)) < 1e-14
    assert np.allclose(c.real, c.real[::-1], atol=1e-14)
    assert moments(th, 9, 600).odd_vanish()
