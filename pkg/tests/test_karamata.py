import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from largesol.errors import DomainError, InvalidFunctionError, InvalidWeightError
from largesol.karamata import (
    KWeight,
    RVFunction,
    aitken,
    aitken_limit,
    ell_limits,
    K_primitive,
    karamata_limit,
    rv_index_estimate,
)


def test_aitken_exact_on_geometric_sequence():
    s = [1.0 + 0.5**n for n in range(6)]
    assert aitken(s)[-1] == pytest.approx(1.0, abs=1e-14)


def test_aitken_limit_of_power_series():
    est = aitken_limit(lambda t: 2.0 + t + t * t, 0.5)
    assert est.converged
    assert est.value == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("q", [0.0, 1.0, 2.5, 4.0])
def test_rv_index_of_powers(q):
    res = rv_index_estimate(RVFunction(lambda u: u**q), 1e8)
    assert res.is_rv
    assert res.index == pytest.approx(q, abs=1e-6)


def test_rv_index_with_log_factor_is_two():
    res = rv_index_estimate(RVFunction(lambda u: u * u * math.log(u)), 1e12)
    assert res.is_rv
    assert res.index == pytest.approx(2.0, abs=1e-3)


def test_exponential_is_not_regularly_varying():
    assert not rv_index_estimate(RVFunction(math.exp), 1e6).is_rv


def test_rv_function_rejects_nonpositive_values():
    with pytest.raises(InvalidFunctionError):
        RVFunction(lambda u: -1.0).log(10.0)


@pytest.mark.parametrize("q, j", [(2.0, 0.0), (1.5, 1.0), (0.0, 2.0)])
def test_karamata_limit_for_powers(q, j):
    # u^{j+1} R(u) / int x^j R -> q + j + 1 when the integral diverges
    est = karamata_limit(RVFunction(lambda u: u**q), j, 1.0, 1e8)
    assert est.value == pytest.approx(q + j + 1.0, rel=1e-4)


def test_karamata_limit_with_slowly_varying_factor():
    R = RVFunction(lambda u: u * u * math.log(u))
    assert karamata_limit(R, 1.0, 2.0, 1e12).value == pytest.approx(4.0, rel=1e-3)


@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0, 2.0, 5.0])
def test_ell1_of_power_weights(gamma):
    # K/k = t/(gamma+1) exactly
    l0, l1 = ell_limits(KWeight.power(gamma))
    assert abs(l0) < 1e-6
    assert l1 == pytest.approx(1.0 / (gamma + 1.0), abs=1e-6)


def test_ell1_of_exp_flat_weight():
    l0, l1 = ell_limits(KWeight.exp_flat())
    assert abs(l0) < 1e-6
    assert abs(l1) < 1e-3


def test_ell1_of_custom_weight():
    # k = t^2 (1 + t): K/k ~ t/3, so ell1 = 1/3
    k = KWeight.custom(lambda t: np.asarray(t) ** 2 * (1 + np.asarray(t)),
                       lambda t: 2 * np.asarray(t) + 3 * np.asarray(t) ** 2)
    assert ell_limits(k)[1] == pytest.approx(1.0 / 3.0, abs=1e-6)


def _exp_primitive(t):
    # s = 1/w turns int_0^t exp(-1/s) ds into t * E_2(1/t)
    mpmath.mp.dps = 30
    return t * mpmath.expint(2, 1 / mpmath.mpf(t))


def test_exp_flat_primitive_matches_mpmath():
    k = KWeight.exp_flat()
    for t in (0.05, 0.2, 0.7):
        assert K_primitive(k, t) == pytest.approx(float(_exp_primitive(t)), rel=1e-11)


def test_exp_flat_log_primitive_survives_underflow():
    k = KWeight.exp_flat()
    t = 1e-3
    oracle = float(mpmath.log(_exp_primitive(t)))
    assert k.log_primitive(t) == pytest.approx(oracle, rel=1e-12)


def test_weight_validation():
    with pytest.raises(DomainError):
        KWeight.power(-1.0)
    with pytest.raises(InvalidWeightError):
        KWeight.custom(lambda t: 1.0 - np.asarray(t), lambda t: -np.ones_like(np.asarray(t)))
    with pytest.raises(DomainError):
        KWeight.constant().primitive(1.5)


@settings(max_examples=40, deadline=None)
@given(gamma=st.floats(0.0, 6.0), t=st.floats(1e-4, 0.9))
def test_power_primitive_matches_quadrature(gamma, t):
    oracle = float(mpmath.quad(lambda s: s**gamma, [0, t]))
    assert KWeight.power(gamma).primitive(t) == pytest.approx(oracle, rel=1e-9)
