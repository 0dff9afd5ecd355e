import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gptb.errors import ConfigurationError, DomainError, InstanceTooLargeError
from gptb.gaussian_core import mc_sup_tail
from gptb.pickands import (
    E_OVER_2,
    largest_feasible_u,
    ln_gamma,
    pickands_covariance,
    pickands_grid_matrix,
    pickands_grid_size,
    pickands_lower_surrogate,
    pickands_tail_normaliser,
    reference_bounds,
    shao_covariance,
)

H_KNOWN = {1.0: 1.0, 2.0: 1.0 / math.sqrt(math.pi)}


def _shao_mp(alpha, t):
    a, t = mpmath.mpf(alpha), mpmath.mpf(t)
    return float((mpmath.exp(a * t / 2) + mpmath.exp(-a * t / 2) - (mpmath.exp(t / 2) - mpmath.exp(-t / 2)) ** a) / 2)


# -- covariance -----------------------------------------------------------------

def test_shao_examples():
    assert shao_covariance(0.7, 0.0) == 1.0
    assert abs(shao_covariance(1.0, 0.01) - 0.995) <= 1e-3
    assert shao_covariance(0.5, 0.1) > shao_covariance(0.5, 0.2)


def test_shao_against_mpmath():
    mpmath.mp.dps = 40
    for alpha in (0.1, 0.5, 1.0, 1.5, 1.9):
        for t in (1e-6, 1e-3, 0.1, 0.5, 1.0, 3.0):
            assert shao_covariance(alpha, t) == pytest.approx(_shao_mp(alpha, t), abs=1e-14)


def test_shao_local_behaviour():
    for alpha in (0.3, 1.0, 1.7):
        t = 1e-4
        # 1 - r(t) = t^alpha / 2 - alpha^2 t^2 / 8 + higher order
        want = 0.5 - alpha**2 * t ** (2 - alpha) / 8
        assert (1 - shao_covariance(alpha, t)) / t**alpha == pytest.approx(want, rel=1e-5)


def test_shao_alpha_one_is_ou():
    t = np.linspace(0, 5, 51)
    np.testing.assert_allclose(shao_covariance(1.0, t), np.exp(-t / 2), atol=1e-15)


@pytest.mark.parametrize("alpha", [0.0, 2.0, -1.0, 2.5])
def test_shao_domain(alpha):
    with pytest.raises(DomainError):
        shao_covariance(alpha, 0.5)


def test_pickands_kernel_alpha_two():
    assert pickands_covariance(2.0, 0.5) == pytest.approx(math.exp(-0.125))


@given(st.floats(0.05, 1.95), st.floats(0.0, 4.0), st.floats(0.001, 1.0))
def test_shao_strictly_decreasing(alpha, t, dt):
    assert shao_covariance(alpha, t + dt) < shao_covariance(alpha, t)


# -- grid -------------------------------------------------------------------------

def test_grid_examples():
    m = pickands_grid_matrix(1.0, 2)
    assert m.entries[0, 1] == shao_covariance(1.0, 0.5)
    assert np.all(np.diag(pickands_grid_matrix(0.8, 64).entries) == 1.0)


def test_grid_size_and_cap(monkeypatch):
    assert pickands_grid_size(1.0, 6.0, E_OVER_2) == math.floor(E_OVER_2 * 36 / 2)
    monkeypatch.setenv("GPTB_MATRIX_CAP", "100")
    with pytest.raises(InstanceTooLargeError):
        pickands_grid_size(0.3, 6.0, E_OVER_2)


# -- surrogate ---------------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [1.0, 2.0])
@pytest.mark.parametrize("u", [4.0, 5.0, 6.0])
def test_surrogate_below_known_constants(alpha, u):
    ev = pickands_lower_surrogate(alpha, u, E_OVER_2, 1.0, 1.0 if alpha == 1.0 else None)
    assert 0.0 <= ev.finite_u_value <= H_KNOWN[alpha] + 0.05


def test_surrogate_delta_zero():
    assert pickands_lower_surrogate(0.4, 4.0, delta=0.0).finite_u_value == 0.0


def test_surrogate_formula_consistency():
    ev = pickands_lower_surrogate(0.4, 4.0)
    assert ev.finite_u_value > 0
    # finite_u_value = normaliser * stationary bound
    assert ev.finite_u_value == pytest.approx(pickands_tail_normaliser(0.4, 4.0) * ev.stationary_bound,
                                              rel=1e-10)
    assert 0.0 <= ev.tail_product <= 1.0


@pytest.mark.parametrize("alpha,u", [(0.3, 3.0), (0.5, 3.0), (0.5, 4.0), (1.0, 3.0)])
def test_surrogate_sound_against_mc(alpha, u):
    ev = pickands_lower_surrogate(alpha, u)
    if ev.M > 256:
        pytest.skip("grid too large for the Monte-Carlo check")
    est = mc_sup_tail(pickands_grid_matrix(alpha, ev.M), u, 200_000, 5)
    assert ev.stationary_bound <= est.p_hat + 4 * est.std_err


def test_corollary_ratio_band():
    for alpha in (0.2, 0.3, 0.4, 0.5):
        u = largest_feasible_u(alpha)
        ev = pickands_lower_surrogate(alpha, u)
        ratio = ev.finite_u_value / ev.references["corollary1_shape"]
        assert 0.0 < ratio < math.inf


def test_b_range():
    with pytest.raises(ConfigurationError):
        pickands_lower_surrogate(0.5, 4.0, b=0.5)


# -- reference bounds and log gamma -----------------------------------------------------------

def test_reference_examples():
    assert reference_bounds(1.0)["conjecture"] == pytest.approx(1.0, abs=1e-15)
    assert reference_bounds(2.0)["conjecture"] == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)
    assert reference_bounds(0.5)["dmr"] == pytest.approx(0.5 / 128, rel=1e-14)
    assert reference_bounds(1.0)["shao_lower"] is None


def test_shao_lower_below_conjecture():
    for alpha in np.linspace(0.05, 0.95, 19):
        ref = reference_bounds(alpha)
        assert 0 < ref["shao_lower"] <= ref["conjecture"] <= ref["shao_upper"]


def test_ln_gamma_examples():
    assert ln_gamma(1.0) == 0.0
    assert ln_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), abs=1e-15)
    assert ln_gamma(10) == pytest.approx(math.log(362880), abs=1e-12)
    for n in range(1, 21):
        assert abs(ln_gamma(n) - math.log(math.factorial(n - 1))) <= 1e-12
    with pytest.raises(DomainError):
        ln_gamma(0.0)


def test_ln_gamma_against_mpmath():
    for x in (1e-3, 0.1, 0.7, 3.3, 50.0, 1e3):
        assert abs(ln_gamma(x) - float(mpmath.loggamma(x))) <= 1e-12 * max(1.0, abs(ln_gamma(x)))
