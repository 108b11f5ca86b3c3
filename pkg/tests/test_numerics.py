import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbplab.errors import BracketError, DomainError, PrecisionError, ValidationError
from cbplab.numerics import (
    QuadratureConfig,
    ball_volume,
    find_root,
    gamma_fn,
    gauss_legendre,
    integrate_adaptive,
    regularized_moment,
    rgamma,
    sphere_surface,
    taylor_even_coeffs,
)


def test_gamma_known_values():
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-15)
    assert gamma_fn(5) == pytest.approx(24.0, rel=1e-15)
    assert gamma_fn(-0.5) == pytest.approx(-2 * math.sqrt(math.pi), rel=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0, -2.0, -3.0 + 1e-11])
def test_gamma_poles_raise(x):
    with pytest.raises(DomainError):
        gamma_fn(x)


def test_rgamma_vanishes_at_poles():
    assert rgamma(0.0) == 0.0 and rgamma(-2.0) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-6.5, max_value=20.0).filter(lambda x: abs(x - round(x)) > 1e-3 or x > 0.5))
def test_gamma_recurrence(x):
    assert gamma_fn(x + 1) == pytest.approx(x * gamma_fn(x), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.01, max_value=0.99))
def test_gamma_reflection(x):
    assert gamma_fn(x) * gamma_fn(1 - x) == pytest.approx(math.pi / math.sin(math.pi * x), rel=1e-12)


def test_sphere_and_ball():
    assert sphere_surface(2) == pytest.approx(2 * math.pi)
    assert sphere_surface(4) == pytest.approx(2 * math.pi**2)
    assert ball_volume(6) == pytest.approx(math.pi**3 / 6)
    with pytest.raises(DomainError):
        sphere_surface(0)


def test_integrate_endpoint_singularity():
    cfg = QuadratureConfig()
    v, e = integrate_adaptive(lambda x: x**-0.5, 0.0, 1.0, cfg, singularity=(-0.5, None))
    assert v == pytest.approx(2.0, rel=1e-12)
    v, _ = integrate_adaptive(lambda x: (1 - x) ** -0.5, 0.0, 1.0, cfg, singularity=(None, -0.5))
    assert v == pytest.approx(2.0, rel=1e-9)
    v, _ = integrate_adaptive(lambda x: x**-0.9, 0.0, 1.0, cfg, singularity=(-0.9, None))
    assert v == pytest.approx(10.0, rel=1e-9)
    v, _ = integrate_adaptive(lambda x: math.exp(-x), 0.0, math.inf, cfg)
    assert v == pytest.approx(1.0, rel=1e-12)


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(0.0, 2.0, 8)
    assert np.sum(w * x**15) == pytest.approx(2.0**16 / 16, rel=1e-13)


def test_find_root_and_bracket_error():
    assert find_root(lambda t: t * t - 2, 0.0, 2.0) == pytest.approx(math.sqrt(2), abs=1e-14)
    with pytest.raises(BracketError):
        find_root(lambda t: t * t + 1, 0.0, 2.0)


def test_taylor_even_coeffs_cos():
    c, e = taylor_even_coeffs(lambda t: math.cos(t), 3, 0.05, return_error=True)
    assert c[0] == 1.0
    assert c[1] == pytest.approx(-0.5, rel=1e-10)
    assert c[2] == pytest.approx(1 / 24, rel=1e-6)
    assert all(x >= 0 for x in e)


def test_taylor_even_coeffs_noise_guard():
    with pytest.raises(PrecisionError):
        taylor_even_coeffs(lambda t: 1 - t * t, 2, 1e-4, sigma=1e-3)


def test_regularized_moment_gaussian():
    # F = exp(-t^2) gives 1/2 for q < 0, hence 1/2 for every q by continuation
    cfg = QuadratureConfig()
    for q, J in ((-1.0, -1), (1.0, 0), (3.0, 1)):
        T = 1.0
        coeffs = [1.0, -1.0]

        def res(t, q=q, J=J):
            s = t * t
            if J < 0:
                return t ** (-q - 1) * math.exp(-s)
            if J == 0:
                return t ** (-q - 1) * math.expm1(-s)
            # (e^-s - 1 + s) / s^2 without cancellation
            phi = 0.5 - s / 6 + s * s / 24 if s < 1e-3 else (math.expm1(-s) + s) / (s * s)
            return t ** (3 - q) * phi

        ri = integrate_adaptive(res, 0.0, T, cfg)[0]
        tail = integrate_adaptive(lambda t: t ** (-q - 1) * math.exp(-t * t), T, math.inf, cfg)[0]
        assert regularized_moment(q, T, coeffs, J, ri + tail) == pytest.approx(0.5, rel=1e-9)
    assert regularized_moment(2.0, 1.0, [1.0, -1.0], 1) == pytest.approx(0.5)


def test_config_env_override(monkeypatch):
    monkeypatch.setenv("CBPLAB_REL_TOL", "1e-7")
    monkeypatch.setenv("CBPLAB_SEED", "42")
    cfg = QuadratureConfig.from_env()
    assert cfg.rel_tol == 1e-7 and cfg.rng_seed == 42
    assert QuadratureConfig.from_env(rng_seed=3).rng_seed == 3
    with pytest.raises(ValidationError):
        QuadratureConfig(rel_tol=-1)
