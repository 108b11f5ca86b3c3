import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbplab.bodies import dilate, make_body
from cbplab.errors import DomainError, ValidationError
from cbplab.numerics import QuadratureConfig
from cbplab.sections import (
    PoleProfile,
    a_function_mc,
    a_function_pole,
    a_function_pole_quad,
    canonical_direction,
    hyperplane_frame,
    section_profile,
    section_volume,
)

CFG = QuadratureConfig()
BALL = make_body({"family": "euclidean_ball", "n": 3})
CE = make_body({"family": "counterexample", "n": 3, "alpha": -0.5, "N": 100})
LP4 = make_body({"family": "complex_lp", "n": 3, "r": 4})


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=2, max_value=5))
def test_frame_is_orthonormal_complex_hyperplane(seed, n):
    xi = np.random.default_rng(seed).standard_normal(2 * n)
    xi /= np.linalg.norm(xi)
    fr = hyperplane_frame(xi)
    M = np.vstack([fr.xi, fr.xi_perp, fr.basis])
    assert np.allclose(M @ M.T, np.eye(2 * n), atol=1e-12)
    jxi = np.empty_like(xi)
    jxi[0::2], jxi[1::2] = -xi[1::2], xi[0::2]
    assert np.allclose(fr.xi_perp, jxi, atol=1e-12)


def test_frame_rejects_bad_vectors():
    with pytest.raises(ValidationError):
        hyperplane_frame(np.ones(5) / math.sqrt(5))
    with pytest.raises(ValidationError):
        hyperplane_frame(np.ones(6))


def test_ball_profile_closed_form():
    # unit ball, p=0: A(t) = |S^3| (1-t^2)^2 / 4
    for t in (0.0, 0.3, 0.8, 1.2):
        expect = 2 * math.pi**2 * max(0.0, 1 - t * t) ** 2 / 4
        assert a_function_pole(BALL, 0.0, t) == pytest.approx(expect, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("p", [-0.5, 0.0, 0.7, 1.5])
def test_pole_profile_matches_quadrature(p):
    for t in (0.0, 0.05, 0.2, CE.support * 0.99):
        assert a_function_pole(CE, p, t) == pytest.approx(a_function_pole_quad(CE, p, t), rel=1e-10)


def test_pole_profile_residual_is_cancellation_free():
    pr = PoleProfile(CE, -0.5, CFG)
    c = pr.coeffs(1)
    t = np.array([1e-4, 1e-3, 1e-2])
    r = pr.residual(t, 1, c)
    naive = pr.value(t) - c[0] - c[1] * t * t
    assert np.allclose(r[1:], naive[1:], rtol=1e-4)
    # residual ~ a2 t^4 near 0 for this profile (its first non-analytic power is larger)
    assert abs(r[0] / t[0] ** 4) == pytest.approx(abs(r[1] / t[1] ** 4), rel=1e-2)


def test_exact_origin_coefficients_vs_richardson():
    pr = PoleProfile(CE, -0.5, CFG)
    closed = pr.coeffs(1)
    taylor = pr.coeffs(1, source="taylor")
    assert taylor[0] == closed[0]
    assert taylor[1] == pytest.approx(closed[1], rel=1e-6)


def test_weight_exponent_domain():
    with pytest.raises(DomainError):
        PoleProfile(CE, 4.0, CFG)


def test_mc_slice_matches_closed_form_on_ball():
    fr = hyperplane_frame(canonical_direction(3, 0.4))
    for t in (0.0, 0.5):
        est = a_function_mc(BALL, fr, 0.0, t, QuadratureConfig(mc_samples=20000))
        expect = 2 * math.pi**2 * (1 - t * t) ** 2 / 4
        assert abs(est.value - expect) <= 5 * est.err + 1e-12


def test_section_volume_direct_vs_ft_on_profile_body():
    for psi in (0.0, 0.6, 1.2):
        xi = canonical_direction(3, psi)
        d = section_volume(CE, xi, CFG, "direct")
        f = section_volume(CE, xi, CFG, "ft")
        assert d.value == pytest.approx(f.value, rel=1e-6)


def test_section_volume_complex_lp_routes_agree():
    xi = canonical_direction(3, 0.5)
    d = section_volume(LP4, xi, CFG, "direct")
    f = section_volume(LP4, xi, CFG, "ft")
    assert abs(d.value - f.value) <= 5 * (d.err + f.err) + 1e-3 * f.value


def test_dilated_section_scales():
    xi = canonical_direction(3, 0.3)
    a = section_volume(dilate(1.3, CE), xi, CFG).value
    b = section_volume(CE, xi, CFG).value
    assert a == pytest.approx(1.3**4 * b, rel=1e-9)


def test_lp_axis_profile_matches_mc():
    xi = canonical_direction(3, math.pi / 2)
    pr = section_profile(LP4, xi, 0.0, CFG)
    fr = hyperplane_frame(xi)
    for t in (0.0, 0.4):
        est = a_function_mc(LP4, fr, 0.0, t, QuadratureConfig(mc_samples=40000))
        assert abs(float(pr.value(t)) - est.value) <= 5 * (est.err + pr.sigma(t)) + 1e-3 * est.value


def test_section_profile_unsupported_direction():
    with pytest.raises(DomainError):
        section_profile(CE, canonical_direction(3, 0.3), 0.0, CFG)


def test_profile_dump(tmp_path):
    p = tmp_path / "a.txt"
    PoleProfile(BALL, 0.0, CFG).dump(p, {"body": BALL.hash}, points=11)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# body") and len([x for x in lines if not x.startswith("#")]) == 11
