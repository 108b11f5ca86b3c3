import io
import math

import numpy as np
import pytest

from cbplab.bodies import dilate, make_body
from cbplab.errors import DomainError, ValidationError
from cbplab.fractional import (
    FracQuery,
    frac_action,
    frac_laplace_section,
    ft_prefactor,
    ft_weighted_norm,
    parseval_residual,
    posdef_scan,
    radial_power_ft,
    subtraction_order,
    window_of,
    write_scan_csv,
)
from cbplab.numerics import QuadratureConfig
from cbplab.sections import PoleProfile, canonical_direction, section_volume

CFG = QuadratureConfig()
BALL = make_body({"family": "euclidean_ball", "n": 3})
CE = make_body({"family": "counterexample", "n": 3, "alpha": -0.5, "N": 1e4})
POLE = canonical_direction(3, math.pi / 2)


def test_query_validation():
    with pytest.raises(DomainError):
        FracQuery(3, 4.0, 0.0)
    with pytest.raises(DomainError):
        FracQuery(3, -2.0, 0.0)
    with pytest.raises(DomainError):
        FracQuery(3, 1.0, 3.0)  # 2n-q-p-2 = 0
    assert FracQuery(3, 1.0, 0.5).gamma == pytest.approx(2.5)


def test_windows_and_subtraction_order():
    assert window_of(-1.0) != window_of(1.0) != window_of(3.0)
    assert subtraction_order(-1.0) == -1
    assert subtraction_order(1.0) == 0
    assert subtraction_order(3.0) == 1
    assert subtraction_order(2.0) == 1
    assert subtraction_order(1.8) == 1  # near the edge one extra term is removed


def test_radial_ft_known_case():
    # |x|^{-(2n-2)} in R^6 transforms to 2^2 pi^3 Gamma(1)/Gamma(2) |xi|^{-2}
    assert radial_power_ft(3, 4.0) == pytest.approx(4 * math.pi**3)


def test_ft_prefactor_sign_and_value():
    c = ft_prefactor(3, 0.0, 1.0)
    assert c == pytest.approx(4 * math.gamma(1.5) * 3.0)


@pytest.mark.parametrize("q0", [0.0, 2.0])
def test_frac_action_continuity_is_linear_across_windows(q0):
    pr = PoleProfile(CE, 0.0, CFG)
    mid = frac_action(pr, q0, CFG)
    d1 = [frac_action(pr, q0 + s * 1e-4, CFG) - mid for s in (-1, 1)]
    d2 = [frac_action(pr, q0 + s * 1e-3, CFG) - mid for s in (-1, 1)]
    for a, b in zip(d1, d2):
        assert b / a == pytest.approx(10.0, rel=2e-2)


def test_sphere_route_matches_a_route_on_counterexample():
    for p, q in ((0.0, 1.0), (0.5, -0.5), (-0.5, 2.5)):
        a = ft_weighted_norm(CE, POLE, p, q, CFG, route="a_route")
        s = ft_weighted_norm(CE, POLE, p, q, CFG, route="sphere_route")
        assert s.value == pytest.approx(a.value, rel=1e-7)


def test_ft_route_errors():
    with pytest.raises(DomainError):
        ft_weighted_norm(CE, POLE, 0.0, 1.0, CFG, route="closed_form")
    with pytest.raises(ValidationError):
        ft_weighted_norm(CE, np.ones(6), 0.0, 1.0, CFG)
    with pytest.raises(ValidationError):
        ft_weighted_norm(CE, POLE, 0.0, 1.0, CFG, route="magic")


def test_frac_laplace_alpha_zero_is_section_volume():
    for psi in (0.2, math.pi / 2):
        xi = canonical_direction(3, psi)
        assert frac_laplace_section(CE, xi, 0.0, CFG).value == pytest.approx(section_volume(CE, xi, CFG).value, rel=1e-6)


def test_frac_laplace_homogeneity_under_dilation():
    a = frac_laplace_section(dilate(0.9, BALL), POLE, 1.0, CFG).value
    b = frac_laplace_section(BALL, POLE, 1.0, CFG).value
    assert a == pytest.approx(0.9**4 * b, rel=1e-10)


def test_posdef_scan_structure_and_csv():
    rep = posdef_scan(BALL, 0.0, 1.0, [0.0, 0.5, 1.0], CFG, threads=2)
    assert rep["routes"] == ["closed_form"] * 3
    assert rep["min"] > 0
    buf = io.StringIO()
    write_scan_csv(rep, buf)
    assert buf.getvalue().splitlines()[0].startswith("psi")


def test_parseval_needs_biaxial_bodies():
    lp = make_body({"family": "complex_lp", "n": 3, "r": 4})
    with pytest.raises(DomainError):
        parseval_residual(lp, BALL, 2.0, CFG)
    with pytest.raises(DomainError):
        parseval_residual(BALL, BALL, 6.0, CFG)
