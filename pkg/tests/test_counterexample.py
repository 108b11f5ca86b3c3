import io
import math

import pytest

from cbplab.bodies import CounterexampleParams
from cbplab.counterexample import (
    CERT_COLUMNS,
    alpha_root,
    beta_root,
    geometric_grid,
    lemma4_certificate,
    origin_closed_forms,
    proof_constants,
    write_certificate_csv,
)
from cbplab.errors import DomainError, ValidationError
from cbplab.numerics import QuadratureConfig

CFG = QuadratureConfig()

# independent high-precision evaluation (mpmath, 30 digits) of the regularized
# pole integral for n=3, alpha=-0.5, N=100
MPMATH_N3_N100 = -75.59675854622349


@pytest.mark.parametrize("N", [1.0, 100.0, 1e6])
def test_roots(N):
    a = alpha_root(N)
    assert 1 - a * a - N * a**4 == pytest.approx(0.0, abs=1e-14)
    q = 2.5
    b = beta_root(N, q)
    assert 0 < b < a
    assert 1 - b * b - N * b**4 == pytest.approx(b ** (q + 1), rel=1e-12)


def test_origin_closed_forms_alpha_zero():
    oc = origin_closed_forms(3, 0.0)
    assert oc["A0"] == pytest.approx(math.pi**2 / 2)
    assert oc["a1_paper"] == pytest.approx(-math.pi**2 / 2)
    assert oc["paper_matches"] == "a1"


def test_origin_closed_forms_factor_diagnostic():
    oc = origin_closed_forms(3, -0.5)
    assert oc["paper_over_a1"] == pytest.approx(0.0222222 / 0.1222222, rel=1e-5)
    assert oc["paper_matches"] == "none"
    with pytest.raises(DomainError):
        origin_closed_forms(3, 2.0)


def test_certificate_against_mpmath_oracle():
    c = lemma4_certificate(CounterexampleParams(3, -0.5, 100.0), CFG)
    assert c.integral_value == pytest.approx(MPMATH_N3_N100, rel=1e-12)
    assert c.status == "negative" and c.negative
    assert c.ft_pole_value < 0
    assert c.A0 == pytest.approx(2 * math.pi**2 / 4.5)


def test_certificate_positive_for_small_N_in_dimension_four():
    c = lemma4_certificate(CounterexampleParams(4, 1.5, 1.0), CFG)
    assert c.status == "nonnegative"


def test_taylor_source_agrees():
    p = CounterexampleParams(3, -0.5, 1e4)
    a = lemma4_certificate(p, CFG)
    b = lemma4_certificate(p, CFG, a1_source="taylor")
    assert abs(a.integral_value - b.integral_value) <= 2 * b.err + 1e-8 * abs(a.integral_value)
    assert b.a1_source == "taylor"


def test_params_domain():
    with pytest.raises(DomainError):
        CounterexampleParams(3, -1.0, 10)
    with pytest.raises(DomainError):
        CounterexampleParams(2, -2.5, 10)


def test_geometric_grid():
    g = geometric_grid(1.0, 1e8, 4)
    assert len(g) == 33 and g[0] == 1.0 and g[-1] == pytest.approx(1e8)
    with pytest.raises(DomainError):
        geometric_grid(0.0, 1.0)


def test_proof_constants_signs():
    c3 = proof_constants(3, -0.5, 1e4)
    c4 = proof_constants(4, 1.5, 1e4)
    assert c3["C"] < 0 and c3["E"] < 0 and c3["F"] < 0
    assert all(c4[k] > 0 for k in ("C", "D", "E", "F"))


def test_certificate_csv_columns():
    c = lemma4_certificate(CounterexampleParams(3, -0.5, 1e4), CFG)
    buf = io.StringIO()
    write_certificate_csv([c], buf)
    head, row = buf.getvalue().splitlines()
    assert head.split(",") == CERT_COLUMNS
    assert row.split(",")[-1] == "true"
