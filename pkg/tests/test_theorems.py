import json
import math

import pytest

from cbplab.bodies import CounterexampleParams, dilate, make_body, volume
from cbplab.errors import DomainError
from cbplab.numerics import QuadratureConfig
from cbplab.theorems import (
    equal_volume_normalize,
    holder_check,
    mixed_spherical_integral,
    theorem_neg_report,
    theorem_pos_check,
)

CFG = QuadratureConfig()
BALL = make_body({"family": "euclidean_ball", "n": 3})
CE = make_body({"family": "counterexample", "n": 3, "alpha": -0.5, "N": 100})
LP4 = make_body({"family": "complex_lp", "n": 3, "r": 4})


def test_mixed_integral_gives_volume():
    est = mixed_spherical_integral(CE, CE, 6, 0, CFG)
    assert est.value / 6 == pytest.approx(volume(CE, CFG).value, rel=1e-10)
    lp = mixed_spherical_integral(LP4, LP4, 6, 0, CFG)
    assert lp.method == "sphere_qmc"
    assert abs(lp.value / 6 - LP4.exact_volume()) <= 5 * lp.err / 6 + 1e-3 * LP4.exact_volume()


def test_holder_equality_for_identical_bodies():
    h = holder_check(CE, CE, CFG)
    assert h["holds"] and h["I_KL"] == pytest.approx(h["bound"], rel=1e-10)


def test_equal_volume_normalize():
    K, lam = equal_volume_normalize(CE, BALL, CFG)
    assert volume(K, CFG).value == pytest.approx(math.pi**3 / 6, rel=1e-10)
    assert lam > 0


def test_pos_check_window_and_override():
    K = dilate(0.9, BALL)
    with pytest.raises(DomainError):
        theorem_pos_check(K, BALL, -1.0, [0.0], CFG)
    r = theorem_pos_check(K, BALL, -1.0, [0.0, 1.0], CFG, override=True)
    assert r.informational and r.notes
    assert r.verdicts["volume"]


def test_pos_check_report_and_grid_csv(tmp_path):
    K = dilate(0.9, BALL)
    r = theorem_pos_check(K, BALL, 1.0, [0.0, 0.8, math.pi / 2], CFG)
    d = json.loads(r.to_json())
    assert d["volume_ratio"] == pytest.approx(0.9**6, rel=1e-12)
    # section functions are (2n-2)-homogeneous in the dilation
    assert d["hypothesis_margin"] == pytest.approx((1 - 0.9**4) * d["frac_L"][0], rel=1e-9)
    p = tmp_path / "g.csv"
    r.write_grid_csv(p)
    assert p.read_text().splitlines()[0] == "psi,frac_K,frac_L,margin"


def test_pos_check_failing_hypothesis_is_reported():
    r = theorem_pos_check(BALL, dilate(0.9, BALL), 0.0, [0.0, 1.0], CFG)
    assert not r.verdicts["hypothesis"] and not r.verdicts["volume"] and r.verdicts["contract_ok"]


def test_neg_report():
    rec = theorem_neg_report(CounterexampleParams(3, -0.5, 1e4), CFG)
    assert rec["verdict"] == "counterexample" and rec["construction_performed"] is False
    assert "not carried out" in rec["implication"]
    rec = theorem_neg_report(CounterexampleParams(4, 1.5, 1.0), CFG)
    assert rec["verdict"] == "no conclusion"
    with pytest.raises(DomainError):
        theorem_neg_report(CounterexampleParams(3, -1.5, 10), CFG)
