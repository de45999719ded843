import pytest
from hypothesis import given, strategies as st

from flapreg.budget import (DIRECT_DRIVE_QUOTED_GF, ForceBudget, LeverStage, budget_report,
                            newtons_to_gf, regulator_load, requirement_table, single_wing_lift)


def test_reference_lift_by_hand():
    # 0.035 kg * 9.81 * 1.33 margin, split over two wings, doubled by FoS
    assert single_wing_lift(ForceBudget()) == pytest.approx(0.035 * 9.81 * 1.33, rel=1e-15)
    assert single_wing_lift(ForceBudget()) == pytest.approx(0.4566, abs=5e-4)


def test_reference_regulator_load():
    load = regulator_load(ForceBudget(), LeverStage())
    assert load.newtons == pytest.approx(0.4566555 * 78.89 / 15.6, rel=1e-6)
    assert load.newtons == pytest.approx(2.309, abs=2e-3)
    # the published 235.45 gf sits 0.044 gf above the exact conversion with g = 9.81
    assert load.grams_force == pytest.approx(235.4057, abs=1e-4)
    assert load.grams_force == pytest.approx(235.45, abs=0.3)


def test_gf_conversion_uses_configured_gravity():
    assert newtons_to_gf(9.81, 9.81) == pytest.approx(1000.0)
    assert newtons_to_gf(1.0, 9.80665) == pytest.approx(101.97162, rel=1e-6)


@given(st.floats(0.001, 10), st.floats(1, 5), st.floats(1, 5), st.floats(1, 500), st.floats(1, 500))
def test_load_scales_linearly(mass, margin, fos, arm_out, arm_in):
    b = ForceBudget(mass_kg=mass, thrust_margin=margin, fos=fos)
    lv = LeverStage(arm_out, arm_in)
    base = regulator_load(b, lv).newtons
    twice = regulator_load(ForceBudget(mass_kg=2 * mass, thrust_margin=margin, fos=fos), lv)
    assert twice.newtons == pytest.approx(2 * base, rel=1e-12)
    assert base == pytest.approx(mass * 9.81 * margin * 0.5 * fos * arm_out / arm_in, rel=1e-12)


@pytest.mark.parametrize("kwargs", [dict(mass_kg=0), dict(g_mps2=-1), dict(thrust_margin=0.9),
                                    dict(fos=0.5)])
def test_budget_validation(kwargs):
    with pytest.raises(ValueError):
        ForceBudget(**kwargs)


def test_lever_validation():
    with pytest.raises(ValueError):
        LeverStage(0, 15.6)


def test_requirement_and_report():
    req = requirement_table(ForceBudget(), LeverStage(), 1.5)
    assert req.displacement_mm == 1.5
    rep = budget_report(ForceBudget(), LeverStage(), 1.5)
    assert rep["requirement"]["actuation_force_gf"] == req.actuation_force_gf
    assert rep["lever_ratio"] == pytest.approx(78.89 / 15.6)
    assert DIRECT_DRIVE_QUOTED_GF > req.actuation_force_gf
