import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from flapreg.actuator import ActuatorSpec, tula50, tula70
from flapreg.budget import RegulatorRequirement
from flapreg.errors import Infeasible, TriangleDegenerate
from flapreg.mech import (TriangleBounds, TriangleMechanism, direct_curve, feasibility,
                          lever_curve, lever_force_ma, lever_output, ma_curve, optimize_triangle,
                          triangle_ma_limit, triangle_output)

PUBLISHED_REQ = RegulatorRequirement(1.5, 235.45)


def test_triangle_output_matches_arbitrary_precision():
    m = TriangleMechanism.reference()
    for d in (0.1, 1.0, 3.0, 4.5, 6.0):
        assert triangle_output(m, d) == pytest.approx(float(oracles.triangle_output(8, 5, 20, d)),
                                                      rel=1e-13)
    # mid-stroke value by independent evaluation
    assert triangle_output(m, 3.0) == pytest.approx(0.455149563681756, rel=1e-12)


def test_curve_derivative_against_numeric_diff():
    m = TriangleMechanism.reference()
    c = ma_curve(m, 200)
    for k in (5, 77, 199):
        d = float(c.d_input_mm[k])
        slope = mp.diff(lambda v: oracles.triangle_output(8, 5, 20, v), d)
        assert 1 / c.ma_instantaneous[k] == pytest.approx(float(slope), rel=1e-10)


def test_curve_samples_cover_stroke():
    c = ma_curve(TriangleMechanism.reference(), 600)
    assert len(c.d_input_mm) == 600
    assert c.d_input_mm[0] > 0 and c.d_input_mm[-1] == 6.0
    assert np.all(np.diff(c.d_output_mm) > 0)
    assert np.all(np.diff(c.ma_effective) < 0)
    assert np.allclose(c.ma_effective, c.d_input_mm / c.d_output_mm)


def test_ma_limit_matches_symbolic_limit():
    lim = triangle_ma_limit(TriangleMechanism.reference())
    assert lim == pytest.approx(float(oracles.triangle_ma_limit(8, 5, 20)), rel=1e-13)
    # d_initial == base sends the half-leg to zero at rest: unbounded advantage
    assert triangle_ma_limit(TriangleMechanism(5, 5, 20, 6)) == math.inf


@pytest.mark.parametrize("geom", [(8, 5, 4, 6), (40, 5, 20, 6), (8, 5, 0.5, 6)])
def test_degenerate_triangles_rejected(geom):
    with pytest.raises(TriangleDegenerate):
        TriangleMechanism(*geom)


def test_lever_and_direct():
    assert lever_output(4, 1, 2.0) == 0.5
    assert lever_force_ma(4, 1) == 4.0
    c = lever_curve(4, 1, 6.0, 10)
    assert np.allclose(c.ma_effective, 4.0)
    d = direct_curve(6.0, 10)
    assert np.array_equal(d.d_output_mm, d.d_input_mm)
    assert np.allclose(d.ma_effective, 1.0)


def test_feasibility_verdicts_for_published_design():
    rep = feasibility(ma_curve(TriangleMechanism.reference()), tula50(), PUBLISHED_REQ)
    assert not rep.force_ok and not rep.displacement_ok
    assert rep.deliverable_force_gf == pytest.approx(20 * 4.330483393312239, rel=1e-9)
    d = feasibility(direct_curve(6.0), tula50(), PUBLISHED_REQ)
    assert d.displacement_ok and not d.force_ok
    assert d.to_dict()["force"] == "FAIL" and d.to_dict()["displacement"] == "PASS"
    assert d.threshold_checks[295.89] is False


def test_unlimited_force_passes():
    inf = ActuatorSpec(6.0, math.inf, math.inf, (0.04, 0.2), 0.1, 1.0)
    assert feasibility(direct_curve(6.0), inf, PUBLISHED_REQ).feasible


def test_optimizer_minimal_hyp_for_easy_requirement():
    m = optimize_triangle(RegulatorRequirement(0.5, 10.0), tula50())
    assert m.d_initial_mm == 0.0 and m.base_mm == 0.0
    assert m.hyp_mm == pytest.approx(3.387755, abs=1e-6)
    rep = feasibility(ma_curve(m), tula50(), RegulatorRequirement(0.5, 10.0), ())
    assert rep.feasible


def test_optimizer_recovers_singleton():
    m = TriangleMechanism.reference()
    got = optimize_triangle(RegulatorRequirement(1.3, 80.0), tula50(), TriangleBounds.singleton(m))
    assert got == m


def test_published_requirement_is_infeasible_with_tula50():
    with pytest.raises(Infeasible) as info:
        optimize_triangle(PUBLISHED_REQ, tula50())
    assert info.value.best_force_gf is not None
    # energy bound: stroke * force cannot exceed 6 mm * 20 gf
    assert 1.5 * 235.45 > 6.0 * 20.0


@given(st.floats(0.2, 3.0), st.floats(5.0, 60.0))
def test_optimizer_results_always_verify(disp, force):
    act = tula70()
    req = RegulatorRequirement(disp, force)
    try:
        m = optimize_triangle(req, act, grid=12, refine=3)
    except Infeasible as exc:
        assert exc.best_force_gf is None or exc.best_force_gf > 0
        return
    assert feasibility(ma_curve(m), act, req, ()).feasible
    assert disp * force <= act.stroke_mm * act.dynamic_force_gf
