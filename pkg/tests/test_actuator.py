import json

import pytest
from hypothesis import given, strategies as st

from flapreg.actuator import (ActuatorSpec, DriveCommand, SlipStickActuator, load_actuator_spec,
                              parse_actuator_spec, tula50, tula70)
from flapreg.errors import TargetUnreachable


def test_packaged_specs():
    a, b = tula50(), tula70()
    assert (a.stroke_mm, a.dynamic_force_gf) == (6.0, 20.0)
    assert (b.stroke_mm, b.dynamic_force_gf) == (6.0, 50.0)
    assert a.holding_force_gf >= a.dynamic_force_gf
    assert a.step_size_um_range == (0.04, 0.2) and a.name == "tula50"


def test_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        ActuatorSpec(6.0, 20.0, 10.0)
    with pytest.raises(ValueError):
        ActuatorSpec(6.0, 20.0, 50.0, (0.04, 0.2), 0.5)
    with pytest.raises(ValueError, match="unknown"):
        parse_actuator_spec({"stroke_mm": 6, "dynamic_force_gf": 20, "holding_force_gf": 50,
                             "colour": "red"})
    p = tmp_path / "custom.json"
    p.write_text(json.dumps({**tula50().to_dict(), "dynamic_force_gf": 30.0}))
    spec = load_actuator_spec(p)
    assert spec.dynamic_force_gf == 30.0 and spec.name == "custom"


@given(st.lists(st.integers(0, 5000), min_size=1, max_size=8),
       st.sampled_from([0.04, 0.1, 0.13, 0.2]))
def test_zero_load_additivity_is_exact(bursts, step):
    split = SlipStickActuator(tula50(), step_size_um=step)
    whole = SlipStickActuator(tula50(), step_size_um=step)
    for n in bursts:
        split.apply_burst(DriveCommand(1, n))
    whole.apply_burst(DriveCommand(1, sum(bursts)))
    assert split.position_um == whole.position_um
    total = sum(bursts)
    if total * step <= 6000:
        assert split._pos == total * split._step  # exact rational equality


def test_stall_threshold_is_sharp():
    a = SlipStickActuator(tula50())
    r = a.apply_burst(DriveCommand(1, 100, 20.0))
    assert not r.stalled and r.displacement_um == 0.0  # derated to zero exactly at rating
    r = a.apply_burst(DriveCommand(1, 100, 19.999))
    assert not r.stalled and r.displacement_um > 0
    before = a.position_um
    r = a.apply_burst(DriveCommand(1, 100, 20.000001))
    assert r.stalled and a.position_um == before


def test_derating_is_linear():
    a = SlipStickActuator(tula50())
    assert a.effective_step_um(0) == 0.1
    assert a.effective_step_um(10) == pytest.approx(0.05, rel=1e-15)
    assert a.effective_step_um(15) == pytest.approx(0.025, rel=1e-15)


def test_full_range_under_zero_load():
    a = SlipStickActuator(tula50())
    r = a.seek(6000.0)
    assert r.reached and a.position_um == 6000.0 and r.pulses == 60000
    r = a.apply_burst(DriveCommand(1, 50))
    assert a.position_um == 6000.0 and r.clamped_pulses == 50
    a.seek(0.0)
    assert a.position_um == 0.0


def test_hold_leaves_position_bit_identical():
    a = SlipStickActuator(tula50(), position_um=1234.5, slip_rate_um_per_s=10.0)
    before = a._pos
    for load in (0.0, 20.0, 49.999, 50.0):
        assert a.hold_check(load)
        assert a.idle(load, 100.0) == 0.0
        assert a._pos == before
    assert not a.hold_check(50.01)
    assert a.idle(60.0, 2.0) == -20.0
    assert a.position_um == 1214.5


def test_seek_stalls_on_rising_load():
    a = SlipStickActuator(tula50())
    with pytest.raises(TargetUnreachable) as info:
        a.seek(1600.0, lambda pos: 40.0 * pos / 1600.0)
    # the derated burst stops covering one nominal step just short of the 20 gf point
    assert 780.0 < info.value.stall_position_um < 800.0
    assert info.value.trace[0] == (0, 0.0)


def test_seek_respects_pulse_budget():
    a = SlipStickActuator(tula50())
    r = a.seek(100.0, max_pulses=250)
    assert not r.reached and r.pulses == 250 and a.position_um == pytest.approx(25.0)


def test_bad_commands_rejected():
    with pytest.raises(ValueError):
        DriveCommand(0, 10)
    with pytest.raises(ValueError):
        DriveCommand(1, -1)
    with pytest.raises(ValueError):
        SlipStickActuator(tula50(), position_um=7000)
    with pytest.raises(ValueError):
        SlipStickActuator(tula50()).seek(-5)
