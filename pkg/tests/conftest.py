import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import pytest  # noqa: E402

from flapreg.gait import LengthSweepSpec, parse_length_range, run_length_sweep  # noqa: E402
from flapreg.linkage import example_rig  # noqa: E402

TABLE_LENGTHS = "28.58:30.08:9"


@pytest.fixture(scope="session")
def rig_sweep():
    """The nine regulator lengths solved once on the packaged rig."""
    rig = example_rig()
    spec = LengthSweepSpec(rig, "R1", parse_length_range(TABLE_LENGTHS), rig.points[-1])
    return spec, run_length_sweep(spec, threads=4)
