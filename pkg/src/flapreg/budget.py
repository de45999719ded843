"""Single-wing lift requirement and the axial load it places on the regulator.

The whole single-wing lift is assumed to act through the shoulder lever onto
the first radius link.  That is the worst case; real loads are lower.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

# Published reference inputs for the flight platform.
REFERENCE_MASS_KG = 0.035
REFERENCE_G = 9.81
REFERENCE_THRUST_MARGIN = 1.33
REFERENCE_FOS = 2.0
REFERENCE_ARM_OUT_MM = 78.89
REFERENCE_ARM_IN_MM = 15.6
REFERENCE_DISPLACEMENT_MM = 1.5
# Load quoted for the direct-drive prototype; differs from the derived table value.
DIRECT_DRIVE_QUOTED_GF = 295.89


@dataclass(frozen=True)
class ForceBudget:
    mass_kg: float = REFERENCE_MASS_KG
    g_mps2: float = REFERENCE_G
    thrust_margin: float = REFERENCE_THRUST_MARGIN
    fos: float = REFERENCE_FOS

    def __post_init__(self):
        for name in ("mass_kg", "g_mps2", "thrust_margin", "fos"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.thrust_margin < 1:
            raise ValueError("thrust_margin must be >= 1")
        if self.fos < 1:
            raise ValueError("fos must be >= 1")


@dataclass(frozen=True)
class LeverStage:
    arm_out_mm: float = REFERENCE_ARM_OUT_MM
    arm_in_mm: float = REFERENCE_ARM_IN_MM

    def __post_init__(self):
        if not (self.arm_out_mm > 0 and self.arm_in_mm > 0):
            raise ValueError("moment arms must be > 0")

    @property
    def ratio(self) -> float:
        return self.arm_out_mm / self.arm_in_mm


@dataclass(frozen=True)
class RegulatorRequirement:
    displacement_mm: float
    actuation_force_gf: float

    def __post_init__(self):
        if not self.displacement_mm > 0:
            raise ValueError(f"displacement_mm must be > 0, got {self.displacement_mm}")
        if not self.actuation_force_gf > 0:
            raise ValueError(f"actuation_force_gf must be > 0, got {self.actuation_force_gf}")


@dataclass(frozen=True)
class RegulatorLoad:
    newtons: float
    grams_force: float


def newtons_to_gf(force_n: float, g_mps2: float) -> float:
    return 1000.0 * force_n / g_mps2


def single_wing_lift(b: ForceBudget) -> float:
    """Lift one wing must carry, in newtons: half the margined weight times FoS."""
    return b.mass_kg * b.g_mps2 * b.thrust_margin * 0.5 * b.fos


def regulator_load(b: ForceBudget, lever: LeverStage) -> RegulatorLoad:
    """Axial regulator load from the lift acting through the shoulder lever."""
    force = lever.ratio * single_wing_lift(b)
    return RegulatorLoad(force, newtons_to_gf(force, b.g_mps2))


def requirement_table(b: ForceBudget, lever: LeverStage,
                      displacement_mm: float) -> RegulatorRequirement:
    return RegulatorRequirement(displacement_mm, regulator_load(b, lever).grams_force)


def budget_report(b: ForceBudget, lever: LeverStage, displacement_mm: float) -> dict:
    lift = single_wing_lift(b)
    load = regulator_load(b, lever)
    req = requirement_table(b, lever, displacement_mm)
    return {
        "inputs": {**asdict(b), **asdict(lever)},
        "single_wing_lift_N": lift,
        "lever_ratio": lever.ratio,
        "regulator_load_N": load.newtons,
        "regulator_load_gf": load.grams_force,
        "requirement": {"displacement_mm": req.displacement_mm,
                        "actuation_force_gf": req.actuation_force_gf},
    }
