"""Physical constants, unit scaling and the reference test cases."""
from __future__ import annotations

import math
from dataclasses import dataclass

MU_EARTH = 398600.4415          # km^3/s^2
RE_EARTH = 6378.1363            # km
J2 = 0.001082626
J3 = -2.532411e-6
J4 = -1.619898e-6
CD = 2.2
AREA_TO_MASS = 0.0094736        # m^2/kg
OMEGA_EARTH = 7.2921159e-5      # rad/s


@dataclass(frozen=True)
class Scaling:
    """Length, velocity and time units used during integration.

    With ``L = Re``, ``V = sqrt(mu/Re)`` and ``T = sqrt(Re^3/mu)`` the scaled
    gravitational parameter and equatorial radius are both 1.
    """

    length: float
    velocity: float
    time: float

    @classmethod
    def from_mu_re(cls, mu: float = MU_EARTH, re: float = RE_EARTH) -> "Scaling":
        return cls(length=re, velocity=math.sqrt(mu / re), time=math.sqrt(re ** 3 / mu))

    @property
    def angmom(self) -> float:
        return self.length * self.velocity

    @property
    def accel(self) -> float:
        return self.velocity / self.time

    @property
    def mu(self) -> float:
        return self.length ** 3 / self.time ** 2


IDENTITY_SCALING = Scaling(1.0, 1.0, 1.0)


@dataclass(frozen=True)
class TestCase:
    """Initial osculating classical elements (km, degrees) and force set."""

    number: int
    label: str
    a: float
    e: float
    i: float
    raan: float
    argp: float
    nu: float
    zonals: tuple[float, ...]
    drag: bool = False

    def coe_radians(self) -> tuple[float, float, float, float, float, float]:
        r = math.radians
        return (self.a, self.e, r(self.i), r(self.raan), r(self.argp), r(self.nu))


_J2 = (J2,)
_J234 = (J2, J3, J4)

TEST_CASES: dict[int, TestCase] = {
    1: TestCase(1, "LEO, J2 only", 6878.1363, 0.01, 30.0, 30.0, 30.0, 330.0, _J2),
    2: TestCase(2, "LEO, J2 only", 6878.1363, 0.01, 0.0, 30.0, 30.0, 330.0, _J2),
    3: TestCase(3, "LEO, J2 only", 6878.1363, 0.01, 63.4499, 30.0, 30.0, 330.0, _J2),
    4: TestCase(4, "LEO, J2 only", 6878.1363, 0.01, 90.0, 30.0, 30.0, 330.0, _J2),
    5: TestCase(5, "HEO, J2 only", 26561.7438, 0.7411188, 63.4428, 30.0, 270.0, 90.0, _J2),
    6: TestCase(6, "HEO, J2 only", 26561.7438, 0.7411188, 30.0, 30.0, 270.0, 90.0, _J2),
    7: TestCase(7, "LEO, J2-J4", 7178.1363, 0.001, 30.0, 30.0, 30.0, 330.0, _J234),
    8: TestCase(8, "LEO, J2-J4, drag", 6878.1363, 0.01, 30.0, 30.0, 30.0, 330.0, _J234, True),
    9: TestCase(9, "Fixed point, J2-J4", 6878.1363, 0.0, 97.42, 0.0, 0.0, 0.0, _J234),
}


def test_case(number: int) -> TestCase:
    try:
        return TEST_CASES[int(number)]
    except KeyError:
        raise KeyError(f"unknown test case {number}; valid: 1..9") from None


# keep pytest from collecting the dataclass and accessor if imported in tests
TestCase.__test__ = False
test_case.__test__ = False
