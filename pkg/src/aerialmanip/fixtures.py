"""Reference vehicle and arm used by the default scenarios and the test-suite.

REF-HEX: 2 kg hex-rotor. REF-ARM: two-link planar arm with both joint axes along
body z, based 5 cm below ``O`` (body z points down). All values are declared
constants, not measured hardware.
"""

from __future__ import annotations

import numpy as np

from .arm import ArmModel, ArmMount, DHRow, LinkProps
from .dynamics import VehicleParams

REF_ARM_LENGTHS = (0.15, 0.12)
REF_ARM_MASSES = (0.20, 0.15)
REF_ARM_BASE_OFFSET = 0.05


def ref_hex() -> VehicleParams:
    return VehicleParams(
        m_b=2.0,
        I_b=np.diag([0.03, 0.03, 0.05]),
        c_T=8e-6,
        c_tau=1e-7,
        d=0.35,
        g=9.81,
        k2=60.0,
    )


def ref_arm() -> ArmModel:
    dh = tuple(DHRow(a=a, alpha=0.0) for a in REF_ARM_LENGTHS)
    links = tuple(LinkProps.rod(m, a) for m, a in zip(REF_ARM_MASSES, REF_ARM_LENGTHS))
    return ArmModel(dh, links, ArmMount(np.eye(3), np.array([0.0, 0.0, REF_ARM_BASE_OFFSET])))


def centered_arm(mass: float = 0.35) -> ArmModel:
    """One-link arm whose CoM sits exactly at ``O`` for every joint angle.

    Used where a test needs a non-trivial arm with zero CoM offset.
    """
    a = 0.1
    link = LinkProps(mass, np.array([-a, 0.0, 0.0]), np.diag([1e-4, 2e-4, 2e-4]))
    return ArmModel((DHRow(a=a, alpha=0.0),), (link,), ArmMount())
