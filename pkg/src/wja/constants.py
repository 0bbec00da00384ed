"""CODATA constants used throughout the package (SI units)."""

from dataclasses import dataclass

import scipy.constants as sc


@dataclass(frozen=True)
class PhysicalConstants:
    flux_quantum: float
    reduced_planck: float
    boltzmann: float
    light_speed: float
    free_space_impedance: float
    elementary_charge: float


CONSTANTS = PhysicalConstants(
    flux_quantum=sc.physical_constants["mag. flux quantum"][0],
    reduced_planck=sc.hbar,
    boltzmann=sc.k,
    light_speed=sc.c,
    free_space_impedance=sc.physical_constants["characteristic impedance of vacuum"][0],
    elementary_charge=sc.e,
)

PHI0 = CONSTANTS.flux_quantum
HBAR = CONSTANTS.reduced_planck
KB = CONSTANTS.boltzmann
C0 = CONSTANTS.light_speed
ETA0 = CONSTANTS.free_space_impedance
E_CHARGE = CONSTANTS.elementary_charge

GHz = 1e9
MHz = 1e6
mm = 1e-3
pH = 1e-12
pF = 1e-12
fF = 1e-15
uA = 1e-6
