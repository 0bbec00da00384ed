"""Design, simulation and fitting tools for waveguide-coupled Josephson
parametric amplifiers."""

from wja.circuit import (
    CircuitParams,
    EXTRACTED,
    DESIGN,
    josephson_inductance,
    resonance_frequency,
    participation_ratio,
    characteristic_impedance,
    operating_point,
    qp_product,
    amplification_feasible,
)
from wja.waveguide import (
    WR90,
    WaveguideSpec,
    AntennaSpec,
    PlacementSpec,
    cutoff_frequency,
    guide_wavelength,
    te10_wave_impedance,
    load_impedance,
    coupling_q,
)

__version__ = "0.1.0"
