"""Design configuration read from a TOML file.

Every field has a default, and :meth:`DesignConfig.to_dict` echoes the fully
resolved configuration so that a run can be reproduced from its report.
Lengths are in m, frequencies in Hz, temperatures in K, currents in A,
capacitances in F and inductances in H.
"""

import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from wja.circuit import DESIGN, EXTRACTED, QP_OPTIMAL_BAND, QP_THRESHOLD, CircuitParams
from wja.errors import ParseError, ValidationError
from wja.waveguide import (
    ANALYTIC_LENGTH_CAP,
    DEFAULT_COUPLING_SLOPE,
    DESIGN_FREQUENCY,
    WR90,
    AntennaSpec,
    PlacementSpec,
    WaveguideSpec,
    calibrate_coupling_slope,
)

CIRCUIT_PRESETS = {"extracted": EXTRACTED, "design": DESIGN}
WAVEGUIDE_PRESETS = {"WR-90": WR90, "WR90": WR90}


@dataclass
class CircuitSection:
    I0: float = EXTRACTED.I0
    C: float = EXTRACTED.C
    L_stray: float = EXTRACTED.L_stray


@dataclass
class WaveguideSection:
    preset: str = "WR-90"
    a: float = None
    b: float = None


@dataclass
class AntennaSection:
    pad_length: float = 2.5e-3
    pad_width: float = 0.25e-3
    gap: float = 150e-6
    coupling_slope: float = None
    target_q: float = None


@dataclass
class PlacementSection:
    distance: float = None
    quarter_wave_at: float = None


@dataclass
class DesignSection:
    frequency: float = DESIGN_FREQUENCY
    flux_max: float = 0.45
    n_flux: int = 10


@dataclass
class PumpSection:
    signal_frequency: float = 9.5e9
    Q: float = 100.0
    detuning: float = 500e6
    P1_dBm: float = -64.919
    P2_dBm: float = -63.740
    attenuation_dB: float = None
    target_gain_dB: float = 20.0
    span: float = 60e6
    n_points: int = 1201


@dataclass
class NoiseSection:
    T_sys: float = 35.0
    T_N: float = 0.410
    rbw: float = 2.5e6
    frequency: float = 9.7e9
    gains_dB: list = field(default_factory=lambda: [10.0, 17.0, 20.0, 25.0])
    dip_band: float = 0.5e6


@dataclass
class SweepSection:
    length_min: float = 0.5e-3
    length_max: float = 5.0e-3
    n_length: int = 46
    distance_min: float = 1.0e-3
    distance_max: float = 40.0e-3
    n_distance: int = 391


@dataclass
class ThresholdSection:
    qp_threshold: float = QP_THRESHOLD
    qp_optimal: list = field(default_factory=lambda: list(QP_OPTIMAL_BAND))
    analytic_length_cap: float = ANALYTIC_LENGTH_CAP


SECTIONS = {
    "circuit": CircuitSection,
    "waveguide": WaveguideSection,
    "antenna": AntennaSection,
    "placement": PlacementSection,
    "design": DesignSection,
    "pump": PumpSection,
    "noise": NoiseSection,
    "sweep": SweepSection,
    "thresholds": ThresholdSection,
}


@dataclass
class DesignConfig:
    circuit: CircuitSection = field(default_factory=CircuitSection)
    waveguide: WaveguideSection = field(default_factory=WaveguideSection)
    antenna: AntennaSection = field(default_factory=AntennaSection)
    placement: PlacementSection = field(default_factory=PlacementSection)
    design: DesignSection = field(default_factory=DesignSection)
    pump: PumpSection = field(default_factory=PumpSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    thresholds: ThresholdSection = field(default_factory=ThresholdSection)
    source: str = "<defaults>"

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------

    def _fail(self, key, msg):
        raise ValidationError(f"{self.source}: [{key}] {msg}")

    def _positive(self, section, *names):
        obj = getattr(self, section)
        for n in names:
            v = getattr(obj, n)
            if v is None:
                continue
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                self._fail(f"{section}.{n}", f"must be a positive finite number, got {v!r}")

    def validate(self):
        self._positive("circuit", "I0", "C")
        if not (self.circuit.L_stray >= 0):
            self._fail("circuit.L_stray", f"must be >= 0, got {self.circuit.L_stray!r}")
        wg = self.waveguide
        if wg.a is None and wg.b is None:
            if wg.preset not in WAVEGUIDE_PRESETS:
                self._fail("waveguide.preset", f"unknown preset {wg.preset!r}; known {sorted(WAVEGUIDE_PRESETS)}")
        elif wg.a is None or wg.b is None:
            self._fail("waveguide", "give both a and b, or a preset")
        else:
            self._positive("waveguide", "a", "b")
            if not wg.a > wg.b:
                self._fail("waveguide", "need a > b")
        self._positive("antenna", "pad_length", "pad_width", "gap", "coupling_slope", "target_q")
        if self.antenna.coupling_slope is not None and self.antenna.target_q is not None:
            self._fail("antenna", "give at most one of coupling_slope and target_q")
        pl = self.placement
        if (pl.distance is None) == (pl.quarter_wave_at is None):
            self._fail("placement", "give exactly one of distance and quarter_wave_at")
        self._positive("placement", "distance", "quarter_wave_at")
        self._positive("design", "frequency", "flux_max", "n_flux")
        if not self.design.flux_max < 0.5:
            self._fail("design.flux_max", "must be < 0.5")
        self._positive("pump", "signal_frequency", "Q", "detuning", "span", "n_points", "target_gain_dB")
        if self.pump.attenuation_dB is not None and not math.isfinite(self.pump.attenuation_dB):
            self._fail("pump.attenuation_dB", "must be finite")
        self._positive("noise", "T_sys", "rbw", "frequency", "dip_band")
        if not self.noise.T_N >= 0:
            self._fail("noise.T_N", "must be >= 0")
        if not self.noise.gains_dB or any(g < 0 for g in self.noise.gains_dB):
            self._fail("noise.gains_dB", "need a non-empty list of gains >= 0 dB")
        self._positive("sweep", "length_min", "length_max", "n_length",
                       "distance_min", "distance_max", "n_distance")
        sw = self.sweep
        if not (sw.length_max > sw.length_min and sw.distance_max > sw.distance_min):
            self._fail("sweep", "ranges need max > min")
        if sw.n_length < 2 or sw.n_distance < 2:
            self._fail("sweep", "need at least 2 points per axis")
        self._positive("thresholds", "qp_threshold", "analytic_length_cap")
        band = self.thresholds.qp_optimal
        if not (isinstance(band, list) and len(band) == 2 and 0 < band[0] < band[1]):
            self._fail("thresholds.qp_optimal", "need 0 < low < high")

    # -- resolved model objects ---------------------------------------------

    def circuit_params(self):
        c = self.circuit
        return CircuitParams(I0=c.I0, C=c.C, L_stray=c.L_stray)

    def waveguide_spec(self):
        wg = self.waveguide
        if wg.a is not None:
            return WaveguideSpec(wg.a, wg.b, "custom")
        return WAVEGUIDE_PRESETS[wg.preset]

    def placement_spec(self):
        if self.placement.distance is not None:
            return PlacementSpec(self.placement.distance)
        return PlacementSpec.quarter_wave(self.waveguide_spec(), self.placement.quarter_wave_at)

    def coupling_slope(self):
        """Antenna slope [F/m]: explicit, calibrated to ``target_q`` at
        zero flux and the design frequency, or the built-in default."""
        a = self.antenna
        if a.coupling_slope is not None:
            return a.coupling_slope
        if a.target_q is not None:
            return calibrate_coupling_slope(
                self.circuit_params(), 0.0, self.waveguide_spec(), a.pad_length,
                self.design.frequency, a.target_q, self.placement_spec(),
            )
        return DEFAULT_COUPLING_SLOPE

    def antenna_spec(self):
        a = self.antenna
        return AntennaSpec(a.pad_length, self.coupling_slope(), a.pad_width, a.gap,
                           self.thresholds.analytic_length_cap)

    def to_dict(self):
        out = {name: asdict(getattr(self, name)) for name in SECTIONS}
        out["antenna"]["resolved_coupling_slope_F_per_m"] = self.coupling_slope()
        return out


def config_from_dict(data, source="<dict>"):
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ValidationError(f"{source}: unknown section(s) {sorted(unknown)}")
    kwargs = {}
    for name, cls in SECTIONS.items():
        sec = data.get(name, {})
        if not isinstance(sec, dict):
            raise ValidationError(f"{source}: [{name}] must be a table")
        if name == "circuit" and "preset" in sec:
            sec = dict(sec)
            preset = sec.pop("preset")
            if preset not in CIRCUIT_PRESETS:
                raise ValidationError(f"{source}: [circuit.preset] unknown preset {preset!r}")
            p = CIRCUIT_PRESETS[preset]
            sec = {"I0": p.I0, "C": p.C, "L_stray": p.L_stray, **sec}
        fields_ = cls.__dataclass_fields__
        bad = set(sec) - set(fields_)
        if bad:
            raise ValidationError(f"{source}: [{name}] unknown key(s) {sorted(bad)}")
        kwargs[name] = cls(**sec)
    return DesignConfig(**kwargs, source=source)


def loads_config(text, source="<string>"):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{source}: {exc}") from None
    return config_from_dict(data, source)


def load_config(path=None):
    """Read a config file; ``None`` gives the defaults with quarter-wave
    placement at the design frequency."""
    if path is None:
        return config_from_dict({"placement": {"quarter_wave_at": DESIGN_FREQUENCY}}, "<defaults>")
    path = Path(path)
    return loads_config(path.read_text(encoding="utf-8"), str(path))
