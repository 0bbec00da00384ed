"""JSON run reports.

A report holds a ``metadata`` block (the only part allowed to change between
identical runs), the resolved inputs, derived values with units, a manifest
of the data files written alongside it, pass/fail checks and free-text notes.
"""

import datetime
import hashlib
import json
import math

import numpy as np

import wja

# Units of the configuration keys echoed in the inputs block.
CONFIG_UNITS = {
    "I0": "A", "C": "F", "L_stray": "H", "a": "m", "b": "m",
    "pad_length": "m", "pad_width": "m", "gap": "m", "coupling_slope": "F/m",
    "resolved_coupling_slope_F_per_m": "F/m", "target_q": "1",
    "distance": "m", "quarter_wave_at": "Hz", "frequency": "Hz",
    "flux_max": "Phi0", "n_flux": "count", "signal_frequency": "Hz", "Q": "1",
    "detuning": "Hz", "P1_dBm": "dBm", "P2_dBm": "dBm", "attenuation_dB": "dB",
    "target_gain_dB": "dB", "span": "Hz", "n_points": "count", "T_sys": "K",
    "T_N": "K", "rbw": "Hz", "gains_dB": "dB", "dip_band": "Hz",
    "length_min": "m", "length_max": "m", "n_length": "count",
    "distance_min": "m", "distance_max": "m", "n_distance": "count",
    "qp_threshold": "1", "qp_optimal": "1", "analytic_length_cap": "m",
}


def quantity(value, unit):
    return {"value": value, "unit": unit}


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats (as
    the strings ``inf``, ``-inf``, ``nan``) into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def config_inputs(cfg_dict):
    """Attach units to every numeric config entry."""
    out = {}
    for section, entries in cfg_dict.items():
        out[section] = {
            k: (quantity(v, CONFIG_UNITS.get(k, "1")) if isinstance(v, (int, float, list)) and not isinstance(v, bool) else v)
            for k, v in entries.items()
        }
    return out


def manifest_entry(name, text):
    data = text.encode("utf-8")
    return {"file": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()}


class Report:
    def __init__(self, command):
        self.command = command
        self.inputs = {}
        self.values = {}
        self.manifest = []
        self.checks = []
        self.notes = []

    def value(self, name, value, unit):
        self.values[name] = quantity(value, unit)

    def check(self, name, passed, detail=""):
        self.checks.append({"name": name, "passed": bool(passed), "detail": detail})

    def note(self, text):
        if text not in self.notes:
            self.notes.append(text)

    def to_dict(self, timestamp=None):
        if timestamp is None:
            timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        return jsonable({
            "metadata": {"tool": "wja", "version": wja.__version__, "command": self.command,
                         "timestamp": timestamp},
            "inputs": self.inputs,
            "values": self.values,
            "manifest": self.manifest,
            "checks": self.checks,
            "notes": self.notes,
        })

    def dumps(self, timestamp=None):
        return json.dumps(self.to_dict(timestamp), indent=2, allow_nan=False) + "\n"


def strip_metadata(text):
    """Report text with the metadata block removed, for golden comparison."""
    d = json.loads(text)
    d.pop("metadata", None)
    return json.dumps(d, indent=2, sort_keys=True)
