"""Run configuration: a TOML file whose dimensional scalars carry units.

Every dimensional value is written as a string such as ``"0.979 uA"`` and is
checked against the unit family its key expects. Unknown keys are rejected.
"""
from __future__ import annotations

import hashlib
import math
import re
from decimal import Decimal
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import tomli
import tomli_w

from .boundstates import GridSpec
from .junction import JunctionParams
from .rcsj import NoiseModel, SweepProtocol, SwitchDetector
from .scattering import RATE_UNIT, BosonScatterParams, FermionScatterParams


class ConfigError(ValueError):
    pass


# decimal exponents are applied exactly so "0.979 uA" parses to 9.79e-07
_UNITS = {
    "current": {"A": 0, "mA": -3, "uA": -6, "nA": -9, "pA": -12},
    "capacitance": {"F": 0, "nF": -9, "pF": -12, "fF": -15},
    "resistance": {"ohm": 0, "kohm": 3, "Mohm": 6},
    "frequency": {"Hz": 0, "kHz": 3, "MHz": 6, "GHz": 9},
    "rate": {"rad/s": 1.0, "2piGHz": RATE_UNIT, "2piMHz": RATE_UNIT / 1e3},
    "temperature": {"K": 0, "mK": -3},
    "ramp": {"A/s": 0, "mA/s": -3, "uA/s": -6},
    "voltage": {"V": 0, "mV": -3, "uV": -6},
    "angle": {"rad": 0},
}
_BASE = {"current": "A", "capacitance": "F", "resistance": "ohm", "frequency": "Hz",
         "rate": "rad/s", "temperature": "K", "ramp": "A/s", "voltage": "V", "angle": "rad"}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)\s*$")


def parse_quantity(text, family: str, key: str = "") -> float:
    """``"0.979 uA"`` -> 9.79e-7 for family ``current``."""
    if not isinstance(text, str):
        raise ConfigError(f"{key}: expected a quoted value with a unit, got {text!r}")
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigError(f"{key}: cannot parse {text!r} as '<number> <unit>'")
    number, unit = m.group(1), m.group(2)
    table = _UNITS[family]
    if unit not in table:
        raise ConfigError(f"{key}: unit {unit!r} is not a {family} unit ({', '.join(table)})")
    scale = table[unit]
    if isinstance(scale, int):
        return float(Decimal(number).scaleb(scale))
    return float(number) * scale


def format_quantity(value: float, family: str) -> str:
    return f"{value!r} {_BASE[family]}"


# key -> unit family (None = plain number / string / bool)
_SCHEMA = {
    "junction": {"critical_current": "current", "capacitance": "capacitance",
                 "normal_resistance": "resistance"},
    "levels": {"biases": None, "n_points": None, "span_left": "angle", "span_right": "angle",
               "well_index": None},
    "boson": {"f_p": "frequency", "kappa1": "rate", "kappa2": "rate", "gamma": "rate"},
    "fermion": {"f_01": "frequency", "eta": "rate", "Gamma": "rate"},
    "sweep": {"boson_start": "frequency", "boson_stop": "frequency", "fermion_start": "frequency",
              "fermion_stop": "frequency", "n_points": None},
    "switch": {"capacitance": "capacitance", "peak_current": "current", "ramp_rate": "ramp",
               "frequency": "frequency", "start_current": "current", "n_trials": None,
               "temperature": "temperature", "noise": None, "bins": None,
               "threshold_voltage": "voltage", "window_periods": None,
               "langevin_start_current": "current", "langevin_ramp_rate": "ramp"},
    "fit": {"coupling_ratio": None, "fit_amplitude": None, "use_phase": None, "scale": None,
            "temperature": "temperature", "histogram_noise": None},
}
_TOP = {"seed", "output_dir"}


@dataclass
class RunConfig:
    junction: JunctionParams = field(default_factory=lambda: JunctionParams(0.979e-6, 11.18e-12, 290.0))
    biases: list = field(default_factory=lambda: [0.0, 0.45, 0.68, 0.945, 0.955, 0.964, 0.97])
    grid: GridSpec = field(default_factory=GridSpec)
    boson: BosonScatterParams = field(
        default_factory=lambda: BosonScatterParams.from_ghz(2.595, 0.004, 0.008, 0.0008))
    fermion: FermionScatterParams = field(
        default_factory=lambda: FermionScatterParams.from_ghz(2.42, 0.0021, 0.0062))
    boson_window: tuple = (2.55e9, 2.64e9)
    fermion_window: tuple = (2.38e9, 2.46e9)
    sweep_points: int = 901
    switch_capacitance: float | None = 93e-15
    protocol: SweepProtocol = field(default_factory=lambda: SweepProtocol(
        peak_current=3e-6, ramp_rate=190e-6, frequency=None, n_trials=10000))
    temperature: float = 0.05
    noise_kind: str = "johnson"
    bins: int = 100
    detector: SwitchDetector = field(default_factory=SwitchDetector)
    langevin_start_current: float | None = 0.8e-6
    langevin_ramp_rate: float | None = 1.39
    coupling_ratio: float | None = None
    fit_amplitude: bool = False
    use_phase: bool = True
    trace_scale: str = "power"
    histogram_noise: str = "poisson"
    seed: int | None = None
    output_dir: str = "."

    def switch_junction(self) -> JunctionParams:
        if self.switch_capacitance is None:
            return self.junction
        return self.junction.with_changes(capacitance=self.switch_capacitance)

    def noise(self, seed: int | None = None) -> NoiseModel:
        s = self.seed if seed is None else seed
        return NoiseModel(self.noise_kind, self.temperature, 0 if s is None else s)

    def digest(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()[:16]


def _check_keys(section: str, table: dict, allowed) -> None:
    unknown = set(table) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def from_dict(data: dict) -> RunConfig:
    _check_keys("top level", {k: v for k, v in data.items() if not isinstance(v, dict)}, _TOP)
    _check_keys("top level", {k: v for k, v in data.items() if isinstance(v, dict)}, _SCHEMA)
    cfg = RunConfig()

    def section(name):
        table = data.get(name, {})
        _check_keys(name, table, _SCHEMA[name])
        out = {}
        for k, v in table.items():
            fam = _SCHEMA[name][k]
            out[k] = parse_quantity(v, fam, f"{name}.{k}") if fam else v
        return out

    try:
        j = section("junction")
        if j:
            base = cfg.junction
            cfg.junction = JunctionParams(j.get("critical_current", base.critical_current),
                                          j.get("capacitance", base.capacitance),
                                          j.get("normal_resistance", base.normal_resistance))
        lv = section("levels")
        if "biases" in lv:
            cfg.biases = [float(x) for x in lv["biases"]]
        if set(lv) - {"biases"}:
            cfg.grid = GridSpec(lv.get("n_points", cfg.grid.n_points),
                                lv.get("span_left", cfg.grid.span_left),
                                lv.get("span_right", cfg.grid.span_right),
                                lv.get("well_index", cfg.grid.k))
        bo = section("boson")
        if bo:
            base = cfg.boson
            cfg.boson = BosonScatterParams(2 * math.pi * bo.get("f_p", base.omega_p / (2 * math.pi)),
                                           bo.get("kappa1", base.kappa1), bo.get("kappa2", base.kappa2),
                                           bo.get("gamma", base.gamma))
        fe = section("fermion")
        if fe:
            base = cfg.fermion
            cfg.fermion = FermionScatterParams.symmetric(
                2 * math.pi * fe.get("f_01", base.omega_01 / (2 * math.pi)),
                fe.get("eta", base.eta), fe.get("Gamma", base.Gamma))
        sw = section("sweep")
        cfg.boson_window = (sw.get("boson_start", cfg.boson_window[0]),
                            sw.get("boson_stop", cfg.boson_window[1]))
        cfg.fermion_window = (sw.get("fermion_start", cfg.fermion_window[0]),
                              sw.get("fermion_stop", cfg.fermion_window[1]))
        cfg.sweep_points = int(sw.get("n_points", cfg.sweep_points))
        st = section("switch")
        if st:
            if "capacitance" in st:
                cfg.switch_capacitance = st["capacitance"]
            base = cfg.protocol
            ramp = st.get("ramp_rate", base.ramp_rate if "frequency" not in st else None)
            cfg.protocol = SweepProtocol(st.get("peak_current", base.peak_current), ramp,
                                         st.get("frequency", base.frequency),
                                         st.get("start_current", base.start_current),
                                         int(st.get("n_trials", base.n_trials)))
            cfg.temperature = st.get("temperature", cfg.temperature)
            cfg.noise_kind = st.get("noise", cfg.noise_kind)
            if cfg.noise_kind not in ("none", "johnson"):
                raise ConfigError("switch.noise must be 'none' or 'johnson'")
            cfg.bins = int(st.get("bins", cfg.bins))
            cfg.detector = SwitchDetector(st.get("threshold_voltage", cfg.detector.threshold_voltage),
                                          float(st.get("window_periods", cfg.detector.window_periods)))
            cfg.langevin_start_current = st.get("langevin_start_current", cfg.langevin_start_current)
            cfg.langevin_ramp_rate = st.get("langevin_ramp_rate", cfg.langevin_ramp_rate)
        ft = section("fit")
        cfg.coupling_ratio = ft.get("coupling_ratio", cfg.coupling_ratio)
        cfg.fit_amplitude = bool(ft.get("fit_amplitude", cfg.fit_amplitude))
        cfg.use_phase = bool(ft.get("use_phase", cfg.use_phase))
        cfg.trace_scale = ft.get("scale", cfg.trace_scale)
        cfg.histogram_noise = ft.get("histogram_noise", cfg.histogram_noise)
        if cfg.histogram_noise not in ("poisson", "relative"):
            raise ConfigError("fit.histogram_noise must be 'poisson' or 'relative'")
        if "temperature" in ft:
            cfg.temperature = ft["temperature"]
        if "seed" in data:
            if not isinstance(data["seed"], int):
                raise ConfigError("seed must be an integer")
            cfg.seed = data["seed"]
        cfg.output_dir = str(data.get("output_dir", cfg.output_dir))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def to_dict(cfg: RunConfig) -> dict:
    q = format_quantity
    j = cfg.junction
    junction = {"critical_current": q(j.critical_current, "current"),
                "capacitance": q(j.capacitance, "capacitance")}
    if j.normal_resistance is not None:
        junction["normal_resistance"] = q(j.normal_resistance, "resistance")
    levels = {"biases": list(cfg.biases), "n_points": cfg.grid.n_points,
              "span_right": q(cfg.grid.span_right, "angle"), "well_index": cfg.grid.k}
    if cfg.grid.span_left is not None:
        levels["span_left"] = q(cfg.grid.span_left, "angle")
    pr = cfg.protocol
    switch = {"peak_current": q(pr.peak_current, "current"),
              "start_current": q(pr.start_current, "current"), "n_trials": pr.n_trials,
              "temperature": q(cfg.temperature, "temperature"), "noise": cfg.noise_kind,
              "bins": cfg.bins, "threshold_voltage": q(cfg.detector.threshold_voltage, "voltage"),
              "window_periods": cfg.detector.window_periods}
    if pr.ramp_rate is not None:
        switch["ramp_rate"] = q(pr.ramp_rate, "ramp")
    if pr.frequency is not None:
        switch["frequency"] = q(pr.frequency, "frequency")
    if cfg.switch_capacitance is not None:
        switch["capacitance"] = q(cfg.switch_capacitance, "capacitance")
    if cfg.langevin_start_current is not None:
        switch["langevin_start_current"] = q(cfg.langevin_start_current, "current")
    if cfg.langevin_ramp_rate is not None:
        switch["langevin_ramp_rate"] = q(cfg.langevin_ramp_rate, "ramp")
    fit = {"fit_amplitude": cfg.fit_amplitude, "use_phase": cfg.use_phase, "scale": cfg.trace_scale,
           "histogram_noise": cfg.histogram_noise}
    if cfg.coupling_ratio is not None:
        fit["coupling_ratio"] = cfg.coupling_ratio
    out = {"output_dir": cfg.output_dir}
    if cfg.seed is not None:
        out["seed"] = cfg.seed
    out.update({
        "junction": junction,
        "levels": levels,
        "boson": {"f_p": q(cfg.boson.omega_p / (2 * math.pi), "frequency"),
                  "kappa1": q(cfg.boson.kappa1, "rate"), "kappa2": q(cfg.boson.kappa2, "rate"),
                  "gamma": q(cfg.boson.gamma, "rate")},
        "fermion": {"f_01": q(cfg.fermion.omega_01 / (2 * math.pi), "frequency"),
                    "eta": q(cfg.fermion.eta, "rate"), "Gamma": q(cfg.fermion.Gamma, "rate")},
        "sweep": {"boson_start": q(cfg.boson_window[0], "frequency"),
                  "boson_stop": q(cfg.boson_window[1], "frequency"),
                  "fermion_start": q(cfg.fermion_window[0], "frequency"),
                  "fermion_stop": q(cfg.fermion_window[1], "frequency"),
                  "n_points": cfg.sweep_points},
        "switch": switch,
        "fit": fit,
    })
    return out


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def loads(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return from_dict(data)


def load(path) -> RunConfig:
    return loads(Path(path).read_text())


def default_config_text() -> str:
    return resources.files("cbjj").joinpath("data/default.toml").read_text()


def default_config() -> RunConfig:
    return loads(default_config_text())


def equivalent(a: RunConfig, b: RunConfig) -> bool:
    """Field-wise equality of two configurations."""
    return all(getattr(a, f.name) == getattr(b, f.name) for f in fields(RunConfig))
