"""Transmission and phase spectra of a traveling wave scattered by the junction.

Two limits are covered. At low bias the junction is a single bosonic mode
(cavity) side-coupled to the left and right lines with rates ``kappa1`` and
``kappa2`` and internal loss ``gamma``; the transmission is a Lorentzian peak.
Near the critical current it is a two-level emitter with couplings ``eta1``,
``eta2`` and decay ``Gamma``; the transmission shows a dip at resonance.

Frequencies and rates are angular (rad/s). Rates quoted as bare numbers such
as ``kappa1 = 0.004`` are in units of 2 pi GHz; see :data:`RATE_UNIT`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: one "2 pi GHz" rate unit in rad/s
RATE_UNIT = 2 * math.pi * 1e9


class ScatteringError(ValueError):
    pass


class UnsupportedConfigurationError(ScatteringError):
    """Closed forms only hold for symmetric fermion coupling."""


@dataclass(frozen=True)
class BosonScatterParams:
    omega_p: float
    kappa1: float
    kappa2: float
    gamma: float

    def __post_init__(self):
        if min(self.omega_p, self.kappa1, self.kappa2, self.gamma) < 0:
            raise ScatteringError("boson parameters must be non-negative")
        if self.kappa <= 0:
            raise ScatteringError("kappa1 + kappa2 must be positive")

    @property
    def kappa(self) -> float:
        return self.kappa1 + self.kappa2

    @property
    def linewidth(self) -> float:
        return self.kappa + self.gamma

    @property
    def resonance(self) -> float:
        return self.omega_p

    @classmethod
    def from_ghz(cls, f_p: float, kappa1: float, kappa2: float, gamma: float):
        """Resonance in GHz, rates in 2 pi GHz."""
        return cls(f_p * RATE_UNIT, kappa1 * RATE_UNIT, kappa2 * RATE_UNIT, gamma * RATE_UNIT)


@dataclass(frozen=True)
class FermionScatterParams:
    omega_01: float
    eta1: float
    eta2: float
    Gamma: float

    def __post_init__(self):
        if min(self.omega_01, self.eta1, self.eta2, self.Gamma) < 0:
            raise ScatteringError("fermion parameters must be non-negative")
        if self.eta <= 0:
            raise ScatteringError("eta1 + eta2 must be positive")

    @property
    def eta(self) -> float:
        return self.eta1 + self.eta2

    @property
    def linewidth(self) -> float:
        return self.eta + self.Gamma

    @property
    def resonance(self) -> float:
        return self.omega_01

    @property
    def is_symmetric(self) -> bool:
        return math.isclose(self.eta1, self.eta2, rel_tol=1e-12, abs_tol=0.0)

    @classmethod
    def symmetric(cls, omega_01: float, eta: float, Gamma: float):
        return cls(omega_01, eta / 2, eta / 2, Gamma)

    @classmethod
    def from_ghz(cls, f_01: float, eta: float, Gamma: float):
        """Symmetric coupling; resonance in GHz, total ``eta`` and ``Gamma`` in 2 pi GHz."""
        return cls.symmetric(f_01 * RATE_UNIT, eta * RATE_UNIT, Gamma * RATE_UNIT)


def _require_symmetric(m: FermionScatterParams) -> None:
    if not m.is_symmetric:
        raise UnsupportedConfigurationError(
            f"closed-form fermion spectra need eta1 == eta2 (got {m.eta1}, {m.eta2})")


def _out(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def boson_transmission(m: BosonScatterParams, omega):
    """T_B = 4 k1 k2 / (4 (w - w_p)^2 + (k + g)^2)."""
    d = np.asarray(omega, dtype=float) - m.omega_p
    return _out(4 * m.kappa1 * m.kappa2 / (4 * d * d + m.linewidth ** 2))


def boson_phase(m: BosonScatterParams, omega):
    """phi_B = arctan(-2 (w - w_p) / (k + g)); zero on resonance."""
    d = np.asarray(omega, dtype=float) - m.omega_p
    return _out(np.arctan(-2 * d / m.linewidth))


def fermion_amplitude(m: FermionScatterParams, omega):
    """t_F = (2 D + i G) / (2 D + i (eta + G)), D = w - w_01."""
    _require_symmetric(m)
    d = np.asarray(omega, dtype=float) - m.omega_01
    return _out((2 * d + 1j * m.Gamma) / (2 * d + 1j * m.linewidth))


def fermion_transmission(m: FermionScatterParams, omega):
    """T_F = (4 D^2 + G^2) / (4 D^2 + (eta + G)^2)."""
    _require_symmetric(m)
    d = np.asarray(omega, dtype=float) - m.omega_01
    return _out((4 * d * d + m.Gamma ** 2) / (4 * d * d + m.linewidth ** 2))


def fermion_phase(m: FermionScatterParams, omega):
    """phi_F = arctan(-(4 D^2 + G (G + eta)) / (2 eta D)).

    The expression is singular at D = 0 where it jumps between +pi/2 and
    -pi/2; the resonance value is set to 0, the phase of the real positive
    amplitude there. Away from resonance this equals
    ``-sign(D) pi/2 - angle(t_F)``.
    """
    _require_symmetric(m)
    d = np.asarray(omega, dtype=float) - m.omega_01
    num = -(4 * d * d + m.Gamma * (m.Gamma + m.eta))
    den = 2 * m.eta * d
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(d == 0, 0.0, np.arctan(num / np.where(d == 0, 1.0, den)))
    return _out(phi)


def fermion_amplitude_phase(m: FermionScatterParams, omega):
    """angle(t_F) in (-pi, pi]; continuous through resonance when Gamma > 0."""
    return _out(np.angle(fermion_amplitude(m, omega)))


def transmission(model, omega):
    if isinstance(model, BosonScatterParams):
        return boson_transmission(model, omega)
    if isinstance(model, FermionScatterParams):
        return fermion_transmission(model, omega)
    raise TypeError(f"unknown scattering model {type(model).__name__}")


def phase(model, omega, convention: str = "formula"):
    """Phase of the transmitted wave.

    ``convention="amplitude"`` returns ``angle(t_F)`` for the fermion model
    instead of the closed-form arctangent; the boson model has one form.
    """
    if isinstance(model, BosonScatterParams):
        return boson_phase(model, omega)
    if isinstance(model, FermionScatterParams):
        if convention == "amplitude":
            return fermion_amplitude_phase(model, omega)
        if convention != "formula":
            raise ValueError(f"unknown phase convention {convention!r}")
        return fermion_phase(model, omega)
    raise TypeError(f"unknown scattering model {type(model).__name__}")


@dataclass(frozen=True, eq=False)
class Spectrum:
    omega: np.ndarray
    transmission: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        if len(self.omega) > 1 and np.any(np.diff(self.omega) <= 0):
            raise ScatteringError("spectrum frequencies must be strictly increasing")

    @property
    def frequency(self) -> np.ndarray:
        """Samples in Hz."""
        return self.omega / (2 * math.pi)

    def __len__(self):
        return len(self.omega)


def sweep_spectrum(model, f_start: float, f_stop: float, n: int,
                   convention: str = "formula") -> Spectrum:
    """Uniform sweep from ``f_start`` to ``f_stop`` (Hz, inclusive) with ``n`` samples."""
    if not f_start < f_stop:
        raise ScatteringError("f_start must be below f_stop")
    if n < 2:
        raise ScatteringError("a sweep needs at least 2 samples")
    omega = 2 * math.pi * np.linspace(f_start, f_stop, n)
    return Spectrum(omega, np.asarray(transmission(model, omega), dtype=float),
                    np.asarray(phase(model, omega, convention), dtype=float))


def quality_factor(model) -> float:
    """Resonance over the FWHM of the transmission feature."""
    width = model.linewidth
    if width <= 0:
        raise ScatteringError("zero linewidth: quality factor undefined")
    return model.resonance / width
