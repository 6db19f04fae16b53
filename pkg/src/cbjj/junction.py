"""Closed-form analytics of the tilted-washboard potential.

All quantities are SI: energies in J, currents in A, capacitances in F and
angular frequencies in rad/s. Conversion to GHz/uA/pF happens in the I/O layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.constants as cs


class JunctionError(ValueError):
    """Raised for invalid junction parameters or arguments."""


class NoWellError(JunctionError):
    """Raised when the bias leaves no metastable well (running state)."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants used throughout the package.

    The flux quantum is pinned to the rounded 2.07e-15 Wb value; h/(2e) from
    CODATA differs from it by about 0.1%.
    """

    flux_quantum: float = 2.07e-15
    hbar: float = cs.hbar
    electron_charge: float = cs.e
    boltzmann: float = cs.k
    vacuum_permittivity: float = cs.epsilon_0

    @property
    def reduced_flux_quantum(self) -> float:
        """Phi0 / (2 pi)."""
        return self.flux_quantum / (2 * math.pi)


CONSTANTS = PhysicalConstants()

# vacuum permittivity used for the plate-capacitor estimate in the source device
ROUNDED_EPSILON_0 = 1e-12


@dataclass(frozen=True)
class JunctionParams:
    critical_current: float
    capacitance: float
    normal_resistance: float | None = None
    constants: PhysicalConstants = CONSTANTS

    def __post_init__(self):
        if not (math.isfinite(self.critical_current) and self.critical_current > 0):
            raise JunctionError(f"critical_current must be > 0, got {self.critical_current!r}")
        if not (math.isfinite(self.capacitance) and self.capacitance > 0):
            raise JunctionError(f"capacitance must be > 0, got {self.capacitance!r}")
        if self.normal_resistance is not None and not self.normal_resistance > 0:
            raise JunctionError(
                f"normal_resistance must be > 0 when given, got {self.normal_resistance!r}")

    @property
    def josephson_energy(self) -> float:
        """E_J = I_c Phi0 / (2 pi) in J."""
        return self.critical_current * self.constants.reduced_flux_quantum

    @property
    def inductance(self) -> float:
        """Josephson inductance L_J = Phi0 / (2 pi I_c) in H."""
        return self.constants.reduced_flux_quantum / self.critical_current

    @property
    def mass(self) -> float:
        """Effective mass of the phase particle, C (Phi0/2pi)^2."""
        return self.capacitance * self.constants.reduced_flux_quantum ** 2

    @property
    def plasma_frequency_zero_bias(self) -> float:
        return 1.0 / math.sqrt(self.inductance * self.capacitance)

    @property
    def quality_factor(self) -> float:
        """RCSJ damping quality factor omega_p(0) R_N C."""
        if self.normal_resistance is None:
            return math.inf
        return self.plasma_frequency_zero_bias * self.normal_resistance * self.capacitance

    def with_changes(self, **kwargs) -> "JunctionParams":
        fields = dict(critical_current=self.critical_current, capacitance=self.capacitance,
                      normal_resistance=self.normal_resistance, constants=self.constants)
        fields.update(kwargs)
        return JunctionParams(**fields)


@dataclass(frozen=True)
class BiasPoint:
    """Bias current expressed as the ratio s = I_b / I_c.

    Any finite non-negative ratio can be represented; ratios >= 1 are the
    running state and are rejected by every trap operation.
    """

    ratio: float

    def __post_init__(self):
        if not (math.isfinite(self.ratio) and self.ratio >= 0):
            raise JunctionError(f"bias ratio must be finite and >= 0, got {self.ratio!r}")

    @property
    def is_running(self) -> bool:
        return self.ratio >= 1.0

    @classmethod
    def from_current(cls, bias_current: float, params: JunctionParams) -> "BiasPoint":
        return cls(bias_current / params.critical_current)


def _as_bias(b) -> BiasPoint:
    return b if isinstance(b, BiasPoint) else BiasPoint(float(b))


def _trap_ratio(b) -> float:
    b = _as_bias(b)
    if b.is_running:
        raise NoWellError(f"bias ratio {b.ratio} >= 1: no bound well exists")
    return b.ratio


def washboard_potential(p: JunctionParams, b, delta):
    """U(delta) = -E_J (s delta + cos delta).

    Accepts scalar or array ``delta``; the formula holds for any bias, so the
    running state is allowed here.
    """
    s = _as_bias(b).ratio
    delta = np.asarray(delta, dtype=float)
    if not np.all(np.isfinite(delta)):
        raise JunctionError("delta must be finite")
    u = -p.josephson_energy * (s * delta + np.cos(delta))
    return float(u) if u.ndim == 0 else u


def potential_derivative(p: JunctionParams, b, delta):
    """dU/d(delta) = -E_J (s - sin delta)."""
    s = _as_bias(b).ratio
    return -p.josephson_energy * (s - np.sin(delta))


def potential_curvature(p: JunctionParams, b, delta):
    """d2U/d(delta)2 = E_J cos delta (independent of the tilt)."""
    return p.josephson_energy * np.cos(delta)


def well_extrema(p: JunctionParams, b, k: int = 0) -> tuple[float, float]:
    """Minimum and the following barrier top of the k-th well.

    Returns ``(delta_min, delta_max)`` with delta_min = 2 k pi + arcsin(s) and
    delta_max = (2k + 1) pi - arcsin(s).
    """
    s = _trap_ratio(b)
    if k < 0 or int(k) != k:
        raise JunctionError(f"well index must be a non-negative integer, got {k!r}")
    a = math.asin(s)
    delta_min = 2 * k * math.pi + a
    delta_max = (2 * k + 1) * math.pi - a
    if not (potential_curvature(p, s, delta_min) > 0 > potential_curvature(p, s, delta_max)):
        # only reachable at s == 1 up to rounding; guarded by _trap_ratio
        raise NoWellError(f"degenerate extrema at bias ratio {s}")
    return delta_min, delta_max


def barrier_height(p: JunctionParams, b) -> float:
    """Delta U = 2 E_J (sqrt(1 - s^2) - s arccos s)."""
    s = _trap_ratio(b)
    return 2 * p.josephson_energy * (math.sqrt(1 - s * s) - s * math.acos(s))


def plasma_frequency(p: JunctionParams, b) -> float:
    """Small-oscillation frequency at the well bottom, omega_p(0) (1 - s^2)^(1/4)."""
    s = _trap_ratio(b)
    return p.plasma_frequency_zero_bias * (1 - s * s) ** 0.25


def ambegaokar_baratoff_ic(normal_resistance: float, gap: float,
                           constants: PhysicalConstants = CONSTANTS) -> float:
    """Critical current pi Delta / (2 e R_N) for a gap given in eV."""
    if not (normal_resistance > 0 and gap > 0):
        raise JunctionError("normal_resistance and gap must be positive")
    gap_joules = gap * constants.electron_charge
    return math.pi * gap_joules / (2 * constants.electron_charge * normal_resistance)


def plate_capacitance(area: float, thickness: float, relative_permittivity: float,
                      vacuum_permittivity: float | None = None,
                      rounded_epsilon: bool = False) -> float:
    """Parallel-plate estimate eps_r eps_0 A / d.

    ``vacuum_permittivity`` defaults to the CODATA value. ``rounded_epsilon``
    substitutes the rounded 1e-12 F/m of the original device estimate.
    """
    if vacuum_permittivity is None:
        vacuum_permittivity = ROUNDED_EPSILON_0 if rounded_epsilon else CONSTANTS.vacuum_permittivity
    if not (area > 0 and thickness > 0 and relative_permittivity > 0 and vacuum_permittivity > 0):
        raise JunctionError("area, thickness and permittivities must be positive")
    return relative_permittivity * vacuum_permittivity * area / thickness
