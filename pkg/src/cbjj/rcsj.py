"""Stochastic RCSJ dynamics and switching-current statistics.

The equation of motion is integrated in reduced units: time in units of
1/omega_p(0), energies in units of E_J, currents in units of I_c. In these
units the phase obeys

    delta'' + g delta' + sin(delta) = i(tau) + xi(tau),
    <xi(tau) xi(tau')> = 2 g theta delta(tau - tau'),

with g = 1/(omega_p(0) R_N C) and theta = k_B T / E_J. Johnson noise of the
shunt therefore enters with the two-sided current density 2 k_B T / R_N,
which is what makes the phase thermalise at T.

Integration uses the Gronbech-Jensen--Farago splitting, which reduces to
velocity Verlet (symplectic) for g = 0 and samples the Boltzmann
distribution correctly for finite steps. The inner loops are compiled with
numba; every trial seeds its own generator from ``(master seed, trial index)``
so results do not depend on the thread count.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.integrate import cumulative_trapezoid

from .junction import (JunctionParams, NoWellError, barrier_height, plasma_frequency)

if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

#: default integration step in units of 1/omega_p(0): 50 steps per plasma period
DEFAULT_STEPS_PER_PERIOD = 50


class RCSJError(ValueError):
    pass


class ConfigurationError(RCSJError):
    pass


class ResolutionError(RCSJError):
    pass


class EmptyHistogramWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SweepProtocol:
    """Linear current ramp (the rising edge of a sawtooth).

    ``ramp_rate`` is authoritative. When only ``frequency`` is given the rate
    is ``peak_current * frequency``. ``start_current`` is where simulated
    trials begin; the physical sawtooth starts at zero, but integrating the
    slow part of the ramp is wasted effort.
    """

    peak_current: float
    ramp_rate: float | None = None
    frequency: float | None = None
    start_current: float = 0.0
    n_trials: int = 1000
    waveform: str = "sawtooth"

    def __post_init__(self):
        if self.waveform != "sawtooth":
            raise ConfigurationError(f"unsupported waveform {self.waveform!r}")
        if self.peak_current <= 0:
            raise ConfigurationError("peak_current must be positive")
        if self.ramp_rate is None and self.frequency is None:
            raise ConfigurationError("give ramp_rate or frequency")
        if self.rate <= 0:
            raise ConfigurationError("ramp rate must be positive")
        if not 0 <= self.start_current < self.peak_current:
            raise ConfigurationError("start_current must lie in [0, peak_current)")
        if self.n_trials < 1:
            raise ConfigurationError("n_trials must be >= 1")
        mismatch = self.nominal_rate_mismatch
        if mismatch is not None and mismatch > 0.01:
            warnings.warn(
                f"ramp_rate differs from peak*frequency by {100 * mismatch:.1f}%; "
                "using ramp_rate", stacklevel=2)

    @property
    def rate(self) -> float:
        if self.ramp_rate is not None:
            return self.ramp_rate
        return self.peak_current * self.frequency

    @property
    def nominal_rate_mismatch(self) -> float | None:
        if self.ramp_rate is None or self.frequency is None:
            return None
        nominal = self.peak_current * self.frequency
        return abs(self.ramp_rate - nominal) / nominal


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "johnson"
    temperature: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "johnson"):
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        if self.kind == "johnson" and self.temperature < 0:
            raise ConfigurationError("temperature must be non-negative")


@dataclass(eq=False)
class SwitchingHistogram:
    """Binned switching (jump) currents.

    ``counts`` are integers for Monte Carlo runs and expected counts
    ``n_total * P(bin)`` for the escape-rate method. ``samples`` keeps the raw
    jump currents of a Monte Carlo run (NaN for trials that never switched).
    """

    edges: np.ndarray
    counts: np.ndarray
    n_total: int
    method: str = "langevin"
    samples: np.ndarray | None = None
    density: np.ndarray | None = field(default=None, repr=False)
    density_grid: np.ndarray | None = field(default=None, repr=False)
    survival_at_peak: float = 0.0
    protocol: SweepProtocol | None = None

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def switched(self) -> np.ndarray:
        if self.samples is None:
            raise AttributeError("no raw samples stored")
        return self.samples[np.isfinite(self.samples)]

    @property
    def empty(self) -> bool:
        return float(np.sum(self.counts)) == 0.0

    def quantile(self, q: float) -> float:
        if self.samples is not None:
            return float(np.quantile(self.switched, q))
        cdf = np.concatenate([[0.0], np.cumsum(self.counts)]) / np.sum(self.counts)
        return float(np.interp(q, cdf, self.edges))

    @property
    def mean(self) -> float:
        if self.samples is not None:
            return float(np.mean(self.switched))
        return float(np.sum(self.counts * self.centers) / np.sum(self.counts))

    @property
    def std(self) -> float:
        if self.samples is not None:
            return float(np.std(self.switched))
        mu = self.mean
        return float(np.sqrt(np.sum(self.counts * (self.centers - mu) ** 2) / np.sum(self.counts)))

    @property
    def mode(self) -> float:
        return float(self.centers[np.argmax(self.counts / self.widths)])

    @property
    def max_jump(self) -> float:
        """Largest observed jump current; the 99.9th percentile for rate densities."""
        if self.samples is not None:
            return float(np.max(self.switched))
        return self.quantile(0.999)

    def summary(self) -> dict:
        if self.empty:
            return {"n_total": self.n_total, "n_switched": 0, "method": self.method}
        n_sw = (len(self.switched) if self.samples is not None
                else float(np.sum(self.counts)))
        return {"n_total": self.n_total, "n_switched": n_sw, "method": self.method,
                "mean_A": self.mean, "mode_A": self.mode, "max_jump_A": self.max_jump,
                "std_A": self.std}


# -- deterministic right-hand side -------------------------------------------------

def rcsj_rhs(p: JunctionParams, i_bias: float, state) -> tuple[float, float]:
    """(d delta/dt, d2 delta/dt2) of the noiseless RCSJ equation in SI units.

    ``hbar/2e`` is taken as Phi0/2pi so that the small-oscillation frequency
    is exactly :func:`cbjj.junction.plasma_frequency`.
    """
    if p.normal_resistance is None:
        raise ConfigurationError("RCSJ dynamics need normal_resistance (use math.inf for no damping)")
    delta, ddelta = state
    phi0 = p.constants.reduced_flux_quantum
    damping_current = 0.0 if math.isinf(p.normal_resistance) else phi0 * ddelta / p.normal_resistance
    acc = (i_bias - p.critical_current * math.sin(delta) - damping_current) / (phi0 * p.capacitance)
    return ddelta, acc


def _reduced(p: JunctionParams, temperature: float) -> tuple[float, float]:
    if p.normal_resistance is None:
        raise ConfigurationError("RCSJ dynamics need normal_resistance")
    g = 1.0 / p.quality_factor
    theta = p.constants.boltzmann * temperature / p.josephson_energy
    return g, theta


def _gjf_coefficients(g: float, dt: float) -> tuple[float, float]:
    b = 1.0 / (1.0 + 0.5 * g * dt)
    a = (1.0 - 0.5 * g * dt) * b
    return a, b


@numba.njit(cache=True)
def _trajectory_kernel(x0, v0, s, n_steps, dt, a, b, sigma, seed):
    np.random.seed(seed)
    xs = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    x, v = x0, v0
    xs[0], vs[0] = x, v
    f = s - math.sin(x)
    for n in range(n_steps):
        beta = sigma * np.random.standard_normal() if sigma > 0.0 else 0.0
        x = x + b * dt * v + 0.5 * b * dt * dt * f + 0.5 * b * dt * beta
        fn = s - math.sin(x)
        v = a * v + 0.5 * dt * (a * f + fn) + b * beta
        f = fn
        xs[n + 1], vs[n + 1] = x, v
    return xs, vs


@numba.njit(cache=True)
def _one_trial(seed, s0, s_peak, ramp, dt, a, b, sigma, v_th, window, n_pre):
    np.random.seed(seed)
    x = math.asin(s0)
    v = 0.0
    i = s0
    ring = np.full(window, x)
    f = i - math.sin(x)
    n = 0
    while True:
        beta = sigma * np.random.standard_normal() if sigma > 0.0 else 0.0
        x = x + b * dt * v + 0.5 * b * dt * dt * f + 0.5 * b * dt * beta
        if n >= n_pre:
            i = i + ramp * dt
            if i > s_peak:
                return np.nan
        fn = i - math.sin(x)
        v = a * v + 0.5 * dt * (a * f + fn) + b * beta
        f = fn
        n += 1
        pos = n % window
        if n >= window and (x - ring[pos]) > v_th * window * dt:
            return i
        ring[pos] = x


@numba.njit(cache=True, parallel=True)
def _run_trials(seeds, s0, s_peak, ramp, dt, a, b, sigma, v_th, window, n_pre):
    out = np.empty(len(seeds))
    for k in numba.prange(len(seeds)):
        out[k] = _one_trial(seeds[k], s0, s_peak, ramp, dt, a, b, sigma, v_th, window, n_pre)
    return out


def trial_seeds(master_seed: int, n: int) -> np.ndarray:
    """Per-trial generator seeds derived from ``(master_seed, trial index)``."""
    children = np.random.SeedSequence(master_seed).spawn(n)
    return np.array([c.generate_state(1, np.uint32)[0] for c in children], dtype=np.int64)


def simulate_trajectory(p: JunctionParams, i_bias: float, duration: float, dt: float | None = None,
                        initial_state=(None, 0.0), noise: NoiseModel | None = None):
    """Constant-bias trajectory; returns ``(t, delta, ddelta_dt)`` in SI units.

    ``dt`` and ``duration`` are in seconds. The default step is 1/50 of the
    zero-bias plasma period. ``initial_state[0] = None`` starts at the well
    minimum.
    """
    noise = noise or NoiseModel("none")
    g, theta = _reduced(p, noise.temperature)
    if noise.kind == "none":
        theta = 0.0
    wp0 = p.plasma_frequency_zero_bias
    tau_step = 2 * math.pi / DEFAULT_STEPS_PER_PERIOD if dt is None else dt * wp0
    n_steps = int(round(duration * wp0 / tau_step))
    s = i_bias / p.critical_current
    x0 = initial_state[0]
    if x0 is None:
        if s >= 1:
            raise NoWellError("no well minimum to start from")
        x0 = math.asin(s)
    a, b = _gjf_coefficients(g, tau_step)
    sigma = math.sqrt(2 * g * theta * tau_step)
    xs, vs = _trajectory_kernel(float(x0), float(initial_state[1]) / wp0, s, n_steps, tau_step,
                                a, b, sigma, int(noise.seed))
    t = np.arange(n_steps + 1) * tau_step / wp0
    return t, xs, vs * wp0


@dataclass(frozen=True)
class SwitchDetector:
    """Running-state criterion: mean voltage over ``window_periods`` above ``threshold_voltage``."""

    threshold_voltage: float = 20e-6
    window_periods: float = 3.0


def _trial_setup(p, protocol, noise, detector, dt_periods):
    g, theta = _reduced(p, noise.temperature)
    if noise.kind == "none":
        theta = 0.0
    steps_per_period = 1.0 / dt_periods
    if steps_per_period < DEFAULT_STEPS_PER_PERIOD:
        raise ResolutionError(
            f"time step of 1/{steps_per_period:g} plasma period is too coarse; need <= 1/50")
    wp0 = p.plasma_frequency_zero_bias
    dt = 2 * math.pi * dt_periods
    a, b = _gjf_coefficients(g, dt)
    sigma = math.sqrt(2 * g * theta * dt)
    s0 = protocol.start_current / p.critical_current
    if s0 >= 1:
        raise ConfigurationError("ramp must start below the critical current")
    s_peak = protocol.peak_current / p.critical_current
    ramp = protocol.rate / (p.critical_current * wp0)
    v_th = detector.threshold_voltage / (p.constants.reduced_flux_quantum * wp0)
    window = max(2, int(round(detector.window_periods * steps_per_period)))
    n_pre = int(round(100 * steps_per_period))
    return s0, s_peak, ramp, dt, a, b, sigma, v_th, window, n_pre


def expected_steps(p: JunctionParams, protocol: SweepProtocol,
                   dt_periods: float = 1 / DEFAULT_STEPS_PER_PERIOD) -> float:
    """Integration steps needed for one full ramp (upper bound per trial)."""
    ramp = protocol.rate / (p.critical_current * p.plasma_frequency_zero_bias)
    span = (min(protocol.peak_current, 1.05 * p.critical_current) - protocol.start_current) / p.critical_current
    return 100 / dt_periods + span / (ramp * 2 * math.pi * dt_periods)


def integrate_trial(p: JunctionParams, protocol: SweepProtocol, noise: NoiseModel,
                    trial: int = 0, detector: SwitchDetector = SwitchDetector(),
                    dt_periods: float = 1 / DEFAULT_STEPS_PER_PERIOD) -> float | None:
    """Jump current (A) of one ramp, or ``None`` if the ramp reaches its peak first.

    The trial starts at rest in the well minimum at ``protocol.start_current``
    and is held there for 100 plasma periods before the ramp begins.
    """
    args = _trial_setup(p, protocol, noise, detector, dt_periods)
    seed = trial_seeds(noise.seed, trial + 1)[trial]
    out = _one_trial(seed, *args)
    return None if math.isnan(out) else float(out * p.critical_current)


def _default_edges(lo: float, hi: float, bins: int) -> np.ndarray:
    if hi <= lo:
        pad = max(abs(lo) * 1e-6, 1e-15)
        lo, hi = lo - pad, hi + pad
    return np.linspace(lo, hi, bins + 1)


def switching_histogram(p: JunctionParams, protocol: SweepProtocol, noise: NoiseModel,
                        bins=100, detector: SwitchDetector = SwitchDetector(),
                        dt_periods: float = 1 / DEFAULT_STEPS_PER_PERIOD,
                        max_steps: float = 1e12) -> SwitchingHistogram:
    """Monte Carlo histogram of ``protocol.n_trials`` independent ramps.

    ``bins`` is a bin count (spanning the observed range) or explicit edges
    in A. Runs whose total work would exceed ``max_steps`` integration steps
    are refused.
    """
    work = expected_steps(p, protocol, dt_periods) * protocol.n_trials
    if work > max_steps:
        raise ResolutionError(
            f"~{work:.2e} integration steps requested; raise start_current or the ramp rate")
    args = _trial_setup(p, protocol, noise, detector, dt_periods)
    seeds = trial_seeds(noise.seed, protocol.n_trials)
    samples = _run_trials(seeds, *args) * p.critical_current
    done = samples[np.isfinite(samples)]
    if np.ndim(bins) == 0:
        if len(done):
            edges = _default_edges(done.min(), done.max(), int(bins))
        else:
            edges = _default_edges(protocol.start_current, protocol.peak_current, int(bins))
    else:
        edges = np.asarray(bins, dtype=float)
    counts, _ = np.histogram(done, edges)
    if len(done) == 0:
        warnings.warn("no trial switched before the ramp peak", EmptyHistogramWarning, stacklevel=2)
    return SwitchingHistogram(edges, counts, protocol.n_trials, "langevin", samples,
                              protocol=protocol)


# -- thermal activation ---------------------------------------------------------------

def escape_rate(p: JunctionParams, i_bias, temperature: float):
    """Thermal activation rate (omega_p(I)/2pi) exp(-Delta U(I)/k_B T) in 1/s."""
    if temperature <= 0:
        raise RCSJError("temperature must be positive")
    kt = p.constants.boltzmann * temperature
    i_bias = np.atleast_1d(np.asarray(i_bias, dtype=float))
    out = np.empty_like(i_bias)
    for k, ib in enumerate(i_bias):
        s = ib / p.critical_current
        out[k] = plasma_frequency(p, s) / (2 * math.pi) * math.exp(-barrier_height(p, s) / kt)
    return out if out.size > 1 else float(out[0])


def _rate_curve(p: JunctionParams, s: np.ndarray, temperature: float) -> np.ndarray:
    kt = p.constants.boltzmann * temperature
    du = 2 * p.josephson_energy * (np.sqrt(1 - s * s) - s * np.arccos(s))
    wp = p.plasma_frequency_zero_bias * (1 - s * s) ** 0.25
    return wp / (2 * math.pi) * np.exp(-du / kt)


def escape_rate_distribution(p: JunctionParams, protocol: SweepProtocol, temperature: float,
                             bins=200, n_grid: int = 400001) -> SwitchingHistogram:
    """Switching density from thermal activation during a linear ramp.

    P(I) = Gamma(I)/r * exp(-int_{I0}^{I} Gamma/r dI') with r the ramp rate.
    The density is tabulated on ``n_grid`` points between the ramp start and
    I_c. The probability of surviving to I_c (where the well vanishes) is
    placed in the bin holding I_c and reported as ``survival_at_peak``.
    """
    if temperature <= 0:
        raise RCSJError("temperature must be positive")
    ic = p.critical_current
    i0 = protocol.start_current
    i_top = min(protocol.peak_current, ic)
    grid = np.linspace(i0, i_top, n_grid)
    s = np.minimum(grid / ic, 1.0)
    rate = _rate_curve(p, s, temperature) / protocol.rate
    cum = cumulative_trapezoid(rate, grid, initial=0.0)
    survival = np.exp(-cum)
    density = rate * survival
    s_end = float(survival[-1])
    if np.ndim(bins) == 0:
        cdf = 1 - survival
        total = cdf[-1] if cdf[-1] > 0 else 1.0
        lo = grid[min(np.searchsorted(cdf / total, 1e-12), n_grid - 1)]
        hi = grid[min(np.searchsorted(cdf / total, 1 - 1e-9), n_grid - 1)]
        if s_end > 1e-12 or hi >= i_top:
            hi = i_top
        pad = 0.05 * (hi - lo)
        edges = _default_edges(max(i0, lo - pad), hi if hi == i_top else min(i_top, hi + pad),
                               int(bins))
    else:
        edges = np.asarray(bins, dtype=float)
    s_edges = np.interp(edges, grid, survival, left=1.0, right=s_end)
    prob = s_edges[:-1] - s_edges[1:]
    if protocol.peak_current >= ic and s_end > 0:
        k = np.searchsorted(edges, ic, side="left") - 1
        if 0 <= k < len(prob):
            prob[k] += s_end
    return SwitchingHistogram(edges, protocol.n_trials * prob, protocol.n_trials, "rates",
                              None, density, grid, s_end, protocol)
