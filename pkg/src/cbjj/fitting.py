"""Least-squares calibration of scattering spectra and switching histograms.

All fits go through :func:`levenberg_marquardt`, a small damped Gauss-Newton
solver with a forward-difference Jacobian. It records the cost of every
accepted step, which makes the descent easy to audit.

Rates are fitted in logarithmic form so they stay positive. Frequencies are
handled internally in GHz and rates in 2 pi GHz to keep the problem well
scaled; results are returned in SI (rad/s, F, A).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .junction import BiasPoint, JunctionParams, JunctionError, _as_bias
from .rcsj import SweepProtocol, SwitchingHistogram, _rate_curve
from .scattering import (RATE_UNIT, BosonScatterParams, FermionScatterParams,
                         boson_transmission, fermion_transmission, boson_phase,
                         fermion_phase, quality_factor)


class FitError(RuntimeError):
    pass


class IllPosedError(FitError):
    pass


class ConvergenceWarning(UserWarning):
    pass


# -- optimiser ----------------------------------------------------------------------

@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    jacobian: np.ndarray
    residual: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    message: str = ""


def _fd_jacobian(fun, x, r0, rel_step=1.5e-8):
    jac = np.empty((len(r0), len(x)))
    for k in range(len(x)):
        h = rel_step * max(1.0, abs(x[k]))
        xk = x.copy()
        xk[k] += h
        jac[:, k] = (fun(xk) - r0) / h
    return jac


def levenberg_marquardt(fun, x0, max_iter: int = 500, xtol: float = 1e-10,
                        ftol: float = 1e-15, lam0: float = 1e-3) -> LMResult:
    """Minimise 0.5 * ||fun(x)||^2.

    Stops when the relative step falls below ``xtol``, the relative cost
    change below ``ftol``, or after ``max_iter`` accepted-or-rejected
    iterations.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(fun(x), dtype=float)
    cost = 0.5 * float(r @ r)
    if not math.isfinite(cost):
        raise FitError("non-finite residuals at the starting point")
    history = [cost]
    lam = lam0
    jac = _fd_jacobian(fun, x, r)
    for it in range(1, max_iter + 1):
        g = jac.T @ r
        a = jac.T @ jac
        diag = np.maximum(np.diag(a), 1e-300)
        try:
            step = -np.linalg.solve(a + lam * np.diag(diag), g)
        except np.linalg.LinAlgError:
            lam *= 10
            continue
        x_new = x + step
        r_new = np.asarray(fun(x_new), dtype=float)
        cost_new = 0.5 * float(r_new @ r_new)
        if math.isfinite(cost_new) and cost_new <= cost:
            small_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol)
            small_cost = cost - cost_new <= ftol * cost
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            lam = max(lam / 3, 1e-12)
            if small_step or small_cost or cost == 0.0:
                return LMResult(x, cost, _fd_jacobian(fun, x, r), r, it, True, history,
                                "converged")
            jac = _fd_jacobian(fun, x, r)
        else:
            lam *= 4
            if lam > 1e16:
                return LMResult(x, cost, jac, r, it, True, history,
                                "no further decrease possible")
    return LMResult(x, cost, jac, r, max_iter, False, history, "maximum iterations reached")


# -- data containers ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeasuredTrace:
    """A transmission trace.

    ``scale`` declares how ``magnitude`` is expressed: ``"power"`` (|S21|^2,
    alias ``"linear"``), ``"amplitude"`` (|S21|) or ``"db"`` (10 log10 of the
    power). Samples are sorted by frequency on construction.
    """

    frequency: np.ndarray
    magnitude: np.ndarray
    scale: str = "power"
    phase: np.ndarray | None = None

    def __post_init__(self):
        if self.scale not in ("power", "linear", "amplitude", "db"):
            raise ValueError(f"unknown magnitude scale {self.scale!r}")
        f = np.asarray(self.frequency, dtype=float)
        m = np.asarray(self.magnitude, dtype=float)
        if f.shape != m.shape or f.ndim != 1:
            raise ValueError("frequency and magnitude must be 1-D arrays of equal length")
        order = np.argsort(f, kind="stable")
        object.__setattr__(self, "frequency", f[order])
        object.__setattr__(self, "magnitude", m[order])
        if self.phase is not None:
            ph = np.asarray(self.phase, dtype=float)
            if ph.shape != f.shape:
                raise ValueError("phase must match frequency")
            object.__setattr__(self, "phase", ph[order])
        if np.any(np.diff(self.frequency) <= 0):
            raise ValueError("trace frequencies must be distinct")

    @property
    def transmission(self) -> np.ndarray:
        """Power transmission on a linear scale."""
        if self.scale == "db":
            return 10 ** (self.magnitude / 10)
        if self.scale == "amplitude":
            return self.magnitude ** 2
        return self.magnitude

    @classmethod
    def from_spectrum(cls, spectrum, with_phase: bool = True) -> "MeasuredTrace":
        return cls(spectrum.frequency, spectrum.transmission, "power",
                   spectrum.phase if with_phase else None)


_UNITS = {"omega_p": "rad/s", "omega_01": "rad/s", "kappa1": "rad/s", "kappa2": "rad/s",
          "gamma": "rad/s", "eta": "rad/s", "Gamma": "rad/s", "linewidth": "rad/s",
          "amplitude": "1", "peak_transmission": "1", "Q": "1",
          "capacitance": "F", "critical_current": "A"}


@dataclass
class FitResult:
    params: dict
    uncertainties: dict
    residual_norm: float
    converged: bool
    iterations: int
    model: object = None
    derived: dict = field(default_factory=dict)
    history: list = field(default_factory=list, repr=False)
    kind: str = ""

    def to_dict(self) -> dict:
        def entry(name, value, err=None):
            out = {"value": value, "unit": _UNITS.get(name, "")}
            if err is not None:
                out["uncertainty"] = err
            return out

        return {
            "kind": self.kind,
            "parameters": {k: entry(k, v, self.uncertainties.get(k)) for k, v in self.params.items()},
            "derived": {k: entry(k, v) for k, v in self.derived.items()},
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _covariance(res: LMResult, n_data: int) -> np.ndarray:
    dof = max(n_data - len(res.x), 1)
    s2 = 2 * res.cost / dof
    jtj = res.jacobian.T @ res.jacobian
    try:
        return np.linalg.pinv(jtj) * s2
    except np.linalg.LinAlgError:
        return np.full((len(res.x), len(res.x)), np.nan)


def _wrap_half_pi(x):
    """Map angle differences onto [-pi/2, pi/2): arctan phases are defined mod pi."""
    return (x + np.pi / 2) % np.pi - np.pi / 2


def _fwhm(x, y, peak_index, level):
    """Width between the crossings of ``level`` either side of ``peak_index``."""
    above = y >= level if y[peak_index] >= level else y <= level
    lo = peak_index
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = peak_index
    while hi < len(y) - 1 and above[hi + 1]:
        hi += 1
    return max(x[hi] - x[lo], x[1] - x[0])


def _finish(res: LMResult, kind: str) -> None:
    if not res.converged:
        warnings.warn(f"{kind} fit did not converge ({res.message}); returning best-so-far",
                      ConvergenceWarning, stacklevel=3)


# -- boson ----------------------------------------------------------------------------

def fit_boson_spectrum(trace: MeasuredTrace, guess: BosonScatterParams | None = None,
                       coupling_ratio: float | None = None, fit_amplitude: bool = False,
                       use_phase: bool = True, max_iter: int = 500) -> FitResult:
    """Fit the Lorentzian peak (and phase, when present) of a low-bias trace.

    A transmission peak fixes only the resonance, the product kappa1*kappa2
    and the total width kappa1 + kappa2 + gamma. The individual rates are
    resolved with ``coupling_ratio = kappa2/kappa1``, taken from ``guess``
    when given and 2 otherwise. With ``fit_amplitude`` a free scale factor
    absorbs insertion loss; the rates are then not separable and only the
    resonance, width and peak height are returned.
    """
    f = trace.frequency / 1e9
    y = trace.transmission
    ipk = int(np.argmax(y))
    if ipk == 0 or ipk == len(y) - 1:
        raise IllPosedError("transmission maximum lies on the edge of the frequency window")
    if coupling_ratio is None:
        coupling_ratio = guess.kappa2 / guess.kappa1 if guess is not None else 2.0
    r_ratio = float(coupling_ratio)
    if r_ratio <= 0:
        raise ValueError("coupling_ratio must be positive")
    phase = trace.phase if (use_phase and trace.phase is not None) else None

    if guess is not None:
        x0, w0 = guess.omega_p / RATE_UNIT, guess.linewidth / RATE_UNIT
        k10, g0 = guess.kappa1 / RATE_UNIT, guess.gamma / RATE_UNIT
        h0 = 4 * guess.kappa1 * guess.kappa2 / guess.linewidth ** 2
    else:
        x0 = f[ipk]
        h0 = y[ipk]
        w0 = _fwhm(f, y, ipk, 0.5 * h0)
        k10 = math.sqrt(max(h0, 1e-12) * w0 * w0 / (4 * r_ratio))
        g0 = max(w0 - k10 * (1 + r_ratio), 0.05 * w0)

    if fit_amplitude:
        def model(p):
            xc, lw, lh = p
            w = math.exp(lw)
            return math.exp(lh) * w * w / (4 * (f - xc) ** 2 + w * w), w, xc
        start = np.array([x0, math.log(w0), math.log(max(h0, 1e-12))])
    else:
        def model(p):
            xc, lk1, lg = p
            k1, g = math.exp(lk1), math.exp(lg)
            w = k1 * (1 + r_ratio) + g
            return 4 * r_ratio * k1 * k1 / (4 * (f - xc) ** 2 + w * w), w, xc
        start = np.array([x0, math.log(k10), math.log(max(g0, 1e-9 * w0))])

    def residual(p):
        t, w, xc = model(p)
        res = t - y
        if phase is not None:
            res = np.concatenate([res, _wrap_half_pi(np.arctan(-2 * (f - xc) / w) - phase)])
        return res

    res = levenberg_marquardt(residual, start, max_iter=max_iter)
    _finish(res, "boson")
    cov = _covariance(res, len(res.residual))
    sd = np.sqrt(np.maximum(np.diag(cov), 0))
    xc = res.x[0]
    if fit_amplitude:
        w = math.exp(res.x[1])
        params = {"omega_p": xc * RATE_UNIT, "linewidth": w * RATE_UNIT,
                  "peak_transmission": math.exp(res.x[2])}
        errs = {"omega_p": sd[0] * RATE_UNIT, "linewidth": w * sd[1] * RATE_UNIT,
                "peak_transmission": params["peak_transmission"] * sd[2]}
        fitted = None
        q = xc / w
    else:
        k1, g = math.exp(res.x[1]), math.exp(res.x[2])
        fitted = BosonScatterParams(xc * RATE_UNIT, k1 * RATE_UNIT, r_ratio * k1 * RATE_UNIT,
                                    g * RATE_UNIT)
        params = {"omega_p": fitted.omega_p, "kappa1": fitted.kappa1, "kappa2": fitted.kappa2,
                  "gamma": fitted.gamma}
        errs = {"omega_p": sd[0] * RATE_UNIT, "kappa1": fitted.kappa1 * sd[1],
                "kappa2": fitted.kappa2 * sd[1], "gamma": fitted.gamma * sd[2]}
        q = quality_factor(fitted)
    return FitResult(params, errs, float(np.linalg.norm(res.residual)), res.converged,
                     res.iterations, fitted, {"Q": q}, res.history, "boson")


# -- fermion --------------------------------------------------------------------------

def fit_fermion_spectrum(trace: MeasuredTrace, guess: FermionScatterParams | None = None,
                         fit_amplitude: bool = False, use_phase: bool = True,
                         max_iter: int = 500) -> FitResult:
    """Fit the resonant dip of a near-critical trace (symmetric coupling).

    Phase residuals are compared modulo pi, where the closed-form phase is
    continuous through resonance except for its conventional value 0 at the
    exact resonance sample. Phase samples left more than
    ``max(6 sigma, pi/8)`` off a first fit (sigma from the median absolute
    deviation) are dropped and the fit is repeated.
    """
    f = trace.frequency / 1e9
    y = trace.transmission
    imin = int(np.argmin(y))
    if imin == 0 or imin == len(y) - 1:
        raise IllPosedError("transmission minimum lies on the edge of the frequency window")
    phase = trace.phase if (use_phase and trace.phase is not None) else None

    if guess is not None:
        x0, e0, g0 = guess.omega_01 / RATE_UNIT, guess.eta / RATE_UNIT, guess.Gamma / RATE_UNIT
        a0 = 1.0
    else:
        a0 = float(max(y[0], y[-1]))
        depth = max(y[imin] / a0, 1e-6)
        x0 = f[imin]
        w0 = _fwhm(f, y, imin, 0.5 * (a0 + y[imin]))
        g0 = max(w0 * math.sqrt(depth), 1e-3 * w0)
        e0 = max(w0 - g0, 1e-3 * w0)

    keep = None if phase is None else np.ones(len(phase), dtype=bool)

    def phase_residual(p):
        xc, e, g = p[0], math.exp(p[1]), math.exp(p[2])
        d = f - xc
        # -pi/2 - arg(t_F) equals the closed form modulo pi and is smooth
        model = -np.pi / 2 - np.angle((2 * d + 1j * g) / (2 * d + 1j * (e + g)))
        return _wrap_half_pi(model - phase)

    def residual(p):
        xc, le, lg = p[:3]
        e, g = math.exp(le), math.exp(lg)
        d = f - xc
        t = (4 * d * d + g * g) / (4 * d * d + (e + g) ** 2)
        if fit_amplitude:
            t = t * math.exp(p[3])
        res = t - y
        if phase is not None:
            res = np.concatenate([res, phase_residual(p)[keep]])
        return res

    start = [x0, math.log(e0), math.log(g0)]
    if fit_amplitude:
        start.append(math.log(a0))
    res = levenberg_marquardt(residual, np.array(start), max_iter=max_iter)
    if phase is not None:
        r = np.abs(phase_residual(res.x))
        sigma = 1.4826 * np.median(r)
        outliers = r > max(6 * sigma, np.pi / 8)
        if outliers.any() and not outliers.all():
            keep = ~outliers
            res = levenberg_marquardt(residual, res.x, max_iter=max_iter)
    _finish(res, "fermion")
    cov = _covariance(res, len(res.residual))
    sd = np.sqrt(np.maximum(np.diag(cov), 0))
    e, g = math.exp(res.x[1]), math.exp(res.x[2])
    fitted = FermionScatterParams.symmetric(res.x[0] * RATE_UNIT, e * RATE_UNIT, g * RATE_UNIT)
    params = {"omega_01": fitted.omega_01, "eta": fitted.eta, "Gamma": fitted.Gamma}
    errs = {"omega_01": sd[0] * RATE_UNIT, "eta": fitted.eta * sd[1], "Gamma": fitted.Gamma * sd[2]}
    if fit_amplitude:
        params["amplitude"] = math.exp(res.x[3])
        errs["amplitude"] = params["amplitude"] * sd[3]
    derived = {"Q": quality_factor(fitted), "dip_depth": (g / (e + g)) ** 2}
    return FitResult(params, errs, float(np.linalg.norm(res.residual)), res.converged,
                     res.iterations, fitted, derived, res.history, "fermion")


# -- calibration ----------------------------------------------------------------------

def capacitance_from_resonance(f_res: float, i_c: float, b=0.0,
                               params: JunctionParams | None = None) -> float:
    """Capacitance that puts the plasma resonance at ``f_res`` (Hz).

    Inverts omega_p(I_b) = (1 - s^2)^(1/4) / sqrt(L_J C).
    """
    s = _as_bias(b).ratio
    if s >= 1:
        raise JunctionError("bias ratio must be below 1")
    if f_res <= 0 or i_c <= 0:
        raise JunctionError("f_res and i_c must be positive")
    phi0 = (params.constants if params is not None else JunctionParams(1, 1).constants).reduced_flux_quantum
    l_j = phi0 / i_c
    return math.sqrt(1 - s * s) / (l_j * (2 * math.pi * f_res) ** 2)


# -- switching histograms -------------------------------------------------------------

def _deviance_residuals(observed, expected):
    expected = np.maximum(expected, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(observed > 0, observed * np.log(observed / expected), 0.0)
    dev = 2 * (term - (observed - expected))
    return np.sign(observed - expected) * np.sqrt(np.maximum(dev, 0.0))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _panel_integrals(fun, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gauss-Legendre integral of ``fun`` over each interval [a_k, b_k]."""
    half = 0.5 * (b - a)
    x = 0.5 * (a + b)[:, None] + half[:, None] * _GL_NODES[None, :]
    return half * (fun(x) @ _GL_WEIGHTS)


def histogram_model_counts(hist: SwitchingHistogram, protocol: SweepProtocol,
                           temperature: float, capacitance: float, critical_current: float,
                           n_grid: int = 20001) -> np.ndarray:
    """Expected counts per bin of ``hist`` under thermal activation.

    The escape integral is evaluated bin by bin with Gauss-Legendre
    quadrature, so the counts are smooth in the parameters and the far
    tails are free of cancellation. ``n_grid`` sets the number of panels
    used below the first bin. Probabilities are conditioned on switching
    inside the histogram range.
    """
    edges = np.asarray(hist.edges, dtype=float)
    ic = critical_current
    p = JunctionParams(ic, capacitance)
    start = min(max(protocol.start_current, 0.0), edges[0])
    if start >= ic:
        return np.zeros(len(edges) - 1)
    rate = protocol.rate

    def gamma(i):
        return _rate_curve(p, np.clip(i / ic, 0.0, 1.0), temperature) / rate

    n_pre = max(1, min(int(n_grid) // 100, 2000))
    pre = np.linspace(start, min(edges[0], ic), n_pre + 1)
    c0 = float(np.sum(_panel_integrals(gamma, pre[:-1], pre[1:]))) if edges[0] > start else 0.0
    lo, hi = np.minimum(edges[:-1], ic), np.minimum(edges[1:], ic)
    dc = np.where(hi > lo, _panel_integrals(gamma, lo, np.maximum(hi, lo)), 0.0)
    cum = c0 + np.concatenate([[0.0], np.cumsum(dc)])
    prob = np.exp(-cum[:-1]) * -np.expm1(-dc)
    if edges[-1] >= ic:
        # the well vanishes at I_c: the remaining mass switches there
        k = min(int(np.searchsorted(edges, ic, side="left")) - 1, len(prob) - 1)
        if k >= 0:
            prob[k] += math.exp(-cum[-1])
    total = prob.sum()
    if total <= 0:
        return np.zeros_like(prob)
    return float(np.sum(hist.counts)) * prob / total


def _log_ratio_residuals(observed, expected, floor):
    keep = observed > floor
    return np.log(observed[keep] / np.maximum(expected[keep], 1e-300))


def fit_switching_histogram(hist: SwitchingHistogram, protocol: SweepProtocol, temperature: float,
                            guess: JunctionParams | None = None, max_iter: int = 500,
                            noise: str = "poisson", n_grid: int = 20001,
                            min_count: float = 1e-6) -> FitResult:
    """Fit (C_J, I_c) to a switching histogram by binned maximum likelihood.

    ``noise="poisson"`` (raw counts) minimises the Poisson deviance.
    ``noise="relative"`` assumes log-normal scatter of a fixed relative size
    in every populated bin, as for averaged or rescaled histograms; the
    likelihood is then least squares on log(observed/expected) over bins
    holding more than ``min_count``; sparser bins are below the rounding
    floor of the model and carry no information.

    C_J enters only through the attempt frequency, so it is far less
    constrained than I_c. With raw counts of a 10^4-trial run its relative
    uncertainty is of order unity. A histogram whose counts sit in a single
    bin is the zero-temperature limit: I_c is the bin centre and C_J is not
    identifiable (NaN).
    """
    if noise not in ("poisson", "relative"):
        raise ValueError(f"unknown noise model {noise!r}")
    counts = np.asarray(hist.counts, dtype=float)
    if len(counts) < 2:
        raise IllPosedError("histogram needs at least two bins")
    if counts.sum() <= 0:
        raise IllPosedError("histogram is empty")
    nonzero = np.flatnonzero(counts)
    if len(nonzero) == 1:
        ic = float(hist.centers[nonzero[0]])
        return FitResult({"critical_current": ic, "capacitance": math.nan},
                         {"critical_current": float(hist.widths[nonzero[0]]) / 2,
                          "capacitance": math.nan},
                         0.0, True, 0, None, {}, [], "switching")

    if guess is None:
        ic0 = float(hist.edges[-1] + 2 * (hist.edges[-1] - hist.centers[np.argmax(counts)]))
        c0 = 100e-15
    else:
        ic0, c0 = guess.critical_current, guess.capacitance
    scale = ic0

    def make_residual(objective):
        n_res = len(objective(counts, counts))

        def residual(p):
            ic = p[0] * scale
            c = math.exp(p[1]) * 1e-13
            if ic <= hist.edges[0]:
                return np.full(n_res, 1e6)
            return objective(counts, histogram_model_counts(hist, protocol, temperature, c, ic, n_grid))
        return residual

    start = np.array([ic0 / scale, math.log(c0 / 1e-13)])
    # The deviance is smooth enough to reach the right valley from a rough
    # start; the log-ratio objective is then refined from there.
    res = levenberg_marquardt(make_residual(_deviance_residuals), start, max_iter=max_iter)
    if noise == "relative":
        res = levenberg_marquardt(
            make_residual(lambda o, e: _log_ratio_residuals(o, e, min_count)), res.x,
            max_iter=max_iter)
    _finish(res, "switching")
    cov = _covariance(res, len(res.residual))
    sd = np.sqrt(np.maximum(np.diag(cov), 0))
    ic, c = res.x[0] * scale, math.exp(res.x[1]) * 1e-13
    params = {"critical_current": ic, "capacitance": c}
    errs = {"critical_current": sd[0] * scale, "capacitance": c * sd[1]}
    return FitResult(params, errs, float(np.linalg.norm(res.residual)), res.converged,
                     res.iterations, JunctionParams(ic, c), {"objective": 2 * res.cost},
                     res.history, "switching")
