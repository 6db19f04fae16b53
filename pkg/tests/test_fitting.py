import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbjj.fitting import (ConvergenceWarning, FitError, IllPosedError, MeasuredTrace,
                          capacitance_from_resonance, fit_boson_spectrum, fit_fermion_spectrum,
                          fit_switching_histogram, histogram_model_counts, levenberg_marquardt)
from cbjj.junction import JunctionError, JunctionParams, plasma_frequency
from cbjj.rcsj import SweepProtocol, SwitchingHistogram, escape_rate_distribution
from cbjj.scattering import (RATE_UNIT, BosonScatterParams, FermionScatterParams, sweep_spectrum)

BOSON = BosonScatterParams.from_ghz(2.595, 0.004, 0.008, 0.0008)
FERMION12 = FermionScatterParams.from_ghz(2.4182, 0.005, 0.0012)
PROTO = SweepProtocol(peak_current=3e-6, ramp_rate=190e-6, n_trials=10000)


def trace_of(model, half_width=10, n=801, rng=None, noise=0.0, phase_noise=0.0):
    f0 = model.resonance / (2 * math.pi)
    w = half_width * model.linewidth / (2 * math.pi)
    spec = sweep_spectrum(model, f0 - w, f0 + w, n)
    t, ph = spec.transmission.copy(), spec.phase.copy()
    if rng is not None:
        t *= 1 + noise * rng.standard_normal(n)
        ph += phase_noise * rng.standard_normal(n)
    return MeasuredTrace(spec.frequency, t, "power", ph)


def rel(a, b):
    return abs(a / b - 1)


# -- optimiser ----------------------------------------------------------------------

def test_lm_rosenbrock():
    fun = lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    res = levenberg_marquardt(fun, [-1.2, 1.0])
    assert res.converged
    assert np.allclose(res.x, [1, 1], atol=1e-6)
    assert np.all(np.diff(res.history) <= 0)


def test_lm_rejects_bad_start():
    with pytest.raises(FitError):
        levenberg_marquardt(lambda x: np.array([np.nan]), [0.0])


def test_lm_iteration_cap_reports_failure():
    fun = lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    res = levenberg_marquardt(fun, [-1.2, 1.0], max_iter=2)
    assert not res.converged and res.iterations == 2


# -- boson ----------------------------------------------------------------------------

def test_boson_noiseless_round_trip():
    res = fit_boson_spectrum(trace_of(BOSON))
    assert res.residual_norm < 1e-10
    for k in ("omega_p", "kappa1", "kappa2", "gamma"):
        assert rel(res.params[k], getattr(BOSON, k)) < 1e-6
    assert res.derived["Q"] == pytest.approx(2.595 / 0.0128, rel=1e-6)


def test_boson_noisy_round_trip():
    rng = np.random.default_rng(0)
    res = fit_boson_spectrum(trace_of(BOSON, rng=rng, noise=0.01, phase_noise=0.01))
    for k in ("omega_p", "kappa1", "kappa2", "gamma"):
        assert rel(res.params[k], getattr(BOSON, k)) < 0.05


def test_boson_peak_only_trace():
    tr = trace_of(BOSON, n=201)
    tr = MeasuredTrace(tr.frequency, tr.magnitude)
    res = fit_boson_spectrum(tr)
    step = tr.frequency[1] - tr.frequency[0]
    f_fit = res.params["omega_p"] / (2 * math.pi)
    assert abs(f_fit - tr.frequency[np.argmax(tr.magnitude)]) <= step


def test_boson_edge_peak_is_ill_posed():
    spec = sweep_spectrum(BOSON, 2.6e9, 2.7e9, 101)
    with pytest.raises(IllPosedError):
        fit_boson_spectrum(MeasuredTrace.from_spectrum(spec))


def test_boson_amplitude_mode_scale_invariance():
    tr = trace_of(BOSON)
    a = fit_boson_spectrum(MeasuredTrace(tr.frequency, tr.magnitude), fit_amplitude=True)
    b = fit_boson_spectrum(MeasuredTrace(tr.frequency, 0.3 * tr.magnitude), fit_amplitude=True)
    assert rel(a.params["omega_p"], b.params["omega_p"]) < 1e-9
    assert rel(a.params["linewidth"], b.params["linewidth"]) < 1e-6
    assert rel(b.params["peak_transmission"], 0.3 * a.params["peak_transmission"]) < 1e-6


def test_boson_decibel_input():
    tr = trace_of(BOSON)
    db = MeasuredTrace(tr.frequency, 10 * np.log10(tr.magnitude), "db", tr.phase)
    res = fit_boson_spectrum(db)
    assert rel(res.params["kappa1"], BOSON.kappa1) < 1e-6


def test_fit_invariant_to_sample_order():
    tr = trace_of(BOSON, rng=np.random.default_rng(2), noise=0.01, phase_noise=0.01)
    perm = np.random.default_rng(3).permutation(len(tr.frequency))
    shuffled = MeasuredTrace(tr.frequency[perm], tr.magnitude[perm], "power", tr.phase[perm])
    a, b = fit_boson_spectrum(tr), fit_boson_spectrum(shuffled)
    for k in a.params:
        assert a.params[k] == b.params[k]


def test_measured_q_round_trip():
    w = BOSON.omega_p / 507
    m = BosonScatterParams(BOSON.omega_p, w / 3, 2 * w / 3, 0.0)
    res = fit_boson_spectrum(trace_of(m))
    assert res.derived["Q"] == pytest.approx(507, rel=1e-6)


def test_uncertainty_scales_with_sample_count():
    sd = []
    for n in (401, 1601):
        runs = [fit_boson_spectrum(trace_of(BOSON, n=n, rng=np.random.default_rng(s), noise=0.01,
                                            phase_noise=0.01)).uncertainties["omega_p"]
                for s in range(5)]
        sd.append(np.mean(runs))
    assert 1.4 < sd[0] / sd[1] < 2.8  # ~sqrt(4) = 2


def test_fit_report_json_units():
    res = fit_boson_spectrum(trace_of(BOSON))
    doc = json.loads(res.to_json())
    assert doc["parameters"]["omega_p"]["unit"] == "rad/s"
    assert doc["derived"]["Q"]["unit"] == "1"
    assert doc["kind"] == "boson"


# -- fermion --------------------------------------------------------------------------

def test_fermion_noiseless_round_trip():
    res = fit_fermion_spectrum(trace_of(FERMION12))
    assert res.residual_norm < 1e-10
    for k in ("omega_01", "eta", "Gamma"):
        assert rel(res.params[k], getattr(FERMION12, k)) < 1e-6


def test_fermion_noisy_round_trip_and_depth():
    rng = np.random.default_rng(5)
    tr = trace_of(FERMION12, rng=rng, noise=0.01, phase_noise=0.01)
    res = fit_fermion_spectrum(tr)
    for k in ("omega_01", "eta", "Gamma"):
        assert rel(res.params[k], getattr(FERMION12, k)) < 0.05
    assert res.derived["dip_depth"] == pytest.approx(tr.magnitude.min(), abs=0.03 * tr.magnitude.min() + 0.005)


def test_fermion_amplitude_mode():
    tr = trace_of(FERMION12)
    res = fit_fermion_spectrum(MeasuredTrace(tr.frequency, 0.5 * tr.magnitude), fit_amplitude=True)
    assert res.params["amplitude"] == pytest.approx(0.5, rel=1e-6)
    assert rel(res.params["eta"], FERMION12.eta) < 1e-5


def test_fermion_edge_dip_is_ill_posed():
    spec = sweep_spectrum(FERMION12, 2.43e9, 2.5e9, 101)
    with pytest.raises(IllPosedError):
        fit_fermion_spectrum(MeasuredTrace.from_spectrum(spec))


# -- calibration ----------------------------------------------------------------------

def test_capacitance_from_resonance():
    c = capacitance_from_resonance(2.595e9, 0.979e-6)
    assert c == pytest.approx(11.18e-12, rel=0.01)
    l_j = 2.07e-15 / (2 * math.pi * 0.979e-6)
    assert l_j == pytest.approx(3.365e-10, rel=1e-3)
    assert capacitance_from_resonance(2 * 2.595e9, 0.979e-6) == pytest.approx(c / 4, rel=1e-14)
    p = JunctionParams(0.979e-6, c)
    assert plasma_frequency(p, 0.0) / (2 * math.pi) == pytest.approx(2.595e9, rel=1e-12)


def test_capacitance_diagnostic_at_high_bias():
    c01 = capacitance_from_resonance(2.4182e9, 0.979e-6, 0.97)
    assert 1e-12 < c01 < 10e-12
    with pytest.raises(JunctionError):
        capacitance_from_resonance(2.4e9, 0.979e-6, 1.0)


# -- switching ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def rates_hist(device):
    return escape_rate_distribution(device, PROTO, 0.05)


def test_switching_noiseless_round_trip(rates_hist):
    res = fit_switching_histogram(rates_hist, PROTO, 0.05)
    assert rel(res.params["critical_current"], 0.979e-6) < 1e-4
    assert rel(res.params["capacitance"], 93e-15) < 0.02


def test_switching_model_reproduces_generator(rates_hist):
    mu = histogram_model_counts(rates_hist, PROTO, 0.05, 93e-15, 0.979e-6)
    big = rates_hist.counts > 1e-3
    assert np.max(np.abs(mu[big] / rates_hist.counts[big] - 1)) < 1e-3


def test_switching_relative_noise(rates_hist):
    rng = np.random.default_rng(7)
    noisy = SwitchingHistogram(rates_hist.edges,
                               rates_hist.counts * (1 + 0.01 * rng.standard_normal(len(rates_hist.counts))),
                               rates_hist.n_total, "rates")
    res = fit_switching_histogram(noisy, PROTO, 0.05, noise="relative")
    assert rel(res.params["critical_current"], 0.979e-6) < 0.05
    assert rel(res.params["capacitance"], 93e-15) < 0.2


def test_switching_ic_tightly_pinned(device):
    # the upper edge of the histogram tracks I_c one for one
    a = escape_rate_distribution(device, PROTO, 0.05)
    b = escape_rate_distribution(device.with_changes(critical_current=1.01 * 0.979e-6), PROTO, 0.05)
    assert rel(b.quantile(0.999) / a.quantile(0.999), 1.01) < 2e-3


def test_switching_spike_and_degenerate():
    edges = np.linspace(0.9e-6, 1.0e-6, 11)
    counts = np.zeros(10, dtype=int)
    counts[7] = 40
    res = fit_switching_histogram(SwitchingHistogram(edges, counts, 40), PROTO, 0.05)
    assert res.params["critical_current"] == pytest.approx(0.975e-6)
    assert math.isnan(res.params["capacitance"])
    with pytest.raises(IllPosedError):
        fit_switching_histogram(SwitchingHistogram(edges[:2], np.array([5]), 5), PROTO, 0.05)
    with pytest.raises(IllPosedError):
        fit_switching_histogram(SwitchingHistogram(edges, np.zeros(10), 0), PROTO, 0.05)


def test_langevin_histogram_fit(device):
    from cbjj.rcsj import NoiseModel, switching_histogram
    proto = SweepProtocol(peak_current=1.2e-6, ramp_rate=14.0, start_current=0.85 * 0.979e-6,
                          n_trials=2000)
    h = switching_histogram(device, proto, NoiseModel("johnson", 0.05, seed=1), bins=40)
    res = fit_switching_histogram(h, proto, 0.05)
    assert rel(res.params["critical_current"], 0.979e-6) < 0.05


# -- properties -----------------------------------------------------------------------

@settings(max_examples=15)
@given(f=st.floats(2.0, 3.0), k1=st.floats(0.001, 0.01), ratio=st.floats(0.5, 3.0),
       g=st.floats(0.0002, 0.005))
def test_boson_noiseless_property(f, k1, ratio, g):
    m = BosonScatterParams.from_ghz(f, k1, ratio * k1, g)
    res = fit_boson_spectrum(trace_of(m), coupling_ratio=ratio)
    for k in ("omega_p", "kappa1", "kappa2", "gamma"):
        assert rel(res.params[k], getattr(m, k)) < 1e-6


@settings(max_examples=15)
@given(f=st.floats(2.0, 3.0), eta=st.floats(0.001, 0.01), gam=st.floats(0.0005, 0.01))
def test_fermion_noiseless_property(f, eta, gam):
    m = FermionScatterParams.from_ghz(f, eta, gam)
    res = fit_fermion_spectrum(trace_of(m))
    for k in ("omega_01", "eta", "Gamma"):
        assert rel(res.params[k], getattr(m, k)) < 1e-6
    assert np.all(np.diff(res.history) <= 0)
