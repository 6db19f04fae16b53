import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from cbjj.boundstates import (GridSpec, LevelRangeError, ResolutionError, anharmonicity_ratio,
                              build_hamiltonian, charge_matrix_element, convergence_check,
                              count_bound_states, level_table, overlap_matrix,
                              phase_matrix_element, sign_changes, solve_bound_states,
                              sturm_count, transition_frequency)
from cbjj.junction import JunctionParams, NoWellError, washboard_potential, well_extrema


@pytest.fixture(scope="module")
def sol0(calibrated):
    return solve_bound_states(calibrated, 0.0, n_levels=6)


@pytest.fixture(scope="module")
def sol955(calibrated):
    return solve_bound_states(calibrated, 0.955, n_levels=4)


def oscillator_length(p):
    return math.sqrt(p.constants.hbar / (2 * p.mass * p.plasma_frequency_zero_bias))


# -- grid and Hamiltonian -------------------------------------------------------

@pytest.mark.parametrize("n", [200, 1000, 101])
def test_grid_spec_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        GridSpec(n_points=n)


def test_refined_grid_halves_step(calibrated):
    g = GridSpec(2001)
    x, xf = g.points(calibrated, 0.3), g.refined().points(calibrated, 0.3)
    assert xf[0] == x[0] and xf[-1] == x[-1]
    assert (xf[1] - xf[0]) == pytest.approx((x[1] - x[0]) / 2, rel=1e-12)


def test_barrier_top_is_interior(calibrated):
    x = GridSpec().points(calibrated, 0.9)
    _, dmax = well_extrema(calibrated, 0.9)
    assert x[0] < dmax < x[-1]


def test_diagonal_at_well_bottom(calibrated):
    g = GridSpec(2001, span_left=math.pi + 0.5)  # symmetric window, centre point at 0
    ham = build_hamiltonian(calibrated, 0.0, g, n_levels=2)
    k = int(np.argmin(np.abs(ham.grid)))
    assert abs(ham.grid[k]) < 1e-12
    expected = calibrated.constants.hbar ** 2 / (calibrated.mass * ham.step ** 2)
    assert ham.diagonal[k] == pytest.approx(expected + washboard_potential(calibrated, 0, 0.0),
                                            rel=1e-12)


def test_hamiltonian_symmetric():
    p = JunctionParams(1e-6, 1e-13)
    h = build_hamiltonian(p, 0.5, GridSpec(401), n_levels=1).dense()
    assert np.max(np.abs(h - h.T)) == 0.0


def test_harmonic_surrogate_ground_state(calibrated):
    p = calibrated
    wp = p.plasma_frequency_zero_bias
    g = GridSpec(20001, span_left=1.0, span_right=1.0)
    ham = build_hamiltonian(p, 0.0, g, potential=lambda x: 0.5 * p.mass * wp ** 2 * x ** 2)
    e0 = eigh_tridiagonal(ham.diagonal, ham.off_diagonal, eigvals_only=True,
                          select="i", select_range=(0, 0))[0]
    assert e0 == pytest.approx(p.constants.hbar * wp / 2, rel=1e-4)


def test_coarse_grid_is_resolution_error(calibrated):
    with pytest.raises(ResolutionError):
        solve_bound_states(calibrated, 0.0, GridSpec(201), n_levels=6)


def test_running_state_is_rejected(calibrated):
    with pytest.raises(NoWellError):
        solve_bound_states(calibrated, 1.0)


def test_sturm_count_matches_dense_spectrum():
    rng = np.random.default_rng(3)
    d, e = rng.normal(size=50), rng.normal(size=49)
    w = np.linalg.eigvalsh(np.diag(d) + np.diag(e, 1) + np.diag(e, -1))
    for v in (-2.0, 0.0, 0.7, 3.0):
        assert sturm_count(d, e, v) == np.sum(w < v)


# -- solutions ------------------------------------------------------------------

def test_ground_splitting_at_zero_bias(sol0):
    hw01 = sol0.hbar * transition_frequency(sol0, 0, 1)
    assert hw01 / 1e-24 == pytest.approx(1.72, rel=3e-3)


def test_low_splittings_nearly_equal(sol0):
    w = [transition_frequency(sol0, n, n + 1) for n in range(3)]
    assert w[0] / w[1] - 1 < 1e-3
    assert w[1] / w[2] - 1 < 1e-3


def test_transition_frequency_value(sol0):
    assert transition_frequency(sol0, 1, 1) == 0.0
    assert transition_frequency(sol0, 0, 1) == pytest.approx(2 * math.pi * 2.59e9, rel=2e-3)


def test_softening_near_critical(sol955):
    assert transition_frequency(sol955, 1, 2) < transition_frequency(sol955, 0, 1)


def test_harmonic_ladder(calibrated, sol0):
    x0 = oscillator_length(calibrated)
    d = [phase_matrix_element(sol0, n, n + 1) for n in range(3)]
    assert d[0] == pytest.approx(0.052, abs=5e-4)
    for n in range(3):
        assert d[n] == pytest.approx(math.sqrt(n + 1) * x0, rel=0.02)
    assert d[1] / d[0] == pytest.approx(math.sqrt(2), rel=0.02)
    assert d[2] / d[0] == pytest.approx(math.sqrt(3), rel=0.02)
    for n in range(3):
        w = transition_frequency(sol0, n, n + 1)
        assert w == pytest.approx(calibrated.plasma_frequency_zero_bias, rel=0.01)


def test_ground_state_centred(calibrated, sol0):
    assert phase_matrix_element(sol0, 0, 0) < 1e-3 * oscillator_length(calibrated)


def test_variational_bounds(calibrated, sol0):
    e0 = sol0.energies[0] - sol0.well_bottom_energy
    half = calibrated.constants.hbar * calibrated.plasma_frequency_zero_bias / 2
    assert e0 > 0
    assert e0 == pytest.approx(half, rel=0.05)


def test_anharmonicity_near_unity_at_zero_bias(sol0):
    assert anharmonicity_ratio(sol0, 0) == pytest.approx(1.0006, abs=5e-4)


def test_anharmonicity_grows_with_bias(calibrated):
    zs = [anharmonicity_ratio(solve_bound_states(calibrated, s, n_levels=4), 0)
          for s in np.linspace(0, 0.95, 8)]
    assert np.all(np.diff(zs) >= 0)


def test_unbound_index_is_range_error(calibrated):
    sol = solve_bound_states(calibrated, 0.985, n_levels=4)
    assert sol.n_bound < 4
    with pytest.raises(LevelRangeError):
        transition_frequency(sol, 0, sol.n_bound)
    with pytest.raises(IndexError):
        phase_matrix_element(sol, sol.n_bound, 0)


def test_charge_element_harmonic(calibrated, sol0):
    # <0|d/dx|1> = 1/(2 x0) for an oscillator of length x0
    x0 = oscillator_length(calibrated)
    assert charge_matrix_element(sol0, 0, 1) == pytest.approx(1 / (2 * x0), rel=0.01)


def test_level_table_blanks(calibrated):
    t = level_table(calibrated, [0.0, 0.985])
    assert t.rows[0].omega[2] is not None
    last = t.rows[1]
    for k in range(3):
        assert (last.omega[k] is None) == (k + 1 >= last.n_bound)
        assert (last.delta[k] is None) == (last.omega[k] is None)


def test_level_table_empty(calibrated):
    assert level_table(calibrated, []).rows == []


def test_sign_changes_helper():
    x = np.linspace(0, 3 * math.pi, 1000)
    assert sign_changes(np.sin(x + 0.1)) == 3


# -- invariants -----------------------------------------------------------------

biases = st.floats(0.0, 0.985)


@settings(max_examples=12)
@given(s=biases)
def test_orthonormal_and_nodes(calibrated, s):
    sol = solve_bound_states(calibrated, s, n_levels=4, check=False)
    m = min(sol.n_bound, 4)
    assert np.abs(overlap_matrix(sol)[:m, :m] - np.eye(m)).max() < 1e-8
    inside = sol.grid <= sol.delta_max
    for n in range(m):
        assert sign_changes(sol.wavefunctions[n][inside]) == n
    assert np.all(np.diff(sol.energies) > 0)
    assert sol.energies[0] > sol.well_bottom_energy
    assert np.sum(sol.energies < sol.barrier_top_energy) == min(sol.n_bound, sol.n_levels)


@settings(max_examples=6)
@given(s=st.floats(0.0, 0.975))
def test_grid_convergence(calibrated, s):
    assert convergence_check(calibrated, s, n_levels=4) < 1e-6


def test_bound_count_nonincreasing(calibrated):
    counts = [count_bound_states(calibrated, s) for s in np.linspace(0.9, 0.995, 40)]
    assert np.all(np.diff(counts) <= 0)


@settings(max_examples=10)
@given(c=st.floats(2e-12, 2e-11), ic=st.floats(0.5e-6, 2e-6))
def test_harmonic_limit_any_device(c, ic):
    p = JunctionParams(ic, c)
    sol = solve_bound_states(p, 0.0, n_levels=3)
    assert transition_frequency(sol, 0, 1) == pytest.approx(p.plasma_frequency_zero_bias, rel=0.01)
