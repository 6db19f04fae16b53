"""Bound states of the phase particle in one metastable washboard well.

The stationary Schroedinger equation is discretised with second-order central
differences on a uniform phase grid, giving a symmetric tridiagonal matrix
that is handed to LAPACK through :func:`scipy.linalg.eigh_tridiagonal`.

Beyond the barrier top the potential is held flat at ``U(delta_max)``, so
levels below the barrier are genuinely bound on the grid while states above
it form a box continuum. Tunnelling widths are not computed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .junction import (BiasPoint, JunctionParams, _as_bias, _trap_ratio,
                       washboard_potential, well_extrema, plasma_frequency)


class BoundStateError(RuntimeError):
    pass


class ResolutionError(BoundStateError):
    """Grid too coarse for the requested levels."""


class LevelRangeError(BoundStateError, IndexError):
    """Requested level index is not a computed bound level."""


class NumericalError(BoundStateError):
    """Eigensolver failure or violated orthonormality."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform phase grid around well ``k``.

    ``span_left=None`` starts the grid at the previous barrier top
    (delta_max - 2 pi), which encloses the entire well. Otherwise the grid
    starts at ``delta_min - span_left``. The grid always ends at
    ``delta_max + span_right``.
    """

    n_points: int = 60001
    span_left: float | None = None
    span_right: float = 0.5
    k: int = 0

    def __post_init__(self):
        if self.n_points < 201 or self.n_points % 2 == 0:
            raise ValueError(f"n_points must be odd and >= 201, got {self.n_points}")
        if self.span_left is not None and self.span_left <= 0:
            raise ValueError("span_left must be positive")
        if self.span_right <= 0:
            raise ValueError("span_right must be positive so the barrier top is interior")
        if self.k < 0:
            raise ValueError("well index must be >= 0")

    def refined(self) -> "GridSpec":
        """Same window with the step halved."""
        return GridSpec(2 * self.n_points - 1, self.span_left, self.span_right, self.k)

    def points(self, p: JunctionParams, b) -> np.ndarray:
        delta_min, delta_max = well_extrema(p, b, self.k)
        left = delta_max - 2 * math.pi if self.span_left is None else delta_min - self.span_left
        return np.linspace(left, delta_max + self.span_right, self.n_points)


@dataclass(frozen=True)
class Hamiltonian:
    """Tridiagonal Hamiltonian on a grid (diagonal and off-diagonal in J)."""

    grid: np.ndarray
    diagonal: np.ndarray
    off_diagonal: np.ndarray
    potential: np.ndarray

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def dense(self) -> np.ndarray:
        return (np.diag(self.diagonal) + np.diag(self.off_diagonal, 1)
                + np.diag(self.off_diagonal, -1))


@dataclass(frozen=True, eq=False)
class BoundStateSolution:
    bias: BiasPoint
    energies: np.ndarray
    wavefunctions: np.ndarray  # shape (n_levels, n_points), trapezoid-normalised
    grid: np.ndarray
    n_bound: int
    delta_min: float
    delta_max: float
    barrier_top_energy: float
    well_bottom_energy: float
    hbar: float = field(repr=False, default=1.054571817e-34)

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    @property
    def bound_energies(self) -> np.ndarray:
        return self.energies[: min(self.n_bound, self.n_levels)]


def _kinetic_scale(p: JunctionParams, h: float) -> float:
    """hbar^2 / (2 m h^2)."""
    return p.constants.hbar ** 2 / (2 * p.mass * h * h)


def check_resolution(p: JunctionParams, b, g: GridSpec, n_levels: int) -> float:
    """Points per local de Broglie wavelength of the highest requested level.

    Raises :class:`ResolutionError` below 20.
    """
    s = _trap_ratio(b)
    delta_min, delta_max = well_extrema(p, s, g.k)
    h = (g.points(p, s)[1] - g.points(p, s)[0])
    hw = p.constants.hbar * plasma_frequency(p, s)
    u_span = washboard_potential(p, s, delta_max) - washboard_potential(p, s, delta_min)
    kinetic = min((n_levels + 0.5) * hw, u_span) + hw
    wavelength = 2 * math.pi * p.constants.hbar / math.sqrt(2 * p.mass * kinetic)
    ppw = wavelength / h
    if ppw < 20:
        raise ResolutionError(
            f"{ppw:.1f} grid points per wavelength for level {n_levels - 1} at bias {s}; need >= 20")
    return ppw


def build_hamiltonian(p: JunctionParams, b, g: GridSpec | None = None,
                      potential: Callable[[np.ndarray], np.ndarray] | None = None,
                      n_levels: int = 6) -> Hamiltonian:
    """Central-difference discretisation of -(hbar^2/2m) d^2/d delta^2 + U(delta).

    ``potential`` overrides the capped washboard potential; it is called with
    the grid (rad) and must return energies in J.
    """
    g = g or GridSpec()
    s = _trap_ratio(b)
    check_resolution(p, s, g, n_levels)
    x = g.points(p, s)
    h = x[1] - x[0]
    if potential is None:
        _, delta_max = well_extrema(p, s, g.k)
        u_top = washboard_potential(p, s, delta_max)
        u = np.where(x > delta_max, u_top, washboard_potential(p, s, x))
    else:
        u = np.asarray(potential(x), dtype=float)
    t = _kinetic_scale(p, h)
    return Hamiltonian(x, 2 * t + u, np.full(len(x) - 1, -t), u)


@numba.njit(cache=True)
def sturm_count(diagonal, off_diagonal, value):
    """Number of eigenvalues of the symmetric tridiagonal matrix below ``value``.

    Counts negative pivots of the LDL^T factorisation of ``T - value I``.
    """
    count = 0
    d = diagonal[0] - value
    tiny = 1e-300
    if d < 0:
        count += 1
    for k in range(1, len(diagonal)):
        if d == 0.0:
            d = tiny
        d = diagonal[k] - value - off_diagonal[k - 1] ** 2 / d
        if d < 0:
            count += 1
    return count


def count_bound_states(p: JunctionParams, b, g: GridSpec | None = None) -> int:
    """Number of levels strictly below the barrier top."""
    g = g or GridSpec()
    s = _trap_ratio(b)
    ham = build_hamiltonian(p, s, g, n_levels=1)
    _, delta_max = well_extrema(p, s, g.k)
    u_top = washboard_potential(p, s, delta_max)
    # shift to the barrier top so the pivots are O(kinetic scale), not O(E_J)
    return int(sturm_count(ham.diagonal - u_top, ham.off_diagonal, 0.0))


def _fix_sign(psi: np.ndarray) -> np.ndarray:
    big = np.abs(psi) > 1e-3 * np.abs(psi).max()
    first = np.argmax(big)
    return psi if psi[first] > 0 else -psi


def sign_changes(psi: np.ndarray, rel_floor: float = 1e-6) -> int:
    """Sign changes of ``psi`` ignoring samples below ``rel_floor * max|psi|``."""
    keep = psi[np.abs(psi) > rel_floor * np.abs(psi).max()]
    return int(np.count_nonzero(np.diff(np.sign(keep)) != 0))


def solve_bound_states(p: JunctionParams, b, g: GridSpec | None = None,
                       n_levels: int = 6, check: bool = True) -> BoundStateSolution:
    """Lowest ``n_levels`` eigenpairs of the well plus the bound-level count.

    With ``check`` the orthonormality (1e-8) and node-count invariants are
    verified and a :class:`NumericalError` is raised if they fail.
    """
    g = g or GridSpec()
    b = _as_bias(b)
    s = _trap_ratio(b)
    ham = build_hamiltonian(p, s, g, n_levels=n_levels)
    x, h = ham.grid, ham.step
    n_levels = min(n_levels, len(x))
    try:
        energies, vecs = eigh_tridiagonal(ham.diagonal, ham.off_diagonal, select="i",
                                          select_range=(0, n_levels - 1))
    except LinAlgError as exc:
        raise NumericalError(
            f"tridiagonal eigensolver failed at bias {s} with {len(x)} points: {exc}") from exc

    psi = vecs.T / math.sqrt(h)
    norms = trapezoid(psi * psi, x, axis=1)
    psi = np.array([_fix_sign(v) for v in psi / np.sqrt(norms)[:, None]])

    delta_min, delta_max = well_extrema(p, s, g.k)
    u_top = washboard_potential(p, s, delta_max)
    sol = BoundStateSolution(
        bias=b, energies=energies, wavefunctions=psi, grid=x,
        n_bound=count_bound_states(p, s, g), delta_min=delta_min, delta_max=delta_max,
        barrier_top_energy=u_top, well_bottom_energy=washboard_potential(p, s, delta_min),
        hbar=p.constants.hbar)
    if check:
        verify_solution(sol)
    return sol


def overlap_matrix(sol: BoundStateSolution) -> np.ndarray:
    psi = sol.wavefunctions
    return trapezoid(psi[:, None, :] * psi[None, :, :], sol.grid, axis=2)


def verify_solution(sol: BoundStateSolution, tol: float = 1e-8) -> None:
    m = min(sol.n_bound, sol.n_levels)
    if m == 0:
        return
    if np.any(np.diff(sol.energies) <= 0):
        raise NumericalError("energies are not strictly increasing")
    gram = overlap_matrix(sol)[:m, :m]
    err = np.abs(gram - np.eye(m)).max()
    if err > tol:
        raise NumericalError(f"bound states not orthonormal: max deviation {err:.2e}")
    inside = sol.grid <= sol.delta_max
    for n in range(m):
        nodes = sign_changes(sol.wavefunctions[n][inside])
        if nodes != n:
            raise NumericalError(f"level {n} has {nodes} nodes inside the well")


def _require_bound(sol: BoundStateSolution, *indices: int) -> None:
    for i in indices:
        if i < 0 or i >= sol.n_bound or i >= sol.n_levels:
            raise LevelRangeError(
                f"level {i} is not an available bound level (n_bound={sol.n_bound}, "
                f"computed={sol.n_levels})")


def transition_frequency(sol: BoundStateSolution, n: int, m: int) -> float:
    """omega_mn = (E_m - E_n) / hbar in rad/s."""
    _require_bound(sol, n, m)
    return float((sol.energies[m] - sol.energies[n]) / sol.hbar)


def phase_matrix_element(sol: BoundStateSolution, n: int, m: int) -> float:
    """|<n| delta - delta_min |m>| by trapezoidal quadrature."""
    _require_bound(sol, n, m)
    theta = sol.grid - sol.delta_min
    psi = sol.wavefunctions
    return float(abs(trapezoid(psi[n] * theta * psi[m], sol.grid)))


def charge_matrix_element(sol: BoundStateSolution, n: int, m: int) -> float:
    """|<n| d/d delta |m>|, i.e. the conjugate-momentum element in units of hbar.

    Diagnostic alternative to :func:`phase_matrix_element`.
    """
    _require_bound(sol, n, m)
    psi = sol.wavefunctions
    dpsi = np.gradient(psi[m], sol.grid)
    return float(abs(trapezoid(psi[n] * dpsi, sol.grid)))


def anharmonicity_ratio(sol: BoundStateSolution, n: int = 0) -> float:
    """zeta = omega_{n,n+1} / omega_{n+1,n+2}."""
    _require_bound(sol, n, n + 1, n + 2)
    return transition_frequency(sol, n, n + 1) / transition_frequency(sol, n + 1, n + 2)


def convergence_check(p: JunctionParams, b, g: GridSpec | None = None,
                      n_levels: int = 6) -> float:
    """Max relative change of the bound level energies when the step is halved.

    Energies are measured from the well bottom so the figure does not depend
    on the arbitrary energy origin of the potential.
    """
    g = g or GridSpec()
    coarse = solve_bound_states(p, b, g, n_levels, check=False)
    fine = solve_bound_states(p, b, g.refined(), n_levels, check=False)
    m = min(coarse.n_bound, fine.n_bound, n_levels)
    if m == 0:
        return 0.0
    e0 = coarse.well_bottom_energy
    ec, ef = coarse.energies[:m] - e0, fine.energies[:m] - e0
    return float(np.max(np.abs(ec - ef) / np.abs(ef)))


@dataclass
class LevelRow:
    bias_ratio: float
    n_bound: int
    omega: list  # [w01, w12, w23] in rad/s, None where the upper level is unbound
    delta: list  # [d01, d12, d23]


@dataclass
class LevelTable:
    rows: list[LevelRow]

    def column(self, name: str) -> np.ndarray:
        idx = {"w01": 0, "w12": 1, "w23": 2, "d01": 0, "d12": 1, "d23": 2}[name]
        src = "omega" if name.startswith("w") else "delta"
        return np.array([np.nan if getattr(r, src)[idx] is None else getattr(r, src)[idx]
                         for r in self.rows])


def level_table(p: JunctionParams, biases: Sequence, g: GridSpec | None = None,
                n_transitions: int = 3) -> LevelTable:
    """Nearest-neighbour transition frequencies and phase matrix elements per bias."""
    rows = []
    for b in biases:
        b = _as_bias(b)
        try:
            sol = solve_bound_states(p, b, g, n_levels=n_transitions + 1)
        except BoundStateError as exc:
            raise type(exc)(f"bias ratio {b.ratio}: {exc}") from exc
        omega, delta = [], []
        for n in range(n_transitions):
            if n + 1 < sol.n_bound:
                omega.append(transition_frequency(sol, n, n + 1))
                delta.append(phase_matrix_element(sol, n, n + 1))
            else:
                omega.append(None)
                delta.append(None)
        rows.append(LevelRow(b.ratio, sol.n_bound, omega, delta))
    return LevelTable(rows)


def bound_count_threshold(p: JunctionParams, count: int, lo: float = 0.0, hi: float = 0.9999,
                          g: GridSpec | None = None, tol: float = 1e-4) -> float:
    """Bias ratio at which the bound-level count drops from ``count`` to ``count - 1``.

    Bisection on :func:`count_bound_states`, which is nonincreasing in bias.
    """
    g = g or GridSpec()
    if count_bound_states(p, lo, g) < count:
        raise ValueError(f"fewer than {count} bound levels already at bias {lo}")
    if count_bound_states(p, hi, g) >= count:
        raise ValueError(f"still {count} or more bound levels at bias {hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if count_bound_states(p, mid, g) >= count:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
