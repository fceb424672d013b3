#!/usr/bin/env python3
"""
Field Module
Grid functions on a 1D periodic cell or finite box, window norms,
lattice envelopes and initial-data builders
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from modules.errors import (CommensurabilityError, ContractError, CoverageError,
                            DomainError, InvariantError, ShapeError)
from modules.lattice import Lattice, fundamental_cell

logger = logging.getLogger(__name__)

QUADRATURE_POINTS = 4
ALIGN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GridFn:
    """Cell averages on [x_lo, x_lo + length), periodic or a finite box"""
    x_lo: float
    length: float
    values: np.ndarray
    periodic: bool = True

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ShapeError(f"a grid function needs at least 2 cells, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid values must be finite")
        if not self.length > 0:
            raise DomainError(f"domain length must be positive, got {self.length}")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'x_lo', float(self.x_lo))
        object.__setattr__(self, 'length', float(self.length))

    # -- construction ---------------------------------------------------
    @classmethod
    def from_function(cls, f: Callable, x_lo: float, length: float, n_cells: int,
                      periodic: bool = True, quad_points: int = QUADRATURE_POINTS) -> 'GridFn':
        """Cell averages of f by Gauss-Legendre quadrature"""
        nodes, weights = leggauss(quad_points)
        dx = length / n_cells
        centers = x_lo + (np.arange(n_cells) + 0.5) * dx
        x = centers[:, None] + 0.5 * dx * nodes[None, :]
        values = np.asarray(f(x), dtype=float) @ weights / 2
        return cls(x_lo, length, values, periodic)

    @classmethod
    def from_samples(cls, f: Callable, x_lo: float, length: float, n_cells: int,
                     periodic: bool = True) -> 'GridFn':
        """Point values of f at the cell centers"""
        dx = length / n_cells
        centers = x_lo + (np.arange(n_cells) + 0.5) * dx
        return cls(x_lo, length, np.asarray(f(centers), dtype=float), periodic)

    @classmethod
    def constant(cls, c: float, x_lo: float, length: float, n_cells: int,
                 periodic: bool = True) -> 'GridFn':
        return cls(x_lo, length, np.full(n_cells, float(c)), periodic)

    def with_values(self, values) -> 'GridFn':
        return GridFn(self.x_lo, self.length, values, self.periodic)

    # -- geometry -------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def x_hi(self) -> float:
        return self.x_lo + self.length

    @property
    def centers(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.n_cells) + 0.5) * self.dx

    def same_grid(self, other: 'GridFn') -> bool:
        return (self.n_cells == other.n_cells and self.periodic == other.periodic
                and np.isclose(self.x_lo, other.x_lo) and np.isclose(self.length, other.length))

    def _check_grid(self, other: 'GridFn'):
        if not self.same_grid(other):
            raise ShapeError("grid functions live on different grids")

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, GridFn):
            self._check_grid(other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + float(other))

    def __sub__(self, other):
        if isinstance(other, GridFn):
            self._check_grid(other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - float(other))

    def __neg__(self):
        return self.with_values(-self.values)

    def scale(self, factor: float) -> 'GridFn':
        return self.with_values(factor * self.values)

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.dx)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.dx)

    # -- export ---------------------------------------------------------
    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['x', 'value'])
            for x, value in zip(self.centers, self.values):
                writer.writerow([repr(float(x)), repr(float(value))])
        return path

    def to_bytes(self) -> bytes:
        """N as int64, dx and the values as float64, all little-endian"""
        header = np.array([self.n_cells], dtype='<i8').tobytes() + np.array([self.dx], dtype='<f8').tobytes()
        return header + self.values.astype('<f8').tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, x_lo: float = 0.0, periodic: bool = True) -> 'GridFn':
        n = int(np.frombuffer(data[:8], dtype='<i8')[0])
        dx = float(np.frombuffer(data[8:16], dtype='<f8')[0])
        values = np.frombuffer(data[16:16 + 8 * n], dtype='<f8')
        if values.size != n:
            raise ShapeError(f"expected {n} values, found {values.size}")
        return cls(x_lo, n * dx, values.copy(), periodic)


# ----------------------------------------------------------------------
# Means and window norms
# ----------------------------------------------------------------------
def mean(u: GridFn) -> float:
    """Mean over the period cell"""
    if not u.periodic:
        raise DomainError("mean is defined on periodic grids; use mean_over_box")
    return float(np.sum(u.values) * u.dx / u.length)


def mean_over_box(u: GridFn) -> float:
    return float(np.sum(u.values) * u.dx / u.length)


def _primitive(u: GridFn, weights: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """
    Exact primitive x -> int_{x_lo}^x w for piecewise-constant w

    Periodic data is extended cyclically, box data by zero.
    """
    dx, n = u.dx, u.n_cells
    prefix = np.concatenate(([0.0], np.cumsum(weights) * dx))
    total = prefix[-1]

    def within(y):
        j = np.clip(np.floor(y / dx).astype(int), 0, n - 1)
        return prefix[j] + weights[j] * (y - j * dx)

    def F(x):
        y = np.asarray(x, dtype=float) - u.x_lo
        if u.periodic:
            turns = np.floor(y / u.length)
            return turns * total + within(y - turns * u.length)
        return within(np.clip(y, 0.0, u.length))

    return F


def v_norm(u: GridFn, window_length: float) -> float:
    """
    sup over window placements of int_window |u|

    The window integral is piecewise linear in the window position, with
    kinks where an end crosses a cell boundary, so checking those positions
    is exact for cell data.
    """
    W = float(window_length)
    if W <= 0:
        raise DomainError(f"window length must be positive, got {W}")
    if W > u.length * (1 + 1e-12):
        raise DomainError(f"window {W} longer than the domain {u.length}")
    F = _primitive(u, np.abs(u.values))
    edges = u.x_lo + np.arange(u.n_cells + 1) * u.dx
    starts = np.concatenate((edges, edges - W))
    return float(max(np.max(F(starts + W) - F(starts)), 0.0))


def stepanov_norm(u: GridFn, radius: float = 1.0) -> float:
    """Window norm over balls |x - y| < radius"""
    return v_norm(u, 2 * radius)


def vanishing_profile(v: GridFn, levels: Sequence[float]) -> List[Tuple[float, float]]:
    """(level, meas{|v| > level}) pairs"""
    a = np.abs(v.values)
    return [(float(lam), float(np.count_nonzero(a > lam) * v.dx)) for lam in levels]


@dataclass
class MeanVanishingReport:
    widths: List[float]
    means: List[float]
    bounds: List[float]
    epsilon: float
    threshold: float
    nonincreasing: bool = False
    below_threshold: bool = False
    within_bounds: bool = False

    @property
    def passed(self) -> bool:
        return self.nonincreasing and self.below_threshold and self.within_bounds


def mean_vanishing_check(v: GridFn, widths: Sequence[float], epsilon: Optional[float] = None,
                         threshold: Optional[float] = None, center: float = 0.0,
                         tol: float = 1e-12) -> MeanVanishingReport:
    """
    Averages (1/|A|) int_A |v| over nested boxes A centered at center

    Each average is compared against meas{|v| > eps} * max|v| / |A| + eps.
    """
    widths = sorted(float(w) for w in widths)
    sup = v.sup_norm()
    epsilon = 0.05 * sup if epsilon is None else float(epsilon)
    threshold = 0.05 * sup if threshold is None else float(threshold)

    F = _primitive(v, np.abs(v.values))
    lo = np.array([center - w / 2 for w in widths])
    hi = np.array([center + w / 2 for w in widths])
    means = list((F(hi) - F(lo)) / np.array(widths))

    if v.periodic:
        # superlevel set measure grows with the box for periodic data
        per_cell = vanishing_profile(v, [epsilon])[0][1]
        measures = [per_cell * np.ceil(w / v.length + 1) for w in widths]
    else:
        measures = [vanishing_profile(v, [epsilon])[0][1]] * len(widths)
    bounds = [m * sup / w + epsilon for m, w in zip(measures, widths)]

    scale = max(sup, 1.0)
    report = MeanVanishingReport(widths, [float(x) for x in means], bounds, epsilon, threshold)
    report.nonincreasing = all(b <= a + tol * scale for a, b in zip(means, means[1:]))
    report.below_threshold = means[-1] <= threshold + tol * scale
    report.within_bounds = all(m <= b + tol * scale for m, b in zip(means, bounds))
    return report


# ----------------------------------------------------------------------
# Lattice envelopes
# ----------------------------------------------------------------------
def _cell_offset(v: GridFn, L: Lattice, r: int) -> Tuple[int, int, float, float]:
    if L.dimension != 1:
        raise DomainError("envelopes are computed for 1D lattices")
    if v.periodic:
        raise DomainError("envelopes need compactly supported data on a box")
    lo, hi = fundamental_cell(L, r).bounds()
    cells = (hi - lo) / v.dx
    start = (lo - v.x_lo) / v.dx
    if abs(cells - round(cells)) > ALIGN_TOL * max(1.0, cells):
        raise CommensurabilityError(f"cell length {hi - lo} is not a whole number of cells")
    if abs(start - round(start)) > ALIGN_TOL * max(1.0, abs(start)):
        raise CommensurabilityError("the cell P_r is not aligned with the grid")
    return int(round(cells)), int(round(start)), lo, hi


def lattice_envelopes(v: GridFn, L: Lattice, r: int) -> Tuple[GridFn, GridFn, GridFn]:
    """
    sup, inf and sup |.| of v over the translates x + r*e, as functions on P_r

    Translates that leave the box see v = 0, and there are always such
    translates, so v_r+ >= 0 >= v_r-.
    """
    if v.values[0] != 0 or v.values[-1] != 0:
        raise CoverageError("support of v reaches the edge of the box")
    n_r, start, lo, hi = _cell_offset(v, L, r)
    n = v.n_cells

    k_min = int(np.floor(-(start + n_r) / n_r))
    k_max = int(np.ceil((n - start) / n_r))
    upper = np.zeros(n_r)
    lower = np.zeros(n_r)
    absolute = np.zeros(n_r)
    local = np.arange(n_r)
    for k in range(k_min, k_max + 1):
        idx = start + local + k * n_r
        valid = (idx >= 0) & (idx < n)
        if not np.any(valid):
            continue
        sample = np.where(valid, v.values[np.clip(idx, 0, n - 1)], 0.0)
        upper = np.maximum(upper, sample)
        lower = np.minimum(lower, sample)
        absolute = np.maximum(absolute, np.abs(sample))

    length = hi - lo
    return (GridFn(lo, length, upper, True), GridFn(lo, length, lower, True),
            GridFn(lo, length, absolute, True))


def restrict_to_cell(v: GridFn, L: Lattice, r: int) -> GridFn:
    """v on P_r as a periodic grid function (zero where P_r leaves the box)"""
    n_r, start, lo, hi = _cell_offset(v, L, r)
    idx = start + np.arange(n_r)
    valid = (idx >= 0) & (idx < v.n_cells)
    values = np.where(valid, v.values[np.clip(idx, 0, v.n_cells - 1)], 0.0)
    if np.any(v.values[(np.arange(v.n_cells) < start) | (np.arange(v.n_cells) >= start + n_r)] != 0):
        raise CoverageError("v is not supported inside P_r")
    return GridFn(lo, hi - lo, values, True)


def envelope_means(upper: GridFn, lower: GridFn, absolute: GridFn,
                   tol: float = 1e-12) -> Tuple[float, float, float]:
    """(eps_r+, eps_r-, M_r), the means of the envelopes over P_r"""
    eps_plus, eps_minus, M = mean(upper), mean(lower), mean(absolute)
    slack = tol * max(1.0, M)
    if abs(eps_plus) > M + slack or abs(eps_minus) > M + slack:
        raise InvariantError(f"envelope means exceed M_r: {eps_plus}, {eps_minus} vs {M}")
    return eps_plus, eps_minus, M


# ----------------------------------------------------------------------
# Initial data
# ----------------------------------------------------------------------
def build_exactness_data(m: float, delta: float, v_profile: Optional[GridFn], xi: float,
                         r_period: float, n_cells: int, x_lo: float = 0.0,
                         length: Optional[float] = None) -> GridFn:
    """
    u0 = m + v(pr(x)) + (delta/2) sin(2 pi xi x / r_period)

    In one dimension the projection onto the directions of constancy is
    trivial, so the v term only has its amplitude and mean validated.
    """
    if delta <= 0:
        raise ContractError(f"delta must be positive, got {delta}")
    if v_profile is not None:
        if v_profile.sup_norm() > delta / 2:
            raise ContractError(f"|v|_inf = {v_profile.sup_norm()} exceeds delta/2 = {delta / 2}")
    if xi == 0:
        raise ContractError("xi must be nonzero")
    length = r_period if length is None else length
    k = 2 * np.pi * xi / r_period
    u0 = GridFn.from_function(lambda x: m + 0.5 * delta * np.sin(k * x), x_lo, length, n_cells, True)
    if np.max(np.abs(u0.values - m)) > delta:
        raise InvariantError("exactness data leaves the delta band")
    return u0
