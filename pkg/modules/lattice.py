#!/usr/bin/env python3
"""
Lattice Module
Full-rank lattices, their duals, fundamental cells and period checks on grids
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import linalg

from modules.errors import CommensurabilityError, DegeneracyError, DomainError

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-12
MEMBERSHIP_TOL = 1e-9
MAX_SUBPERIOD_DIVISOR = 16


@dataclass(frozen=True, eq=False)
class Lattice:
    """Lattice spanned by the columns e_1..e_d of a nonsingular basis matrix"""
    basis: np.ndarray

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.shape[0] != basis.shape[1]:
            raise DegeneracyError(f"basis must be square, got shape {basis.shape}")
        if not np.all(np.isfinite(basis)):
            raise DegeneracyError("basis has non-finite entries")
        norms = np.linalg.norm(basis, axis=0)
        if np.any(norms == 0):
            raise DegeneracyError("basis has a zero column")
        if abs(linalg.det(basis / norms)) <= DEGENERACY_TOL:
            raise DegeneracyError("basis is singular")
        basis.setflags(write=False)
        object.__setattr__(self, 'basis', basis)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> 'Lattice':
        """Each row is one basis vector (the config layout)"""
        if np.ndim(rows) == 1:
            rows = [[x] for x in rows]
        return cls(np.asarray(rows, dtype=float).T)

    @classmethod
    def scalar(cls, period: float) -> 'Lattice':
        return cls(np.array([[float(period)]]))

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    @property
    def determinant(self) -> float:
        return float(linalg.det(self.basis))

    def vectors(self) -> List[np.ndarray]:
        return [self.basis[:, k] for k in range(self.dimension)]

    def coordinates(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.dimension)
        return linalg.solve(self.basis, x)

    def __repr__(self):
        return f"Lattice({self.basis.tolist()})"


def dual(L: Lattice) -> Lattice:
    """Dual lattice {xi : xi.e in Z for every e in L}"""
    return Lattice(linalg.inv(L.basis).T)


def contains(L: Lattice, x, tol: float = MEMBERSHIP_TOL) -> bool:
    """True iff x is an integer combination of the basis vectors"""
    x = np.asarray(x, dtype=float)
    if x.size != L.dimension:
        raise DomainError(f"point of dimension {x.size} tested against a {L.dimension}-d lattice")
    z = L.coordinates(x)
    return bool(np.max(np.abs(z - np.round(z))) <= tol)


@dataclass(frozen=True, eq=False)
class Parallelepiped:
    """{B z : -r/2 <= z_k < r/2}"""
    lattice: Lattice
    r: int

    @property
    def volume(self) -> float:
        return float(self.r ** self.lattice.dimension * abs(self.lattice.determinant))

    def bounds(self) -> Tuple[float, float]:
        """Half-open interval [lo, hi) in 1D"""
        if self.lattice.dimension != 1:
            raise DomainError("bounds are only defined for 1D cells")
        e = float(self.lattice.basis[0, 0])
        ends = sorted((-self.r * e / 2, self.r * e / 2))
        return ends[0], ends[1]

    def contains(self, x) -> bool:
        z = self.lattice.coordinates(x)
        half = self.r / 2
        return bool(np.all((z >= -half) & (z < half)))

    def reduce(self, x) -> np.ndarray:
        """Representative of x modulo r*L inside the cell"""
        z = self.lattice.coordinates(x)
        z = z - self.r * np.floor((z + self.r / 2) / self.r)
        return self.lattice.basis @ z


def fundamental_cell(L: Lattice, r: int) -> Parallelepiped:
    if r < 1:
        raise ValueError(f"r must be a positive integer, got {r}")
    return Parallelepiped(L, int(r))


# ----------------------------------------------------------------------
# Period verification
# ----------------------------------------------------------------------
@dataclass
class PeriodReport:
    basis_differences: List[Tuple[float, float]] = field(default_factory=list)
    subperiod_differences: List[Tuple[float, int, float]] = field(default_factory=list)
    degenerate: bool = False
    tol: float = MEMBERSHIP_TOL

    @property
    def max_basis_difference(self) -> float:
        return max((d for _, d in self.basis_differences), default=0.0)

    @property
    def min_subperiod_difference(self) -> float:
        return min((d for _, _, d in self.subperiod_differences), default=float('inf'))

    @property
    def is_period(self) -> bool:
        return self.max_basis_difference <= self.tol

    @property
    def exact(self) -> bool:
        """Every basis vector is a period and no tested sub-period is"""
        return self.is_period and not self.degenerate and self.min_subperiod_difference > self.tol

    def summary(self) -> Dict:
        return {
            'max_basis_difference': self.max_basis_difference,
            'min_subperiod_difference': self.min_subperiod_difference,
            'degenerate': "degenerate: constant" if self.degenerate else False,
            'exact': self.exact,
        }


def _shifted(values: np.ndarray, shift_cells: float, periodic: bool) -> Tuple[np.ndarray, np.ndarray]:
    """(p(x + s), p(x)) on the cells where both are known"""
    whole = int(np.floor(shift_cells))
    frac = shift_cells - whole
    if periodic:
        ahead = np.roll(values, -whole)
        if frac:
            ahead = (1 - frac) * ahead + frac * np.roll(values, -whole - 1)
        return ahead, values
    n = len(values)
    lead = whole + (1 if frac else 0)
    if abs(lead) >= n:
        raise DomainError("shift longer than the box")
    if lead >= 0:
        base = values[:n - lead]
        ahead = values[whole:whole + len(base)]
        if frac:
            ahead = (1 - frac) * ahead + frac * values[whole + 1:whole + 1 + len(base)]
        return ahead, base
    return _shifted(values[::-1], -shift_cells, False)


def verify_period_group(p, L: Lattice, tol: float = MEMBERSHIP_TOL,
                        max_divisor: int = MAX_SUBPERIOD_DIVISOR) -> PeriodReport:
    """
    Check that the basis vectors of L are periods of grid data p and that
    no sub-period e/k (k = 2..max_divisor) is.
    """
    if L.dimension != 1:
        raise DomainError("period verification works on 1D grids")
    report = PeriodReport(tol=tol)
    values = np.asarray(p.values, dtype=float)
    dx = p.dx

    for e in L.vectors():
        e = float(e[0])
        cells = e / dx
        if abs(cells - round(cells)) > 1e-9 * max(1.0, abs(cells)):
            raise CommensurabilityError(f"period {e} is not a whole number of cells (dx={dx})")
        ahead, base = _shifted(values, round(cells), p.periodic)
        report.basis_differences.append((e, float(np.sum(np.abs(ahead - base)) * dx)))

        for k in range(2, max_divisor + 1):
            ahead, base = _shifted(values, cells / k, p.periodic)
            report.subperiod_differences.append((e / k, k, float(np.sum(np.abs(ahead - base)) * dx)))

    report.degenerate = bool(np.ptp(values) <= tol)
    logger.debug(f"period check: {report.summary()}")
    return report
