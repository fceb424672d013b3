#!/usr/bin/env python3
"""
Model Module
Flux, diffusion primitive and the non-degeneracy set F
"""

import hashlib
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import yaml

from modules.errors import ConfigurationError, ContractError
from modules.funcalg import PiecewisePoly, exact

logger = logging.getLogger(__name__)

Interval = Tuple[Fraction, Fraction]


@dataclass(frozen=True)
class ModelSpec:
    """u_t + div phi(u) = Laplacian A(u) on the state range [u_min, u_max]"""
    name: str
    flux: Tuple[PiecewisePoly, ...]
    A: PiecewisePoly

    def __post_init__(self):
        if not self.flux:
            raise ContractError("a model needs at least one flux component")
        for phi in self.flux:
            if phi.u_min != self.A.u_min or phi.u_max != self.A.u_max:
                raise ContractError(f"model '{self.name}': flux and A live on different ranges")
            if not phi.continuous:
                raise ContractError(f"model '{self.name}': flux must be continuous")
        if not self.A.continuous:
            raise ContractError(f"model '{self.name}': A must be continuous")
        lowest, _ = self.a.extreme_values()
        if lowest < 0:
            raise ContractError(f"model '{self.name}': a = A' takes the negative value {lowest}")

    @property
    def u_min(self) -> Fraction:
        return self.A.u_min

    @property
    def u_max(self) -> Fraction:
        return self.A.u_max

    @property
    def dimension(self) -> int:
        return len(self.flux)

    @property
    def phi(self) -> PiecewisePoly:
        """The scalar flux used by the 1D solver"""
        return self.flux[0]

    @property
    def a(self) -> PiecewisePoly:
        return self.A.derivative()

    def lipschitz(self, lo: float, hi: float) -> float:
        """Bound on |phi'| over the data range [lo, hi]"""
        return self.phi.derivative().max_abs(lo, hi)

    def max_diffusivity(self, lo: float, hi: float) -> float:
        return max(self.a.extreme_values(lo, hi)[1], 0.0)

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'range': [str(self.u_min), str(self.u_max)],
            'flux': [phi.to_records() for phi in self.flux],
            'diffusion': self.A.to_records(),
        }

    def fingerprint(self) -> str:
        text = yaml.safe_dump(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


# ----------------------------------------------------------------------
# Presets
# ----------------------------------------------------------------------
def _burgers(lo, hi) -> ModelSpec:
    return ModelSpec('burgers', (PiecewisePoly.polynomial([0, 0, Fraction(1, 2)], lo, hi),),
                     PiecewisePoly.constant(0, lo, hi))


def _stefan(lo, hi) -> ModelSpec:
    return ModelSpec('stefan', (PiecewisePoly.constant(0, lo, hi),),
                     PiecewisePoly.positive_part_identity(lo, hi))


def _affine(lo, hi) -> ModelSpec:
    return ModelSpec('affine', (PiecewisePoly.identity(lo, hi),),
                     PiecewisePoly.constant(0, lo, hi))


def _heat(lo, hi) -> ModelSpec:
    return ModelSpec('heat', (PiecewisePoly.constant(0, lo, hi),),
                     PiecewisePoly.identity(lo, hi))


PRESETS = {
    'burgers': _burgers,
    'stefan': _stefan,
    'affine': _affine,
    'heat': _heat,
}


def preset(name: str, u_min: float = -1, u_max: float = 1) -> ModelSpec:
    """Built-in model by name"""
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset '{name}' (known: {', '.join(sorted(PRESETS))})")
    return PRESETS[name](exact(u_min), exact(u_max))


def model_from_dict(name: str, data: Dict) -> ModelSpec:
    """
    Free-form model from config

    Expected keys: 'flux' (a list of piece-record lists, one per component,
    or a single piece-record list) and 'diffusion' (piece records for A).
    A preset may be named with 'base' instead.
    """
    try:
        if 'base' in data:
            u_range = data.get('range', [-1, 1])
            return preset(data['base'], *u_range)
        flux = data['flux']
        if flux and isinstance(flux[0], dict):
            flux = [flux]
        components = tuple(PiecewisePoly.from_records(rec) for rec in flux)
        A = PiecewisePoly.from_records(data['diffusion'])
        return ModelSpec(name, components, A)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid model definition '{name}': {e}") from e


def resolve_model(name: str, extra_presets: Optional[Dict[str, Dict]] = None) -> ModelSpec:
    """Look up a preset, config-defined models first"""
    extra_presets = extra_presets or {}
    if name in extra_presets:
        return model_from_dict(name, extra_presets[name])
    return preset(name)


# ----------------------------------------------------------------------
# F-set
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class FSet:
    """Finite union of closed intervals; single points are [p, p]"""
    components: Tuple[Interval, ...] = field(default_factory=tuple)
    upper_bound: bool = False

    def __post_init__(self):
        comps = sorted((exact(lo), exact(hi)) for lo, hi in self.components)
        merged: List[List[Fraction]] = []
        for lo, hi in comps:
            if lo > hi:
                raise ValueError(f"empty component [{lo}, {hi}]")
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        object.__setattr__(self, 'components', tuple((lo, hi) for lo, hi in merged))

    def is_empty(self) -> bool:
        return not self.components

    def __contains__(self, m) -> bool:
        m = exact(m)
        return any(lo <= m <= hi for lo, hi in self.components)

    def describe(self) -> str:
        if self.is_empty():
            text = "empty"
        else:
            parts = []
            for lo, hi in self.components:
                parts.append(f"{{{_fmt(lo)}}}" if lo == hi else f"[{_fmt(lo)}, {_fmt(hi)}]")
            text = " U ".join(parts)
        return text + (" (upper bound over supplied xi)" if self.upper_bound else "")

    def to_list(self) -> List[List[str]]:
        return [[str(lo), str(hi)] for lo, hi in self.components]


def _fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{float(x):g}"


def _merge_pieces(f: PiecewisePoly, keep) -> List[Interval]:
    """Maximal runs of pieces accepted by keep(i), merged when the pieces coincide"""
    runs: List[List] = []
    for i, (lo, hi, c) in enumerate(f.pieces()):
        if not keep(i):
            continue
        if runs and runs[-1][1] == lo and runs[-1][2] == c:
            runs[-1][1] = hi
        else:
            runs.append([lo, hi, c])
    return [(lo, hi) for lo, hi, _ in runs]


def affine_intervals(f: PiecewisePoly) -> List[Interval]:
    """Maximal open intervals on which f is affine"""
    return _merge_pieces(f, f.is_affine_piece)


def zero_intervals(f: PiecewisePoly) -> List[Interval]:
    """Maximal open intervals on which f vanishes identically"""
    return _merge_pieces(f, f.is_zero_piece)


def _intersect(xs: List[Interval], ys: List[Interval]) -> List[Interval]:
    out = []
    for a, b in xs:
        for c, d in ys:
            lo, hi = max(a, c), min(b, d)
            if lo < hi:
                out.append((lo, hi))
    return out


def _complement(intervals: List[Interval], u_min: Fraction, u_max: Fraction) -> List[Interval]:
    """
    Closed complement of a union of open intervals within [u_min, u_max]

    An interval touching an end of the range is open relative to the range,
    so it also removes that end point.
    """
    merged: List[List[Fraction]] = []
    for lo, hi in sorted(intervals):
        if merged and lo < merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])

    components = []
    pos = u_min
    for lo, hi in merged:
        if lo > u_min:
            components.append((pos, lo))
        pos = hi
    if pos < u_max:
        components.append((pos, u_max))
    return components


def _degenerate_set(model: ModelSpec, xi: Sequence) -> List[Interval]:
    xi = [exact(x) for x in xi]
    if len(xi) != model.dimension:
        raise ConfigurationError(f"xi has {len(xi)} components, model dimension is {model.dimension}")
    if all(x == 0 for x in xi):
        raise ConfigurationError("xi must be nonzero")
    combined = None
    for x, phi in zip(xi, model.flux):
        term = phi.scale(x)
        combined = term if combined is None else combined + term
    diffusion = model.a.scale(sum(x * x for x in xi))
    return _intersect(affine_intervals(combined), zero_intervals(diffusion))


def compute_F(model: ModelSpec, xi_list: Union[str, None, List[Sequence]] = None) -> FSet:
    """
    Non-degeneracy set F

    With xi_list None or "1D" the scalar criterion is used (any nonzero
    xi gives the same answer). Otherwise the union of degenerate sets over
    the supplied dual vectors is removed, and the result is only an upper
    bound on F.
    """
    if xi_list is None or xi_list == "1D":
        degenerate = _intersect(affine_intervals(model.phi), zero_intervals(model.a))
        upper = False
    else:
        if len(xi_list) == 0:
            raise ConfigurationError("n-D mode needs a nonempty list of dual vectors")
        degenerate = []
        for xi in xi_list:
            if not isinstance(xi, (list, tuple)):
                xi = [xi]
            degenerate.extend(_degenerate_set(model, xi))
        upper = True
    F = FSet(tuple(_complement(degenerate, model.u_min, model.u_max)), upper)
    logger.debug(f"F for {model.name}: {F.describe()}")
    return F


def check_nd_condition(F: FSet, m) -> bool:
    """m is approached by F from both sides"""
    m = exact(m)
    return any(lo < m < hi for lo, hi in F.components)


def check_gn_condition(F: FSet, m) -> bool:
    """m belongs to F"""
    return m in F


def check_one_sided_condition(F: FSet, m, side: str) -> bool:
    """
    Weakened condition for one-signed perturbations

    side '+' (v >= 0) needs F to accumulate at m from the right,
    side '-' (v <= 0) from the left.
    """
    m = exact(m)
    if side == '+':
        return any(lo <= m < hi for lo, hi in F.components)
    if side == '-':
        return any(lo < m <= hi for lo, hi in F.components)
    raise ValueError(f"side must be '+' or '-', got {side!r}")
