#!/usr/bin/env python3
"""
Solver Module
Explicit monotone finite-volume scheme for u_t + phi(u)_x = A(u)_xx on a
periodic 1D grid, with conservation, maximum principle, comparison and
discrete entropy checks
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from modules.errors import (ConfigurationError, ContractError, DomainError, SchemeMonotonicityError,
                            ShapeError, TimeStepError)
from modules.field import GridFn
from modules.model import ModelSpec

logger = logging.getLogger(__name__)

FLUXES = ('engquist_osher', 'lax_friedrichs')
MAX_PRINCIPLE_TOL = 1e-8
ENTROPY_TOL = 1e-6


@dataclass
class SolverConfig:
    n_cells: int
    t_end: float
    output_times: Tuple[float, ...] = ()
    cfl: float = 0.45
    flux: str = 'engquist_osher'
    dense: bool = False

    def __post_init__(self):
        if self.n_cells < 2:
            raise ConfigurationError(f"n_cells must be at least 2, got {self.n_cells}")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.t_end < 0:
            raise ConfigurationError(f"t_end must be nonnegative, got {self.t_end}")
        if self.flux not in FLUXES:
            raise ConfigurationError(f"unknown flux '{self.flux}' (use one of {', '.join(FLUXES)})")
        times = tuple(float(t) for t in self.output_times)
        if list(times) != sorted(times):
            raise ConfigurationError("output_times must be sorted")
        if times and (times[0] < 0 or times[-1] > self.t_end):
            raise ConfigurationError("output_times must lie in [0, t_end]")
        self.output_times = times

    @classmethod
    def from_dict(cls, config: Dict) -> 'SolverConfig':
        try:
            t_end = float(config['t_end'])
            if 'output_times' in config:
                times = tuple(config['output_times'])
            else:
                times = tuple(np.linspace(0.0, t_end, int(config.get('n_samples', 11))))
            return cls(
                n_cells=int(config.get('n_cells', 800)),
                t_end=t_end,
                output_times=times,
                cfl=float(config.get('cfl', 0.45)),
                flux=config.get('flux', 'engquist_osher'),
                dense=bool(config.get('dense', False)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid solver block: {e}") from e


# ----------------------------------------------------------------------
# Numerical fluxes
# ----------------------------------------------------------------------
class FiniteVolumeScheme:
    """Two-point monotone convection flux plus A-differences for diffusion"""

    def __init__(self, model: ModelSpec, flux: str = 'engquist_osher'):
        if flux not in FLUXES:
            raise ConfigurationError(f"unknown flux '{flux}'")
        self.model = model
        self.flux_name = flux
        self.phi = model.phi
        self.A = model.A

        if flux == 'engquist_osher':
            dphi = self.phi.derivative()
            base = self.phi.u_min
            self.phi_plus = dphi.positive_part().antiderivative(base=base).shift(self.phi.value_at(base))
            self.phi_minus = dphi.negative_part().antiderivative(base=base)
        self.lf_speed = self.phi.derivative().max_abs()

    def numerical_flux(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.flux_name == 'engquist_osher':
            return self.phi_plus(a) + self.phi_minus(b)
        return 0.5 * (self.phi(a) + self.phi(b)) - 0.5 * self.lf_speed * (b - a)

    def interface_fluxes(self, u: np.ndarray) -> np.ndarray:
        """F_{i+1/2} for every i on a periodic grid"""
        return self.numerical_flux(u, np.roll(u, -1))

    def stable_dt(self, u: GridFn, cfl: float, lo: Optional[float] = None,
                  hi: Optional[float] = None) -> float:
        """cfl / (Lip/dx + 2 max a / dx^2) over the data range"""
        lo = float(np.min(u.values)) if lo is None else lo
        hi = float(np.max(u.values)) if hi is None else hi
        speed = self.lf_speed if self.flux_name == 'lax_friedrichs' else self.model.lipschitz(lo, hi)
        rate = speed / u.dx + 2 * self.model.max_diffusivity(lo, hi) / u.dx ** 2
        return np.inf if rate == 0 else cfl / rate

    def update(self, u: GridFn, dt: float) -> GridFn:
        v = u.values
        lam, mu = dt / u.dx, dt / u.dx ** 2
        F = self.interface_fluxes(v)
        Av = self.A(v)
        new = v - lam * (F - np.roll(F, 1)) + mu * (np.roll(Av, -1) - 2 * Av + np.roll(Av, 1))
        return u.with_values(new)


@lru_cache(maxsize=32)
def scheme_for(model: ModelSpec, flux: str = 'engquist_osher') -> FiniteVolumeScheme:
    return FiniteVolumeScheme(model, flux)


def step(u: GridFn, model: ModelSpec, dt: float, flux: str = 'engquist_osher') -> GridFn:
    """
    One explicit step

    Raises TimeStepError when dt exceeds the monotonicity limit and
    SchemeMonotonicityError if the result leaves the range of u.
    """
    if not u.periodic:
        raise DomainError("the solver works on periodic grids")
    if dt < 0:
        raise TimeStepError(f"negative time step {dt}")
    scheme = scheme_for(model, flux)
    limit = scheme.stable_dt(u, 1.0)
    if dt > limit * (1 + 1e-12):
        raise TimeStepError(f"dt={dt:g} exceeds the stability limit {limit:g}")
    new = scheme.update(u, dt)
    lo, hi = float(np.min(u.values)), float(np.max(u.values))
    _check_bounds(new, lo, hi)
    return new


def _check_bounds(u: GridFn, lo: float, hi: float, tol: float = MAX_PRINCIPLE_TOL):
    low, high = float(np.min(u.values)), float(np.max(u.values))
    if low < lo - tol or high > hi + tol:
        raise SchemeMonotonicityError(f"values [{low}, {high}] left [{lo}, {hi}]")


# ----------------------------------------------------------------------
# Entropy accounting
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class TestBump:
    """Nonnegative space-time bump amp * b((x-xc)/xr) * b((t-tc)/tr), b(s) = (1-s^2)^3 on |s| < 1"""
    x_center: float
    x_radius: float
    t_center: float
    t_radius: float
    amplitude: float = 1.0
    period: Optional[float] = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise ContractError("test functions must be nonnegative")
        if self.x_radius <= 0 or self.t_radius <= 0:
            raise ContractError("test function radii must be positive")

    @staticmethod
    def _profile(s):
        return np.where(np.abs(s) < 1, (1 - s * s) ** 3, 0.0)

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.x_center
        if self.period:
            d = (d + self.period / 2) % self.period - self.period / 2
        return self.amplitude * self._profile(d / self.x_radius) * self._profile((t - self.t_center) / self.t_radius)


def random_test_functions(rng: np.random.Generator, x_lo: float, length: float, t_end: float,
                          count: int = 3) -> List[TestBump]:
    bumps = []
    for _ in range(count):
        bumps.append(TestBump(
            x_center=float(rng.uniform(x_lo, x_lo + length)),
            x_radius=float(rng.uniform(0.1, 0.4) * length),
            t_center=float(rng.uniform(0.3, 0.7) * t_end),
            t_radius=float(rng.uniform(0.3, 0.6) * t_end),
            amplitude=float(rng.uniform(0.5, 2.0)),
            period=length,
        ))
    return bumps


def default_k_grid(u: GridFn, count: int = 5) -> List[float]:
    """k values spanning the data range"""
    lo, hi = float(np.min(u.values)), float(np.max(u.values))
    return list(np.linspace(lo, hi, count))


class EntropyAccumulator:
    """
    Discrete Kruzhkov inequality in summation-by-parts form

    For each (k, f) it accumulates
        sum_n sum_i [eta^{n+1} (f^{n+1} - f^n) + dt G_{i+1/2} D+f / dx + dt Q D2f / dx^2] dx
    plus the initial and final trace terms, where eta = |u - k|,
    G = F(u v k, u' v k) - F(u ^ k, u' ^ k) and Q = |A(u) - A(k)|.
    A monotone scheme keeps every entry nonnegative up to rounding.
    """

    def __init__(self, scheme: FiniteVolumeScheme, ks: Sequence[float], test_fns: Sequence[Callable]):
        self.scheme = scheme
        self.ks = np.asarray(list(ks), dtype=float)
        self.test_fns = list(test_fns)
        self.sums = np.zeros((len(self.ks), len(self.test_fns)))
        self.Ak = self.scheme.A(self.ks)

    def _weights(self, t: float, u: GridFn) -> List[np.ndarray]:
        out = []
        for f in self.test_fns:
            w = np.asarray(f(t, u.centers), dtype=float)
            if np.any(w < 0):
                raise ContractError("test function takes negative values")
            out.append(w)
        return out

    def _trace(self, u: GridFn, t: float) -> np.ndarray:
        weights = self._weights(t, u)
        eta = np.abs(u.values[None, :] - self.ks[:, None])
        return np.array([[np.sum(eta[i] * w) * u.dx for w in weights] for i in range(len(self.ks))])

    def begin(self, u0: GridFn, t0: float = 0.0):
        self.sums += self._trace(u0, t0)

    def update(self, u_old: GridFn, u_new: GridFn, t_old: float, dt: float):
        dx = u_old.dx
        f_old = self._weights(t_old, u_old)
        f_new = self._weights(t_old + dt, u_new)
        v, v_next = u_old.values, np.roll(u_old.values, -1)
        A_old = self.scheme.A(v)
        for i, k in enumerate(self.ks):
            eta_new = np.abs(u_new.values - k)
            G = (self.scheme.numerical_flux(np.maximum(v, k), np.maximum(v_next, k))
                 - self.scheme.numerical_flux(np.minimum(v, k), np.minimum(v_next, k)))
            Q = np.abs(A_old - self.Ak[i])
            for j, (fo, fn) in enumerate(zip(f_old, f_new)):
                dplus = np.roll(fo, -1) - fo
                d2 = np.roll(fo, -1) - 2 * fo + np.roll(fo, 1)
                self.sums[i, j] += dx * (np.sum(eta_new * (fn - fo))
                                         + dt / dx * np.sum(G * dplus)
                                         + dt / dx ** 2 * np.sum(Q * d2))

    def margin_at(self, u: GridFn, t: float) -> float:
        """Smallest residual if the run stopped at (t, u)"""
        if not self.sums.size:
            return 0.0
        return float(np.min(self.sums - self._trace(u, t)))

    def residuals(self, u_final: GridFn, t_final: float) -> np.ndarray:
        return self.sums - self._trace(u_final, t_final)


# ----------------------------------------------------------------------
# Evolution
# ----------------------------------------------------------------------
@dataclass
class Trajectory:
    times: List[float]
    states: List[GridFn]
    model: ModelSpec
    config: SolverConfig
    dt_history: List[float] = field(default_factory=list)
    log: List[Dict] = field(default_factory=list)
    entropy_margins: List[Optional[float]] = field(default_factory=list)

    @property
    def initial(self) -> GridFn:
        return self.states[0]

    @property
    def final(self) -> GridFn:
        return self.states[-1]

    def max_conservation_drift(self) -> float:
        return max((rec['conservation_drift'] for rec in self.log), default=0.0)

    def max_bound_violation(self) -> float:
        return max((rec['bound_violation'] for rec in self.log), default=0.0)

    def export(self, directory) -> List[Path]:
        """One CSV per sample time"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        return [state.to_csv(directory / f"state_{i:04d}.csv") for i, state in enumerate(self.states)]


def _invariants(u0: GridFn, u: GridFn, lo: float, hi: float) -> Dict:
    scale = max(u0.l1_norm(), np.finfo(float).tiny)
    low, high = float(np.min(u.values)), float(np.max(u.values))
    return {
        'conservation_drift': abs(u.integral() - u0.integral()) / scale,
        'bound_violation': max(lo - low, high - hi, 0.0),
        'min': low,
        'max': high,
    }


def evolve(u0: GridFn, model: ModelSpec, cfg: SolverConfig,
           entropy: Optional[EntropyAccumulator] = None) -> Trajectory:
    """
    March u0 to cfg.t_end, sampling at t = 0 and every output time

    With cfg.dense every step is stored (needed by entropy_residual).
    """
    if not u0.periodic:
        raise DomainError("the solver works on periodic grids")
    if u0.n_cells != cfg.n_cells:
        raise ShapeError(f"initial data has {u0.n_cells} cells, config asks for {cfg.n_cells}")
    scheme = scheme_for(model, cfg.flux)
    model.phi(u0.values)  # range check

    lo, hi = float(np.min(u0.values)), float(np.max(u0.values))
    dt_stable = scheme.stable_dt(u0, cfg.cfl, lo, hi)
    targets = sorted(t for t in set(cfg.output_times) | {cfg.t_end} if t > 0)

    traj = Trajectory([0.0], [u0], model, cfg)
    traj.log.append(dict(_invariants(u0, u0, lo, hi), time=0.0))
    if entropy is not None:
        entropy.begin(u0, 0.0)
        traj.entropy_margins.append(entropy.margin_at(u0, 0.0))

    u, t = u0, 0.0
    for target in targets:
        while t < target:
            remaining = target - t
            dt = remaining if dt_stable >= remaining * (1 - 1e-12) else dt_stable
            new = scheme.update(u, dt)
            _check_bounds(new, lo, hi)
            if entropy is not None:
                entropy.update(u, new, t, dt)
            traj.dt_history.append(dt)
            u = new
            t = target if dt == remaining else t + dt
            if cfg.dense and t < target:
                traj.times.append(t)
                traj.states.append(u)
        record = dict(_invariants(u0, u, lo, hi), time=target)
        if entropy is not None:
            record['entropy_margin'] = entropy.margin_at(u, target)
            traj.entropy_margins.append(record['entropy_margin'])
        logger.debug(f"t={target:.4g} drift={record['conservation_drift']:.2e} "
                     f"range=[{record['min']:.6f}, {record['max']:.6f}]")
        traj.times.append(target)
        traj.states.append(u)
        traj.log.append(record)

    logger.info(f"Evolved {model.name} to t={cfg.t_end:g} in {len(traj.dt_history)} steps")
    return traj


def entropy_residual(tr: Trajectory, k_list: Sequence[float], test_fns: Sequence[Callable],
                     tol: Optional[float] = None) -> float:
    """
    Replay a dense trajectory through the entropy accumulator

    Returns the most negative residual over all (k, f) pairs.
    """
    if len(tr.states) - 1 != len(tr.dt_history):
        raise ContractError("entropy_residual needs a dense trajectory (SolverConfig.dense)")
    acc = EntropyAccumulator(scheme_for(tr.model, tr.config.flux), k_list, test_fns)
    acc.begin(tr.states[0], tr.times[0])
    for i in range(len(tr.states) - 1):
        acc.update(tr.states[i], tr.states[i + 1], tr.times[i], tr.times[i + 1] - tr.times[i])
    margin = float(np.min(acc.residuals(tr.final, tr.times[-1])))
    if tol is not None and margin < -tol:
        logger.warning(f"entropy residual {margin:.3e} below -{tol:.1e}")
    return margin


@dataclass
class ComparisonReport:
    initially_ordered: bool
    ordering_preserved: bool
    l1_distances: List[float]
    contraction: bool
    worst_order_violation: float = 0.0

    @property
    def passed(self) -> bool:
        return self.contraction and (self.ordering_preserved or not self.initially_ordered)


def compare(trA: Trajectory, trB: Trajectory, tol: float = MAX_PRINCIPLE_TOL) -> ComparisonReport:
    """Ordering and L1-contraction between two runs on the same grid and times"""
    if len(trA.times) != len(trB.times) or not np.allclose(trA.times, trB.times):
        raise ShapeError("trajectories are sampled at different times")
    if not trA.initial.same_grid(trB.initial):
        raise ShapeError("trajectories live on different grids")

    gaps = [b.values - a.values for a, b in zip(trA.states, trB.states)]
    ordered = bool(np.all(gaps[0] >= 0))
    worst = max(float(np.max(-g)) for g in gaps)
    distances = [float(np.sum(np.abs(g)) * trA.initial.dx) for g in gaps]
    scale = max(distances[0], 1.0)
    contraction = all(b <= a + 1e-10 * scale for a, b in zip(distances, distances[1:]))
    report = ComparisonReport(ordered, ordered and worst <= tol, distances, contraction, max(worst, 0.0))
    if ordered and not report.ordering_preserved:
        logger.warning(f"ordering lost: worst violation {worst:.3e}")
    return report
