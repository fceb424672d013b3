#!/usr/bin/env python3
"""
Stefan Module
Periodic Stefan-type solution with a prescribed expanding front

Inside |x| < r(t) = 2 - exp(-alpha t) the solution is positive and solves
the heat equation; between the front and |x| = 2 it is the frozen profile
-psi(|x|); beyond that it vanishes. The inside problem is solved on the
fixed domain y = x / r(t) in [-1, 1], psi is read off the boundary flux
and the pieces are assembled into a 5-periodic function.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import spsolve

from modules.errors import (ConfigurationError, ConstructionError, ContractError, CoverageError,
                            ShapeError)
from modules.field import GridFn, stepanov_norm
from modules.model import ModelSpec, preset
from modules.solver import SolverConfig, evolve

logger = logging.getLogger(__name__)

PERIOD = 5.0
FROZEN_EDGE = 2.0
UNDERFLOW_FLOOR = 1e-200
TR_GAMMA = 2 - np.sqrt(2)


@dataclass(frozen=True)
class MovingBoundary:
    """r(t) = 2 - exp(-alpha t)"""
    alpha: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ContractError(f"alpha must be nonnegative, got {self.alpha}")

    def r(self, t):
        return 2.0 - np.exp(-self.alpha * np.asarray(t, dtype=float))

    def dr(self, t):
        return self.alpha * np.exp(-self.alpha * np.asarray(t, dtype=float))

    def d2r(self, t):
        return -self.alpha ** 2 * np.exp(-self.alpha * np.asarray(t, dtype=float))

    def time_at(self, x):
        """Inverse of r on [1, 2)"""
        if self.alpha == 0:
            raise ContractError("the front does not move when alpha = 0")
        return -np.log(2.0 - np.asarray(x, dtype=float)) / self.alpha


@dataclass
class StefanConfig:
    alpha: float = 0.05
    n_y: int = 400
    t_end: Optional[float] = None
    dt_start: float = 1e-3
    dt_growth: float = 1.05
    dt_max: float = 0.1
    n_snapshots: int = 81
    amplitude: float = 0.5
    n_x: int = 1000
    t_burn: Optional[float] = None
    rh_factor: float = 5e-3

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError("alpha must be nonnegative")
        if self.t_end is None:
            if self.alpha == 0:
                raise ConfigurationError("t_end is required when alpha = 0")
            self.t_end = 80.0 / self.alpha
        if self.n_y < 4 or self.n_y % 2:
            raise ConfigurationError(f"n_y must be an even number >= 4, got {self.n_y}")
        if not (0 < self.dt_start <= self.dt_max) or self.dt_growth < 1:
            raise ConfigurationError("time grid needs 0 < dt_start <= dt_max and dt_growth >= 1")
        if self.t_burn is None:
            self.t_burn = 0.1 * self.t_end

    @classmethod
    def from_dict(cls, config: Dict) -> 'StefanConfig':
        known = {k: v for k, v in config.items() if k in cls.__dataclass_fields__}
        try:
            return cls(**known)
        except TypeError as e:
            raise ConfigurationError(f"invalid stefan block: {e}") from e

    def refined(self, factor: int = 2) -> 'StefanConfig':
        """
        Space and time refined together by `factor`

        The geometric start of the time grid has steps of about
        (dt_growth - 1) t, so the growth excess is divided by `factor` too.
        """
        return replace(self, n_y=self.n_y * factor, n_x=self.n_x * factor,
                       dt_start=self.dt_start / factor, dt_max=self.dt_max / factor,
                       dt_growth=1.0 + (self.dt_growth - 1.0) / factor)


def default_initial_profile(n_y: int, amplitude: float = 0.5) -> GridFn:
    """h (1 - y^2)^3 sampled at the cell centers of [-1, 1]"""
    return GridFn.from_samples(lambda y: amplitude * (1 - y * y) ** 3, -1.0, 2.0, n_y, periodic=False)


# ----------------------------------------------------------------------
# Fixed-domain solve
# ----------------------------------------------------------------------
@dataclass
class FixedDomainTrajectory:
    y: np.ndarray
    alpha: float
    phi0: GridFn
    times: np.ndarray
    w_plus: np.ndarray
    w_minus: np.ndarray
    sup_v: np.ndarray
    min_v: np.ndarray
    energy: np.ndarray
    symmetry_error: float
    snap_times: np.ndarray
    snapshots: np.ndarray

    @property
    def h(self) -> float:
        return 2.0 / self.y.size

    @property
    def boundary(self) -> MovingBoundary:
        return MovingBoundary(self.alpha)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def _ghosted(v: np.ndarray) -> np.ndarray:
    """Ghosts from the quadratic through v = 0 at the wall and the two nearest cells"""
    return np.concatenate(([-2 * v[0] + v[1] / 3], v, [-2 * v[-1] + v[-2] / 3]))


def boundary_derivatives(v: np.ndarray, h: float) -> Tuple[float, float]:
    """(v_y(1), v_y(-1)) from the one-sided three-point stencil through v = 0"""
    w_plus = -(9 * v[-1] - v[-2]) / (3 * h)
    w_minus = (9 * v[0] - v[1]) / (3 * h)
    return float(w_plus), float(w_minus)


def second_derivative(v: np.ndarray, h: float) -> np.ndarray:
    g = _ghosted(v)
    return (g[2:] - 2 * g[1:-1] + g[:-2]) / h ** 2


def _operator(y: np.ndarray, h: float, r: float, dr: float) -> sps.csc_matrix:
    """
    (1/r^2) d2/dy2 + (r'/r) y d/dy with the ghosts of _ghosted

    The wall face flux (ghost - v_N) / h is the one-sided stencil of
    boundary_derivatives, so the mass the scheme loses is the mass psi carries.
    """
    n = y.size
    diff = 1.0 / (r * r * h * h)
    drift = dr / r * y / (2 * h)
    main = np.full(n, -2 * diff)
    main[0] += -2 * diff + 2 * drift[0]
    main[-1] += -2 * diff - 2 * drift[-1]
    upper = diff + drift[:-1]
    lower = diff - drift[1:]
    upper[0] += diff / 3 - drift[0] / 3
    lower[-1] += diff / 3 + drift[-1] / 3
    return sps.diags([lower, main, upper], offsets=[-1, 0, 1], format='csc')


def _time_grid(cfg: StefanConfig, t_end: float) -> np.ndarray:
    times = [0.0]
    dt = cfg.dt_start
    while times[-1] < t_end:
        times.append(min(times[-1] + dt, t_end))
        dt = min(dt * cfg.dt_growth, cfg.dt_max)
    return np.array(times)


def _energy(v: np.ndarray, h: float, r: float, dr: float, w_plus: float, w_minus: float) -> float:
    return float(np.sum(second_derivative(v, h) ** 2) * h + r * dr * (w_plus ** 2 + w_minus ** 2))


def solve_fixed_domain(phi0: GridFn, alpha: float, n_y: int, t_end: float,
                       cfg: Optional[StefanConfig] = None) -> FixedDomainTrajectory:
    """
    TR-BDF2 for v_t = v_yy / r^2 + (r'/r) y v_y, v(t, +-1) = 0

    Each step is a Crank-Nicolson stage followed by a BDF2 stage. The BDF2
    stage damps stiff modes, so rounding noise decays with the solution
    instead of outliving it.
    """
    cfg = cfg or StefanConfig(alpha=alpha, n_y=n_y, t_end=t_end)
    if phi0.n_cells != n_y:
        raise ShapeError(f"phi0 has {phi0.n_cells} cells, expected {n_y}")
    if n_y % 2:
        raise ConfigurationError("n_y must be even")
    v = np.array(phi0.values, dtype=float)
    peak = float(np.max(np.abs(v))) if v.size else 0.0
    if np.min(v) < 0:
        raise ContractError("phi0 must be nonnegative")
    if np.max(np.abs(v - v[::-1])) > 1e-12 * max(peak, 1.0):
        raise ContractError("phi0 must be even")

    boundary = MovingBoundary(alpha)
    h = 2.0 / n_y
    y = -1.0 + (np.arange(n_y) + 0.5) * h
    times = _time_grid(cfg, t_end)
    targets = np.unique(np.concatenate((np.linspace(0, t_end, cfg.n_snapshots),
                                        np.geomspace(cfg.dt_start, t_end, cfg.n_snapshots))))
    eye = sps.identity(n_y, format='csc')

    n = times.size
    w_plus, w_minus = np.zeros(n), np.zeros(n)
    sup_v, min_v, energy = np.zeros(n), np.zeros(n), np.zeros(n)
    snap_times, snapshots = [], []
    symmetry = 0.0
    next_target = 0

    def record(k: int, t: float, v: np.ndarray):
        nonlocal next_target, symmetry
        wp, wm = boundary_derivatives(v, h)
        r, dr = float(boundary.r(t)), float(boundary.dr(t))
        w_plus[k], w_minus[k] = wp, wm
        sup_v[k], min_v[k] = np.max(v), np.min(v)
        energy[k] = _energy(v, h, r, dr, wp, wm)
        symmetry = max(symmetry, float(np.max(np.abs(v - v[::-1]))))
        if next_target < targets.size and t >= targets[next_target] * (1 - 1e-12):
            snap_times.append(t)
            snapshots.append(v.copy())
            while next_target < targets.size and targets[next_target] <= t * (1 + 1e-12):
                next_target += 1

    def op(t: float) -> sps.csc_matrix:
        return _operator(y, h, float(boundary.r(t)), float(boundary.dr(t)))

    record(0, 0.0, v)
    L_old = op(0.0)
    for k in range(1, n):
        t0, t1 = times[k - 1], times[k]
        dt = t1 - t0
        # trapezoidal stage to t0 + g dt, then BDF2 to t1
        t_mid = t0 + TR_GAMMA * dt
        L_mid = op(t_mid)
        stage = spsolve(eye - 0.5 * TR_GAMMA * dt * L_mid, v + 0.5 * TR_GAMMA * dt * (L_old @ v))
        L_new = op(t1)
        rhs = (stage - (1 - TR_GAMMA) ** 2 * v) / (TR_GAMMA * (2 - TR_GAMMA))
        v = spsolve(eye - (1 - TR_GAMMA) / (2 - TR_GAMMA) * dt * L_new, rhs)
        L_old = L_new
        record(k, t1, v)

    if not snap_times or snap_times[-1] < times[-1]:
        snap_times.append(float(times[-1]))
        snapshots.append(v.copy())
    logger.info(f"Fixed-domain solve: alpha={alpha:g}, n_y={n_y}, {n - 1} steps to t={t_end:g}")
    return FixedDomainTrajectory(y, alpha, phi0, times, w_plus, w_minus, sup_v, min_v, energy,
                                 symmetry, np.array(snap_times), np.array(snapshots))


def fixed_domain_invariants(traj: FixedDomainTrajectory) -> Dict[str, float]:
    """Positivity, maximum principle, symmetry and the derivative chain bound"""
    peak = float(np.max(traj.phi0.values))
    h = traj.h
    half = traj.y.size // 2
    chain = 0.0
    for v in traj.snapshots:
        vyy = second_derivative(v, h)
        vy_faces = np.diff(v) / h
        # faces to the right of y = 0: v_y(y) is the sum of v_yy h from 0
        right = vy_faces[half:]
        acc_sq = np.cumsum(vyy[half:-1] ** 2) * h
        dist = (np.arange(right.size) + 1) * h
        chain = max(chain, float(np.max(right ** 2 - dist * acc_sq, initial=0.0)))
    return {
        'min_v': float(np.min(traj.min_v)),
        'max_excess': float(np.max(traj.sup_v) - peak),
        'symmetry_error': traj.symmetry_error,
        'chain_violation': chain,
    }


# ----------------------------------------------------------------------
# psi
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class PsiProfile:
    """
    psi on (1, 2) sampled at x = r(t_k)

    Beyond the last sample an exponential tail C exp(-lam t) for |v_y(t, 1)|
    is used: psi(x) = C (2 - x)^(lam/alpha - 1) / (alpha x).
    """
    times: np.ndarray
    x: np.ndarray
    values: np.ndarray
    alpha: float
    tail: Optional[Tuple[float, float]] = None

    @property
    def trivial(self) -> bool:
        return self.x.size == 0

    @property
    def x_reach(self) -> float:
        return float(self.x[-1]) if self.x.size else 1.0

    def max(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0

    def tail_value(self, x):
        C, lam = self.tail
        x = np.asarray(x, dtype=float)
        gap = np.clip(2.0 - x, 0.0, None)
        return C * gap ** (lam / self.alpha - 1) / (self.alpha * x)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.trivial:
            return out
        near = (x >= 1.0) & (x < self.x[0])
        body = (x >= self.x[0]) & (x <= self.x[-1])
        beyond = (x > self.x[-1]) & (x < FROZEN_EDGE)
        out[near] = self.values[0]
        out[body] = np.interp(x[body], self.x, self.values)
        if np.any(beyond):
            if self.tail is None:
                raise CoverageError(f"psi is known up to x={self.x_reach:.6f}, asked for {np.max(x[beyond]):.6f}")
            out[beyond] = self.tail_value(x[beyond])
        return out


def _fit_tail(times: np.ndarray, w: np.ndarray) -> Optional[Tuple[float, float]]:
    """C exp(-lam t) through the last quarter of the valid samples"""
    if times.size < 8:
        return None
    start = int(0.75 * times.size)
    slope, intercept = np.polyfit(times[start:], np.log(np.abs(w[start:])), 1)
    if slope >= 0:
        return None
    return float(np.exp(intercept)), float(-slope)


def boundary_flux_to_psi(traj: FixedDomainTrajectory, alpha: Optional[float] = None,
                         tol: float = 1e-6) -> PsiProfile:
    """psi(r(t)) = -v_y(t, 1) / (r(t) r'(t)) for t > 0"""
    alpha = traj.alpha if alpha is None else alpha
    boundary = MovingBoundary(alpha)
    if alpha <= 0:
        raise ContractError("psi is only defined for a moving front (alpha > 0)")
    t, w = traj.times[1:], traj.w_plus[1:]
    if not np.any(np.abs(w) > UNDERFLOW_FLOOR):
        return PsiProfile(np.zeros(0), np.zeros(0), np.zeros(0), alpha, None)

    psi = -w / (boundary.r(t) * boundary.dr(t))
    valid = np.abs(w) > UNDERFLOW_FLOOR
    scale = float(np.max(np.abs(psi[valid])))
    if np.any(psi[valid] < -tol * scale):
        worst = float(np.min(psi[valid]))
        raise ConstructionError(f"psi takes the negative value {worst:.3e}; phi0 must be positive")
    dropped = int(np.count_nonzero(valid & (psi <= 0)))
    if dropped:
        logger.warning(f"Dropped {dropped} psi samples in [{-tol * scale:.2e}, 0] "
                       f"(rounding noise of the boundary flux)")
    # r(t) rounds to 2.0 once exp(-alpha t) drops below float resolution
    keep = valid & (psi > 0) & (boundary.r(t) < FROZEN_EDGE)
    t, w, psi = t[keep], w[keep], psi[keep]
    x = boundary.r(t)
    increasing = np.concatenate(([True], np.diff(x) > 0)) if x.size else np.zeros(0, dtype=bool)
    t, w, psi, x = t[increasing], w[increasing], psi[increasing], x[increasing]
    tail = _fit_tail(t, w)
    profile = PsiProfile(t, x, psi, alpha, tail)
    logger.info(f"psi sampled on [{profile.x[0]:.4f}, {profile.x_reach:.6f}], max {profile.max():.4f}")
    return profile


# ----------------------------------------------------------------------
# Assembly
# ----------------------------------------------------------------------
@dataclass
class StefanSolution:
    fixed: FixedDomainTrajectory
    psi: PsiProfile
    boundary: MovingBoundary
    x: np.ndarray
    times: np.ndarray
    states: np.ndarray

    @property
    def alpha(self) -> float:
        return self.boundary.alpha

    @property
    def dx(self) -> float:
        return PERIOD / self.x.size

    def state(self, i: int) -> GridFn:
        return GridFn(-PERIOD / 2, PERIOD, self.states[i], True)

    def evaluate(self, t: float, x) -> np.ndarray:
        """u(t, x), linear in time between snapshots"""
        x = np.asarray(x, dtype=float)
        folded = (x + PERIOD / 2) % PERIOD - PERIOD / 2
        i = int(np.clip(np.searchsorted(self.times, t, side='right') - 1, 0, self.times.size - 1))
        a = _slice(self.fixed.y, self.fixed.snapshots[i], self.psi, self.boundary, self.times[i], folded)
        if i + 1 >= self.times.size or t <= self.times[i]:
            return a
        b = _slice(self.fixed.y, self.fixed.snapshots[i + 1], self.psi, self.boundary, self.times[i + 1], folded)
        theta = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return (1 - theta) * a + theta * b


def _slice(y: np.ndarray, v: np.ndarray, psi: PsiProfile, boundary: MovingBoundary,
           t: float, x: np.ndarray) -> np.ndarray:
    r = float(boundary.r(t))
    ax = np.abs(x)
    out = np.zeros_like(x)
    inside = ax < r
    frozen = (ax >= r) & (ax < FROZEN_EDGE)
    out[inside] = np.interp(x[inside] / r, np.concatenate(([-1.0], y, [1.0])),
                            np.concatenate(([0.0], v, [0.0])))
    out[frozen] = -psi(ax[frozen])
    return out


def assemble_periodic_solution(traj: FixedDomainTrajectory, psi: PsiProfile,
                               alpha: Optional[float] = None, n_x: int = 1000) -> StefanSolution:
    """Point samples of u(t, .) on [-5/2, 5/2) at every snapshot time"""
    boundary = MovingBoundary(traj.alpha if alpha is None else alpha)
    dx = PERIOD / n_x
    x = -PERIOD / 2 + (np.arange(n_x) + 0.5) * dx
    states = np.array([_slice(traj.y, v, psi, boundary, t, x)
                       for t, v in zip(traj.snap_times, traj.snapshots)])
    return StefanSolution(traj, psi, boundary, x, traj.snap_times.copy(), states)


def build_stefan_solution(cfg: StefanConfig, phi0: Optional[GridFn] = None) -> StefanSolution:
    phi0 = phi0 if phi0 is not None else default_initial_profile(cfg.n_y, cfg.amplitude)
    traj = solve_fixed_domain(phi0, cfg.alpha, cfg.n_y, cfg.t_end, cfg)
    psi = boundary_flux_to_psi(traj)
    return assemble_periodic_solution(traj, psi, cfg.alpha, cfg.n_x)


def stefan_model(solution: StefanSolution, margin: float = 0.5) -> ModelSpec:
    """The u+ model on a state range wide enough for -psi"""
    lo = -np.ceil(solution.psi.max() + margin)
    hi = max(1.0, np.ceil(float(np.max(solution.fixed.phi0.values)) + margin))
    return preset('stefan', float(lo), float(hi))


# ----------------------------------------------------------------------
# Verification
# ----------------------------------------------------------------------
@dataclass
class JumpReport:
    times: List[float] = field(default_factory=list)
    rh_residuals: List[float] = field(default_factory=list)
    inside_slopes: List[float] = field(default_factory=list)
    jump_A: float = 0.0
    outside_A_flux: float = 0.0
    entropy_signs_ok: bool = True
    mean_drift: float = 0.0
    tol_rh: float = 0.0
    tol_jump: float = 0.0

    @property
    def worst_rh(self) -> float:
        return max(self.rh_residuals, default=0.0)

    @property
    def passed(self) -> bool:
        return (self.worst_rh <= self.tol_rh and self.jump_A <= self.tol_jump
                and self.outside_A_flux <= self.tol_rh and self.entropy_signs_ok)


def verify_jump_conditions(s: StefanSolution, rh_factor: float = 5e-3) -> JumpReport:
    """
    Front conditions at x = +-r(t) for every snapshot t > 0

    [A(u)] = 0, A(u)_x = 0 outside the front, the Rankine-Hugoniot balance
    -r' [u] = -[A(u)_x] and the entropy signs u_x(r-) <= 0, u_x(-r+) >= 0.
    Inside limits at the front are extrapolated linearly from the two nearest
    inside samples of the assembled grid; outside limits are the nearest
    outside sample.
    """
    peak = float(np.max(s.fixed.phi0.values))
    report = JumpReport(tol_rh=rh_factor * s.psi.max(), tol_jump=rh_factor * max(peak, s.psi.max()))
    model = stefan_model(s)
    lo, hi = float(model.u_min), float(model.u_max)
    x, dx = s.x, s.dx
    means = [float(np.sum(u) * dx / PERIOD) for u in s.states]
    report.mean_drift = float(np.max(np.abs(np.array(means) - means[0])))

    for t, u in zip(s.times, s.states):
        if t <= 0:
            continue
        r, dr = float(s.boundary.r(t)), float(s.boundary.dr(t))
        psi_r = float(s.psi(np.array([r]))[0]) if r < FROZEN_EDGE else 0.0
        a = model.A(np.clip(u, lo, hi))

        right = np.nonzero(x <= r - dx / 2)[0][-1]
        left = np.nonzero(x >= -r + dx / 2)[0][0]
        out_right = np.nonzero(x >= r + dx / 2)[0]
        out_left = np.nonzero(x <= -r - dx / 2)[0]
        slope_right = (0.0 - u[right]) / (r - x[right])
        slope_left = (u[left] - 0.0) / (x[left] + r)

        in_right = u[right] + (u[right] - u[right - 1]) * (r - x[right]) / dx
        in_left = u[left] + (u[left] - u[left + 1]) * (x[left] + r) / dx
        a_in = model.A(np.clip([in_left, in_right], lo, hi))
        a_out = a[[out_left[-1], out_right[0]]]
        report.jump_A = max(report.jump_A, float(np.max(np.abs(a_out - a_in))))
        for side in (a[out_left], a[out_right]):
            if side.size > 1:
                report.outside_A_flux = max(report.outside_A_flux, float(np.max(np.abs(np.diff(side)))) / dx)

        residual = max(abs(psi_r * dr + slope_right), abs(slope_left - psi_r * dr))
        report.times.append(float(t))
        report.rh_residuals.append(float(residual))
        report.inside_slopes.append(float(slope_right))
        if slope_right > 0 or slope_left < 0:
            report.entropy_signs_ok = False

    logger.info(f"Jump conditions: worst RH {report.worst_rh:.3e} (tol {report.tol_rh:.3e}), "
                f"[A(u)] {report.jump_A:.2e}, outside A_x {report.outside_A_flux:.2e}, "
                f"mean drift {report.mean_drift:.2e}")
    return report


@dataclass
class RateFit:
    rate: float
    threshold: float
    predicted: float
    samples: int
    inconclusive: bool

    @property
    def passed(self) -> bool:
        return not self.inconclusive and self.rate >= self.threshold


@dataclass
class DecayReport:
    alpha: float
    fits: Dict[str, RateFit]

    @property
    def passed(self) -> bool:
        return all(fit.passed for fit in self.fits.values())


def _fit_rate(t: np.ndarray, values: np.ndarray, t_burn: float, threshold: float,
              predicted: float) -> RateFit:
    values = np.abs(values)
    mask = (t >= t_burn) & (values > UNDERFLOW_FLOOR)
    if np.count_nonzero(mask) < 3:
        return RateFit(float('nan'), threshold, predicted, int(np.count_nonzero(mask)), True)
    logs = np.log(values[mask])
    slope, intercept = np.polyfit(t[mask], logs, 1)
    misfit = float(np.sqrt(np.mean((logs - (slope * t[mask] + intercept)) ** 2)))
    span = float(np.ptp(logs))
    inconclusive = span == 0 or misfit > 0.05 * span
    return RateFit(float(-slope), threshold, predicted, int(np.count_nonzero(mask)), inconclusive)


def verify_decay_estimates(s, t_burn: Optional[float] = None) -> DecayReport:
    """
    Exponential rates of E(t), |v_y(t, 1)| and sup v

    Accepts a StefanSolution or a bare FixedDomainTrajectory (alpha = 0).
    """
    traj = getattr(s, 'fixed', s)
    alpha = traj.alpha
    t = traj.times
    t_burn = 0.1 * traj.t_end if t_burn is None else t_burn
    fits = {
        'energy': _fit_rate(t, traj.energy, t_burn, 2.8 * alpha, 3 * alpha),
        'boundary_flux': _fit_rate(t, traj.w_plus, t_burn, 0.9 * alpha, alpha),
        'sup_v': _fit_rate(t, traj.sup_v, t_burn, 1.4 * alpha, 1.5 * alpha),
    }
    for name, fit in fits.items():
        logger.info(f"rate({name}) = {fit.rate:.4f} (threshold {fit.threshold:.4f}, "
                    f"{'inconclusive' if fit.inconclusive else 'fit ok'})")
    return DecayReport(alpha, fits)


@dataclass
class MassBalance:
    initial_mass: float
    frozen_mass: float
    tail_mass: float

    @property
    def absolute(self) -> float:
        return abs(self.initial_mass - self.frozen_mass)

    @property
    def relative(self) -> Optional[float]:
        if self.initial_mass == 0:
            return None
        return self.absolute / self.initial_mass


def mass_balance(phi0: GridFn, psi: PsiProfile) -> MassBalance:
    """
    int phi0 against 2 int_1^2 psi

    The psi integral runs in time, 2 int psi(r) r' dt, with the fitted tail
    C exp(-lam T) / (lam r(T)) per side beyond the last sample.
    """
    initial = phi0.integral()
    if psi.trivial:
        return MassBalance(initial, 0.0, 0.0)
    boundary = MovingBoundary(psi.alpha)
    integrand = psi.values * boundary.dr(psi.times)
    body = float(np.sum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(psi.times)))
    head = float(psi.values[0] * (psi.x[0] - 1.0))
    tail = 0.0
    if psi.tail is not None:
        C, lam = psi.tail
        T = float(psi.times[-1])
        tail = float(C * np.exp(-lam * T) / (lam * boundary.r(T)))
    return MassBalance(initial, 2 * (head + body + tail), 2 * tail)


# ----------------------------------------------------------------------
# Perturbation
# ----------------------------------------------------------------------
@dataclass
class NonDecayReport:
    times: List[float]
    x_norms: List[float]
    unperturbed_x_norms: List[float]
    equivalence_errors: List[float]
    construction_gaps: List[float]
    perturbation_norm: float
    t_check: float = 1.0
    equivalence_tol: float = 1e-6

    @property
    def nondecay(self) -> bool:
        late = [n for t, n in zip(self.times, self.x_norms) if t >= self.t_check]
        return bool(late) and min(late) >= 0.9 * self.perturbation_norm

    @property
    def equivalent(self) -> bool:
        return max(self.equivalence_errors, default=0.0) <= self.equivalence_tol

    @property
    def passed(self) -> bool:
        return self.equivalent and (self.nondecay or self.perturbation_norm == 0)


def perturbation_on_line(v_pert: GridFn, periods: int) -> GridFn:
    """
    Place one copy of v_pert (given on [-5/2, 5/2), support in 2 <= |x| <= 5/2)
    around x = 5/2 of a grid of `periods` periods starting at -5/2 - 5
    """
    n = v_pert.n_cells
    x_lo = -PERIOD / 2 - PERIOD
    values = np.zeros(n * periods)
    centers = x_lo + (np.arange(n * periods) + 0.5) * v_pert.dx
    window = (centers >= 2.0) & (centers <= 3.0)
    folded = np.round(((centers[window] + PERIOD / 2) % PERIOD) / v_pert.dx - 0.5).astype(int)
    values[window] = v_pert.values[np.clip(folded, 0, n - 1)]
    return GridFn(x_lo, PERIOD * periods, values, True)


def line_initial_data(s: StefanSolution, v_pert: GridFn,
                      periods: int = 3) -> Tuple[GridFn, GridFn, ModelSpec]:
    """
    p = u(0, .) and one copy of v_pert on `periods` periods of the line

    Returns (p, v_line, model) with the model range widened by sup |v_pert|.
    """
    if periods < 3:
        raise ConfigurationError("the perturbation needs at least three periods")
    if not np.isclose(v_pert.x_lo, -PERIOD / 2) or not np.isclose(v_pert.length, PERIOD):
        raise ContractError("v_pert must be given on one period [-5/2, 5/2)")
    if np.any(v_pert.values > 0):
        raise ContractError("v_pert must be nonpositive")
    support = np.abs(v_pert.centers)[v_pert.values != 0]
    if support.size and np.min(support) < FROZEN_EDGE:
        raise ContractError("v_pert must be supported in [2, 3] (mod 5)")

    v_line = perturbation_on_line(v_pert, periods)
    p = GridFn.from_samples(lambda x: s.evaluate(0.0, x), v_line.x_lo, v_line.length, v_line.n_cells)
    return p, v_line, stefan_model(s, margin=0.5 + v_pert.sup_norm())


def perturbed_nondecay_experiment(s: StefanSolution, v_pert: GridFn, solver_cfg: SolverConfig,
                                  periods: int = 3, t_check: float = 1.0,
                                  equivalence_tol: float = 1e-6) -> NonDecayReport:
    """
    Evolve p and p + v_pert with the finite-volume solver

    The frozen region never moves in the scheme (A and phi vanish on u <= 0),
    so the perturbed run must equal the unperturbed one plus v_pert.
    """
    if solver_cfg.n_cells != v_pert.n_cells * periods:
        raise ShapeError(f"solver grid needs {v_pert.n_cells * periods} cells")
    p, v_line, model = line_initial_data(s, v_pert, periods)

    base = evolve(p, model, solver_cfg)
    pert = evolve(p + v_line, model, solver_cfg)

    cell = (p.centers >= -PERIOD / 2) & (p.centers < PERIOD / 2)
    report = NonDecayReport([], [], [], [], [], stepanov_norm(v_line), t_check, equivalence_tol)
    for t, ub, up in zip(base.times, base.states, pert.states):
        report.times.append(float(t))
        report.x_norms.append(stepanov_norm(up))
        report.unperturbed_x_norms.append(stepanov_norm(ub))
        report.equivalence_errors.append((up - (ub + v_line)).l1_norm())
        exact = s.evaluate(float(t), p.centers[cell])
        report.construction_gaps.append(float(np.sum(np.abs(ub.values[cell] - exact)) * p.dx))

    logger.info(f"Non-decay run: final X-norm {report.x_norms[-1]:.4f} vs |v|_X {report.perturbation_norm:.4f}")
    return report
