#!/usr/bin/env python3
"""
Harness Module
Experiment configuration, decay / bracketing / exactness / Stefan runs,
report emission and the command-line interface
"""

import argparse
import csv
import hashlib
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from modules import console
from modules.errors import (ConfigurationError, ContractError, DecayLabError, InvariantError)
from modules.field import (GridFn, build_exactness_data, envelope_means, lattice_envelopes, mean,
                           mean_vanishing_check, restrict_to_cell, stepanov_norm, v_norm,
                           vanishing_profile)
from modules.lattice import Lattice, verify_period_group
from modules.model import (ModelSpec, check_gn_condition, check_nd_condition,
                           check_one_sided_condition, compute_F, resolve_model)
from modules.solver import (EntropyAccumulator, SolverConfig, Trajectory, compare, default_k_grid,
                            evolve, random_test_functions, scheme_for)
from modules.stefan import (PERIOD, StefanConfig, StefanSolution, build_stefan_solution,
                            fixed_domain_invariants, line_initial_data, mass_balance,
                            perturbed_nondecay_experiment, stefan_model, verify_decay_estimates,
                            verify_jump_conditions)

logger = logging.getLogger(__name__)

VERSION = '1.1.0'
KINDS = ('decay', 'bracketing', 'stefan', 'exactness')
CSV_COLUMNS = ['time', 'l1_cell', 'stepanov_x', 'mean', 'min', 'max', 'entropy_margin']

DEFAULT_TOLERANCES = {
    'conservation': 1e-10,
    'max_principle': 1e-8,
    'positivity': 1e-6,
    'entropy': 1e-6,
    'membership': 1e-9,
    'rh_factor': 5e-3,
    'equivalence': 1e-6,
    'decay_fraction': 0.05,
    'mass_balance': 0.02,
    'symmetry': 1e-10,
}

DEFAULT_CONFIG = {
    'output': {'root': './experiments'},
    'logging': {'level': 'INFO', 'format': '%(asctime)s - %(levelname)s - %(message)s'},
    'tolerances': DEFAULT_TOLERANCES,
    'presets': {},
    'scenarios': {},
}


# ----------------------------------------------------------------------
# Configuration
# ----------------------------------------------------------------------
def load_config(config_path: Optional[str] = None) -> Dict:
    """
    Load the YAML configuration and fill in defaults

    Without a path, ./config.yaml is used when present, then the copy
    shipped next to the package. DECAYLAB_OUTPUT_ROOT overrides output.root.
    """
    if config_path is None:
        candidates = [Path('config.yaml'), Path(__file__).resolve().parent.parent / 'config.yaml']
        config_path = next((str(p) for p in candidates if p.exists()), None)

    data: Dict = {}
    if config_path is not None:
        try:
            with open(config_path, 'r') as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigurationError(f"cannot read config {config_path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigurationError(f"invalid YAML in {config_path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"{config_path} must contain a mapping")

    config = {}
    for section, default in DEFAULT_CONFIG.items():
        value = data.get(section, {})
        if value is None:
            value = {}
        if not isinstance(value, dict):
            raise ConfigurationError(f"section '{section}' must be a mapping")
        config[section] = {**default, **value}

    env_root = os.environ.get('DECAYLAB_OUTPUT_ROOT')
    if env_root:
        config['output']['root'] = env_root
    return config


def _plain(data: Any) -> Any:
    """Recursively convert numpy scalars, tuples and paths to YAML-safe types"""
    if isinstance(data, dict):
        return {str(k): _plain(v) for k, v in data.items()}
    if isinstance(data, (set, list, tuple)):
        return [_plain(v) for v in data]
    if isinstance(data, np.ndarray):
        return [_plain(v) for v in data.tolist()]
    if isinstance(data, np.bool_):
        return bool(data)
    if isinstance(data, np.integer):
        return int(data)
    if isinstance(data, np.floating):
        return float(data)
    if isinstance(data, Path):
        return str(data)
    return data


@dataclass
class ExperimentConfig:
    scenario_id: str
    kind: str
    model: Optional[ModelSpec]
    initial: Dict
    solver: Optional[SolverConfig]
    stefan: Optional[StefanConfig]
    output_dir: Path
    tolerances: Dict[str, float]
    params: Dict[str, Any] = field(default_factory=dict)
    raw: Dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, scenario_id: str, data: Dict, config: Optional[Dict] = None) -> 'ExperimentConfig':
        config = config or load_config()
        if not isinstance(data, dict):
            raise ConfigurationError(f"scenario '{scenario_id}' must be a mapping")
        kind = data.get('kind', 'decay')
        if kind not in KINDS:
            raise ConfigurationError(f"scenario '{scenario_id}': unknown kind '{kind}'")

        initial = dict(data.get('initial', {}) or {})
        preset_name = data.get('preset', 'stefan' if kind == 'stefan' else 'burgers')
        stefan_recipe = kind == 'stefan' or initial.get('profile') == 'stefan'
        model = None if stefan_recipe else resolve_model(preset_name, config.get('presets'))

        solver = None
        if 'solver' in data:
            solver = SolverConfig.from_dict(data['solver'])
        elif kind in ('decay', 'bracketing', 'exactness') and not stefan_recipe:
            raise ConfigurationError(f"scenario '{scenario_id}' needs a solver block")
        stefan = StefanConfig.from_dict(data.get('stefan', {}) or {}) if stefan_recipe else None

        tolerances = {**DEFAULT_TOLERANCES, **config.get('tolerances', {})}
        reserved = {'kind', 'preset', 'initial', 'solver', 'stefan'}
        params = {k: v for k, v in data.items() if k not in reserved}
        params.setdefault('preset', preset_name)
        output_dir = Path(config['output']['root']) / scenario_id
        return cls(scenario_id, kind, model, initial, solver, stefan, output_dir, tolerances, params, data)

    @classmethod
    def from_scenario(cls, scenario_id: str, config: Dict) -> 'ExperimentConfig':
        scenarios = config.get('scenarios', {})
        if scenario_id not in scenarios:
            known = ', '.join(sorted(scenarios)) or 'none'
            raise ConfigurationError(f"unknown scenario '{scenario_id}' (known: {known})")
        return cls.from_dict(scenario_id, scenarios[scenario_id], config)

    def config_hash(self) -> str:
        text = yaml.safe_dump(_plain(self.raw), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------
@dataclass
class Report:
    scenario_id: str
    kind: str
    rows: List[Dict] = field(default_factory=list)
    verdicts: Dict[str, Any] = field(default_factory=dict)
    invariants: Dict[str, Any] = field(default_factory=dict)
    rules: Dict[str, Dict] = field(default_factory=dict)
    measurements: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def add_rule(self, name: str, passed: bool, value: Any, limit: Any = None):
        self.rules[name] = {'passed': bool(passed), 'value': value, 'limit': limit}

    def warn(self, message: str):
        logger.warning(message)
        self.warnings.append(message)

    @property
    def passed(self) -> bool:
        return all(rule['passed'] for rule in self.rules.values())

    def failed_rules(self) -> List[str]:
        return [name for name, rule in self.rules.items() if not rule['passed']]

    def to_dict(self) -> Dict:
        return _plain({
            'scenario': self.scenario_id,
            'kind': self.kind,
            'passed': self.passed,
            'verdicts': self.verdicts,
            'invariants': self.invariants,
            'rules': self.rules,
            'measurements': self.measurements,
            'warnings': self.warnings,
        })


def write_report(report: Report, cfg: ExperimentConfig, model: Optional[ModelSpec] = None) -> Path:
    """norms.csv, report.yaml and manifest.yaml under the experiment directory"""
    directory = Path(cfg.output_dir)
    directory.mkdir(parents=True, exist_ok=True)

    with open(directory / 'norms.csv', 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in report.rows:
            writer.writerow({k: ('' if row.get(k) is None else repr(float(row[k]))) for k in CSV_COLUMNS})

    with open(directory / 'report.yaml', 'w') as f:
        yaml.safe_dump(report.to_dict(), f, sort_keys=False)

    model = model or cfg.model
    manifest = {
        'scenario': cfg.scenario_id,
        'kind': cfg.kind,
        'version': VERSION,
        'config_hash': cfg.config_hash(),
        'model': model.name if model else None,
        'model_hash': model.fingerprint() if model else None,
        'tolerances': cfg.tolerances,
        'created': datetime.now().isoformat(),
        'passed': report.passed,
    }
    with open(directory / 'manifest.yaml', 'w') as f:
        yaml.safe_dump(_plain(manifest), f, sort_keys=False)
    logger.info(f"Report written to {directory}")
    return directory


def _row(t: float, u: GridFn, target: float, margin: Optional[float] = None) -> Dict:
    diff = u - target
    return {
        'time': float(t),
        'l1_cell': diff.l1_norm(),
        'stepanov_x': stepanov_norm(diff),
        'mean': mean(u),
        'min': float(np.min(u.values)),
        'max': float(np.max(u.values)),
        'entropy_margin': margin,
    }


def _decay_verdict(rows: List[Dict], fraction: float) -> Tuple[bool, float]:
    initial, final = rows[0]['stepanov_x'], rows[-1]['stepanov_x']
    ratio = final / initial if initial > 0 else 0.0
    return ratio <= fraction, ratio


def _nonincreasing(values: Sequence[float], rel: float = 1e-9) -> bool:
    scale = max(max(values, default=0.0), 1e-300)
    return all(b <= a + rel * scale for a, b in zip(values, values[1:]))


# ----------------------------------------------------------------------
# Initial data
# ----------------------------------------------------------------------
def bump(x, center: float, width: float, height: float, shape: str = 'smooth'):
    s = (np.asarray(x, dtype=float) - center) / width
    if shape == 'indicator':
        return np.where(np.abs(s) <= 1, height, 0.0)
    if shape == 'smooth':
        return np.where(np.abs(s) < 1, height * (1 - s * s) ** 3, 0.0)
    raise ConfigurationError(f"unknown bump shape '{shape}'")


def bump_from(shape_cfg: Dict):
    center = float(shape_cfg.get('center', 0.0))
    width, height = float(shape_cfg['width']), float(shape_cfg['height'])
    return lambda x: bump(x, center, width, height, shape_cfg.get('shape', 'smooth'))


def periodic_profile(initial: Dict, x_lo: float, length: float, n_cells: int) -> Tuple[GridFn, float]:
    """m + amplitude sin(2 pi x / period) as cell averages"""
    m = float(initial.get('mean', 0.0))
    amplitude = float(initial.get('amplitude', 0.5))
    period = float(initial.get('period', 1.0))
    profile = initial.get('profile', 'sine')
    if profile == 'sine':
        k = 2 * np.pi / period
        return GridFn.from_function(lambda x: m + amplitude * np.sin(k * x), x_lo, length, n_cells), m
    if profile == 'constant':
        return GridFn.constant(m, x_lo, length, n_cells), m
    raise ConfigurationError(f"unknown initial profile '{profile}'")


def build_initial_data(cfg: ExperimentConfig) -> Tuple[GridFn, GridFn, float]:
    """(p, v, m) on a periodic domain of `copies` periods centered at 0"""
    initial = cfg.initial
    period = float(initial.get('period', 1.0))
    copies = int(initial.get('copies', 4))
    n = cfg.solver.n_cells
    length = copies * period
    p, m = periodic_profile(initial, -length / 2, length, n)
    shape_cfg = initial.get('bump')
    if shape_cfg:
        v = GridFn.from_function(bump_from(shape_cfg), -length / 2, length, n)
    else:
        v = GridFn.constant(0.0, -length / 2, length, n)
    return p, v, m


# ----------------------------------------------------------------------
# Experiments
# ----------------------------------------------------------------------
def condition_verdicts(model: ModelSpec, m: float, xi_list=None) -> Dict[str, Any]:
    F = compute_F(model, xi_list)
    nd = check_nd_condition(F, m)
    gn = check_gn_condition(F, m)
    plus = check_one_sided_condition(F, m, '+')
    minus = check_one_sided_condition(F, m, '-')
    if nd:
        classification = 'decay guaranteed'
    elif gn:
        classification = 'periodic-only decay'
    else:
        classification = 'no guarantee'
    one_sided = []
    if not nd and plus:
        one_sided.append('one-sided decay (v >= 0)')
    if not nd and minus:
        one_sided.append('one-sided decay (v <= 0)')
    return {
        'F': F.to_list(),
        'F_text': F.describe(),
        'F_upper_bound': F.upper_bound,
        'nd_condition': nd,
        'gn_condition': gn,
        'one_sided_plus': plus,
        'one_sided_minus': minus,
        'classification': classification,
        'one_sided': one_sided,
    }


def run_condition_report(model: ModelSpec, xi_list=None, m: float = 0.0,
                         scenario_id: str = 'condition') -> Report:
    report = Report(scenario_id, 'condition')
    report.verdicts = condition_verdicts(model, m, xi_list)
    report.measurements['model'] = model.name
    report.measurements['mean'] = m
    logger.info(f"{model.name}: F = {report.verdicts['F_text']}, {report.verdicts['classification']}")
    return report


def _solver_rules(report: Report, tr: Trajectory, cfg: ExperimentConfig, domain_length: float):
    tol = cfg.tolerances
    drift = tr.max_conservation_drift()
    bound = tr.max_bound_violation()
    report.invariants['conservation_drift'] = drift
    report.invariants['bound_violation'] = bound
    report.add_rule('conservation', drift <= tol['conservation'], drift, tol['conservation'])
    report.add_rule('max_principle', bound <= tol['max_principle'], bound, tol['max_principle'])
    margins = [x for x in tr.entropy_margins if x is not None]
    if margins:
        worst = min(margins)
        limit = -tol['entropy'] * domain_length
        report.invariants['entropy_margin'] = worst
        report.add_rule('entropy', worst >= limit, worst, limit)


def _expectation(report: Report, cfg: ExperimentConfig, decayed: bool, guaranteed: bool):
    expect = cfg.params.get('expect')
    outcome = 'decay' if decayed else 'non-decay'
    report.verdicts['outcome'] = outcome
    if expect:
        report.add_rule('expectation', outcome == expect, outcome, expect)
        if expect == 'decay' and not guaranteed:
            report.warn(f"{cfg.scenario_id}: decay expected but no condition guarantees it")
        if expect == 'non-decay' and guaranteed:
            report.warn(f"{cfg.scenario_id}: non-decay expected although decay is guaranteed")
    if guaranteed and not decayed:
        logger.error(f"{cfg.scenario_id}: decay was guaranteed but the run did not decay")
        report.add_rule('guarantee', False, outcome, 'decay')


def run_decay_experiment(cfg: ExperimentConfig) -> Report:
    """Evolve p + v and compare ||u(t) - m||_X against decay_fraction of its initial value"""
    if cfg.initial.get('profile') == 'stefan':
        return _run_stefan_decay(cfg)
    report = Report(cfg.scenario_id, 'decay')
    p, v, m = build_initial_data(cfg)
    model = cfg.model

    # conditions are recorded before anything is evolved
    report.verdicts.update(condition_verdicts(model, m))
    periodic_only = v.sup_norm() == 0
    guaranteed = report.verdicts['nd_condition'] or (periodic_only and report.verdicts['gn_condition'])
    report.verdicts['guaranteed'] = guaranteed
    report.measurements['mean_p'] = m
    return _evolve_and_judge(report, cfg, model, p + v, guaranteed)


def _evolve_and_judge(report: Report, cfg: ExperimentConfig, model: ModelSpec, u0: GridFn,
                      guaranteed: bool) -> Report:
    target = mean(u0)
    report.measurements['mean_u0'] = target
    rng = np.random.default_rng(int(cfg.params.get('seed', 0)))
    tests = random_test_functions(rng, u0.x_lo, u0.length, cfg.solver.t_end)
    acc = EntropyAccumulator(scheme_for(model, cfg.solver.flux), default_k_grid(u0), tests)
    tr = evolve(u0, model, cfg.solver, acc)

    report.rows = [_row(t, u, target, margin) for t, u, margin in zip(tr.times, tr.states, tr.entropy_margins)]
    decayed, ratio = _decay_verdict(report.rows, cfg.tolerances['decay_fraction'])
    report.measurements['decay_ratio'] = ratio
    report.measurements['x_norm_nonincreasing'] = _nonincreasing([r['stepanov_x'] for r in report.rows])
    report.measurements['l1_nonincreasing'] = _nonincreasing([r['l1_cell'] for r in report.rows])
    _solver_rules(report, tr, cfg, u0.length)
    _expectation(report, cfg, decayed, guaranteed)
    return report


def _stefan_perturbation(initial: Dict, n_cells: int) -> Optional[GridFn]:
    plateau = initial.get('perturbation')
    if not plateau:
        return None
    lo, hi, height = float(plateau['lo']), float(plateau['hi']), float(plateau['height'])

    def v(x):
        # [lo, hi] is given on the line around x = 5/2; fold it into the period
        unfolded = np.where(x < 0, x + PERIOD, x)
        return np.where((unfolded >= lo) & (unfolded <= hi), height, 0.0)

    return GridFn.from_samples(v, -PERIOD / 2, PERIOD, n_cells)


def _run_stefan_decay(cfg: ExperimentConfig) -> Report:
    """
    Decay of u0 = p + v for the assembled Stefan profile p

    With a solver block u0 is placed on `periods` periods, v on one of them
    only, and the scheme evolves it. Without one the construction itself is
    sampled, which needs v = 0.
    """
    report = Report(cfg.scenario_id, 'decay')
    s = build_stefan_solution(cfg.stefan)
    perturbed = bool(cfg.initial.get('perturbation'))
    if cfg.solver is None:
        if perturbed:
            raise ConfigurationError(f"{cfg.scenario_id}: a perturbed Stefan decay needs a solver block")
        return _sample_stefan_decay(report, cfg, s)

    periods = int(cfg.params.get('periods', 3))
    if cfg.solver.n_cells % periods:
        raise ConfigurationError(f"solver.n_cells must be a multiple of periods={periods}")
    n_period = cfg.solver.n_cells // periods
    v_pert = _stefan_perturbation(cfg.initial, n_period)
    if v_pert is None:
        v_pert = GridFn.constant(0.0, -PERIOD / 2, PERIOD, n_period)
    p, v, model = line_initial_data(s, v_pert, periods)

    # the construction has mean 0 over a period
    report.verdicts.update(condition_verdicts(model, 0.0))
    guaranteed = report.verdicts['nd_condition'] or (not perturbed and report.verdicts['gn_condition'])
    report.verdicts['guaranteed'] = guaranteed
    report.measurements['mean_p'] = mean(p)
    report.measurements['periods'] = periods
    return _evolve_and_judge(report, cfg, model, p + v, guaranteed)


def _sample_stefan_decay(report: Report, cfg: ExperimentConfig, s: StefanSolution) -> Report:
    model = stefan_model(s)
    target = mean(s.state(0))
    report.verdicts.update(condition_verdicts(model, 0.0))
    guaranteed = report.verdicts['nd_condition'] or report.verdicts['gn_condition']
    report.verdicts['guaranteed'] = guaranteed
    report.measurements['mean_p'] = target
    report.measurements['mean_u0'] = target

    report.rows = [_row(t, s.state(i), target) for i, t in enumerate(s.times)]
    means = [row['mean'] for row in report.rows]
    report.invariants['period_mean_drift'] = float(np.max(np.abs(np.array(means) - means[0])))

    decayed, ratio = _decay_verdict(report.rows, cfg.tolerances['decay_fraction'])
    report.measurements['decay_ratio'] = ratio
    _expectation(report, cfg, decayed, guaranteed)
    return report


def run_bracketing_experiment(cfg: ExperimentConfig, r: Optional[int] = None,
                              alpha_plus: Optional[float] = None, alpha_minus: Optional[float] = None,
                              mode: Optional[str] = None) -> Report:
    """
    Evolve u0 = p + v between two periodic data with means alpha+- and check
    the ordering at every sample and the final X-norm bound
    """
    r = int(cfg.params.get('r', 4) if r is None else r)
    alpha_plus = float(cfg.params.get('alpha_plus', 0.1) if alpha_plus is None else alpha_plus)
    alpha_minus = float(cfg.params.get('alpha_minus', -0.1) if alpha_minus is None else alpha_minus)
    mode = cfg.params.get('mode', 'envelope') if mode is None else mode
    if mode not in ('envelope', 'indicator'):
        raise ConfigurationError(f"unknown bracketing mode '{mode}'")

    report = Report(cfg.scenario_id, 'bracketing')
    initial = cfg.initial
    period = float(initial.get('period', 1.0))
    n = cfg.solver.n_cells
    if n % r:
        raise ConfigurationError(f"n_cells={n} must be a multiple of r={r}")
    per_period = n // r
    length = r * period
    lattice = Lattice.scalar(period)

    p, m = periodic_profile(initial, -length / 2, length, n)
    F = compute_F(cfg.model)
    report.verdicts.update(condition_verdicts(cfg.model, m))
    if not alpha_minus < m < alpha_plus:
        raise ContractError(f"need alpha- < m < alpha+, got {alpha_minus}, {m}, {alpha_plus}")
    if alpha_plus not in F or alpha_minus not in F:
        raise ContractError(f"alpha+- must lie in F = {F.describe()}")

    shape_cfg = initial.get('bump') or {'width': period / 4, 'height': 0.0}
    box_lo = -length / 2 - period
    v_box = GridFn.from_function(bump_from(shape_cfg), box_lo, length + 2 * period, n + 2 * per_period,
                                 periodic=False)
    upper, lower, absolute = lattice_envelopes(v_box, lattice, r)
    eps_plus, eps_minus, M = envelope_means(upper, lower, absolute)
    v_cell = restrict_to_cell(v_box, lattice, r)
    report.measurements.update({'eps_plus': eps_plus, 'eps_minus': eps_minus, 'M_r': M, 'r': r, 'mode': mode})
    report.add_rule('envelope_means', abs(eps_plus) <= M + 1e-12 and abs(eps_minus) <= M + 1e-12,
                    max(abs(eps_plus), abs(eps_minus)), M)

    u0 = p + v_cell
    if mode == 'envelope':
        u_plus = p + upper + (alpha_plus - m - eps_plus)
        u_minus = p + lower + (alpha_minus - m - eps_minus)
        bound = 2 * (alpha_plus - alpha_minus)
    else:
        chi = GridFn(v_cell.x_lo, v_cell.length, (v_cell.values != 0).astype(float), True)
        height = v_cell.sup_norm()
        u_plus = p + chi.scale(height)
        u_minus = p - chi.scale(height)
        bound = 2 ** 4 * (alpha_plus - alpha_minus)
    if np.any(u_minus.values > u0.values) or np.any(u0.values > u_plus.values):
        raise ContractError(f"initial data are not ordered; increase r (now {r})")

    runs = [evolve(u, cfg.model, cfg.solver) for u in (u_minus, u0, u_plus)]
    lower_cmp = compare(runs[0], runs[1], cfg.tolerances['max_principle'])
    upper_cmp = compare(runs[1], runs[2], cfg.tolerances['max_principle'])
    if not (lower_cmp.ordering_preserved and upper_cmp.ordering_preserved):
        worst = max(lower_cmp.worst_order_violation, upper_cmp.worst_order_violation)
        raise InvariantError(f"bracketing order lost (worst violation {worst:.3e})")
    report.add_rule('ordering', True, max(lower_cmp.worst_order_violation, upper_cmp.worst_order_violation),
                    cfg.tolerances['max_principle'])
    report.add_rule('l1_contraction', lower_cmp.contraction and upper_cmp.contraction,
                    [lower_cmp.l1_distances[-1], upper_cmp.l1_distances[-1]])

    report.rows = [_row(t, u, m) for t, u in zip(runs[1].times, runs[1].states)]
    final = report.rows[-1]['stepanov_x']
    report.measurements['final_x_norm'] = final
    report.measurements['bound'] = bound
    report.add_rule('final_bound', final <= bound, final, bound)
    _solver_rules(report, runs[1], cfg, length)
    return report


def run_exactness_experiment(cfg: ExperimentConfig) -> Report:
    """Periodic data whose mean lies outside F: the X-norm must not decay"""
    report = Report(cfg.scenario_id, 'exactness')
    initial = cfg.initial
    m = float(initial.get('mean', 0.0))
    delta = float(initial.get('delta', 0.2))
    r_period = float(initial.get('period', 1.0))
    xi = float(initial.get('xi', 1.0))

    report.verdicts.update(condition_verdicts(cfg.model, m))
    if report.verdicts['gn_condition']:
        report.warn(f"{cfg.scenario_id}: the mean lies in F, decay is expected instead")

    length = float(initial.get('copies', 4)) * r_period
    u0 = build_exactness_data(m, delta, None, xi, r_period, cfg.solver.n_cells, -length / 2, length)
    periods = verify_period_group(u0, Lattice.scalar(r_period), cfg.tolerances['membership'])
    report.measurements['period_check'] = periods.summary()
    report.add_rule('period_exact', periods.exact, periods.min_subperiod_difference, cfg.tolerances['membership'])

    tr = evolve(u0, cfg.model, cfg.solver)
    report.rows = [_row(t, u, m) for t, u in zip(tr.times, tr.states)]
    _, ratio = _decay_verdict(report.rows, cfg.tolerances['decay_fraction'])
    report.measurements['norm_ratio'] = ratio
    keep = 1 - cfg.tolerances['decay_fraction']
    report.verdicts['outcome'] = 'non-decay' if ratio >= keep else 'decay'
    report.add_rule('no_decay', ratio >= keep, ratio, keep)
    _solver_rules(report, tr, cfg, u0.length)
    return report


def run_stefan_experiment(cfg: ExperimentConfig) -> Tuple[Report, StefanSolution]:
    """Construction, front conditions, decay rates, mass balance and the perturbed run"""
    tol = cfg.tolerances
    report = Report(cfg.scenario_id, 'stefan')
    s = build_stefan_solution(cfg.stefan)
    alpha = cfg.stefan.alpha

    inv = fixed_domain_invariants(s.fixed)
    report.invariants.update(inv)
    peak = float(np.max(s.fixed.phi0.values))
    report.add_rule('symmetry', inv['symmetry_error'] <= tol['symmetry'], inv['symmetry_error'], tol['symmetry'])
    report.add_rule('positivity', inv['min_v'] >= -tol['positivity'] * max(peak, 1.0), inv['min_v'], 0.0)
    report.add_rule('max_principle', inv['max_excess'] <= tol['positivity'] * max(peak, 1.0),
                    inv['max_excess'], 0.0)

    jumps = verify_jump_conditions(s, tol['rh_factor'])
    report.measurements['psi_max'] = s.psi.max()
    report.invariants['period_mean_drift'] = jumps.mean_drift
    report.add_rule('jump_A', jumps.jump_A <= jumps.tol_jump, jumps.jump_A, jumps.tol_jump)
    report.add_rule('frozen_A_flux', jumps.outside_A_flux <= jumps.tol_rh, jumps.outside_A_flux, jumps.tol_rh)
    report.add_rule('rankine_hugoniot', jumps.worst_rh <= jumps.tol_rh, jumps.worst_rh, jumps.tol_rh)
    report.add_rule('entropy_signs', jumps.entropy_signs_ok, jumps.entropy_signs_ok, True)

    decay = verify_decay_estimates(s, cfg.stefan.t_burn)
    for name, fit in decay.fits.items():
        report.measurements[f'rate_{name}'] = fit.rate
        report.add_rule(f'rate_{name}', fit.passed, fit.rate, fit.threshold)

    balance = mass_balance(s.fixed.phi0, s.psi)
    report.measurements['mass_initial'] = balance.initial_mass
    report.measurements['mass_frozen'] = balance.frozen_mass
    if balance.relative is None:
        report.add_rule('mass_balance', balance.absolute <= tol['mass_balance'], balance.absolute, tol['mass_balance'])
    else:
        report.add_rule('mass_balance', balance.relative <= tol['mass_balance'], balance.relative, tol['mass_balance'])

    for i, t in enumerate(s.times):
        report.rows.append(_row(t, s.state(i), 0.0))

    periods = int(cfg.params.get('periods', 3))
    v_pert = _stefan_perturbation(cfg.initial, cfg.solver.n_cells // periods) if cfg.solver else None
    if v_pert is not None:
        pert = perturbed_nondecay_experiment(s, v_pert, cfg.solver, periods, float(cfg.params.get('t_check', 1.0)),
                                             tol['equivalence'])
        report.measurements['perturbation_x_norm'] = pert.perturbation_norm
        report.measurements['perturbed_final_x_norm'] = pert.x_norms[-1]
        report.measurements['construction_gap'] = max(pert.construction_gaps)
        report.add_rule('equivalence', pert.equivalent, max(pert.equivalence_errors), tol['equivalence'])
        late = [x for t, x in zip(pert.times, pert.x_norms) if t >= pert.t_check]
        report.add_rule('nondecay', pert.nondecay or pert.perturbation_norm == 0,
                        min(late, default=None), 0.9 * pert.perturbation_norm)
    logger.info(f"Stefan construction alpha={alpha:g}: {'passed' if report.passed else 'failed'}")
    return report, s


def write_stefan_artifacts(s: StefanSolution, directory: Path, n_states: int = 5) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []

    path = directory / 'psi.csv'
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['x', 'psi'])
        for x, value in zip(s.psi.x, s.psi.values):
            writer.writerow([repr(float(x)), repr(float(value))])
    paths.append(path)

    path = directory / 'fixed_domain.csv'
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['time', 'w_plus', 'sup_v', 'energy'])
        for row in zip(s.fixed.times, s.fixed.w_plus, s.fixed.sup_v, s.fixed.energy):
            writer.writerow([repr(float(x)) for x in row])
    paths.append(path)

    picks = np.unique(np.linspace(0, s.times.size - 1, n_states).astype(int))
    for i in picks:
        paths.append(s.state(int(i)).to_csv(directory / f"u_{i:04d}.csv"))
    return paths


def run_scenario(cfg: ExperimentConfig) -> Tuple[Report, Optional[StefanSolution]]:
    if cfg.kind == 'decay':
        return run_decay_experiment(cfg), None
    if cfg.kind == 'bracketing':
        return run_bracketing_experiment(cfg), None
    if cfg.kind == 'exactness':
        return run_exactness_experiment(cfg), None
    return run_stefan_experiment(cfg)


def norms_summary(cfg: ExperimentConfig, windows: Sequence[float], radii: Sequence[int]) -> Dict:
    """Window norms, vanishing diagnostics and envelope means of a scenario's initial data"""
    p, v, m = build_initial_data(cfg)
    u0 = p + v
    summary = {
        'stepanov_x': stepanov_norm(u0 - m),
        'v_norms': {float(w): v_norm(u0 - m, w) for w in windows},
        'vanishing_profile': vanishing_profile(v, [0.0, 0.1 * v.sup_norm(), 0.5 * v.sup_norm()]),
    }
    if v.sup_norm() > 0:
        box = GridFn(v.x_lo, v.length, v.values, periodic=False)
        check = mean_vanishing_check(box, [w for w in (1.0, 2.0, 4.0, 8.0) if w <= v.length] or [v.length])
        summary['mean_vanishing'] = {'means': check.means, 'passed': check.passed}
        period = float(cfg.initial.get('period', 1.0))
        envelopes = {}
        for r in radii:
            try:
                envelopes[int(r)] = dict(zip(('eps_plus', 'eps_minus', 'M_r'),
                                             envelope_means(*lattice_envelopes(box, Lattice.scalar(period), int(r)))))
            except DecayLabError as e:
                envelopes[int(r)] = str(e)
        summary['envelopes'] = envelopes
    return _plain(summary)


# ----------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='decaylab',
                                     description='Decay experiments for degenerate convection-diffusion equations')
    parser.add_argument('-c', '--config', default=None, help='Config file path')
    parser.add_argument('--log-level', default=None, help='Logging level (overrides config)')
    sub = parser.add_subparsers(dest='command')

    p = sub.add_parser('check-condition', help='Compute F and the decay conditions for a model')
    p.add_argument('--preset', required=True, help='Model preset name')
    p.add_argument('--mean', type=float, default=0.0, help='Mean value m')
    p.add_argument('--xi', type=float, nargs='*', default=None, help='Dual vectors (1D components)')

    p = sub.add_parser('simulate', help='Run a decay experiment')
    p.add_argument('--scenario', help='Scenario name from the config')
    p.add_argument('--preset', help='Model preset for an ad-hoc run')
    p.add_argument('--n-cells', type=int, default=200)
    p.add_argument('--t-end', type=float, default=5.0)
    p.add_argument('--samples', type=int, default=11)

    p = sub.add_parser('stefan', help='Build and verify the Stefan construction')
    p.add_argument('--scenario', default='stefan_construction')
    p.add_argument('--alpha', type=float, default=None)
    p.add_argument('--n-y', type=int, default=None)
    p.add_argument('--t-end', type=float, default=None)

    p = sub.add_parser('decay-report', help='Run any scenario and print its report')
    p.add_argument('--scenario', required=True)

    p = sub.add_parser('norms', help='Norms and envelopes of a scenario\'s initial data')
    p.add_argument('--scenario', required=True)
    p.add_argument('--windows', type=float, nargs='*', default=[1.0, 2.0, 4.0])
    p.add_argument('--radii', type=int, nargs='*', default=[1, 2, 4, 8])
    return parser


def _setup_logging(config: Dict, level: Optional[str]):
    name = (level or config['logging'].get('level', 'INFO')).upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO),
                        format=config['logging'].get('format', DEFAULT_CONFIG['logging']['format']))


def _print_report(report: Report):
    console.info(f"Scenario {report.scenario_id} ({report.kind})")
    for key in ('F_text', 'nd_condition', 'gn_condition', 'classification', 'outcome'):
        if key in report.verdicts:
            print(f"    {key}: {report.verdicts[key]}")
    for name, rule in report.rules.items():
        line = f"{name}: {rule['value']} (limit {rule['limit']})"
        if rule['passed']:
            console.success(line)
        else:
            console.failure(line)
    for message in report.warnings:
        console.warning(message)


def _finish(report: Report, cfg: ExperimentConfig, model: Optional[ModelSpec] = None) -> int:
    directory = write_report(report, cfg, model)
    _print_report(report)
    if report.passed:
        console.success(f"All checks passed, results in {directory}")
        return 0
    console.failure(f"Failed: {', '.join(report.failed_rules())}")
    return 1


def _adhoc_config(args, config: Dict) -> ExperimentConfig:
    data = {
        'kind': 'decay',
        'preset': args.preset,
        'initial': {'profile': 'sine', 'mean': 0.0, 'amplitude': 0.5, 'period': 1.0, 'copies': 4},
        'solver': {'n_cells': args.n_cells, 't_end': args.t_end, 'n_samples': args.samples},
    }
    return ExperimentConfig.from_dict(f"simulate_{args.preset}", data, config)


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Exit status: 0 all checks pass, 1 an invariant or acceptance rule failed, 2 configuration error"""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 2

    try:
        config = load_config(args.config)
        _setup_logging(config, args.log_level)

        if args.command == 'check-condition':
            model = resolve_model(args.preset, config['presets'])
            xi_list = [[x] for x in args.xi] if args.xi else None
            report = run_condition_report(model, xi_list, args.mean)
            verdicts = report.verdicts
            console.info(f"Model {model.name} on [{model.u_min}, {model.u_max}], m = {args.mean:g}")
            print(f"F = {verdicts['F_text']}")
            print(f"nd-condition: {str(verdicts['nd_condition']).lower()}")
            print(f"gn-condition: {str(verdicts['gn_condition']).lower()}")
            print(f"classification: {verdicts['classification']}")
            for note in verdicts['one_sided']:
                print(f"  {note}")
            return 0

        if args.command == 'simulate':
            if args.scenario:
                cfg = ExperimentConfig.from_scenario(args.scenario, config)
            elif args.preset:
                cfg = _adhoc_config(args, config)
            else:
                raise ConfigurationError("simulate needs --scenario or --preset")
            console.info(f"Simulating {cfg.scenario_id}...")
            report = run_decay_experiment(cfg)
            return _finish(report, cfg)

        if args.command == 'stefan':
            scenarios = config['scenarios']
            data = dict(scenarios.get(args.scenario, {'kind': 'stefan'}))
            stefan = dict(data.get('stefan', {}) or {})
            for key in ('alpha', 'n_y', 't_end'):
                value = getattr(args, key)
                if value is not None:
                    stefan[key] = value
            data['stefan'] = stefan
            data['kind'] = 'stefan'
            cfg = ExperimentConfig.from_dict(args.scenario, data, config)
            console.info(f"Building the Stefan construction (alpha={cfg.stefan.alpha:g}, n_y={cfg.stefan.n_y})...")
            report, s = run_stefan_experiment(cfg)
            write_stefan_artifacts(s, cfg.output_dir)
            return _finish(report, cfg, stefan_model(s))

        if args.command == 'decay-report':
            cfg = ExperimentConfig.from_scenario(args.scenario, config)
            console.info(f"Running {cfg.scenario_id} ({cfg.kind})...")
            report, s = run_scenario(cfg)
            model = None
            if s is not None:
                write_stefan_artifacts(s, cfg.output_dir)
                model = stefan_model(s)
            for row in report.rows:
                print(f"    t={row['time']:10.4f}  |u-m|_X={row['stepanov_x']:.6e}  L1={row['l1_cell']:.6e}")
            return _finish(report, cfg, model)

        if args.command == 'norms':
            cfg = ExperimentConfig.from_scenario(args.scenario, config)
            if cfg.solver is None or cfg.model is None:
                raise ConfigurationError(f"scenario '{cfg.scenario_id}' has no grid initial data")
            summary = norms_summary(cfg, args.windows, args.radii)
            print(yaml.safe_dump(summary, sort_keys=False))
            return 0

    except ConfigurationError as e:
        console.failure(f"Configuration error: {e}")
        return 2
    except DecayLabError as e:
        console.failure(f"{type(e).__name__}: {e}")
        return 1
    return 2
