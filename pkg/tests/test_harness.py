#!/usr/bin/env python3
"""
Unit tests for modules/harness.py - configuration, experiments, reports and the CLI
"""

import io
import os
import sys
import csv
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import yaml

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.errors import ConfigurationError, ContractError
from modules.harness import (CSV_COLUMNS, DEFAULT_TOLERANCES, ExperimentConfig, Report, bump,
                             cli_main, condition_verdicts, load_config, norms_summary,
                             run_bracketing_experiment, run_decay_experiment,
                             run_exactness_experiment, write_report)
from modules.model import model_from_dict, preset
from modules.solver import evolve


def decay_scenario(n_cells=100, t_end=0.5, samples=3, **extra):
    data = {
        'kind': 'decay',
        'preset': 'burgers',
        'initial': {'profile': 'sine', 'mean': 0.0, 'amplitude': 0.5, 'period': 1.0, 'copies': 2},
        'solver': {'n_cells': n_cells, 't_end': t_end, 'n_samples': samples},
    }
    data.update(extra)
    return data


class TestLoadConfig(unittest.TestCase):
    """YAML loading, defaults and the environment override"""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.test_dir, 'config.yaml')

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def write(self, text):
        with open(self.path, 'w') as f:
            f.write(text)

    def test_defaults_fill_missing_sections(self):
        self.write("tolerances:\n  entropy: 1.0e-4\n")
        config = load_config(self.path)
        self.assertEqual(config['tolerances']['entropy'], 1e-4)
        self.assertEqual(config['tolerances']['conservation'], DEFAULT_TOLERANCES['conservation'])
        self.assertEqual(config['output']['root'], './experiments')
        self.assertEqual(config['scenarios'], {})

    def test_empty_file(self):
        self.write("")
        self.assertEqual(load_config(self.path)['presets'], {})

    @patch.dict(os.environ, {'DECAYLAB_OUTPUT_ROOT': '/tmp/decaylab-out'})
    def test_environment_override(self):
        self.write("output:\n  root: ./somewhere\n")
        self.assertEqual(load_config(self.path)['output']['root'], '/tmp/decaylab-out')

    def test_invalid_files(self):
        with self.assertRaises(ConfigurationError):
            load_config(os.path.join(self.test_dir, 'missing.yaml'))
        self.write("scenarios: [unclosed\n")
        with self.assertRaises(ConfigurationError):
            load_config(self.path)
        self.write("- just\n- a list\n")
        with self.assertRaises(ConfigurationError):
            load_config(self.path)
        self.write("tolerances: 3\n")
        with self.assertRaises(ConfigurationError):
            load_config(self.path)

    def test_shipped_config_loads(self):
        root = Path(__file__).resolve().parent.parent
        config = load_config(str(root / 'config.yaml'))
        self.assertIn('stefan_construction', config['scenarios'])
        self.assertIn('half_burgers', config['presets'])


class TestExperimentConfig(unittest.TestCase):
    """Scenario parsing"""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.config = load_config(None)
        self.config['output']['root'] = self.test_dir

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_decay_scenario(self):
        cfg = ExperimentConfig.from_dict('small', decay_scenario(expect='decay'), self.config)
        self.assertEqual(cfg.model.name, 'burgers')
        self.assertEqual(cfg.solver.n_cells, 100)
        self.assertIsNone(cfg.stefan)
        self.assertEqual(cfg.params['expect'], 'decay')
        self.assertEqual(cfg.output_dir, Path(self.test_dir) / 'small')

    def test_stefan_recipe(self):
        cfg = ExperimentConfig.from_dict('s', {'kind': 'stefan', 'stefan': {'alpha': 0.2, 'n_y': 40}},
                                         self.config)
        self.assertIsNone(cfg.model)
        self.assertAlmostEqual(cfg.stefan.t_end, 400.0)
        cfg = ExperimentConfig.from_dict('s', {'initial': {'profile': 'stefan'}}, self.config)
        self.assertEqual(cfg.kind, 'decay')
        self.assertIsNotNone(cfg.stefan)

    def test_invalid_scenarios(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_dict('x', decay_scenario(kind='wavelet'), self.config)
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_dict('x', {'kind': 'decay', 'preset': 'burgers'}, self.config)
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_dict('x', decay_scenario(preset='porous_medium'), self.config)
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_dict('x', ['not', 'a', 'mapping'], self.config)
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_scenario('nowhere', self.config)

    def test_shipped_burgers_grids(self):
        for name in ('burgers_periodic', 'burgers_perturbed', 'burgers_bracketing',
                     'burgers_bracketing_indicator', 'affine_exactness'):
            self.assertEqual(ExperimentConfig.from_scenario(name, self.config).solver.n_cells, 800, msg=name)

    def test_config_hash(self):
        a = ExperimentConfig.from_dict('a', decay_scenario(), self.config)
        b = ExperimentConfig.from_dict('b', decay_scenario(), self.config)
        c = ExperimentConfig.from_dict('c', decay_scenario(t_end=1.0), self.config)
        self.assertEqual(a.config_hash(), b.config_hash())
        self.assertNotEqual(a.config_hash(), c.config_hash())


class TestReports(unittest.TestCase):
    """Rules and report files"""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.config = load_config(None)
        self.config['output']['root'] = self.test_dir

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_rules(self):
        report = Report('r', 'decay')
        self.assertTrue(report.passed)
        report.add_rule('conservation', True, 1e-14, 1e-10)
        report.add_rule('entropy', False, -1.0, -1e-6)
        self.assertFalse(report.passed)
        self.assertEqual(report.failed_rules(), ['entropy'])
        report.warn("something odd")
        self.assertEqual(report.to_dict()['warnings'], ["something odd"])

    def test_write_report(self):
        cfg = ExperimentConfig.from_dict('written', decay_scenario(), self.config)
        report = Report('written', 'decay')
        report.rows = [{'time': 0.0, 'l1_cell': 1.0, 'stepanov_x': 0.5, 'mean': 0.0,
                        'min': -0.5, 'max': 0.5, 'entropy_margin': None}]
        report.add_rule('conservation', True, 0.0, 1e-10)
        directory = write_report(report, cfg)

        with open(directory / 'norms.csv') as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], CSV_COLUMNS)
        self.assertEqual(rows[1][-1], '')

        with open(directory / 'manifest.yaml') as f:
            manifest = yaml.safe_load(f)
        self.assertEqual(manifest['config_hash'], cfg.config_hash())
        self.assertEqual(manifest['model'], 'burgers')
        self.assertEqual(len(manifest['model_hash']), 64)
        self.assertTrue(manifest['passed'])

        with open(directory / 'report.yaml') as f:
            self.assertEqual(yaml.safe_load(f)['scenario'], 'written')


class TestConditions(unittest.TestCase):
    """Classification of the decay conditions"""

    def test_presets(self):
        self.assertEqual(condition_verdicts(preset('burgers'), 0.0)['classification'], 'decay guaranteed')
        stefan = condition_verdicts(preset('stefan'), 0.0)
        self.assertEqual(stefan['classification'], 'periodic-only decay')
        self.assertEqual(stefan['F_text'], '[0, 1]')
        self.assertEqual(condition_verdicts(preset('affine'), 0.0)['classification'], 'no guarantee')

    def test_one_sided_note(self):
        model = model_from_dict('half_burgers', {
            'flux': [{'start': -1, 'end': 0, 'coefficients': [0]},
                     {'start': 0, 'end': 1, 'coefficients': [0, 0, '1/2']}],
            'diffusion': [{'start': -1, 'end': 1, 'coefficients': [0]}],
        })
        verdicts = condition_verdicts(model, 0.0)
        self.assertEqual(verdicts['one_sided'], ['one-sided decay (v >= 0)'])

    def test_bump_shapes(self):
        self.assertEqual(float(bump(0.0, 0.0, 1.0, 2.0)), 2.0)
        self.assertEqual(float(bump(1.0, 0.0, 1.0, 2.0, 'indicator')), 2.0)
        self.assertEqual(float(bump(1.5, 0.0, 1.0, 2.0, 'indicator')), 0.0)
        with self.assertRaises(ConfigurationError):
            bump(0.0, 0.0, 1.0, 1.0, 'triangle')


class TestExperiments(unittest.TestCase):
    """Small decay, bracketing and exactness runs"""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.config = load_config(None)
        self.config['output']['root'] = self.test_dir

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_decay_run(self):
        cfg = ExperimentConfig.from_dict('d', decay_scenario(t_end=30.0, samples=4), self.config)
        report = run_decay_experiment(cfg)
        self.assertEqual(len(report.rows), 4)
        self.assertEqual(report.verdicts['outcome'], 'decay')
        self.assertLess(report.measurements['decay_ratio'], 0.05)
        self.assertTrue(report.verdicts['guaranteed'])
        self.assertEqual(report.rows[0]['entropy_margin'], 0.0)
        self.assertIn('conservation', report.rules)
        self.assertIn('entropy', report.rules)
        self.assertTrue(report.passed)

    def test_unmet_expectation_fails(self):
        cfg = ExperimentConfig.from_dict('d', decay_scenario(t_end=0.1, expect='decay'), self.config)
        report = run_decay_experiment(cfg)
        self.assertEqual(report.verdicts['outcome'], 'non-decay')
        self.assertIn('expectation', report.failed_rules())
        self.assertIn('guarantee', report.failed_rules())

    def test_bracketing(self):
        data = {
            'kind': 'bracketing', 'preset': 'burgers', 'r': 4, 'alpha_plus': 0.1, 'alpha_minus': -0.1,
            'initial': {'profile': 'sine', 'mean': 0.0, 'amplitude': 0.5, 'period': 1.0,
                        'bump': {'width': 0.3, 'height': 0.3}},
            'solver': {'n_cells': 200, 't_end': 5.0, 'n_samples': 6},
        }
        cfg = ExperimentConfig.from_dict('b', data, self.config)
        report = run_bracketing_experiment(cfg)
        self.assertTrue(report.rules['ordering']['passed'])
        self.assertTrue(report.rules['l1_contraction']['passed'])
        self.assertAlmostEqual(report.measurements['bound'], 0.4)
        self.assertTrue(report.passed)

        with self.assertRaises(ContractError):
            run_bracketing_experiment(cfg, alpha_plus=-0.05)
        with self.assertRaises(ConfigurationError):
            run_bracketing_experiment(cfg, r=3)

    def test_exactness(self):
        data = {
            'kind': 'exactness', 'preset': 'affine',
            'initial': {'mean': 0.0, 'delta': 0.4, 'xi': 1.0, 'period': 1.0, 'copies': 4},
            'solver': {'n_cells': 400, 't_end': 1.0, 'n_samples': 3, 'cfl': 0.9},
        }
        cfg = ExperimentConfig.from_dict('e', data, self.config)
        report = run_exactness_experiment(cfg)
        self.assertEqual(report.verdicts['outcome'], 'non-decay')
        self.assertTrue(report.rules['period_exact']['passed'])
        self.assertTrue(report.passed)

    def stefan_decay_scenario(self, **extra):
        data = {
            'kind': 'decay', 'expect': 'non-decay', 'periods': 3,
            'stefan': {'alpha': 0.2, 'n_y': 40, 't_end': 40.0, 'n_snapshots': 21, 'n_x': 500, 't_burn': 15.0},
            'initial': {'profile': 'stefan', 'perturbation': {'lo': 2.2, 'hi': 2.8, 'height': -0.3}},
            'solver': {'n_cells': 300, 't_end': 0.5, 'n_samples': 3},
        }
        data.update(extra)
        return ExperimentConfig.from_dict('sp', data, self.config)

    def test_perturbed_stefan_decay_is_evolved(self):
        cfg = self.stefan_decay_scenario()
        with patch('modules.harness.evolve', wraps=evolve) as spy:
            report = run_decay_experiment(cfg)
        self.assertEqual(spy.call_count, 1)
        u0 = spy.call_args[0][0]
        self.assertEqual(u0.n_cells, 300)
        self.assertAlmostEqual(u0.length, 15.0)
        self.assertEqual(report.verdicts['outcome'], 'non-decay')
        self.assertLess(report.measurements['mean_u0'], 0.0)
        for row in report.rows:
            self.assertAlmostEqual(row['mean'], report.measurements['mean_u0'], places=8)
        for rule in ('conservation', 'max_principle', 'expectation'):
            self.assertTrue(report.rules[rule]['passed'], msg=rule)
        self.assertFalse(report.verdicts['guaranteed'])

    def test_perturbed_stefan_decay_needs_solver(self):
        cfg = self.stefan_decay_scenario()
        cfg.solver = None
        with self.assertRaises(ConfigurationError):
            run_decay_experiment(cfg)
        with self.assertRaises(ConfigurationError):
            run_decay_experiment(self.stefan_decay_scenario(periods=4))

    def test_norms_summary(self):
        data = decay_scenario()
        data['initial']['bump'] = {'width': 0.3, 'height': 0.3}
        cfg = ExperimentConfig.from_dict('n', data, self.config)
        summary = norms_summary(cfg, [1.0, 2.0], [1, 2])
        self.assertEqual(sorted(summary['v_norms']), [1.0, 2.0])
        self.assertGreater(summary['stepanov_x'], 0.0)
        self.assertIn('envelopes', summary)


class TestCli(unittest.TestCase):
    """Exit codes and printed output"""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.config_file = os.path.join(self.test_dir, 'config.yaml')
        config = {
            'output': {'root': os.path.join(self.test_dir, 'experiments')},
            'logging': {'level': 'WARNING'},
            'scenarios': {'small': decay_scenario()},
        }
        with open(self.config_file, 'w') as f:
            yaml.safe_dump(config, f)

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def run_cli(self, *argv):
        with patch('sys.stdout', new_callable=io.StringIO) as out:
            code = cli_main(['-c', self.config_file] + list(argv))
        return code, out.getvalue()

    def test_check_condition(self):
        code, out = self.run_cli('check-condition', '--preset', 'stefan', '--mean', '0')
        self.assertEqual(code, 0)
        self.assertIn("F = [0, 1]", out)
        self.assertIn("nd-condition: false", out)
        self.assertIn("gn-condition: true", out)
        self.assertIn("classification: periodic-only decay", out)

    def test_configuration_errors(self):
        code, _ = self.run_cli('check-condition', '--preset', 'porous_medium')
        self.assertEqual(code, 2)
        code, _ = self.run_cli('decay-report', '--scenario', 'nowhere')
        self.assertEqual(code, 2)
        code, _ = self.run_cli('simulate')
        self.assertEqual(code, 2)
        with patch('sys.stdout', new_callable=io.StringIO):
            self.assertEqual(cli_main(['-c', os.path.join(self.test_dir, 'missing.yaml'), 'norms',
                                       '--scenario', 'small']), 2)

    def test_no_command(self):
        code, out = self.run_cli()
        self.assertEqual(code, 2)
        self.assertIn('usage', out)

    def test_simulate_preset(self):
        code, out = self.run_cli('simulate', '--preset', 'burgers', '--n-cells', '100',
                                 '--t-end', '30', '--samples', '4')
        self.assertEqual(code, 0)
        directory = Path(self.test_dir) / 'experiments' / 'simulate_burgers'
        for name in ('norms.csv', 'report.yaml', 'manifest.yaml'):
            self.assertTrue((directory / name).exists(), msg=name)
        self.assertIn("All checks passed", out)

    def test_norms(self):
        code, out = self.run_cli('norms', '--scenario', 'small', '--windows', '1', '2')
        self.assertEqual(code, 0)
        self.assertIn('stepanov_x', out)


if __name__ == '__main__':
    unittest.main()
