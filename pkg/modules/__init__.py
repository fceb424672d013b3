"""
Decay Lab Modules
"""

from .errors import DecayLabError, ConfigurationError, InvariantError
from .funcalg import PiecewisePoly, BVFunction, apply_Tg, kruzhkov_pair
from .model import ModelSpec, FSet, preset, compute_F, check_nd_condition, check_gn_condition
from .lattice import Lattice, dual, fundamental_cell, verify_period_group
from .field import GridFn, mean, v_norm, stepanov_norm
from .solver import SolverConfig, Trajectory, evolve, compare
from .stefan import StefanConfig, StefanSolution, build_stefan_solution

__all__ = [
    'DecayLabError', 'ConfigurationError', 'InvariantError',
    'PiecewisePoly', 'BVFunction', 'apply_Tg', 'kruzhkov_pair',
    'ModelSpec', 'FSet', 'preset', 'compute_F', 'check_nd_condition', 'check_gn_condition',
    'Lattice', 'dual', 'fundamental_cell', 'verify_period_group',
    'GridFn', 'mean', 'v_norm', 'stepanov_norm',
    'SolverConfig', 'Trajectory', 'evolve', 'compare',
    'StefanConfig', 'StefanSolution', 'build_stefan_solution',
]

__version__ = '1.1.0'
