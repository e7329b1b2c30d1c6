"""
hlmax Analysis Package
Spaces, quadrature, weights and test functions, operators and verification checks
"""
from .spaces import SpaceInstance, SpacePoint, BallSpec, parse_space
from .quadrature import Estimate, EstimateKind
from .catalog import RadiusWeight, TestFunction, make_function, make_weight
from .operators import PExponent, SweepRow, average, maximal, integral_function, lq_norm, p_sweep
from .verify import CheckReport, CheckStatus, run_suite

__all__ = [
    'SpaceInstance',
    'SpacePoint',
    'BallSpec',
    'parse_space',
    'Estimate',
    'EstimateKind',
    'RadiusWeight',
    'TestFunction',
    'make_function',
    'make_weight',
    'PExponent',
    'SweepRow',
    'average',
    'maximal',
    'integral_function',
    'lq_norm',
    'p_sweep',
    'CheckReport',
    'CheckStatus',
    'run_suite',
]
