"""Coder/covariance optimizers and a name-based dispatcher."""

from ..errors import UsageError
from .ao import ao_solve
from .baselines import SCHEMES, baseline_solve
from .bnb import (BnbNode, BoundConfig, PseudocostTable, bnb_solve,
                  bnb_solve_coders, bnb_upper_bound, equal_gain_bound)
from .exhaustive import best_completion, exhaustive_solve
from .heuristics import diving_heuristic, local_search
from .problem import Problem, RateSolution
from .sebo import sebo_solve

__all__ = ['Problem', 'RateSolution', 'BoundConfig', 'BnbNode',
           'PseudocostTable', 'SCHEMES', 'exhaustive_solve', 'best_completion',
           'diving_heuristic', 'local_search', 'bnb_upper_bound',
           'bnb_solve_coders', 'bnb_solve', 'equal_gain_bound', 'ao_solve',
           'sebo_solve', 'baseline_solve', 'METHODS', 'parse_method', 'solve']

METHODS = ('exhaustive', 'bnb', 'ao', 'sebo') + tuple('baseline:' + s for s in SCHEMES)


def parse_method(name):
    """Validate a solver selection string; returns ``(kind, scheme)``."""
    if name in ('exhaustive', 'bnb', 'ao', 'sebo'):
        return name, None
    if name.startswith('baseline:'):
        scheme = name.split(':', 1)[1]
        if scheme in SCHEMES:
            return 'baseline', scheme
    raise UsageError(f"unknown solver {name!r}; choose from {', '.join(METHODS)}")


def solve(problem, method, *, seed=0, restarts=8, max_iters=50, block_size=3,
          flips=10, bound=None, max_outer=20, cap=24):
    """Run the solver named by ``method`` on ``problem``."""
    kind, scheme = parse_method(method)
    if kind == 'exhaustive':
        return exhaustive_solve(problem, cap=cap)
    if kind == 'bnb':
        return bnb_solve(problem, bound, max_outer=max_outer)
    if kind == 'ao':
        return ao_solve(problem, restarts=restarts, max_iters=max_iters, seed=seed)
    if kind == 'sebo':
        return sebo_solve(problem, block_size=block_size, flips=flips,
                          max_iters=max_iters, seed=seed)
    return baseline_solve(problem, scheme, seed=seed)
