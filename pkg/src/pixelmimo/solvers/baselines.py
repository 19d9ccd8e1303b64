"""Fixed-rule coder schemes used as benchmarks."""

import time

import numpy as np

from ..channel import CoderAssignment, EffectiveChannel, water_fill
from ..errors import UsageError
from .problem import RateSolution

SCHEMES = ('conventional', 'best-single-off', 'best-single-on',
           'random-single-off', 'random-single-on', 'all-off', 'all-on')


def _single(S, pos, off):
    """Coder with exactly one port at ``pos`` in the minority state."""
    b = np.zeros(S, dtype=np.int8) if off else np.ones(S, dtype=np.int8)
    b[pos] ^= 1
    return b


def _conventional(problem):
    cols = lambda models: np.stack(
        [m.e_A / np.linalg.norm(m.e_A) for m in models], axis=1)
    E_T, E_R = cols(problem.models_t), cols(problem.models_r)
    H = E_R.conj().T @ problem.H_V @ E_T
    problem._count()
    wf = water_fill(EffectiveChannel.from_matrix(H), problem.power, problem.sigma2)
    empty = CoderAssignment(np.zeros((0, problem.n_t)), np.zeros((0, problem.n_r)))
    return RateSolution(assignment=empty, Q=wf.Q, rate=wf.rate,
                        method='baseline:conventional', waterfill=wf, H=H)


def baseline_solve(problem, scheme, seed=0):
    """Solve with a benchmark scheme; the covariance is always water-filled.

    ``conventional`` uses the bare antenna-port pattern on every antenna
    and returns an empty (0-row) assignment. The ``best-single-*`` schemes
    pick each antenna's minority port by a one-dimensional search over the
    ``S`` positions, antenna by antenna (transmit first), holding the other
    antennas at their current choice; all antennas start at position 0.
    """
    if scheme not in SCHEMES:
        raise UsageError(f"unknown baseline scheme {scheme!r}; choose from {', '.join(SCHEMES)}")
    t0 = time.perf_counter()
    start = problem.evals
    S, n_ant = problem.S, problem.n_t + problem.n_r
    if scheme == 'conventional':
        sol = _conventional(problem)
    else:
        if scheme == 'all-on':
            bits = np.zeros(problem.n_vars, dtype=np.int8)
        elif scheme == 'all-off':
            bits = np.ones(problem.n_vars, dtype=np.int8)
        else:
            if S == 0:
                raise UsageError(f"scheme {scheme!r} needs at least one pixel port")
            off = scheme.endswith('-off')
            if scheme.startswith('random'):
                pos = np.random.default_rng(seed).integers(0, S, n_ant)
            else:
                pos = np.zeros(n_ant, dtype=int)
            bits = np.concatenate([_single(S, p, off) for p in pos])
            if scheme.startswith('best'):
                for a in range(n_ant):
                    rates = []
                    for p in range(S):
                        bits[a * S:(a + 1) * S] = _single(S, p, off)
                        rates.append(problem.capacity(bits))
                    bits[a * S:(a + 1) * S] = _single(S, int(np.argmax(rates)), off)
        if scheme in ('all-on', 'all-off') or scheme.startswith('random'):
            problem._count()
        sol = problem.solution(bits, 'baseline:' + scheme)
    sol.eval_count = problem.evals - start
    sol.wall_time = time.perf_counter() - t0
    return sol
