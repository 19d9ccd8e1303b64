"""Greedy diving and single-bit local search over ``b_all``."""

import time

import numpy as np

IMPROVE_TOL = 1e-9


def local_search(objective, bits, value=None, max_passes=None, tol=IMPROVE_TOL):
    """First-improvement single-bit flips until no flip gains more than ``tol``.

    Returns ``(bits, value, pass_values)``; ``pass_values`` records the
    objective after every pass and is nondecreasing.
    """
    bits = np.array(bits, dtype=np.int8)
    if value is None:
        value = objective(bits)
    history = [value]
    passes = 0
    while max_passes is None or passes < max_passes:
        passes += 1
        improved = False
        for i in range(bits.size):
            bits[i] ^= 1
            r = objective(bits)
            if r > value + tol:
                value = r
                improved = True
            else:
                bits[i] ^= 1
        history.append(value)
        if not improved:
            break
    return bits, value, history


def dive(objective, n, max_passes=10):
    """Greedy fixing in index order from all zeros, then local refinement.

    Undecided bits stay at their current value (zero) while an index is
    decided; the better of bit 0 / bit 1 is kept, 0 on ties.
    """
    bits = np.zeros(n, dtype=np.int8)
    value = objective(bits)
    for i in range(n):
        bits[i] = 1
        r = objective(bits)
        if r > value:
            value = r
        else:
            bits[i] = 0
    return local_search(objective, bits, value, max_passes=max_passes)


def diving_heuristic(problem, max_passes=10, Q=None):
    """Diving warm start as a :class:`RateSolution`.

    With ``Q`` given the objective is the fixed-covariance rate; otherwise
    every candidate is water-filled.
    """
    t0 = time.perf_counter()
    start = problem.evals
    if Q is None:
        objective = problem.capacity
    else:
        objective = lambda b: problem.fixed_rate(b, Q)
    bits, value, history = dive(objective, problem.n_vars, max_passes)
    sol = problem.solution(bits, 'diving')
    if Q is not None:
        sol.Q, sol.rate, sol.waterfill = np.asarray(Q), value, None
    sol.history = [{'iteration': k, 'rate': r} for k, r in enumerate(history)]
    sol.eval_count = problem.evals - start
    sol.wall_time = time.perf_counter() - t0
    return sol
