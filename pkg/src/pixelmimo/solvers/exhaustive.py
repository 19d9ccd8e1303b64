"""Exhaustive enumeration of all ``2^(S (N_T + N_R))`` coder assignments."""

import time

import numpy as np

from ..errors import CapExceededError
from .problem import TIE_TOL

DEFAULT_CAP = 24
CHUNK = 1 << 15


def best_index(rates_iter, tol=TIE_TOL):
    """Smallest index whose rate is within ``tol`` of the overall maximum.

    ``rates_iter`` yields ``(offset, rates)`` chunks in ascending index order.
    """
    best = -np.inf
    cand_idx = np.zeros(0, dtype=np.int64)
    cand_rate = np.zeros(0)
    for offset, r in rates_iter:
        best = max(best, float(r.max()))
        keep = cand_rate >= best - tol
        new = np.flatnonzero(r >= best - tol)
        cand_idx = np.concatenate([cand_idx[keep], new + offset])
        cand_rate = np.concatenate([cand_rate[keep], r[new]])
    keep = cand_rate >= best - tol
    return int(cand_idx[keep].min()), best


def exhaustive_solve(problem, cap=DEFAULT_CAP, chunk=CHUNK):
    """Globally optimal coders with water-filled covariance.

    Every assignment is water-filled; ties within ``1e-12`` resolve to the
    lexicographically smallest ``b_all``. Refuses instances with more than
    ``cap`` binary variables.
    """
    n = problem.n_vars
    if n > cap:
        raise CapExceededError(n, cap)
    t0 = time.perf_counter()
    start = problem.evals
    total = 1 << n

    def chunks():
        for lo in range(0, total, chunk):
            idx = np.arange(lo, min(lo + chunk, total))
            yield lo, problem.capacity_batch(problem.codes_from_indices(idx))

    idx, _ = best_index(chunks())
    sol = problem.solution(problem.index_to_bits(idx), 'exhaustive')
    sol.eval_count = problem.evals - start
    sol.wall_time = time.perf_counter() - t0
    return sol


def best_completion(problem, fixed, values, Q=None, chunk=CHUNK):
    """Best completion of a partial assignment.

    Free variables are those with ``fixed[i] == False``; fixed ones keep
    ``values[i]``. The objective is the rate under covariance ``Q``, or the
    water-filled rate when ``Q`` is None. Returns ``(bits, rate)`` with ties
    broken lexicographically.
    """
    free = np.flatnonzero(~np.asarray(fixed, dtype=bool))
    f = free.size
    base = np.asarray(values, dtype=np.int8).copy()
    base[free] = 0
    total = 1 << f
    shifts = np.arange(f - 1, -1, -1)

    def chunks():
        for lo in range(0, total, chunk):
            idx = np.arange(lo, min(lo + chunk, total))
            bits = np.repeat(base[None, :], idx.size, axis=0)
            bits[:, free] = (idx[:, None] >> shifts) & 1
            codes = problem.codes_from_bits(bits)
            if Q is None:
                yield lo, problem.capacity_batch(codes)
            else:
                yield lo, problem.fixed_rate_batch(codes, Q)

    idx, r = best_index(chunks())
    bits = base.copy()
    bits[free] = (idx >> shifts) & 1
    return bits, r
