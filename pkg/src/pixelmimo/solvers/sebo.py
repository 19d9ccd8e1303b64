"""Successive exhaustive boolean optimization (block coordinate search)."""

import time

import numpy as np

from ..channel import EffectiveChannel, water_fill
from .problem import TIE_TOL


def _converge(problem, bits, J, max_iters, phase, log):
    bits = np.array(bits, dtype=np.int8)
    n = bits.size
    blocks = [np.arange(lo, min(lo + J, n)) for lo in range(0, n, J)]
    wf = None
    for it in range(max_iters):
        problem._count()
        wf = water_fill(EffectiveChannel.from_matrix(problem.channel(bits)),
                        problem.power, problem.sigma2)
        changed = 0
        for blk in blocks:
            m = blk.size
            combos = (np.arange(1 << m)[:, None] >> np.arange(m - 1, -1, -1)) & 1
            cand = np.repeat(bits[None, :], 1 << m, axis=0)
            cand[:, blk] = combos
            r = problem.fixed_rate_batch(problem.codes_from_bits(cand), wf.Q)
            cur = r[int(bits[blk] @ (1 << np.arange(m - 1, -1, -1)))]
            k = int(np.argmax(r))
            if r[k] > cur + TIE_TOL:
                changed += int(np.sum(bits[blk] != combos[k]))
                bits[blk] = combos[k]
        log.append({'phase': phase, 'iteration': it, 'rate': wf.rate,
                    'bits-changed': changed})
        if changed == 0:
            return bits, wf, True
    return bits, wf, False


def sebo_solve(problem, block_size=3, flips=10, max_iters=50, seed=0, init=None):
    """Block-wise exhaustive search alternated with water-filling.

    ``b_all`` is cut into consecutive blocks of ``block_size`` bits (the last
    may be shorter). After convergence, ``flips`` random single-bit
    perturbations of the best point are each re-converged; the best result
    is kept. The initial point is drawn like the first AO restart.
    """
    if block_size < 1:
        raise ValueError(f"block_size must be >= 1, got {block_size}")
    t0 = time.perf_counter()
    start = problem.evals
    rng = np.random.default_rng(seed)
    b0 = rng.integers(0, 2, problem.n_vars, dtype=np.int8)
    if init is not None:
        b0 = np.asarray(init, dtype=np.int8)
    log = []
    bits, wf, conv = _converge(problem, b0, block_size, max_iters, 0, log)
    best_bits, best_wf = bits, wf
    for k in range(flips if problem.n_vars else 0):
        trial = best_bits.copy()
        trial[rng.integers(problem.n_vars)] ^= 1
        bits, wf, c = _converge(problem, trial, block_size, max_iters, k + 1, log)
        conv &= c
        if wf.rate > best_wf.rate + TIE_TOL:
            best_bits, best_wf = bits, wf
    sol = problem.solution(best_bits, 'sebo')
    sol.history = log
    sol.converged = conv
    sol.eval_count = problem.evals - start
    sol.wall_time = time.perf_counter() - t0
    return sol
