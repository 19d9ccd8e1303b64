"""Element-wise alternating optimization with random restarts."""

import time

import numpy as np

from ..channel import EffectiveChannel, water_fill
from .problem import TIE_TOL


def ao_restart(problem, bits, max_iters=50, restart=0):
    """Run AO from ``bits``; returns ``(bits, waterfill, converged, log)``.

    Each iteration water-fills the current channel, then sweeps every bit of
    ``b_all`` in order, keeping a flip only if it strictly raises the rate
    under the fixed covariance.
    """
    bits = np.array(bits, dtype=np.int8)
    log = []
    for it in range(max_iters):
        problem._count()
        wf = water_fill(EffectiveChannel.from_matrix(problem.channel(bits)),
                        problem.power, problem.sigma2)
        Q = wf.Q
        cur = problem.fixed_rate(bits, Q)
        changed = 0
        for i in range(bits.size):
            bits[i] ^= 1
            r = problem.fixed_rate(bits, Q)
            if r > cur + TIE_TOL:
                cur = r
                changed += 1
            else:
                bits[i] ^= 1
        log.append({'restart': restart, 'iteration': it, 'rate': wf.rate,
                    'bits-changed': changed})
        # an unchanged sweep leaves the water-filled rate unchanged as well
        if changed == 0:
            return bits, wf, True, log
    return bits, wf, False, log


def ao_solve(problem, restarts=8, max_iters=50, seed=0, init=None):
    """Best of ``restarts`` element-wise AO runs from random coders.

    ``init`` replaces the random start of the first restart.
    """
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    t0 = time.perf_counter()
    start = problem.evals
    rng = np.random.default_rng(seed)
    best = None
    history = []
    all_converged = True
    for l in range(restarts):
        b0 = rng.integers(0, 2, problem.n_vars, dtype=np.int8)
        if l == 0 and init is not None:
            b0 = np.asarray(init, dtype=np.int8)
        bits, wf, conv, log = ao_restart(problem, b0, max_iters, restart=l)
        all_converged &= conv
        history.extend(log)
        if best is None or wf.rate > best[1].rate + TIE_TOL:
            best = (bits, wf)
    sol = problem.solution(best[0], 'ao')
    sol.history = history
    sol.converged = all_converged
    sol.eval_count = problem.evals - start
    sol.wall_time = time.perf_counter() - t0
    return sol
