"""
Branch-and-bound over the stacked coder vector ``b_all``.

The coder subproblem (fixed covariance) is searched best-first with a
diving warm start, pseudocost branching, standard pruning, periodic
single-bit primal heuristics and queue-wide dynamic pruning. Small subtrees
are solved exactly by enumeration. :func:`bnb_solve` alternates the coder
search with water-filling.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .exhaustive import best_completion
from .heuristics import dive, local_search
from .problem import TIE_TOL, RateSolution

__all__ = ['BoundConfig', 'BnbNode', 'PseudocostTable', 'equal_gain_bound',
           'bnb_upper_bound', 'bnb_solve_coders', 'bnb_solve']

# Tangency point t of (1 + t) ln(1 + t) = 2t: below this per-stream SNR the
# equal-gain rate T log2(1 + x) is not an upper bound and the concave
# envelope (linear in sqrt(x)) is used instead.
ENVELOPE_KNEE = 3.921553634567503
MONOTONE_SLACK = 1e-9


@dataclass
class BoundConfig:
    """Bounding and search controls.

    ``mode='safe'`` uses the provable channel-power bound (gamma = 1);
    ``mode='heuristic'`` scales it by ``c1 + c2 * f`` with ``f`` the free
    fraction and may prune the optimum.
    """

    c1: float = 0.5
    c2: float = 0.5
    mode: str = 'safe'
    leaf_size: int = 10
    dive_passes: int = 10
    heuristic_period: int = 50
    node_budget: int | None = None
    warm_start: bool = True
    primal_heuristic: bool = True

    def __post_init__(self):
        if self.mode not in ('safe', 'heuristic'):
            raise ValueError(f"mode must be 'safe' or 'heuristic', got {self.mode!r}")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1 and c2 must be nonnegative")

    def gamma(self, f):
        return 1.0 if self.mode == 'safe' else self.c1 + self.c2 * f


@dataclass
class BnbNode:
    fixed: np.ndarray
    values: np.ndarray
    bound: float
    depth: int

    @property
    def n_free(self):
        return int((~self.fixed).sum())


@dataclass
class PseudocostTable:
    """Running mean of bound degradation per (variable, branch value)."""

    n: int
    sums: np.ndarray = field(init=False)
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.sums = np.zeros((2, self.n))
        self.counts = np.zeros((2, self.n), dtype=np.int64)

    @property
    def psi(self):
        return self.sums / np.maximum(self.counts, 1)

    def update(self, index, value, degradation):
        self.sums[value, index] += max(0.0, degradation)
        self.counts[value, index] += 1

    def select(self, fixed):
        """Free index maximizing ``psi0 + psi1``; lowest index on ties."""
        free = np.flatnonzero(~fixed)
        score = self.psi.sum(axis=0)[free]
        return int(free[np.argmax(score)])


def equal_gain_bound(W, P, sigma2, T):
    """Upper bound on capacity for total channel power ``W`` over ``T`` streams.

    For ``x = P W / (T^2 sigma2)`` at or above the envelope knee this is the
    equal-eigenvalue rate ``T log2(1 + x)``; below it, that expression is not
    a bound (one strong stream beats ``T`` weak ones) and the concave
    envelope ``T sqrt(x / knee) log2(1 + knee)`` is returned.
    """
    if W <= 0:
        return 0.0
    if T == 1:
        return math.log2(1.0 + P * W / sigma2)
    x = P * W / (T * T * sigma2)
    if x >= ENVELOPE_KNEE:
        return T * math.log2(1.0 + x)
    return T * math.sqrt(x / ENVELOPE_KNEE) * math.log2(1.0 + ENVELOPE_KNEE)


def _evaluate(node_fixed, node_values, problem, config, Q):
    """Bound of a partial assignment; exact ``(bits, rate)`` for small subtrees."""
    free = int((~node_fixed).sum())
    if free <= config.leaf_size:
        bits, r = best_completion(problem, node_fixed, node_values, Q)
        return r, bits
    f = free / problem.n_vars
    W = config.gamma(f) * problem.n_r * problem.n_t * np.linalg.norm(problem.H_V) ** 2
    return equal_gain_bound(W, problem.power, problem.sigma2, min(problem.n_t, problem.n_r)), None


def bnb_upper_bound(node, problem, config, Q=None):
    """Upper bound on the best completion of ``node``.

    Exact (by enumeration) when at most ``config.leaf_size`` variables are
    free; otherwise the channel-power bound. ``Q`` selects the fixed
    covariance objective; ``None`` bounds the water-filled rate.
    """
    return _evaluate(node.fixed, node.values, problem, config, Q)[0]


def bnb_solve_coders(problem, Q, config=None, initial=None, trace=None):
    """Optimal coders for fixed covariance ``Q`` by branch-and-bound.

    Parameters
    ----------
    problem : Problem
    Q : ndarray
        Fixed transmit covariance.
    config : BoundConfig, optional
    initial : array_like, optional
        A known assignment, used as incumbent if better than the warm start.
    trace : dict, optional
        Filled with ``branch`` (node id, depth, index), ``pruned``
        (fixed, values, bound, incumbent) and the final ``psi`` table.

    Returns
    -------
    RateSolution
        ``rate`` is the rate under ``Q``; ``converged`` is False when the
        node budget ran out.
    """
    config = config or BoundConfig()
    t0 = time.perf_counter()
    start = problem.evals
    n = problem.n_vars
    objective = lambda b: problem.fixed_rate(b, Q)
    safe = config.mode == 'safe'

    inc_bits, inc = None, 0.0
    if config.warm_start:
        inc_bits, inc, _ = dive(objective, n, config.dive_passes)
    if initial is not None:
        r = objective(np.asarray(initial, dtype=np.int8))
        if inc_bits is None or r > inc + TIE_TOL:
            inc_bits, inc = np.array(initial, dtype=np.int8), r

    pc = PseudocostTable(n)
    if trace is not None:
        trace.update(branch=[], pruned=[], improvements=[])

    def prune(node):
        if trace is not None:
            trace['pruned'].append((node.fixed.copy(), node.values.copy(), node.bound, inc))

    root_fixed = np.zeros(n, dtype=bool)
    root_values = np.zeros(n, dtype=np.int8)
    bound, exact = _evaluate(root_fixed, root_values, problem, config, Q)
    nodes = 1
    heap = []
    counter = 0
    if exact is not None:
        if inc_bits is None or bound > inc + TIE_TOL:
            inc_bits, inc = exact, bound
    else:
        heapq.heappush(heap, (-bound, counter, BnbNode(root_fixed, root_values, bound, 0)))

    expanded = 0
    exhausted = False
    while heap:
        _, _, node = heapq.heappop(heap)
        if node.bound <= inc + TIE_TOL:
            prune(node)
            continue
        if config.node_budget is not None and nodes + 2 > config.node_budget:
            exhausted = True
            break
        index = pc.select(node.fixed)
        if trace is not None:
            trace['branch'].append((expanded, node.depth, index))
        expanded += 1
        for v in (0, 1):
            fixed = node.fixed.copy()
            values = node.values.copy()
            fixed[index] = True
            values[index] = v
            cb, exact = _evaluate(fixed, values, problem, config, Q)
            nodes += 1
            if safe and cb > node.bound + MONOTONE_SLACK:
                raise AssertionError(
                    f"bound increased from {node.bound} to {cb} at depth {node.depth + 1}")
            pc.update(index, v, node.bound - cb)
            child = BnbNode(fixed, values, cb, node.depth + 1)
            if exact is not None:
                if inc_bits is None or cb > inc + TIE_TOL:
                    inc_bits, inc = exact, cb
            elif cb > inc + TIE_TOL:
                counter += 1
                heapq.heappush(heap, (-cb, counter, child))
            else:
                prune(child)
        if (config.primal_heuristic and inc_bits is not None
                and expanded % config.heuristic_period == 0):
            bits, r, _ = local_search(objective, inc_bits, inc)
            if r > inc + TIE_TOL:
                inc_bits, inc = bits, r
                if trace is not None:
                    trace['improvements'].append((expanded, r))
                survivors = []
                for item in heap:
                    if item[2].bound <= inc + TIE_TOL:
                        prune(item[2])
                    else:
                        survivors.append(item)
                heap = survivors
                heapq.heapify(heap)

    if inc_bits is None:
        inc_bits = np.zeros(n, dtype=np.int8)
        inc = objective(inc_bits)
    if trace is not None:
        trace['psi'] = pc.psi.copy()
        trace['counts'] = pc.counts.copy()
    return RateSolution(
        assignment=problem.assignment(inc_bits), Q=np.asarray(Q), rate=inc,
        method='bnb-coders', wall_time=time.perf_counter() - t0,
        eval_count=problem.evals - start, node_count=nodes,
        converged=not exhausted, history=[{'nodes-expanded': expanded}])


def bnb_solve(problem, config=None, max_outer=20, rtol=1e-6):
    """Alternate water-filling and branch-and-bound coder search.

    Starts from the isotropic covariance ``(P / N_T) I`` and stops when the
    relative rate gain drops below ``rtol`` or after ``max_outer`` rounds.
    """
    config = config or BoundConfig()
    t0 = time.perf_counter()
    start = problem.evals
    Q = np.eye(problem.n_t) * (problem.power / problem.n_t)
    bits = None
    best = None
    nodes = 0
    converged = False
    history = []
    for it in range(max_outer):
        inner = bnb_solve_coders(problem, Q, config, initial=bits)
        nodes += inner.node_count
        new_bits = inner.b_all()
        changed = int(np.sum(new_bits != bits)) if bits is not None else int(new_bits.sum())
        sol = problem.solution(new_bits, 'bnb')
        history.append({'iteration': it, 'rate': sol.rate, 'bits-changed': changed,
                        'nodes-expanded': inner.history[0]['nodes-expanded']})
        prev = best.rate if best is not None else None
        if best is None or sol.rate >= best.rate:
            best = sol
        bits, Q = new_bits, sol.Q
        if prev is not None and sol.rate - prev <= rtol * max(abs(prev), 1e-300):
            converged = inner.converged
            break
    best.eval_count = problem.evals - start
    best.node_count = nodes
    best.converged = converged
    best.history = history
    best.wall_time = time.perf_counter() - t0
    return best
