import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pixelmimo.channel import (CoderAssignment, effective_channel, rate,
                               water_fill)
from pixelmimo.errors import CapExceededError, UsageError
from pixelmimo.network import synthesize_antenna_model
from pixelmimo.solvers import (BnbNode, BoundConfig, Problem, PseudocostTable,
                               SCHEMES, ao_solve, baseline_solve, best_completion,
                               bnb_solve, bnb_solve_coders, bnb_upper_bound,
                               diving_heuristic, equal_gain_bound, exhaustive_solve,
                               parse_method, sebo_solve, solve)
from pixelmimo.solvers.ao import ao_restart
from pixelmimo.solvers.bnb import ENVELOPE_KNEE
from pixelmimo.solvers.exhaustive import best_index
from pixelmimo.solvers.heuristics import dive, local_search

from conftest import all_bits, make_problem


def oracle_channel(problem, b):
    a = CoderAssignment.from_b_all(b, problem.S, problem.n_t, problem.n_r)
    return effective_channel(problem.models_t, problem.models_r, problem.H_V, a)


def oracle_capacities(problem):
    """Water-filled rate of every assignment, one channel at a time."""
    return np.array([water_fill(oracle_channel(problem, b), problem.power, problem.sigma2).rate
                     for b in all_bits(problem.n_vars)])


def oracle_fixed_rates(problem, Q):
    return np.array([rate(oracle_channel(problem, b), Q, problem.sigma2)
                     for b in all_bits(problem.n_vars)])


def subtree_max(table, fixed, values):
    bits = all_bits(fixed.size)
    match = np.all(bits[:, fixed] == values[fixed], axis=1)
    return table[match].max()


def isotropic(problem):
    return np.eye(problem.n_t) * problem.power / problem.n_t


def check_solution(problem, sol):
    """A solution's rate is reproduced by its own assignment and covariance."""
    H = oracle_channel(problem, sol.b_all()) if sol.assignment.S else sol.H
    np.testing.assert_allclose(sol.rate, rate(H, sol.Q, problem.sigma2), atol=1e-9)
    assert sol.rate >= 0


class TestExhaustive:
    def test_zero_channel(self):
        p = make_problem(S=2, seed=0)
        p = Problem(p.models_t, p.models_r, np.zeros_like(p.H_V), p.power, p.sigma2, 2, 2)
        sol = exhaustive_solve(p)
        assert sol.rate == 0
        np.testing.assert_array_equal(sol.b_all(), np.zeros(8))

    def test_smallest_instance(self):
        p = make_problem(S=1, n_t=1, n_r=1, seed=0)
        assert exhaustive_solve(p).eval_count == 4

    @pytest.mark.parametrize('seed', range(3))
    def test_matches_enumeration(self, seed):
        p = make_problem(S=2, seed=seed)
        table = oracle_capacities(p)
        sol = exhaustive_solve(p)
        assert sol.eval_count == 256
        np.testing.assert_allclose(sol.rate, table.max(), atol=1e-9)
        assert np.all(sol.rate >= table - 1e-9)
        k = np.flatnonzero(table >= table.max() - 1e-9)[0]
        np.testing.assert_array_equal(sol.b_all(), all_bits(8)[k])
        check_solution(p, sol)

    def test_cap(self):
        p = make_problem(S=3, seed=0)
        with pytest.raises(CapExceededError) as info:
            exhaustive_solve(p, cap=10)
        assert info.value.required == 4096

    def test_chunking_invariant(self):
        p = make_problem(S=2, seed=4)
        a, b = exhaustive_solve(p), exhaustive_solve(p, chunk=7)
        assert a.rate == b.rate
        np.testing.assert_array_equal(a.b_all(), b.b_all())

    def test_tie_break_across_chunks(self):
        chunks = [(0, np.array([1.0, 3.0])), (2, np.array([3.0 + 1e-13, 2.0])),
                  (4, np.array([3.0 + 2e-12]))]
        assert best_index(iter(chunks))[0] == 4
        chunks[2] = (4, np.array([2.5]))
        assert best_index(iter(chunks))[0] == 1

    def test_best_completion(self):
        p = make_problem(S=2, seed=5)
        table = oracle_capacities(p)
        fixed = np.array([1, 0, 0, 1, 0, 0, 0, 1], bool)
        values = np.array([1, 0, 0, 0, 0, 0, 0, 1], np.int8)
        bits, r = best_completion(p, fixed, values)
        np.testing.assert_allclose(r, subtree_max(table, fixed, values), atol=1e-9)
        np.testing.assert_array_equal(bits[fixed], values[fixed])


class TestDiving:
    def test_fixed_point_at_zeros(self):
        bits, value, _ = dive(lambda b: -float(b.sum()), 6)
        np.testing.assert_array_equal(bits, 0)
        assert value == 0

    def test_finds_separable_optimum(self):
        w = np.array([1.0, -2.0, 3.0, -0.5])
        bits, value, _ = dive(lambda b: float(w @ b), 4)
        np.testing.assert_array_equal(bits, [1, 0, 1, 0])

    @pytest.mark.parametrize('seed', range(4))
    def test_lower_bound_and_monotone(self, seed):
        p = make_problem(S=2, seed=seed)
        opt = exhaustive_solve(p).rate
        sol = diving_heuristic(p)
        assert sol.rate <= opt + 1e-9
        rates = [h['rate'] for h in sol.history]
        assert np.all(np.diff(rates) >= 0)
        check_solution(p, sol)

    def test_fixed_covariance(self):
        p = make_problem(S=2, seed=1)
        Q = isotropic(p)
        sol = diving_heuristic(p, Q=Q)
        assert sol.rate <= oracle_fixed_rates(p, Q).max() + 1e-9
        np.testing.assert_allclose(sol.rate, rate(oracle_channel(p, sol.b_all()), Q, p.sigma2),
                                   atol=1e-9)

    def test_local_search_pass_cap(self):
        bits, value, hist = local_search(lambda b: float(b.sum()), np.zeros(5), max_passes=1)
        assert len(hist) == 2 and value == 5


class TestEqualGainBound:
    def test_single_stream(self):
        assert equal_gain_bound(2.0, 3.0, 0.5, 1) == np.log2(1 + 12.0)

    def test_high_snr_form(self):
        W, P, s2, T = 100.0, 1.0, 0.1, 2
        assert equal_gain_bound(W, P, s2, T) == T * np.log2(1 + P * W / (T * T * s2))

    def test_continuous_at_knee(self):
        T, s2 = 2, 1.0
        W = ENVELOPE_KNEE * T * T
        below = equal_gain_bound(W * (1 - 1e-12), 1.0, s2, T)
        np.testing.assert_allclose(below, equal_gain_bound(W, 1.0, s2, T), rtol=1e-10)

    def test_knee_is_tangency(self):
        t = ENVELOPE_KNEE
        np.testing.assert_allclose((1 + t) * np.log(1 + t), 2 * t, rtol=1e-14)

    def test_zero_power(self):
        assert equal_gain_bound(0.0, 1.0, 1.0, 2) == 0.0

    @settings(max_examples=200, deadline=None)
    @given(T=st.integers(1, 4), logW=st.floats(-3, 3), seed=st.integers(0, 2 ** 31))
    def test_dominates_waterfilling(self, T, logW, seed):
        # any split of channel power W over T eigenmodes
        rng = np.random.default_rng(seed)
        W = 10.0 ** logW
        split = rng.dirichlet(np.full(T, 0.3)) * W
        for g in (split, np.r_[W, np.zeros(T - 1)], np.full(T, W / T)):
            wf = water_fill(np.diag(np.sqrt(g)), 1.0, 1.0)
            assert wf.rate <= equal_gain_bound(W, 1.0, 1.0, T) + 1e-12

    def test_naive_form_fails_at_low_snr(self):
        # why the envelope exists: one strong mode beats the equal split
        W, T = 0.4, 2
        naive = T * np.log2(1 + W / T ** 2)
        assert np.log2(1 + W) > naive
        assert equal_gain_bound(W, 1.0, 1.0, T) >= np.log2(1 + W)


class TestBnbBound:
    def test_zero_channel(self):
        p = make_problem(S=2, seed=0)
        p = Problem(p.models_t, p.models_r, np.zeros_like(p.H_V), p.power, p.sigma2, 2, 2)
        node = BnbNode(np.zeros(8, bool), np.zeros(8, np.int8), np.inf, 0)
        assert bnb_upper_bound(node, p, BoundConfig(leaf_size=0), isotropic(p)) == 0.0

    def test_leaf_is_exact(self):
        p = make_problem(S=2, seed=2)
        Q = isotropic(p)
        table = oracle_fixed_rates(p, Q)
        fixed = np.array([1, 1, 0, 0, 0, 0, 0, 0], bool)
        values = np.array([0, 1, 0, 0, 0, 0, 0, 0], np.int8)
        b = bnb_upper_bound(BnbNode(fixed, values, np.inf, 2), p, BoundConfig(), Q)
        np.testing.assert_allclose(b, subtree_max(table, fixed, values), atol=1e-9)

    @pytest.mark.parametrize('seed,snr_db', [(0, 0.0), (1, -10.0), (2, 20.0)])
    def test_subtree_oracle(self, seed, snr_db):
        p = make_problem(S=2, seed=seed, snr_db=snr_db)
        Q = isotropic(p)
        tables = {None: oracle_capacities(p), 'Q': oracle_fixed_rates(p, Q)}
        cfg = BoundConfig(leaf_size=0)
        n = 8
        # every partial fixing up to depth 4 (all 3^8 patterns for depth <= 4)
        for pattern in np.ndindex(*(3,) * n):
            pattern = np.array(pattern)
            fixed = pattern < 2
            if fixed.sum() > 4:
                continue
            values = np.where(fixed, pattern, 0).astype(np.int8)
            node = BnbNode(fixed, values, np.inf, int(fixed.sum()))
            for key, table in tables.items():
                bound = bnb_upper_bound(node, p, cfg, None if key is None else Q)
                assert bound >= subtree_max(table, fixed, values) - 1e-9

    def test_gamma(self):
        assert BoundConfig(c1=0.1, c2=0.2).gamma(0.5) == 1.0
        assert BoundConfig(c1=0.1, c2=0.2, mode='heuristic').gamma(0.5) == pytest.approx(0.2)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            BoundConfig(mode='fast')
        with pytest.raises(ValueError):
            BoundConfig(c1=-1)


class TestPseudocosts:
    def test_mean_is_exact(self):
        pc = PseudocostTable(3)
        obs = [0.3, 1.7, 0.25, 4.0]
        for x in obs:
            pc.update(1, 0, x)
        np.testing.assert_allclose(pc.psi[0, 1], np.mean(obs), atol=1e-12)
        assert pc.counts[0, 1] == 4

    def test_nonnegative(self):
        pc = PseudocostTable(2)
        pc.update(0, 1, -5.0)
        assert np.all(pc.psi >= 0)

    def test_selection(self):
        pc = PseudocostTable(4)
        fixed = np.array([True, False, False, False])
        assert pc.select(fixed) == 1  # cold: lowest free index
        pc.update(3, 0, 1.0)
        pc.update(2, 1, 1.0)
        assert pc.select(fixed) == 2  # tie between 2 and 3
        pc.update(0, 0, 10.0)
        assert pc.select(fixed) == 2  # fixed variables ignored

    def test_replay(self):
        p = make_problem(S=3, seed=3)
        cfg = BoundConfig(leaf_size=3)
        runs = []
        for _ in range(2):
            trace = {}
            sol = bnb_solve_coders(p, isotropic(p), cfg, trace=trace)
            runs.append((trace, sol))
        (t1, s1), (t2, s2) = runs
        assert t1['branch'] == t2['branch'] and len(t1['branch']) > 0
        np.testing.assert_array_equal(t1['psi'], t2['psi'])
        np.testing.assert_array_equal(s1.b_all(), s2.b_all())
        assert s1.node_count == s2.node_count


class TestBnbCoders:
    @pytest.mark.parametrize('seed', range(4))
    @pytest.mark.parametrize('leaf_size', [0, 3, 10])
    def test_exact_in_safe_mode(self, seed, leaf_size):
        p = make_problem(S=2, seed=seed)
        Q = isotropic(p)
        table = oracle_fixed_rates(p, Q)
        sol = bnb_solve_coders(p, Q, BoundConfig(leaf_size=leaf_size))
        np.testing.assert_allclose(sol.rate, table.max(), atol=1e-9)
        assert sol.node_count <= 2 ** 9 - 1
        assert sol.converged

    @pytest.mark.parametrize('seed', range(3))
    def test_pruning_sound(self, seed):
        p = make_problem(S=2, seed=seed, snr_db=-10.0)
        Q = isotropic(p)
        table = oracle_fixed_rates(p, Q)
        trace = {}
        bnb_solve_coders(p, Q, BoundConfig(leaf_size=2), trace=trace)
        for fixed, values, bound, inc in trace['pruned']:
            assert subtree_max(table, fixed, values) <= inc + 1e-9

    @pytest.mark.parametrize('warm', [True, False])
    def test_pruning_sound_on_tight_instance(self, warm):
        # rank-one H_V aligned with the open-circuit pattern makes the
        # channel-power bound attainable, so whole subtrees get pruned
        m = synthesize_antenna_model(2, 1, 3, Z_off=1e15)
        p = Problem(m, m, np.outer(m.e_A, m.e_A.conj()), 1.0, 1.0, 1, 1)
        Q = np.eye(1)
        table = oracle_fixed_rates(p, Q)
        np.testing.assert_allclose(table.max(), 1.0, atol=1e-12)
        trace = {}
        cfg = BoundConfig(leaf_size=1, warm_start=warm, heuristic_period=1)
        sol = bnb_solve_coders(p, Q, cfg, trace=trace)
        assert trace['pruned']
        for fixed, values, bound, inc in trace['pruned']:
            assert subtree_max(table, fixed, values) <= inc + 1e-9
        np.testing.assert_allclose(sol.rate, table.max(), atol=1e-9)

    def test_warm_start_same_rate(self):
        p = make_problem(S=2, seed=6)
        Q = isotropic(p)
        cfg = dict(leaf_size=2)
        warm = bnb_solve_coders(p, Q, BoundConfig(**cfg))
        cold = bnb_solve_coders(p, Q, BoundConfig(warm_start=False, **cfg))
        np.testing.assert_allclose(warm.rate, cold.rate, atol=1e-12)

    def test_node_budget(self):
        p = make_problem(S=3, seed=0)
        sol = bnb_solve_coders(p, isotropic(p), BoundConfig(leaf_size=0, node_budget=5))
        assert not sol.converged
        assert sol.node_count <= 5
        assert sol.rate > 0

    def test_primal_heuristic_keeps_exactness(self):
        p = make_problem(S=2, seed=7)
        Q = isotropic(p)
        cfg = BoundConfig(leaf_size=1, heuristic_period=1, warm_start=False)
        sol = bnb_solve_coders(p, Q, cfg)
        np.testing.assert_allclose(sol.rate, oracle_fixed_rates(p, Q).max(), atol=1e-9)

    def test_heuristic_mode_feasible(self):
        p = make_problem(S=3, seed=1)
        Q = isotropic(p)
        sol = bnb_solve_coders(p, Q, BoundConfig(mode='heuristic', c1=0.0, c2=0.1, leaf_size=4))
        np.testing.assert_allclose(sol.rate, rate(oracle_channel(p, sol.b_all()), Q, p.sigma2),
                                   atol=1e-9)


class TestBnbOuter:
    @pytest.mark.parametrize('seed', range(4))
    def test_outer_loop(self, seed):
        p = make_problem(S=2, seed=seed)
        sol = bnb_solve(p)
        rates = [h['rate'] for h in sol.history]
        assert np.all(np.diff(rates) >= -1e-12)
        assert set(sol.history[0]) == {'iteration', 'rate', 'bits-changed', 'nodes-expanded'}
        assert sol.rate <= exhaustive_solve(p).rate + 1e-9
        H = oracle_channel(p, sol.b_all())
        np.testing.assert_allclose(water_fill(H, p.power, p.sigma2).rate, sol.rate, atol=1e-9)
        check_solution(p, sol)

    def test_against_ao(self):
        wins = 0
        for seed in range(20):
            p = make_problem(S=2, seed=seed)
            wins += bnb_solve(p).rate >= ao_solve(p, seed=seed).rate - 1e-9
        assert wins >= 10


class TestAO:
    @pytest.mark.parametrize('seed', range(3))
    def test_monotone_restarts(self, seed):
        p = make_problem(S=2, seed=seed)
        sol = ao_solve(p, restarts=4, seed=seed)
        for l in range(4):
            rates = [h['rate'] for h in sol.history if h['restart'] == l]
            assert np.all(np.diff(rates) >= -1e-12)
        assert sol.rate <= exhaustive_solve(p).rate + 1e-9
        check_solution(p, sol)

    def test_optimum_is_fixed_point(self):
        p = make_problem(S=2, seed=9)
        opt = exhaustive_solve(p)
        bits, wf, conv, log = ao_restart(p, opt.b_all())
        assert conv and len(log) == 1 and log[0]['bits-changed'] == 0
        np.testing.assert_array_equal(bits, opt.b_all())
        sol = ao_solve(p, restarts=1, init=opt.b_all())
        np.testing.assert_allclose(sol.rate, opt.rate, atol=1e-12)

    def test_seeded(self):
        p = make_problem(S=2, seed=1)
        a, b = ao_solve(p, seed=5), ao_solve(p, seed=5)
        assert a.rate == b.rate and a.eval_count == b.eval_count

    def test_eval_count(self):
        p = make_problem(S=2, seed=1)
        sol = ao_solve(p, restarts=1, seed=0)
        iters = len(sol.history)
        assert sol.eval_count == iters * (2 + p.n_vars)

    def test_needs_restart(self):
        with pytest.raises(ValueError):
            ao_solve(make_problem(S=1, seed=0), restarts=0)


class TestSEBO:
    def test_single_bit_blocks_match_ao(self):
        for seed in range(4):
            p = make_problem(S=2, seed=seed)
            b0 = np.random.default_rng(seed).integers(0, 2, 8, dtype=np.int8)
            bits, wf, _, ao_log = ao_restart(p, b0)
            sol = sebo_solve(p, block_size=1, flips=0, init=b0)
            np.testing.assert_array_equal(sol.b_all(), bits)
            np.testing.assert_allclose([h['rate'] for h in sol.history],
                                       [h['rate'] for h in ao_log], rtol=1e-12)

    def test_single_block_is_alternation(self):
        p = make_problem(S=2, seed=3)
        b0 = np.zeros(8, np.int8)
        sol = sebo_solve(p, block_size=8, flips=0, init=b0)
        bits = b0
        for _ in range(50):
            Q = water_fill(oracle_channel(p, bits), p.power, p.sigma2).Q
            table = oracle_fixed_rates(p, Q)
            cur = table[int(bits @ (1 << np.arange(7, -1, -1)))]
            k = int(np.argmax(table))
            if table[k] <= cur + 1e-12:
                break
            bits = all_bits(8)[k]
        np.testing.assert_array_equal(sol.b_all(), bits)

    @pytest.mark.parametrize('seed', range(3))
    def test_bounded_and_monotone(self, seed):
        p = make_problem(S=2, seed=seed)
        sol = sebo_solve(p, seed=seed)
        assert sol.rate <= exhaustive_solve(p).rate + 1e-9
        for phase in {h['phase'] for h in sol.history}:
            rates = [h['rate'] for h in sol.history if h['phase'] == phase]
            assert np.all(np.diff(rates) >= -1e-12)
        check_solution(p, sol)

    def test_block_size(self):
        with pytest.raises(ValueError):
            sebo_solve(make_problem(S=1, seed=0), block_size=0)


class TestBaselines:
    def test_all_on_off(self):
        p = make_problem(S=3, seed=0)
        np.testing.assert_array_equal(baseline_solve(p, 'all-on').b_all(), 0)
        np.testing.assert_array_equal(baseline_solve(p, 'all-off').b_all(), 1)

    def test_conventional_equals_all_on_without_pixels(self):
        p = make_problem(S=0, seed=2)
        conv = baseline_solve(p, 'conventional')
        np.testing.assert_allclose(conv.rate, baseline_solve(p, 'all-on').rate, rtol=1e-12)
        assert conv.assignment.B_T.shape == (0, 2)

    def test_conventional_open_limit(self):
        # all-off with huge Z_off approaches the bare antenna
        p = make_problem(S=2, seed=2)
        models = [m.with_z_off(1e12) for m in (p.models_t[0], p.models_r[0])]
        q = Problem(models[0], models[1], p.H_V, p.power, p.sigma2, 2, 2)
        np.testing.assert_allclose(baseline_solve(q, 'all-off').rate,
                                   baseline_solve(q, 'conventional').rate, rtol=1e-6)

    def test_single_patterns(self):
        p = make_problem(S=3, seed=1)
        for scheme, minority in (('best-single-off', 1), ('best-single-on', 0),
                                 ('random-single-off', 1), ('random-single-on', 0)):
            B = baseline_solve(p, scheme, seed=4).b_all().reshape(4, 3)
            np.testing.assert_array_equal((B == minority).sum(axis=1), 1)

    def test_best_single_eval_count(self):
        p = make_problem(S=3, seed=1)
        assert baseline_solve(p, 'best-single-off').eval_count == 3 * 4

    def test_best_single_beats_random(self):
        for seed in range(5):
            p = make_problem(S=3, seed=seed)
            best = baseline_solve(p, 'best-single-off').rate
            for draw in range(5):
                assert best >= baseline_solve(p, 'random-single-off', seed=draw).rate - 1e-9

    def test_random_seeded(self):
        p = make_problem(S=3, seed=1)
        a = baseline_solve(p, 'random-single-on', seed=3)
        b = baseline_solve(p, 'random-single-on', seed=3)
        np.testing.assert_array_equal(a.b_all(), b.b_all())

    def test_errors(self):
        with pytest.raises(UsageError):
            baseline_solve(make_problem(S=1, seed=0), 'half-on')
        with pytest.raises(UsageError):
            baseline_solve(make_problem(S=0, seed=0), 'best-single-off')

    @pytest.mark.parametrize('scheme', SCHEMES)
    def test_valid_solutions(self, scheme):
        p = make_problem(S=2, seed=3)
        sol = baseline_solve(p, scheme, seed=1)
        check_solution(p, sol)
        assert sol.waterfill is not None


class TestDispatch:
    def test_oracle_dominance(self):
        for seed in range(5):
            p = make_problem(S=2, seed=seed)
            opt = exhaustive_solve(p).rate
            for method in ('bnb', 'ao', 'sebo') + tuple('baseline:' + s for s in SCHEMES):
                assert solve(p, method, seed=seed).rate <= opt + 1e-9

    def test_parse(self):
        assert parse_method('baseline:all-on') == ('baseline', 'all-on')
        assert parse_method('ao') == ('ao', None)
        with pytest.raises(UsageError):
            parse_method('baseline:nope')

    def test_to_dict(self):
        d = solve(make_problem(S=1, n_t=1, n_r=1, seed=0), 'exhaustive').to_dict()
        assert d['eval_count'] == 4 and d['method'] == 'exhaustive'
        assert np.shape(d['Q']) == (1, 1, 2)
