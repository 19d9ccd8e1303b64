import csv
import io
import json
import math

import numpy as np
import pytest

from pixelmimo.errors import ParseError
from pixelmimo.experiments import (CSV_COLUMNS, SUMMARY_COLUMNS, ExperimentConfig,
                                   _models, derive_seed, run_cell, run_s_sweep,
                                   run_snr_sweep, run_timing_sweep, trials_csv_text,
                                   write_summary_csv)

GOLDEN_HEADER = ('grid_kind,grid_value,solver,trial,channel_seed,rate_bps_hz,'
                 'wall_time_s,eval_count,node_count,converged\n')


def small(**kw):
    base = dict(K=3, S=1, trials=2, snr_grid=[-5.0, 5.0], s_grid=[0, 1, 2],
                solvers=['exhaustive', 'ao', 'baseline:all-on'], seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


def rows(results):
    return list(csv.DictReader(io.StringIO(trials_csv_text(results))))


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert (cfg.n_t, cfg.n_r, cfg.S, cfg.trials) == (2, 2, 3, 100)
        assert (cfg.sigma2_dbm, cfg.beta0_db, cfg.d, cfg.alpha) == (-90.0, -30.0, 600.0, 3.5)
        assert cfg.snr_grid == [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
        np.testing.assert_allclose(cfg.sigma2, 1e-12, rtol=1e-12)

    @pytest.mark.parametrize('kw,field', [({'trials': 0}, 'trials'), ({'snr_grid': []}, 'snr_grid'),
                                          ({'s_grid': []}, 's_grid'), ({'s_grid': [-1]}, 's_grid'),
                                          ({'solvers': ['magic']}, 'solvers'),
                                          ({'bnb': {'mode': 'x'}}, 'bnb')])
    def test_validation(self, kw, field):
        with pytest.raises(ParseError) as info:
            ExperimentConfig(**kw)
        assert info.value.field == field

    def test_unknown_key(self):
        with pytest.raises(ParseError) as info:
            ExperimentConfig.from_dict({'trails': 3})
        assert info.value.field == 'trails'

    def test_json_round_trip(self, tmp_path):
        cfg = small(bnb={'mode': 'safe', 'leaf_size': 4})
        (tmp_path / 'c.json').write_text(json.dumps(cfg.to_dict()))
        assert ExperimentConfig.from_json(tmp_path / 'c.json') == cfg

    def test_derive_seed(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert len({derive_seed(0, 1, t) for t in range(1000)}) == 1000
        assert derive_seed(1, 2) != derive_seed(2, 1)


class TestSnrSweep:
    def test_golden_header(self):
        assert trials_csv_text(run_snr_sweep(small(trials=1))).startswith(GOLDEN_HEADER)
        assert CSV_COLUMNS == GOLDEN_HEADER.strip().split(',')

    def test_byte_identical_reruns(self):
        assert trials_csv_text(run_snr_sweep(small())) == trials_csv_text(run_snr_sweep(small()))

    def test_seed_changes_output(self):
        assert trials_csv_text(run_snr_sweep(small())) != trials_csv_text(run_snr_sweep(small(seed=2)))

    def test_shared_instance_per_cell(self):
        by_cell = {}
        for r in rows(run_snr_sweep(small(trials=3))):
            by_cell.setdefault((r['grid_value'], r['trial']), set()).add(r['channel_seed'])
        assert all(len(s) == 1 for s in by_cell.values())

    def test_row_order(self):
        keys = [(float(r['grid_value']), r['solver'], int(r['trial']))
                for r in rows(run_snr_sweep(small()))]
        order = {'exhaustive': 0, 'ao': 1, 'baseline:all-on': 2}
        assert keys == sorted(keys, key=lambda k: (k[0], order[k[1]], k[2]))
        assert len(keys) == 2 * 3 * 2

    def test_seed_lineage(self):
        cfg = small()
        models = _models(cfg, cfg.S)
        for r in rows(run_snr_sweep(cfg)):
            rec = run_cell(cfg, models, float(r['grid_value']), r['solver'],
                           int(r['channel_seed']), 'snr_db', float(r['grid_value']),
                           int(r['trial']))
            assert repr(rec.rate) == r['rate_bps_hz']

    def test_aggregation_integrity(self):
        cfg = small(trials=4)
        for res in run_snr_sweep(cfg):
            assert len(res.records) == cfg.trials
            rates = np.array([r.rate for r in res.records])
            assert abs(res.mean_rate - rates.mean()) <= 1e-12
            se = rates.std(ddof=1) / math.sqrt(rates.size)
            assert abs(res.stderr - se) <= 1e-12
            assert res.mean_eval_count == np.mean([r.eval_count for r in res.records])

    def test_rate_grows_with_snr(self):
        res = run_snr_sweep(small(trials=3, solvers=['exhaustive']))
        assert res[1].mean_rate > res[0].mean_rate

    def test_no_wall_time_by_default(self):
        assert all(r['wall_time_s'] == '' for r in rows(run_snr_sweep(small(trials=1))))
        timed = rows(run_snr_sweep(small(trials=1, record_time=True)))
        assert all(float(r['wall_time_s']) >= 0 for r in timed)


class TestSSweep:
    def test_zero_pixels_conventional_only(self):
        res = run_s_sweep(small(s_grid=[0]))
        assert [r.solver for r in res] == ['baseline:conventional']

    def test_shape(self):
        cfg = small(trials=3)
        res = run_s_sweep(cfg)
        ex = [r for r in res if r.solver == 'exhaustive']
        assert [int(r.grid_value) for r in ex] == [1, 2]
        assert all(len(r.records) == 3 for r in ex)

    def test_common_channels_across_grid(self):
        seeds = {}
        for r in rows(run_s_sweep(small())):
            seeds.setdefault(r['trial'], set()).add(r['channel_seed'])
        assert all(len(s) == 1 for s in seeds.values())

    def test_summary_gain(self):
        res = run_s_sweep(small(trials=3))
        buf = io.StringIO()
        write_summary_csv(res, buf)
        summary = list(csv.DictReader(io.StringIO(buf.getvalue())))
        assert list(summary[0]) == SUMMARY_COLUMNS
        ex = {int(r['grid_value']): r for r in summary if r['solver'] == 'exhaustive'}
        gain = float(ex[2]['mean_rate_bps_hz']) - float(ex[1]['mean_rate_bps_hz'])
        np.testing.assert_allclose(float(ex[2]['gain_bps_hz']), gain, rtol=1e-12)
        assert float(ex[1]['gain_bps_hz']) == 0.0
        assert summary[0]['gain_bps_hz'] == ''

    def test_cap_refusal_recorded(self):
        res = run_s_sweep(small(s_grid=[1, 2], cap=6, solvers=['exhaustive', 'ao']))
        refused = [r for r in rows(res) if r['grid_value'] == '2' and r['solver'] == 'exhaustive']
        assert refused and all(r['rate_bps_hz'] == '' and r['converged'] == 'false' for r in refused)
        assert all(r['rate_bps_hz'] for r in rows(res) if r['solver'] == 'ao')

    def test_timeout_recorded(self):
        res = run_s_sweep(small(s_grid=[2], timeout_s=0.0, solvers=['exhaustive']))
        assert all(r.rate is None and not r.converged for r in res[0].records)
        assert math.isnan(res[0].mean_rate)


class TestTimingSweep:
    def test_counts(self):
        cfg = small(s_grid=[1, 2], trials=2, solvers=['exhaustive', 'ao', 'bnb'])
        res = run_timing_sweep(cfg)
        for r in rows(res):
            if r['solver'] == 'exhaustive':
                assert int(r['eval_count']) == 2 ** (int(r['grid_value']) * 4)
            assert float(r['wall_time_s']) >= 0
        again = run_timing_sweep(cfg)
        assert [r['eval_count'] for r in rows(res)] == [r['eval_count'] for r in rows(again)]
        assert [r['node_count'] for r in rows(res)] == [r['node_count'] for r in rows(again)]
