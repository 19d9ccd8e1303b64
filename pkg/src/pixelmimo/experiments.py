"""
Seeded Monte-Carlo sweeps over SNR and pixel count.

Every trial draws one virtual channel from a seed derived from the master
seed, the sweep kind and the trial index; the same realization is reused
at every grid point of that trial (common random numbers), and every
configured solver runs on that same instance. Per-trial records are written as
CSV with a fixed header; aggregates go to an optional summary CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .channel import (ChannelConfig, dbm_to_watts, power_from_snr,
                      sample_virtual_channel)
from .errors import CapExceededError, ParseError, SolverTimeout
from .network import synthesize_antenna_model
from .solvers import BoundConfig, Problem, parse_method, solve

__all__ = ['ExperimentConfig', 'TrialRecord', 'SweepResult', 'CSV_COLUMNS',
           'SUMMARY_COLUMNS', 'derive_seed', 'run_snr_sweep', 'run_s_sweep',
           'run_timing_sweep', 'run_cell', 'write_trials_csv',
           'write_summary_csv', 'trials_csv_text']

CSV_COLUMNS = ['grid_kind', 'grid_value', 'solver', 'trial', 'channel_seed',
               'rate_bps_hz', 'wall_time_s', 'eval_count', 'node_count', 'converged']
SUMMARY_COLUMNS = ['grid_kind', 'grid_value', 'solver', 'trials', 'completed',
                   'mean_rate_bps_hz', 'stderr_rate_bps_hz', 'mean_wall_time_s',
                   'mean_eval_count', 'gain_bps_hz']

DEFAULT_SOLVERS = ['exhaustive', 'bnb', 'ao', 'sebo', 'baseline:conventional',
                   'baseline:best-single-off', 'baseline:best-single-on',
                   'baseline:random-single-off', 'baseline:random-single-on',
                   'baseline:all-off', 'baseline:all-on']
TIMING_SOLVERS = ['exhaustive', 'bnb', 'ao', 'sebo']

_KIND_CODE = {'snr_db': 1, 'S': 2}
_ANTENNA_TAG = 7


def derive_seed(*keys):
    """Deterministic 32-bit seed from a tuple of non-negative integers."""
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _solver_tag(name):
    return zlib.crc32(name.encode())


@dataclass
class ExperimentConfig:
    n_t: int = 2
    n_r: int = 2
    S: int = 3
    K: int = 8
    z_off: float = 1e6
    beta0_db: float = -30.0
    d: float = 600.0
    d0: float = 1.0
    alpha: float = 3.5
    sigma2_dbm: float = -90.0
    snr_db: float = 0.0
    snr_grid: list = field(default_factory=lambda: [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0])
    s_grid: list = field(default_factory=lambda: [0, 1, 2, 3, 4, 5, 6])
    trials: int = 100
    solvers: list = field(default_factory=lambda: list(DEFAULT_SOLVERS))
    restarts: int = 8
    max_iters: int = 50
    block_size: int = 3
    flips: int = 10
    max_outer: int = 20
    cap: int = 24
    bnb: dict = field(default_factory=lambda: {'mode': 'heuristic'})
    seed: int = 0
    timeout_s: float | None = None
    record_time: bool | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ParseError('trials', f'must be >= 1, got {self.trials}')
        if not self.snr_grid:
            raise ParseError('snr_grid', 'must be nonempty')
        if not self.s_grid:
            raise ParseError('s_grid', 'must be nonempty')
        if any(int(s) != s or s < 0 for s in self.s_grid):
            raise ParseError('s_grid', f'entries must be non-negative integers, got {self.s_grid}')
        if not self.solvers:
            raise ParseError('solvers', 'must be nonempty')
        for name in self.solvers:
            try:
                parse_method(name)
            except ValueError as exc:
                raise ParseError('solvers', str(exc)) from None
        try:
            self.bound_config()
        except (TypeError, ValueError) as exc:
            raise ParseError('bnb', str(exc)) from None

    @property
    def channel(self):
        return ChannelConfig(self.beta0_db, self.d, self.d0, self.alpha)

    @property
    def sigma2(self):
        return dbm_to_watts(self.sigma2_dbm)

    def bound_config(self):
        return BoundConfig(**self.bnb)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ParseError('<root>', 'expected a JSON object')
        known = {f.name for f in fields(cls)}
        for key in d:
            if key not in known:
                raise ParseError(key, 'unknown configuration field')
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError('<root>', f'invalid JSON: {exc}') from None
        return cls.from_dict(d)

    def to_dict(self):
        return asdict(self)


@dataclass
class TrialRecord:
    grid_kind: str
    grid_value: float
    solver: str
    trial: int
    channel_seed: int
    rate: float | None
    wall_time: float | None
    eval_count: int | None
    node_count: int | None
    converged: bool


@dataclass
class SweepResult:
    grid_kind: str
    grid_value: float
    solver: str
    mean_rate: float
    stderr: float
    mean_wall_time: float
    mean_eval_count: float
    records: list

    @classmethod
    def aggregate(cls, records):
        r0 = records[0]
        rates = np.array([r.rate for r in records if r.rate is not None])
        times = [r.wall_time for r in records if r.wall_time is not None and r.rate is not None]
        counts = [r.eval_count for r in records if r.rate is not None]
        nan = float('nan')
        mean = float(np.mean(rates)) if rates.size else nan
        se = float(np.std(rates, ddof=1) / math.sqrt(rates.size)) if rates.size > 1 else (
            0.0 if rates.size else nan)
        return cls(r0.grid_kind, r0.grid_value, r0.solver, mean, se,
                   float(np.mean(times)) if times else nan,
                   float(np.mean(counts)) if counts else nan, list(records))


def _models(cfg, S):
    # one seed per side for every S: pixel-count sweeps see nested antennas
    base = derive_seed(cfg.seed, _ANTENNA_TAG)
    return (synthesize_antenna_model(S, cfg.K, derive_seed(base, 0), cfg.z_off),
            synthesize_antenna_model(S, cfg.K, derive_seed(base, 1), cfg.z_off))


def run_cell(cfg, models, snr_db, solver, channel_seed, grid_kind, grid_value, trial,
             record_time=True):
    """Run one solver on the instance identified by ``channel_seed``."""
    vc = sample_virtual_channel(cfg.K, cfg.channel, channel_seed)
    sigma2 = cfg.sigma2
    power = power_from_snr(snr_db, sigma2, vc.beta)
    problem = Problem(models[0], models[1], vc.H_V, power, sigma2, cfg.n_t, cfg.n_r)
    t0 = time.perf_counter()
    if cfg.timeout_s is not None:
        problem.deadline = t0 + cfg.timeout_s
    try:
        sol = solve(problem, solver, seed=derive_seed(channel_seed, _solver_tag(solver)),
                    restarts=cfg.restarts, max_iters=cfg.max_iters,
                    block_size=cfg.block_size, flips=cfg.flips,
                    bound=cfg.bound_config(), max_outer=cfg.max_outer, cap=cfg.cap)
    except (CapExceededError, SolverTimeout):
        return TrialRecord(grid_kind, grid_value, solver, trial, channel_seed,
                           None, None, None, None, False)
    wall = time.perf_counter() - t0
    return TrialRecord(grid_kind, grid_value, solver, trial, channel_seed,
                       sol.rate, wall if record_time else None, sol.eval_count,
                       sol.node_count, bool(sol.converged))


def _sweep(cfg, kind, grid, record_time, solvers):
    results = []
    for g in grid:
        S = int(g) if kind == 'S' else cfg.S
        snr = cfg.snr_db if kind == 'S' else float(g)
        models = _models(cfg, S)
        names = ['baseline:conventional'] if S == 0 else list(solvers)
        cells = {name: [] for name in names}
        for trial in range(cfg.trials):
            seed = derive_seed(cfg.seed, _KIND_CODE[kind], trial)
            for name in names:
                cells[name].append(run_cell(cfg, models, snr, name, seed, kind, g, trial,
                                            record_time))
        results.extend(SweepResult.aggregate(cells[name]) for name in names)
    return results


def run_snr_sweep(cfg):
    """Rate versus receive SNR at fixed ``S``."""
    record = bool(cfg.record_time) if cfg.record_time is not None else False
    return _sweep(cfg, 'snr_db', [float(x) for x in cfg.snr_grid], record, cfg.solvers)


def run_s_sweep(cfg):
    """Rate versus pixel count at fixed SNR; ``S = 0`` reports conventional MIMO only."""
    record = bool(cfg.record_time) if cfg.record_time is not None else False
    return _sweep(cfg, 'S', [int(s) for s in cfg.s_grid], record, cfg.solvers)


def run_timing_sweep(cfg):
    """Wall time and evaluation counts versus pixel count."""
    record = bool(cfg.record_time) if cfg.record_time is not None else True
    return _sweep(cfg, 'S', [int(s) for s in cfg.s_grid], record, cfg.solvers)


# -- output -----------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ''
    if isinstance(x, bool):
        return 'true' if x else 'false'
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return '' if math.isnan(x) else repr(x)


def _grid(kind, value):
    return str(int(value)) if kind == 'S' else repr(float(value))


def write_trials_csv(results, fh):
    """Per-trial rows sorted by (grid point, solver, trial)."""
    order = {}
    rows = []
    for res in results:
        for rec in res.records:
            key = (rec.grid_value, order.setdefault(rec.solver, len(order)), rec.trial)
            rows.append((key, rec))
    rows.sort(key=lambda kr: kr[0])
    w = csv.writer(fh, lineterminator='\n')
    w.writerow(CSV_COLUMNS)
    for _, r in rows:
        w.writerow([r.grid_kind, _grid(r.grid_kind, r.grid_value), r.solver, r.trial,
                    r.channel_seed, _fmt(r.rate), _fmt(r.wall_time), _fmt(r.eval_count),
                    _fmt(r.node_count), _fmt(r.converged)])


def trials_csv_text(results):
    buf = io.StringIO()
    write_trials_csv(results, buf)
    return buf.getvalue()


def write_summary_csv(results, fh, reference=1):
    """Aggregates per cell; ``gain_bps_hz`` is relative to ``S = reference``."""
    ref = {res.solver: res.mean_rate for res in results
           if res.grid_kind == 'S' and int(res.grid_value) == reference}
    w = csv.writer(fh, lineterminator='\n')
    w.writerow(SUMMARY_COLUMNS)
    for res in results:
        gain = None
        if res.grid_kind == 'S' and res.solver in ref:
            gain = res.mean_rate - ref[res.solver]
        completed = sum(r.rate is not None for r in res.records)
        w.writerow([res.grid_kind, _grid(res.grid_kind, res.grid_value), res.solver,
                    len(res.records), completed, _fmt(res.mean_rate), _fmt(res.stderr),
                    _fmt(res.mean_wall_time), _fmt(res.mean_eval_count), _fmt(gain)])
