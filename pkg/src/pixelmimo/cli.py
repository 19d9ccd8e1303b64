"""Command-line entry point: ``pixelmimo <subcommand> [options]``.

Exit status is 0 on success, 1 on usage errors and 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from .channel import (ChannelConfig, dbm_to_watts, power_from_snr,
                      read_virtual_channel, sample_virtual_channel,
                      virtual_channel_to_dict, write_virtual_channel)
from .errors import ParseError, PixelMimoError, UsageError
from .experiments import (ExperimentConfig, TIMING_SOLVERS, run_s_sweep,
                          run_snr_sweep, run_timing_sweep, write_summary_csv,
                          write_trials_csv)
from .network import (antenna_model_to_dict, read_antenna_model,
                      synthesize_antenna_model, write_antenna_model)
from .solvers import BoundConfig, Problem, parse_method, solve


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _names(text):
    return [x.strip() for x in text.split(',') if x.strip()]


def _add_bnb_flags(p):
    p.add_argument('--bnb-mode', choices=['safe', 'heuristic'])
    p.add_argument('--c1', type=float)
    p.add_argument('--c2', type=float)
    p.add_argument('--leaf-size', type=int)
    p.add_argument('--node-budget', type=int)
    p.add_argument('--no-warm-start', action='store_true')


def _bnb_overrides(args):
    d = {}
    for flag, key in (('bnb_mode', 'mode'), ('c1', 'c1'), ('c2', 'c2'),
                      ('leaf_size', 'leaf_size'), ('node_budget', 'node_budget')):
        if getattr(args, flag) is not None:
            d[key] = getattr(args, flag)
    if args.no_warm_start:
        d['warm_start'] = False
    return d


def build_parser():
    parser = _Parser(prog='pixelmimo', description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    p = sub.add_parser('gen-antenna', help='synthesize an antenna model (JSON)')
    p.add_argument('--S', type=int, default=3)
    p.add_argument('--K', type=int, default=8)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--z-off', type=float, default=1e6)
    p.add_argument('--out', help='output path (default: stdout)')

    p = sub.add_parser('gen-channel', help='sample a virtual channel (JSON)')
    p.add_argument('--K', type=int, default=8)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--beta0-db', type=float, default=-30.0)
    p.add_argument('--d', type=float, default=600.0)
    p.add_argument('--d0', type=float, default=1.0)
    p.add_argument('--alpha', type=float, default=3.5)
    p.add_argument('--out')

    p = sub.add_parser('solve', help='optimize one instance, print the solution as JSON')
    p.add_argument('--antenna', help='antenna model shared by both sides')
    p.add_argument('--antenna-t')
    p.add_argument('--antenna-r')
    p.add_argument('--channel', required=True)
    p.add_argument('--n-t', type=int, default=2)
    p.add_argument('--n-r', type=int, default=2)
    power = p.add_mutually_exclusive_group()
    power.add_argument('--snr-db', type=float, default=0.0)
    power.add_argument('--power', type=float, help='transmit power in watts')
    p.add_argument('--sigma2-dbm', type=float, default=-90.0)
    p.add_argument('--method', default='exhaustive')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--restarts', type=int, default=8)
    p.add_argument('--max-iters', type=int, default=50)
    p.add_argument('--block-size', type=int, default=3)
    p.add_argument('--flips', type=int, default=10)
    p.add_argument('--max-outer', type=int, default=20)
    p.add_argument('--cap', type=int, default=24)
    _add_bnb_flags(p)
    p.add_argument('--log', help='write iterate records as JSON lines')

    for name, help_ in (('sweep-snr', 'rate versus receive SNR'),
                        ('sweep-s', 'rate versus pixel count'),
                        ('sweep-time', 'time and evaluation counts versus pixel count')):
        p = sub.add_parser(name, help=help_)
        p.add_argument('--config', help='JSON file with ExperimentConfig fields')
        p.add_argument('--out', help='per-trial CSV (default: stdout)')
        p.add_argument('--summary', help='aggregate CSV')
        p.add_argument('--trials', type=int)
        p.add_argument('--seed', type=int)
        p.add_argument('--n-t', type=int)
        p.add_argument('--n-r', type=int)
        p.add_argument('--S', type=int)
        p.add_argument('--K', type=int)
        p.add_argument('--z-off', type=float)
        p.add_argument('--sigma2-dbm', type=float)
        p.add_argument('--snr-db', type=float)
        p.add_argument('--snr-grid', type=_floats)
        p.add_argument('--s-grid', type=_ints)
        p.add_argument('--solvers', type=_names)
        p.add_argument('--restarts', type=int)
        p.add_argument('--block-size', type=int)
        p.add_argument('--flips', type=int)
        p.add_argument('--cap', type=int)
        p.add_argument('--timeout', type=float, dest='timeout_s')
        timing = p.add_mutually_exclusive_group()
        timing.add_argument('--timing', dest='record_time', action='store_true', default=None)
        timing.add_argument('--no-timing', dest='record_time', action='store_false')
        _add_bnb_flags(p)
    return parser


def _cmd_gen_antenna(args):
    model = synthesize_antenna_model(args.S, args.K, args.seed, Z_off=args.z_off)
    if args.out:
        write_antenna_model(model, args.out)
    else:
        print(json.dumps(antenna_model_to_dict(model)))


def _cmd_gen_channel(args):
    cfg = ChannelConfig(args.beta0_db, args.d, args.d0, args.alpha)
    vc = sample_virtual_channel(args.K, cfg, args.seed)
    if args.out:
        write_virtual_channel(vc, args.out)
    else:
        print(json.dumps(virtual_channel_to_dict(vc)))


def _cmd_solve(args):
    parse_method(args.method)
    if args.antenna:
        model_t = model_r = read_antenna_model(args.antenna)
    elif args.antenna_t and args.antenna_r:
        model_t = read_antenna_model(args.antenna_t)
        model_r = read_antenna_model(args.antenna_r)
    else:
        raise UsageError("solve: give --antenna or both --antenna-t and --antenna-r")
    vc = read_virtual_channel(args.channel)
    sigma2 = dbm_to_watts(args.sigma2_dbm)
    power = args.power if args.power is not None else power_from_snr(args.snr_db, sigma2, vc.beta)
    problem = Problem(model_t, model_r, vc.H_V, power, sigma2, args.n_t, args.n_r)
    bound = BoundConfig(**_bnb_overrides(args))
    sol = solve(problem, args.method, seed=args.seed, restarts=args.restarts,
                max_iters=args.max_iters, block_size=args.block_size, flips=args.flips,
                bound=bound, max_outer=args.max_outer, cap=args.cap)
    if args.log:
        with open(args.log, 'w') as fh:
            for rec in sol.history:
                fh.write(json.dumps(rec) + '\n')
    print(json.dumps(sol.to_dict()))


def _sweep_config(args, sweep):
    cfg = ExperimentConfig.from_json(args.config) if args.config else None
    d = cfg.to_dict() if cfg else {}
    if cfg is None and sweep == 'sweep-time':
        d['solvers'] = list(TIMING_SOLVERS)
    names = {f.name for f in fields(ExperimentConfig)}
    flags = {}
    for key, value in vars(args).items():
        if key in names and value is not None:
            d[key] = value
            flags[key] = key
    bnb_flags = _bnb_overrides(args)
    if bnb_flags:
        flags['bnb'] = 'bnb'
    d['bnb'] = {**d.get('bnb', {'mode': 'heuristic'}), **bnb_flags}
    try:
        return ExperimentConfig.from_dict(d)
    except ParseError as exc:
        # a bad flag value is a usage error; a bad config file is not
        if exc.field in flags:
            flag = 'timeout' if exc.field == 'timeout_s' else exc.field.replace('_', '-')
            raise UsageError(f"--{flag}: {exc.detail}") from None
        raise


def _cmd_sweep(args):
    cfg = _sweep_config(args, args.command)
    run = {'sweep-snr': run_snr_sweep, 'sweep-s': run_s_sweep,
           'sweep-time': run_timing_sweep}[args.command]
    results = run(cfg)
    if args.out:
        with open(args.out, 'w', newline='') as fh:
            write_trials_csv(results, fh)
        with open(args.out + '.meta.json', 'w') as fh:
            json.dump({'command': args.command, 'master_seed': cfg.seed,
                       'config': cfg.to_dict()}, fh, indent=1, sort_keys=True)
            fh.write('\n')
    else:
        write_trials_csv(results, sys.stdout)
    if args.summary:
        with open(args.summary, 'w', newline='') as fh:
            write_summary_csv(results, fh)


COMMANDS = {'gen-antenna': _cmd_gen_antenna, 'gen-channel': _cmd_gen_channel,
            'solve': _cmd_solve, 'sweep-snr': _cmd_sweep, 'sweep-s': _cmd_sweep,
            'sweep-time': _cmd_sweep}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PixelMimoError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
