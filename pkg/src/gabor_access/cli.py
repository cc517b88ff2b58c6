"""Command line entry point: ``python -m gabor_access <command> ...``."""

import argparse
import logging
import sys

from .decoder import load_tables, save_tables
from .gabor_frames import FrameConfig, build_codebooks, verify_coherence
from .harness import (ConfigError, ExperimentConfig, calibrate_grid,
                      emit_plot_data, genie_baseline, load_config,
                      read_results_csv, run_experiment, write_results_csv)
from .subspace import verify_lemma1, write_lemma1_csv

log = logging.getLogger('gabor_access')


def _add_grid_flags(p):
    p.add_argument('--config', help='flat key = value config file')
    p.add_argument('--m', type=int)
    p.add_argument('--n-users', type=int)
    p.add_argument('--p', type=float)
    p.add_argument('--snr-db', help='comma separated list, dB')
    p.add_argument('--frames', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--out')


def _add_run_flags(p):
    _add_grid_flags(p)
    p.add_argument('--pc', help="'rule' and/or fixed probabilities, comma separated")
    p.add_argument('--mode', choices=('known_n', 'plain', 'map'))
    p.add_argument('--nmax', type=int)
    p.add_argument('--tables', help='threshold table CSV from `calibrate`')
    p.add_argument('--workers', type=int, default=1)


def _experiment_config(args):
    mapping = load_config(args.config) if args.config else {}
    flags = {'M': args.m, 'N': args.n_users, 'p': args.p, 'snr_db': args.snr_db,
             'seed': args.seed, 'out': args.out}
    for name in ('pc', 'mode', 'nmax'):
        if hasattr(args, name):
            flags[name] = getattr(args, name)
    if args.command == 'calibrate':
        flags['calib_samples'] = args.frames
    else:
        flags['frames'] = args.frames
    mapping.update({k: v for k, v in flags.items() if v is not None})
    return ExperimentConfig.from_mapping(mapping)


def cmd_calibrate(args):
    cfg = _experiment_config(args)
    tables, _ = calibrate_grid(cfg)
    for t in tables.values():
        print(f"M={t.M} N={t.N} p={t.p:g} {t.rho_db:g} dB: t_z={t.t_z:.6g} "
              f"P_fa={t.p_false_alarm:.4g} P_miss={t.p_miss:.4g}")
    if cfg.out:
        save_tables(tables, cfg.out)
    return 0


def cmd_verify(args):
    ok = True
    for M in args.m:
        cfg = FrameConfig(M)
        rep = verify_coherence(build_codebooks(cfg))
        print(f"coherence M={M}: max={rep.max_coherence:.12f} "
              f"values={list(rep.observed_values)} violations={len(rep.violations)}")
        ok &= rep.ok
        n_max = M // 2 if args.nmax is None else args.nmax
        dist = verify_lemma1(cfg, n_max, mode=args.pair_mode, n_pairs=args.pairs,
                             seed=args.seed, max_codewords=args.max_codewords)
        for n in sorted(dist.pairs_checked):
            print(f"distinct M={M} n={n}: {dist.modes[n]} pairs={dist.pairs_checked[n]} "
                  f"min_distance={dist.min_distance[n]:.6g} "
                  f"violations={len(dist.violations[n])}")
        for n, count in sorted(dist.skipped.items()):
            print(f"distinct M={M} n={n}: skipped ({count} codewords > --max-codewords)")
        ok &= dist.ok
        if args.out:
            write_lemma1_csv(dist, args.out if len(args.m) == 1 else f'{args.out}.M{M}.csv')
    return 0 if ok else 1


def _run(args, genie):
    cfg = _experiment_config(args)
    tables = load_tables(args.tables) if args.tables else None
    res = (genie_baseline if genie else run_experiment)(cfg, tables, args.workers)
    for r in res.results:
        print(f"{r.mode} {r.snr_db:g} dB pc={r.pc}: FER={r.fer:.4g} "
              f"[{r.ci_low:.4g}, {r.ci_high:.4g}] frames={r.frames}")
    if cfg.out:
        write_results_csv(res, cfg.out)
    return 0


def cmd_plotdata(args):
    res = read_results_csv(args.input)
    csv_path, dat_path = emit_plot_data(res, args.out)
    print(csv_path)
    print(dat_path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog='gabor-access')
    parser.add_argument('-v', '--verbose', action='store_true')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('calibrate', help='build collision threshold tables')
    _add_grid_flags(p)

    p = sub.add_parser('verify', help='coherence and subspace distinctness checks')
    p.add_argument('--m', type=int, nargs='+', default=[5, 7, 11])
    p.add_argument('--nmax', type=int)
    p.add_argument('--pair-mode', choices=('exhaustive', 'sampled', 'auto'), default='auto')
    p.add_argument('--max-codewords', type=int, default=200_000,
                   help='skip active-set sizes with more effective codewords')
    p.add_argument('--pairs', type=int, default=10**6)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out')

    p = sub.add_parser('run', help='blind-receiver FER sweep')
    _add_run_flags(p)
    p = sub.add_parser('genie', help='known-size benchmark FER sweep')
    _add_run_flags(p)

    p = sub.add_parser('plotdata', help='CSV and gnuplot data from a results CSV')
    p.add_argument('input')
    p.add_argument('--out', required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    handlers = {'calibrate': cmd_calibrate, 'verify': cmd_verify,
                'run': lambda a: _run(a, False), 'genie': lambda a: _run(a, True),
                'plotdata': cmd_plotdata}
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
