"""starfactor command line.

Exit codes: 0 when every assertion holds, 1 when a check fails or a run
errors, 2 for usage errors (bad flags, d < 4, n not divisible by 4).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from starfactor import experiment, laplace, theory
from starfactor.config import Settings, setup_logging
from starfactor.cycle_census import census, census_trace_check
from starfactor.errors import ConfigurationError, PairingError, StarFactorError
from starfactor.factor_count import ORACLE_MAX_VERTICES, count_3star_factors, has_3star_factor, oracle_count
from starfactor.pairing import MultiGraph, Pairing, PairingSpace, is_simple, project, sample_uniform
from starfactor.reporting import Check, checks_frame, failed, run_info, write_report

logger = logging.getLogger('starfactor.cli')

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--format', choices=['json', 'csv'], default='json', help='report format')
    common.add_argument('--out', default=None, help='report path; standard output when omitted')
    common.add_argument('--seed', type=int, default=0, help='master seed')
    common.add_argument('--threads', type=int, default=None, help='worker processes (STARFACTOR_THREADS)')
    common.add_argument('--cap', type=int, default=None, help='largest d*n for exhaustive enumeration')
    common.add_argument('--factor-cap', type=int, default=None, help='largest n for which Y* is counted')
    common.add_argument('--log-level', default=None, help='logging level (STARFACTOR_LOG_LEVEL)')
    common.add_argument('--no-progress', action='store_true', help='disable progress bars')
    return common


def _graph_source(parser):
    parser.add_argument('--graph', type=Path, default=None, help='multigraph file ("n d" header, "u v mult" lines)')
    parser.add_argument('--pairing', type=Path, default=None, help='pairing file ("a b" lines); needs --n and --d')
    parser.add_argument('--n', type=int, default=None)
    parser.add_argument('--d', type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='starfactor',
                                     description='3-star factors in random regular graphs: theory, Laplace checks and experiments')
    subparsers = parser.add_subparsers(dest='command', required=True)
    common = _common_parser()

    theory_parser = subparsers.add_parser('theory', parents=[common], help='moment constants and identities')
    theory_parser.add_argument('--d', type=int, required=True)
    theory_parser.add_argument('--kmax', type=int, default=10)
    theory_parser.add_argument('--tol', type=float, default=1e-7)
    theory_parser.add_argument('--w-draws', type=int, default=0, help='also sample the limit variable W')
    theory_parser.add_argument('--w-kmin', type=int, default=1)
    theory_parser.add_argument('--w-kmax', type=int, default=30)
    theory_parser.set_defaults(handler=cmd_theory)

    laplace_parser = subparsers.add_parser('laplace-verify', parents=[common], help='Laplace-method verification')
    laplace_parser.add_argument('--d', type=int, required=True)
    laplace_parser.add_argument('--starts', type=int, default=laplace.DEFAULT_STARTS)
    laplace_parser.set_defaults(handler=cmd_laplace_verify)

    sample_parser = subparsers.add_parser('sample', parents=[common], help='draw one uniform pairing')
    sample_parser.add_argument('--n', type=int, required=True)
    sample_parser.add_argument('--d', type=int, required=True)
    sample_parser.add_argument('--text', action='store_true', help='write the pairing text format')
    sample_parser.add_argument('--graph', action='store_true', help='with --text, write the projected multigraph')
    sample_parser.set_defaults(handler=cmd_sample)

    count_parser = subparsers.add_parser('count', parents=[common], help='count 3-star factors')
    _graph_source(count_parser)
    count_parser.add_argument('--oracle', action='store_true', help='cross-check with the partition oracle')
    count_parser.set_defaults(handler=cmd_count)

    census_parser = subparsers.add_parser('census', parents=[common], help='short-cycle census')
    _graph_source(census_parser)
    census_parser.add_argument('--kmax', type=int, default=6)
    census_parser.set_defaults(handler=cmd_census)

    for name, mode in (('experiment', None), ('exhaustive', 'exhaustive')):
        sub = subparsers.add_parser(name, parents=[common], help=f"{name} run against theory")
        sub.add_argument('--n', type=int, required=True)
        sub.add_argument('--d', type=int, required=True)
        sub.add_argument('--kmax', type=int, default=4)
        sub.add_argument('--bootstrap', type=int, default=1000)
        sub.add_argument('--z-threshold', type=float, default=3.0)
        if mode is None:
            sub.add_argument('--samples', type=int, default=10_000)
            sub.add_argument('--mode', choices=experiment.MODES, default='monte-carlo')
        else:
            sub.set_defaults(mode=mode, samples=0)
        sub.set_defaults(handler=cmd_experiment)
    return parser


def invocation(args, settings) -> dict:
    """Resolved flags and settings, embedded in every report"""
    resolved = {key: value for key, value in sorted(vars(args).items()) if key != 'handler'}
    resolved.update(settings.as_dict())
    return {key: str(value) if isinstance(value, Path) else value for key, value in resolved.items()}


def _emit(args, settings, payload, frame):
    write_report({'invocation': invocation(args, settings), **payload}, frame, out=args.out, fmt=args.format)


def _finish(command, checks) -> int:
    failures = failed(checks)
    for check in failures:
        logger.error(f"{command}: check {check.name} failed (value {check.value}, reference {check.reference}, "
                     f"residual {check.residual:.3g}, tolerance {check.tolerance:.3g})")
    if failures:
        return EXIT_FAILED
    logger.info(f"{command}: all {len(checks)} checks passed")
    return EXIT_OK


def _w_summary(args):
    draws = theory.sample_W_batch(args.d, args.w_kmin, args.w_kmax, args.w_draws, args.seed)
    squares = draws ** 2
    expected_square = theory.w_second_moment(args.d, args.w_kmin, args.w_kmax)
    summary = {
        'draws': args.w_draws,
        'kmin': args.w_kmin,
        'kmax': args.w_kmax,
        'mean': float(draws.mean()),
        'mean_stderr': float(draws.std(ddof=1) / np.sqrt(len(draws))),
        'mean_square': float(squares.mean()),
        'mean_square_stderr': float(squares.std(ddof=1) / np.sqrt(len(squares))),
        'expected_square': expected_square,
        'truncation_bound': theory.w_truncation_bound(args.d, args.w_kmax),
    }
    checks = [
        Check.below('W_mean_z', abs(summary['mean'] - 1) / summary['mean_stderr'], 3.0),
        Check.below('W_square_z', abs(summary['mean_square'] - expected_square) / summary['mean_square_stderr'], 3.0),
    ]
    return summary, checks


def cmd_theory(args, settings) -> int:
    constants = theory.moment_constants(args.d, kmax=args.kmax, tol=args.tol)
    checks = list(constants.checks)
    simple = theory.simple_model_constants(args.d)
    payload = {
        'command': 'theory',
        'constants': constants.to_dict(),
        'simple_model': {
            'mean_ratio': simple.mean_ratio,
            'second_moment_ratio': simple.second_moment_ratio,
            'prefactor_exponent': simple.prefactor_exponent,
            'removed_terms': simple.removed_terms,
            'simple_probability': theory.simple_probability(args.d),
        },
        'transfer_matrix': theory.transfer_matrix(args.d).to_dict(),
    }
    if args.w_draws:
        payload['W'], w_checks = _w_summary(args)
        checks += w_checks
    payload['checks'] = checks
    _emit(args, settings, payload, constants.to_frame())
    return _finish('theory', checks)


def cmd_laplace_verify(args, settings) -> int:
    verification = laplace.verify_degree(args.d, starts=args.starts, seed=args.seed, threads=settings.threads,
                                         progress=settings.progress)
    if not verification.certified:
        logger.warning(f"uncertified: d={args.d} is exploratory, checks are reported without being asserted")
    payload = {'command': 'laplace-verify', **verification.to_dict(), 'checks': verification.checks}
    _emit(args, settings, payload, checks_frame(verification.checks))
    return _finish('laplace-verify', verification.checks)


def cmd_sample(args, settings) -> int:
    space = PairingSpace(args.n, args.d)
    pairing = sample_uniform(space, args.seed)
    graph = project(space, pairing)
    if args.text:
        text = graph.to_text() if args.graph else pairing.to_text()
        if args.out is None or args.out == '-':
            sys.stdout.write(text)
        else:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(text)
        return EXIT_OK
    payload = {
        'command': 'sample',
        'pairs': [list(pair) for pair in pairing.pairs],
        'graph': {'edges': [list(edge) for edge in graph.edges], 'loops': [list(loop) for loop in graph.loops]},
        'simple': is_simple(graph),
    }
    frame = pd.DataFrame(list(pairing.pairs), columns=['a', 'b'])
    _emit(args, settings, payload, frame)
    return EXIT_OK


def _load_graph(args) -> MultiGraph:
    if args.graph is not None:
        return MultiGraph.from_text(args.graph.read_text())
    if args.n is None or args.d is None:
        raise ConfigurationError('give --graph, or --n and --d (with --pairing or a seed)')
    space = PairingSpace(args.n, args.d)
    if args.pairing is not None:
        pairing = Pairing.from_text(args.pairing.read_text())
        pairing.validate(space)
    else:
        pairing = sample_uniform(space, args.seed)
    return project(space, pairing)


def cmd_count(args, settings) -> int:
    graph = _load_graph(args)
    value = count_3star_factors(graph)
    payload = {'command': 'count', 'n': graph.n, 'count': value, 'has_factor': has_3star_factor(graph)}
    checks = [Check.flag('existence_matches_count', payload['has_factor'] == (value > 0))]
    if args.oracle:
        if graph.n > ORACLE_MAX_VERTICES:
            raise ConfigurationError(f"the oracle handles at most {ORACLE_MAX_VERTICES} vertices")
        payload['oracle'] = oracle_count(graph)
        checks.append(Check.exact('oracle_agreement', value, payload['oracle']))
    payload['checks'] = checks
    _emit(args, settings, payload, pd.DataFrame([{key: payload[key] for key in ('n', 'count', 'has_factor')}]))
    return _finish('count', checks)


def cmd_census(args, settings) -> int:
    graph = _load_graph(args)
    result = census(graph, args.kmax)
    payload = {'command': 'census', 'n': graph.n, 'kmax': args.kmax, 'counts': result.as_dict()}
    checks = []
    if is_simple(graph) and args.kmax >= 4:
        triangles, squares = census_trace_check(graph)
        payload['trace_check'] = {'X3': triangles, 'X4': squares}
        checks += [Check.exact('trace_X3', result[3], triangles), Check.exact('trace_X4', result[4], squares)]
    payload['checks'] = checks
    frame = pd.DataFrame({'k': list(result.as_dict()), 'count': list(result.counts)})
    _emit(args, settings, payload, frame)
    return _finish('census', checks)


def cmd_experiment(args, settings) -> int:
    config = experiment.ExperimentConfig(
        n=args.n, d=args.d, samples=args.samples, kmax=args.kmax, seed=args.seed, mode=args.mode,
        threads=settings.threads, factor_cap=settings.factor_cap, enumeration_cap=settings.enumeration_cap,
        bootstrap=args.bootstrap, z_threshold=args.z_threshold, progress=settings.progress,
    )
    report = experiment.run(config)
    payload = {'command': args.command, **report.to_dict()}
    _emit(args, settings, payload, report.to_frame())
    return _finish(args.command, report.checks)


def _resolve_settings(args) -> Settings:
    settings = Settings.from_env()
    return settings.with_overrides(
        threads=args.threads,
        enumeration_cap=args.cap,
        factor_cap=args.factor_cap,
        log_level=args.log_level.upper() if args.log_level else None,
        progress=False if args.no_progress else None,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        settings = _resolve_settings(args)
    except ConfigurationError as e:
        print(f"starfactor: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(settings)
    logger.info(f"Resolved configuration: {json.dumps(invocation(args, settings), sort_keys=True)}")

    started = time.perf_counter()
    try:
        code = args.handler(args, settings)
    except (ConfigurationError, PairingError) as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    except StarFactorError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILED
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {str(e)}")
        return EXIT_FAILED
    logger.info(f"{args.command} finished in {run_info(started)['wall_clock_seconds']:.2f}s with exit code {code}")
    return code


if __name__ == '__main__':
    sys.exit(main())
