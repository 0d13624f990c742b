"""
Command-Line Application
========================
Subcommands of the `heightlab` command. Each one reads a Config, runs a
computation and writes a JSON report to stdout (or --out).

Exit codes: 0 on success, 1 on usage or configuration errors (and any
other lab error), 2 when the root finder does not converge.
"""

import argparse
import logging
import re
import sys
from typing import Callable, Dict, List, Mapping, Optional, Sequence

from colorama import Fore, Style

from config import settings
from config.lab_config import Config, parse_config
from core.equilab import annulus_histogram, build_Sn, energy_table, energy_trend, pointcloud_export
from core.errors import ConfigError, HeightLabError, RootFindingError
from core.fn_cache import get_fn_cache
from core.heights import HeightCalculator, pcf_table, stern_brocot, weil_sandwich_report
from core.per1 import CriticalSign, Lambda, critical_orbit
from core.potentials import MeasureSpec, PotentialCalculator, gamma_table, set_potential_calculator
from core.qfield import ARCHIMEDEAN, Place, format_rational, parse_rational, places_up_to
from core.reporting import frame_records, write_report

logger = logging.getLogger(__name__)

SUBCOMMANDS = ['gamma', 'fn', 'capacity', 'radii', 'height', 'pcf-scan', 'equidist', 'energy', 'lcheck']

# Flag destinations that are Config fields
CONFIG_FLAGS = ('lam', 'lift', 'escape', 'prime_bound', 'n_max', 'grid', 'tol', 'seed',
                'precision_digits', 'cache_dir')

_NEGATIVE_FRACTION = re.compile(r'^-\d+/\d+$')


class UsageError(ConfigError):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# =============================================================================
# ARGUMENTS
# =============================================================================

def _common_options() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    group = common.add_argument_group('configuration')
    group.add_argument('--config', help='"key = value" configuration file')
    group.add_argument('--lambda', dest='lam', help='multiplier of the marked fixed point, e.g. 2 or -3/2')
    group.add_argument('--lift', choices=settings.SUPPORTED_LIFTS)
    group.add_argument('--escape', choices=settings.SUPPORTED_ESCAPES)
    group.add_argument('--P', dest='prime_bound', type=int, help='prime bound for the places')
    group.add_argument('--n-max', dest='n_max', type=int, help='symbolic depth of F_n')
    group.add_argument('--grid', type=int, help='radii scan resolution')
    group.add_argument('--tol', type=float, help='series tolerance')
    group.add_argument('--seed', type=int)
    group.add_argument('--precision-digits', dest='precision_digits', type=int)
    group.add_argument('--cache-dir', dest='cache_dir')
    common.add_argument('--out', help='write the JSON report here instead of stdout')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog='heightlab', description='Quasi-adelic heights on Per1(lambda)')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    def add(name: str, text: str) -> argparse.ArgumentParser:
        return subparsers.add_parser(name, parents=[common], help=text, description=text)

    sub = add('gamma', 'gamma_v(lambda) at inf and the primes up to P')
    sub.add_argument('--no-witnesses', dest='no_witnesses', action='store_true',
                     help='skip the comparison of G_p(1,0) with G_p(0,1)')

    sub = add('fn', 'build (or load) the reduced iterate F_n')
    sub.add_argument('--sign', default='+')
    sub.add_argument('--n', type=int, required=True)
    sub.add_argument('--resultant', action='store_true', help='include Res(F_n)')

    for name, text in (('capacity', 'capacity sequence at one place'),
                       ('radii', 'inner and outer radii at one place')):
        sub = add(name, text)
        sub.add_argument('--sign', default='+')
        sub.add_argument('--place', default='inf')

    sub = add('height', 'quasi-adelic and Call-Silverman heights of a rational t')
    sub.add_argument('--t', required=True)
    sub.add_argument('--sign', default='+')
    sub.add_argument('--method', choices=['all', 'quasi', 'direct', 'local'], default='all')

    sub = add('pcf-scan', 'classify rational parameters as PCF or not')
    sub.add_argument('--t', nargs='+', action='extend', help='parameters (default: all of height <= bound)')
    sub.add_argument('--bound', type=int, default=3)
    sub.add_argument('--budget', type=int, default=settings.DEFAULT_ORBIT_BUDGET)

    sub = add('equidist', 'roots of P_n and their point cloud')
    sub.add_argument('--sign', default='+')
    sub.add_argument('--n', type=int, required=True)
    sub.add_argument('--csv', help='write re,im,residual rows here')
    sub.add_argument('--bins', help='comma-separated annulus radii for a histogram')
    sub.add_argument('--center', default='0', help='histogram center (complex literal)')

    sub = add('energy', 'discrete energies of S_n against mu_inf')
    sub.add_argument('--sign', default='+')
    sub.add_argument('--levels', default='1,2,3,4,5', help='comma-separated ascending levels')

    sub = add('lcheck', 'L estimate, combined heights and the radii sandwich')
    sub.add_argument('--t', nargs='+', action='extend', help='sample parameters (default: 0)')
    sub.add_argument('--proxy-level', dest='proxy_level', type=int, default=settings.DEFAULT_PROXY_LEVEL)
    sub.add_argument('--delta', type=float, help='also list t with combined height below -delta')
    sub.add_argument('--bound', type=int, default=3, help='naive height bound for the delta scan')
    return parser


def _protect_negative_fractions(argv: Sequence[str]) -> List[str]:
    """
    Spell the sign of values such as -4/3 with the unicode minus.

    argparse only recognizes plain negative decimals as values; the
    rational parser accepts either minus sign.
    """
    return [f"−{token[1:]}" if _NEGATIVE_FRACTION.match(token) else token for token in argv]


def _overrides(options: Mapping) -> Dict:
    return {key: options[key] for key in CONFIG_FLAGS if options.get(key) is not None}


def _error(message: str):
    print(f"{Fore.RED}error: {message}{Style.RESET_ALL}", file=sys.stderr)


# =============================================================================
# SUBCOMMANDS
# =============================================================================

class _Session:
    """Calculators built from one Config."""

    def __init__(self, config: Config):
        self.config = config
        self.lam = Lambda.of(config.lam)
        self.cache = get_fn_cache(config.cache_dir)
        self.potentials = PotentialCalculator(config.lift, config.escape, config.n_max,
                                              self.cache, config.precision_digits)
        set_potential_calculator(self.potentials)
        self.heights = HeightCalculator(self.potentials, config.prime_bound, config.n_max)

    def header(self) -> Dict:
        return {'config': self.config.to_dict()}


def _sign(options: Mapping) -> CriticalSign:
    return CriticalSign.parse(options.get('sign') or '+')


def _place(options: Mapping) -> Place:
    return Place.from_label(str(options.get('place') or 'inf'))


def _rationals(values) -> list:
    return [parse_rational(str(v)) for v in values]


def _int_list(text: str, name: str) -> List[int]:
    try:
        return [int(tok) for tok in str(text).split(',') if tok.strip()]
    except ValueError:
        raise UsageError(f"{name} must be comma-separated integers, got {text!r}") from None


def _cmd_gamma(session: _Session, options: Mapping) -> Dict:
    config = session.config
    table = gamma_table(session.lam, config.prime_bound, config.tol)
    report = session.header()
    report['gamma'] = frame_records(table)
    if not options.get('no_witnesses'):
        witnesses = [session.potentials.nonadelic_witness(session.lam, v.prime, config.n_max, tol=config.tol)
                     for v in places_up_to(config.prime_bound)[1:]]
        report['witnesses'] = [w.to_dict() for w in witnesses]
        report['non_gauss_places'] = sum(1 for w in witnesses if w.differs)
    return report


def _cmd_fn(session: _Session, options: Mapping) -> Dict:
    n = int(options['n'])
    s = _sign(options)
    sequence = session.potentials.sequence(session.lam, s, n)
    entry = sequence.entry(n)
    report = session.header()
    report.update({
        'sign': s.symbol,
        'n': n,
        'degree': entry.degree,
        'degrees': sequence.degrees(),
        'degree_law': sequence.check_degree_law(),
        'A': str(entry.pair.a),
        'B': str(entry.pair.b),
        'removed_gcd': str(entry.removed_gcd),
        'content': entry.content,
        'cache': {'dir': session.cache.cache_dir,
                  'file': session.cache.path_for(session.lam, s, session.potentials.lift, n)},
    })
    if options.get('resultant'):
        # big integers stay exact as decimal strings
        report['resultant'] = str(entry.resultant)
    return report


def _cmd_capacity(session: _Session, options: Mapping) -> Dict:
    s, v = _sign(options), _place(options)
    sequence = session.potentials.capacity_estimate(session.lam, s, v, session.config.n_max)
    report = session.header()
    report.update(sequence.to_dict())
    report['log_capacity'] = sequence.log_value.to_dict()
    return report


def _cmd_radii(session: _Session, options: Mapping) -> Dict:
    s, v = _sign(options), _place(options)
    radii = session.potentials.radii(session.lam, s, v, session.config.n_max, session.config.grid)
    report = session.header()
    report.update(radii.to_dict())
    return report


def _cmd_height(session: _Session, options: Mapping) -> Dict:
    t = parse_rational(str(options['t']))
    s = _sign(options)
    method = options.get('method') or 'all'
    lam = session.lam

    report = session.header()
    report.update({'t': format_rational(t), 'sign': s.symbol,
                   'orbit': critical_orbit(lam, t, s, settings.DEFAULT_ORBIT_BUDGET).to_dict()})
    if method in ('all', 'quasi'):
        quasi = session.heights.quasi_adelic_height(lam, t, s)
        report['quasi_adelic'] = quasi.to_dict()
        report['quasi_adelic_full'] = quasi.full.to_dict()
    if method in ('all', 'direct'):
        report['callsilverman_direct'] = session.heights.callsilverman_direct(lam, t, s).to_dict()
    if method in ('all', 'local'):
        report['callsilverman_local'] = session.heights.callsilverman_local(lam, t, s).to_dict()
    return report


def _cmd_pcf_scan(session: _Session, options: Mapping) -> Dict:
    ts = _rationals(options['t']) if options.get('t') else stern_brocot(int(options.get('bound') or 3))
    results = session.heights.pcf_scan(session.lam, ts, options.get('budget'))
    report = session.header()
    report['results'] = frame_records(pcf_table(results))
    return report


def _cmd_equidist(session: _Session, options: Mapping) -> Dict:
    n = int(options['n'])
    s = _sign(options)
    points = build_Sn(session.lam, s, n, session.potentials, seed=session.config.seed)
    report = session.header()
    report.update(points.to_dict())
    if options.get('csv'):
        report['csv'] = pointcloud_export(points, options['csv'])
    if options.get('bins'):
        try:
            bins = [float(tok) for tok in str(options['bins']).split(',') if tok.strip()]
            center = complex(str(options.get('center') or '0'))
        except ValueError:
            raise UsageError("bins must be comma-separated radii and center a complex literal") from None
        report['annuli'] = frame_records(annulus_histogram(points, center, bins))
    return report


def _cmd_energy(session: _Session, options: Mapping) -> Dict:
    s = _sign(options)
    levels = _int_list(options.get('levels') or '1,2,3,4,5', 'levels')
    trend = energy_trend(session.lam, s, levels, ARCHIMEDEAN, session.potentials, seed=session.config.seed)
    report = session.header()
    report.update(trend.to_dict())
    report['table'] = frame_records(energy_table(trend))
    report['decreasing'] = trend.is_decreasing_in_magnitude()
    return report


def _cmd_lcheck(session: _Session, options: Mapping) -> Dict:
    lam = session.lam
    config = session.config
    spec = MeasureSpec.average(lam)
    ts = _rationals(options['t']) if options.get('t') else _rationals(['0'])

    L_hat = session.potentials.L_estimate(lam, spec, proxy_level=options.get('proxy_level'),
                                          seed=config.seed)
    report = session.header()
    report['measure'] = spec.label()
    report['L'] = L_hat.to_dict()
    report['combined_heights'] = [
        {'t': format_rational(t),
         'height': session.heights.combined_height(lam, t, spec, L_hat=L_hat).to_dict()}
        for t in ts
    ]
    report['sandwich'] = {
        s.symbol: weil_sandwich_report(session.heights.sandwich_check(lam, s, ts, grid_size=config.grid))
        for s in CriticalSign
    }
    if options.get('delta') is not None:
        hits = session.heights.finiteness_scan(lam, float(options['delta']), int(options.get('bound') or 3),
                                               spec, L_hat=L_hat)
        report['below_delta'] = [{'t': format_rational(t), 'height': h.to_dict()} for t, h in hits]
    return report


HANDLERS: Dict[str, Callable[[_Session, Mapping], Dict]] = {
    'gamma': _cmd_gamma,
    'fn': _cmd_fn,
    'capacity': _cmd_capacity,
    'radii': _cmd_radii,
    'height': _cmd_height,
    'pcf-scan': _cmd_pcf_scan,
    'equidist': _cmd_equidist,
    'energy': _cmd_energy,
    'lcheck': _cmd_lcheck,
}


def run_subcommand(name: str, config: Config, options: Optional[Mapping] = None) -> int:
    """
    Run one subcommand and write its report.

    Args:
        name: one of SUBCOMMANDS
        config: validated configuration
        options: subcommand options (parsed flags as a mapping)

    Returns:
        Exit code
    """
    options = dict(options or {})
    if name not in HANDLERS:
        _error(f"unknown subcommand {name!r} (expected one of {', '.join(SUBCOMMANDS)})")
        return 1
    try:
        session = _Session(config)
        logger.info(f"Running {name} with lambda={format_rational(config.lam)}")
        report = HANDLERS[name](session, options)
        write_report(report, options.get('out'))
    except RootFindingError as e:
        logger.error(f"{name}: {e} ({len(e.partial_roots)} roots kept)")
        _error(str(e))
        return 2
    except HeightLabError as e:
        logger.error(f"{name}: {e}")
        _error(str(e))
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse the command line, build the Config and run the subcommand."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_protect_negative_fractions(argv))
        options = vars(args)
        config = parse_config(options.get('config'), _overrides(options))
    except HeightLabError as e:
        _error(str(e))
        return 1
    return run_subcommand(args.command, config, options)
