#!/usr/bin/env python3
"""
Main CLI entry point for the tworing tool.
"""
import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

# Support both running as script and as module
try:
    from tworing import chebyshev
except ModuleNotFoundError:
    sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
    from tworing import chebyshev

from tworing import serialization
from tworing.coupling_operator import c_operator, interleaved_basis
from tworing.crt_symmetry import delta_coordinate_matrix
from tworing.errors import BasisMismatchError, InvalidParamsError, TworingError
from tworing.manufactured import DiagonalFamily, HermitianFamily, manufactured_state, perturb_interior
from tworing.model_core import Backend, BasisTag, ModelParams, modulus, roots
from tworing.pairing import SQRT_T_NOTE, eta_matrix, shifted_basis_matrix
from tworing.toda_solver import (
    STRATEGIES,
    BoundaryMode,
    RadialGrid,
    SolverConfig,
    TodaState,
    solve,
    toda_residual,
)
from tworing.verify import DEFAULT_DMAX, DEFAULT_SEED, SUITES, run_suites


logger = logging.getLogger('tworing')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

FORMATS = ('json', 'csv', 'pretty')
FAMILIES = {'diagonal': DiagonalFamily, 'hermitian': HermitianFamily}

# Builtin values of every flag that a --config file may set.
DEFAULTS: Dict[str, Any] = {
    'n': 2,
    'c': '0.5',
    't': '1',
    'format': 'json',
    'seed': DEFAULT_SEED,
    'threads': 1,
    'grid': '0.5:1.5:65',
    'tol': 1e-9,
    'max_iter': 50,
    'damping': 1.0,
    'family': 'hermitian',
    'strategy': 'gauss_seidel',
    'perturb': 0.1,
    'dmax': DEFAULT_DMAX,
    'basis': 'monomial',
    'branch': 0,
    'coupling': 'identity',
}
CONVERTERS = {
    'n': int,
    'c': str,
    't': str,
    'format': str,
    'seed': int,
    'threads': int,
    'grid': str,
    'tol': float,
    'max_iter': int,
    'damping': float,
    'family': str,
    'strategy': str,
    'perturb': float,
    'dmax': int,
    'basis': str,
    'branch': int,
    'coupling': str,
}
# --basis choices per subcommand
BASES = {
    'ring': ('monomial', 'delta', 'shifted'),
    'eta': tuple(tag.value for tag in BasisTag),
    'cmatrix': ('monomial', 'interleaved'),
}
COUPLINGS = ('identity', 'interleaved')
# flags whose values may start with a minus sign
SIGNED_FLAGS = ('--c', '--t')


class UsageError(Exception):
    """Invalid flag values or a malformed config file."""


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by every subcommand."""

    subcommand: str
    params: ModelParams
    output_format: str = 'json'
    seed: int = DEFAULT_SEED
    threads: int = 1
    output: Optional[str] = None

    def __post_init__(self):
        if self.output_format not in FORMATS:
            raise InvalidParamsError(f"--format must be one of {', '.join(FORMATS)}, got '{self.output_format}'")
        if self.threads < 1:
            raise InvalidParamsError(f'--threads must be at least 1, got {self.threads}')


def read_config_file(path: str) -> Dict[str, Any]:
    """
    Read a flat ``key = value`` file whose keys mirror the long flag names.

    Args:
        path: Path to the config file

    Returns:
        Dict mapping option names (underscored) to converted values

    Raises:
        UsageError: If the file is missing, a line is malformed or a key is unknown
    """
    file_path = Path(path)
    if not file_path.exists():
        raise UsageError(f'Config file not found: {path}')
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(file_path.read_text(encoding='utf-8').splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split('=', 1))
        key = key.replace('-', '_')
        if key not in CONVERTERS:
            raise UsageError(f"{path}:{lineno}: unknown key '{key}'")
        try:
            values[key] = CONVERTERS[key](value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: invalid value for '{key}': '{value}'")
    return values


def _add_common_flags(parser: argparse.ArgumentParser):
    model_group = parser.add_argument_group('Model Parameters')
    model_group.add_argument('--n', type=int, metavar='<n>', help='Critical points per ring, n >= 1 (default: 2)')
    model_group.add_argument('--c', metavar='<c>', help='Real deformation parameter, read as a rational (default: 0.5)')
    model_group.add_argument('--t', metavar='<t>', help='Nonzero complex coupling, e.g. 1 or 0.5+1j (default: 1)')

    io_group = parser.add_argument_group('Input/Output')
    io_group.add_argument('--format', choices=FORMATS, metavar='{json,csv,pretty}', help='Output format (default: json)')
    io_group.add_argument('--output', metavar='<file>', help='Write output to a file instead of stdout')
    io_group.add_argument("--config", metavar="<file>", help="Flat 'key = value' file; command-line flags take precedence")

    run_group = parser.add_argument_group('Run Options')
    run_group.add_argument('--seed', type=int, metavar='<int>', help=f'Seed for randomized checks (default: {DEFAULT_SEED})')
    run_group.add_argument('--threads', type=int, metavar='<int>', help='Worker threads for the solver (default: 1)')
    run_group.add_argument('--verbose', action='store_true', help='Log progress to stderr')


def create_parser():
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(
        prog='tworing',
        description='Chiral ring, pairing and coupling operators of the two-ring superpotential, '
        'with a radial solver for the periodic block Toda system',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Pairing matrix in the monomial basis
  tworing eta --n 1 --c 0 --basis monomial

  # Exact pairing in the shifted basis, human readable
  tworing eta --n 3 --c 1/3 --basis shifted --exact --format pretty

  # Coupling operator in the interleaved basis
  tworing cmatrix --n 3 --c 0.5 --basis interleaved

  # Coefficients of the modified Chebyshev polynomial of degree 4
  tworing chebyshev --k 4 --tilde

  # Relax a perturbed manufactured solution and write the grid as CSV
  tworing solve --n 2 --c 0.5 --grid 0.5:1.5:65 --format csv --output grid.csv

  # Run every verification suite
  tworing verify all --n 3 --c 0.5
        """,
    )
    subparsers = parser.add_subparsers(dest='subcommand', metavar='<command>')
    subparsers.required = True

    ring = subparsers.add_parser('ring', help='Modulus, critical points and basis coordinates')
    _add_common_flags(ring)
    ring.add_argument('--basis', choices=BASES['ring'], help='Basis whose monomial coordinates are printed (default: monomial)')
    ring.add_argument('--exact', action='store_true', help='Print the modulus with exact coefficients')

    eta = subparsers.add_parser('eta', help='Pairing matrix in a named basis')
    _add_common_flags(eta)
    eta.add_argument('--basis', choices=BASES['eta'], help='Basis (default: monomial)')
    eta.add_argument('--exact', action='store_true', help='Exact arithmetic (monomial and shifted bases only)')

    cmatrix = subparsers.add_parser('cmatrix', help='Coupling operator C')
    _add_common_flags(cmatrix)
    cmatrix.add_argument('--basis', choices=BASES['cmatrix'], help='Basis (default: monomial)')
    cmatrix.add_argument('--exact', action='store_true', help='Exact arithmetic (monomial basis only)')
    cmatrix.add_argument('--prefactor', action='store_true', help='Multiply C by -2nt/(2n+1)')
    cmatrix.add_argument("--grouped", action="store_true", help="Order the interleaved basis as phi_0..phi_{n-1}, phi'_0..phi'_{n-1}")
    cmatrix.add_argument('--branch', type=int, metavar='<int>', help='Branch of the n-th roots (default: 0)')

    cheb = subparsers.add_parser('chebyshev', help='Chebyshev polynomial coefficients')
    _add_common_flags(cheb)
    cheb.add_argument('--k', type=int, required=True, metavar='<k>', help='Degree')
    cheb.add_argument('--tilde', action='store_true', help='Use the modified family U~_k(t) = i^k U_k(it)')

    solver = subparsers.add_parser('solve', help='Relax the periodic block Toda system on a radial grid')
    _add_common_flags(solver)
    solve_group = solver.add_argument_group('Solver Options')
    solve_group.add_argument('--grid', metavar='<r0:r1:points>', help='Radial grid (default: 0.5:1.5:65)')
    solve_group.add_argument('--tol', type=float, metavar='<float>', help='Residual tolerance (default: 1e-9)')
    solve_group.add_argument('--max-iter', type=int, metavar='<int>', help='Maximum sweeps (default: 50)')
    solve_group.add_argument('--damping', type=float, metavar='<float>', help='Initial Newton damping (default: 1.0)')
    solve_group.add_argument('--strategy', choices=STRATEGIES, help='Sweep strategy (default: gauss_seidel)')
    solve_group.add_argument('--bc', metavar='<file>', help='JSON boundary (and optional initial) data; a manufactured solution is used otherwise')
    solve_group.add_argument('--family', choices=sorted(FAMILIES), help='Manufactured family without --bc (default: hermitian)')
    solve_group.add_argument('--perturb', type=float, metavar='<level>', help='Relative noise on the manufactured interior (default: 0.1)')
    solve_group.add_argument('--coupling', choices=COUPLINGS, help='Block D: identity or the block of the interleaved C (default: identity)')
    solve_group.add_argument('--renormalize-det', action='store_true', help='Rescale blocks to unit determinant after each step')
    solve_group.add_argument('--reality', action='store_true', help='Report the reality residual against the interleaved pairing')

    verify = subparsers.add_parser('verify', help='Run verification suites')
    _add_common_flags(verify)
    verify.add_argument("suites", nargs="+", choices=list(SUITES) + ["all"], metavar="<suite>", help=f"One or more of: {', '.join(SUITES)}, all")
    verify.add_argument('--dmax', type=int, metavar='<int>', help=f'Largest d in the division-lemma suite (default: {DEFAULT_DMAX})')

    return parser


def resolve_options(args) -> Dict[str, Any]:
    """Merge command-line flags, the optional config file and builtin defaults."""
    from_file = read_config_file(args.config) if args.config else {}
    options = {}
    for key, default in DEFAULTS.items():
        value = getattr(args, key, None)
        if value is None:
            value = from_file.get(key, default)
        options[key] = value
    return options


def validate_args(args, options: Dict[str, Any]) -> RunConfig:
    """
    Validate argument values and build the run configuration.

    Raises:
        UsageError: If a value is out of range
    """
    if options['format'] not in FORMATS:
        raise UsageError(f"--format must be one of {', '.join(FORMATS)}, got '{options['format']}'")
    if options['family'] not in FAMILIES:
        raise UsageError(f"--family must be one of {', '.join(sorted(FAMILIES))}, got '{options['family']}'")
    if options['strategy'] not in STRATEGIES:
        raise UsageError(f"--strategy must be one of {', '.join(STRATEGIES)}, got '{options['strategy']}'")
    bases = BASES.get(args.subcommand)
    if bases and options['basis'] not in bases:
        raise UsageError(f"--basis must be one of {', '.join(bases)} for {args.subcommand}, got '{options['basis']}'")
    if options['coupling'] not in COUPLINGS:
        raise UsageError(f"--coupling must be one of {', '.join(COUPLINGS)}, got '{options['coupling']}'")
    if options['dmax'] < 0:
        raise UsageError(f"--dmax must be non-negative, got {options['dmax']}")
    if args.subcommand == 'chebyshev' and args.k < 0:
        raise UsageError(f'--k must be non-negative, got {args.k}')
    try:
        t_value = complex(str(options['t']).replace(' ', ''))
    except ValueError:
        raise UsageError(f"Could not parse --t '{options['t']}' as a complex number")
    try:
        params = ModelParams(n=options['n'], c=options['c'], t=t_value)
        return RunConfig(
            subcommand=args.subcommand,
            params=params,
            output_format=options['format'],
            seed=options['seed'],
            threads=options['threads'],
            output=args.output,
        )
    except InvalidParamsError as e:
        raise UsageError(str(e))


def _params_payload(params: ModelParams) -> dict:
    return {'n': params.n, 'c': str(params.c_exact), 't': params.t_complex}


def _emit_matrix(cfg: RunConfig, kind: str, matrix, extra: dict) -> None:
    if cfg.output_format == 'csv':
        serialization.write_text(serialization.frame_to_text(serialization.matrix_frame(matrix)), cfg.output)
        return
    if cfg.output_format == 'pretty':
        header = ' '.join(f'{k}={v}' for k, v in extra.items() if not isinstance(v, (list, dict, np.ndarray)))
        serialization.write_text(f'{kind} {header}\n{serialization.pretty_matrix(matrix)}', cfg.output)
        return
    arr = np.asarray(matrix)
    payload = {'params': _params_payload(cfg.params), **extra, 'matrix': serialization.matrix_to_json(arr)}
    if arr.dtype == object:
        payload['exact'] = [[str(v) for v in row] for row in arr]
    serialization.write_text(serialization.dumps(serialization.report(kind, payload)), cfg.output)


def command_ring(args, cfg: RunConfig, options) -> int:
    params = cfg.params
    backend = Backend.EXACT if args.exact else Backend.FLOAT
    tag = BasisTag.parse(options['basis'])
    if tag is BasisTag.DELTA:
        coords = delta_coordinate_matrix(params)
    elif tag is BasisTag.SHIFTED:
        coords = shifted_basis_matrix(params, backend)
    else:
        coords = np.eye(params.dim, dtype=complex)
    rd = roots(params)
    extra = {
        'basis': tag.value,
        'modulus': [str(v) for v in modulus(params, backend)] if args.exact else modulus(params, backend),
        'a_roots': list(rd.a_roots),
        'b_roots': list(rd.b_roots),
    }
    _emit_matrix(cfg, 'ring', coords, extra)
    return EXIT_OK


def command_eta(args, cfg: RunConfig, options) -> int:
    tag = BasisTag.parse(options['basis'])
    backend = Backend.EXACT if args.exact else Backend.FLOAT
    pairing = eta_matrix(tag, cfg.params, backend)
    _emit_matrix(cfg, 'eta', pairing.entries, {'basis': tag.value, 'normalisation': SQRT_T_NOTE})
    return EXIT_OK


def command_cmatrix(args, cfg: RunConfig, options) -> int:
    params = cfg.params
    branch = options['branch']
    if options['basis'] == 'interleaved':
        if args.exact:
            raise BasisMismatchError('The interleaved basis is only available in the float backend')
        basis = interleaved_basis(params, branch=branch, grouped=args.grouped)
        matrix = basis.c_matrix
        if args.prefactor:
            matrix = matrix * c_operator(params).prefactor
        extra = {
            'basis': 'interleaved',
            'grouped': args.grouped,
            'branch': branch,
            'prefactor_applied': args.prefactor,
            'lambda_root': basis.lambda_root,
            'mu_root': basis.mu_root,
        }
        _emit_matrix(cfg, 'cmatrix', matrix, extra)
        return EXIT_OK
    backend = Backend.EXACT if args.exact else Backend.FLOAT
    operator = c_operator(params, backend, include_prefactor=args.prefactor, branch=branch)
    extra = {
        'basis': 'monomial',
        'prefactor_applied': args.prefactor,
        'closure': {'A_n': operator.closure.a_n, 'B_n': operator.closure.b_n},
    }
    if operator.eigen is not None:
        extra['eigen'] = {'lambda_n': operator.eigen.lambda_n, 'mu_n': operator.eigen.mu_n}
    _emit_matrix(cfg, 'cmatrix', operator.matrix, extra)
    return EXIT_OK


def command_chebyshev(args, cfg: RunConfig, options) -> int:
    coeffs = chebyshev.u_tilde_poly(args.k) if args.tilde else chebyshev.u_poly(args.k)
    family = 'U~' if args.tilde else 'U'
    if cfg.output_format == 'csv':
        lines = ['power,coefficient'] + [f'{p},{v}' for p, v in enumerate(coeffs)]
        serialization.write_text('\n'.join(lines), cfg.output)
    elif cfg.output_format == 'pretty':
        serialization.write_text(f'{family}_{args.k}(t) = {chebyshev.as_expr(coeffs)}', cfg.output)
    else:
        doc = serialization.report('chebyshev', {'family': family, 'k': args.k, 'coefficients': list(coeffs)})
        serialization.write_text(serialization.dumps(doc), cfg.output)
    return EXIT_OK


def _initial_state(args, cfg: RunConfig, options, grid: RadialGrid, coupling: np.ndarray):
    """Initial state, boundary mode and (for manufactured runs) the exact blocks."""
    if args.bc:
        data = serialization.load_boundary_json(args.bc)
        left, right = data['left'], data['right']
        if left.shape[0] != cfg.params.n:
            raise InvalidParamsError(f'Boundary data hold {left.shape[0]} blocks, --n is {cfg.params.n}')
        if 'initial' in data:
            blocks = data['initial']
        else:
            frac = np.linspace(0.0, 1.0, grid.points)[None, :, None, None]
            blocks = (1 - frac) * left[:, None] + frac * right[:, None]
        state = TodaState(blocks, grid, coupling)
        return state, BoundaryMode.USER_SUPPLIED, (left, right), None
    family = FAMILIES[options['family']](cfg.params.n)
    exact = manufactured_state(family, grid, coupling)
    rng = np.random.default_rng(cfg.seed)
    return perturb_interior(exact, rng, options['perturb']), BoundaryMode.MANUFACTURED, (None, None), exact


def command_solve(args, cfg: RunConfig, options) -> int:
    params = cfg.params
    grid = RadialGrid.parse(options['grid'])
    logger.info('Solving n=%d, c=%s on %d points (%s)', params.n, params.c_exact, grid.points, options['strategy'])
    coupling = np.eye(2, dtype=complex)
    if options['coupling'] == 'interleaved':
        coupling = interleaved_basis(params).block
    initial, bc_mode, (left, right), exact = _initial_state(args, cfg, options, grid, coupling)
    reality_eta = eta_matrix(BasisTag.INTERLEAVED, params).to_float() if args.reality else None
    solver_cfg = SolverConfig(
        tol=options['tol'],
        max_iter=options['max_iter'],
        damping=options['damping'],
        bc_mode=bc_mode,
        boundary_left=left,
        boundary_right=right,
        renormalize_det=args.renormalize_det,
        threads=cfg.threads,
        strategy=options['strategy'],
        reality_eta=reality_eta,
    )
    state, report = solve(initial, solver_cfg)
    residual = toda_residual(state, cfg.threads)
    frame = serialization.solution_frame(state.blocks, grid.r, np.tile(residual, params.n))
    payload = {
        'params': _params_payload(params),
        'grid': {'r_min': grid.r_min, 'r_max': grid.r_max, 'points': grid.points},
        'coupling': options['coupling'],
        'strategy': options['strategy'],
        'report': report.to_dict(),
    }
    if exact is not None:
        payload['max_error'] = float(np.max(np.abs(state.blocks - exact.blocks)))

    if cfg.output_format == 'csv':
        serialization.write_text(serialization.frame_to_text(frame), cfg.output)
    elif cfg.output_format == 'pretty':
        lines = [
            f'converged: {report.converged} after {report.iterations} sweeps',
            f'final residual: {report.final_residual:.3e}',
            f'determinant drift: {report.determinant_drift:.3e}',
            f'hermiticity drift: {report.hermiticity_drift:.3e}',
        ]
        if report.reality_residual is not None:
            lines.append(f'reality residual: {report.reality_residual:.3e}')
        if 'max_error' in payload:
            lines.append(f"max error vs manufactured solution: {payload['max_error']:.3e}")
        serialization.write_text('\n'.join(lines), cfg.output)
    else:
        payload['solution'] = frame.to_dict(orient='records')
        serialization.write_text(serialization.dumps(serialization.report('solve', payload)), cfg.output)

    if not report.converged:
        failure = {
            'module': 'toda_solver',
            'operation': 'solve',
            'anchor': 'residual below tolerance',
            'message': f'residual {report.final_residual:.3e} after {report.iterations} sweeps',
        }
        print(serialization.dumps(serialization.report('failure', failure)), file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def command_verify(args, cfg: RunConfig, options) -> int:
    results = run_suites(args.suites, cfg.params, seed=cfg.seed, threads=cfg.threads, dmax=options['dmax'])
    passed = all(r.passed for r in results)
    if cfg.output_format == 'csv':
        lines = ['suite,checks,failed,passed'] + [f'{r.name},{len(r.checks)},{len(r.failures)},{r.passed}' for r in results]
        serialization.write_text('\n'.join(lines), cfg.output)
    elif cfg.output_format == 'pretty':
        lines = []
        for r in results:
            lines.append(f"{r.name:8s} {'ok' if r.passed else 'FAILED'}  ({len(r.checks)} checks, {r.seconds:.2f}s)")
            for check in r.failures:
                lines.append(f'    {check.module}.{check.operation}: {check.anchor} {check.message}'.rstrip())
        serialization.write_text('\n'.join(lines), cfg.output)
    else:
        payload = {
            'params': _params_payload(cfg.params),
            'seed': cfg.seed,
            'passed': passed,
            'suites': [r.to_dict() for r in results],
        }
        serialization.write_text(serialization.dumps(serialization.report('verify', payload)), cfg.output)
    return EXIT_OK if passed else EXIT_FAILURE


COMMANDS = {
    'ring': command_ring,
    'eta': command_eta,
    'cmatrix': command_cmatrix,
    'chebyshev': command_chebyshev,
    'solve': command_solve,
    'verify': command_verify,
}


def _configure_logging(verbose: bool):
    logging.basicConfig(
        stream=sys.stderr,
        format='%(message)s',
        level=logging.INFO if verbose else logging.WARNING,
        force=True,
    )


def _join_signed_values(argv: List[str]) -> List[str]:
    """
    Rewrite ``--c -2/3`` as ``--c=-2/3``. argparse only accepts a leading
    minus for values that look like plain numbers.
    """
    out: List[str] = []
    index = 0
    while index < len(argv):
        token = argv[index]
        if token in SIGNED_FLAGS and index + 1 < len(argv) and argv[index + 1][:1] == '-' and argv[index + 1][:2] != '--':
            out.append(f'{token}={argv[index + 1]}')
            index += 2
            continue
        out.append(token)
        index += 1
    return out


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse argv, run one subcommand and return the exit code.

    0 on success, 1 when a computation or verification fails, 2 on a usage
    error (bad flags, invalid parameters, malformed config file).
    """
    parser = create_parser()
    try:
        args = parser.parse_args(_join_signed_values(sys.argv[1:] if argv is None else list(argv)))
    except SystemExit as e:
        # argparse exits with 2 on usage errors and 0 on --help
        return int(e.code or 0)
    _configure_logging(args.verbose)

    try:
        options = resolve_options(args)
        cfg = validate_args(args, options)
    except UsageError as e:
        print(f'Error: {e}', file=sys.stderr)
        return EXIT_USAGE

    try:
        return COMMANDS[args.subcommand](args, cfg, options)
    except (InvalidParamsError, BasisMismatchError) as e:
        print(f'Error: {e}', file=sys.stderr)
        return EXIT_USAGE
    except TworingError as e:
        print(f'Error: {e}', file=sys.stderr)
        failure = {'module': args.subcommand, 'operation': type(e).__name__, 'anchor': str(e)}
        print(serialization.dumps(serialization.report('failure', failure)), file=sys.stderr)
        return EXIT_FAILURE
    except OSError as e:
        print(f'Error: {e}', file=sys.stderr)
        return EXIT_FAILURE


def main():
    """Main entry point for the CLI."""
    sys.exit(run())


if __name__ == '__main__':
    main()
