"""
Tests for the CLI module.
"""
import contextlib
import io
import json
import shutil
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

from tworing.cli import DEFAULTS, UsageError, create_parser, read_config_file, resolve_options, run


class TestCLI(unittest.TestCase):
    """Test cases for the command-line interface run as a script."""

    def setUp(self):
        """Set up test fixtures."""
        self.cli_path = Path(__file__).parent.parent / 'cli.py'
        self.temp_dir = tempfile.mkdtemp()
        self.temp_path = Path(self.temp_dir)

    def tearDown(self):
        """Clean up test fixtures."""
        if self.temp_path.exists():
            shutil.rmtree(self.temp_path)

    def invoke(self, *args):
        return subprocess.run([sys.executable, str(self.cli_path), *args], capture_output=True, text=True)

    def test_help_flag(self):
        """Test that --help prints usage with examples and exits 0."""
        result = self.invoke('--help')
        self.assertEqual(result.returncode, 0)
        self.assertIn('usage:', result.stdout.lower())
        self.assertIn('tworing', result.stdout)
        self.assertIn('Examples:', result.stdout)

    def test_missing_subcommand(self):
        """Test that a subcommand is required."""
        result = self.invoke()
        self.assertEqual(result.returncode, 2)
        self.assertIn('required', result.stderr.lower())

    def test_eta_monomial(self):
        """Test the undeformed n=1 pairing [[0, 1], [1, 0]]."""
        result = self.invoke('eta', '--n', '1', '--c', '0', '--basis', 'monomial')
        self.assertEqual(result.returncode, 0, result.stderr)
        doc = json.loads(result.stdout)
        self.assertEqual(doc['kind'], 'eta')
        self.assertIn('schema', doc)
        real = [[entry['re'] for entry in row] for row in doc['matrix']]
        self.assertEqual(real, [[0.0, 1.0], [1.0, 0.0]])

    def test_eta_exact_strings(self):
        """Test that exact output carries rational strings."""
        result = self.invoke('eta', '--n', '1', '--c', '1/4', '--exact')
        self.assertEqual(result.returncode, 0, result.stderr)
        doc = json.loads(result.stdout)
        self.assertEqual(doc['exact'][1][1], '-1/2')

    def test_chebyshev_tilde(self):
        """Test U~_1 = -2t."""
        result = self.invoke('chebyshev', '--k', '1', '--tilde')
        self.assertEqual(result.returncode, 0, result.stderr)
        doc = json.loads(result.stdout)
        self.assertEqual(doc['family'], 'U~')
        self.assertEqual(doc['coefficients'], [0, -2])

    def test_invalid_n(self):
        """Test that n < 1 is a usage error."""
        result = self.invoke('eta', '--n', '0')
        self.assertEqual(result.returncode, 2)
        self.assertIn('Error:', result.stderr)

    def test_invalid_t(self):
        """Test that t = 0 is a usage error."""
        result = self.invoke('ring', '--t', '0')
        self.assertEqual(result.returncode, 2)

    def test_exact_interleaved_rejected(self):
        """Test that the interleaved basis has no exact backend."""
        result = self.invoke('cmatrix', '--basis', 'interleaved', '--exact')
        self.assertEqual(result.returncode, 2)
        self.assertIn('float', result.stderr)

    def test_csv_output_file(self):
        """Test writing a pairing matrix as CSV."""
        output = self.temp_path / 'eta.csv'
        result = self.invoke('eta', '--n', '2', '--format', 'csv', '--output', str(output))
        self.assertEqual(result.returncode, 0, result.stderr)
        lines = output.read_text().splitlines()
        self.assertEqual(lines[0], 'row,col,re,im')
        self.assertEqual(len(lines), 17)

    def test_config_file(self):
        """Test that flags override the config file, which overrides defaults."""
        config = self.temp_path / 'run.cfg'
        config.write_text('# model\nn = 3\nc = 0\n')
        result = self.invoke('eta', '--config', str(config), '--n', '1')
        self.assertEqual(result.returncode, 0, result.stderr)
        doc = json.loads(result.stdout)
        self.assertEqual(doc['params']['n'], 1)
        self.assertEqual(doc['params']['c'], '0')

    def test_malformed_config(self):
        """Test that unknown keys and missing files are usage errors."""
        config = self.temp_path / 'bad.cfg'
        config.write_text('colour = blue\n')
        self.assertEqual(self.invoke('eta', '--config', str(config)).returncode, 2)
        self.assertEqual(self.invoke('eta', '--config', str(self.temp_path / 'missing.cfg')).returncode, 2)

    def test_verify(self):
        """Test that the algebraic suites pass at the defaults."""
        result = self.invoke('verify', 'residue', 'eta', 'lemma', '--dmax', '4')
        self.assertEqual(result.returncode, 0, result.stdout)
        doc = json.loads(result.stdout)
        self.assertTrue(doc['passed'])
        self.assertEqual([s['suite'] for s in doc['suites']], ['residue', 'eta', 'lemma'])

    def test_solve_csv(self):
        """Test a manufactured solve written as CSV."""
        output = self.temp_path / 'grid.csv'
        result = self.invoke(
            'solve', '--n', '2', '--grid', '0.5:1.5:33', '--format', 'csv', '--output', str(output)
        )
        self.assertEqual(result.returncode, 0, result.stderr)
        header = output.read_text().splitlines()[0].split(',')
        self.assertEqual(header[:2], ['r', 'j'])
        self.assertIn('residual', header)

    def test_solve_not_converged(self):
        """Test that a run without sweeps exits 1 with a failure report."""
        result = self.invoke('solve', '--grid', '0.5:1.5:17', '--max-iter', '0')
        self.assertEqual(result.returncode, 1)
        self.assertIn('"failure"', result.stderr)
        self.assertFalse(json.loads(result.stdout)['report']['converged'])

    def test_solve_boundary_mismatch(self):
        """Test that boundary data must match --n."""
        eye = [[1, 0], [0, 1]]
        bc = self.temp_path / 'bc.json'
        bc.write_text(json.dumps({'left': [eye], 'right': [eye]}))
        result = self.invoke('solve', '--n', '2', '--bc', str(bc), '--grid', '0.5:1.5:9')
        self.assertEqual(result.returncode, 2)


class TestInProcess(unittest.TestCase):
    """Test cases for run() and option resolution."""

    def setUp(self):
        """Set up a temporary directory."""
        self.temp_path = Path(tempfile.mkdtemp())

    def tearDown(self):
        """Clean up the temporary directory."""
        shutil.rmtree(self.temp_path)

    def capture(self, argv):
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = run(argv)
        return code, out.getvalue(), err.getvalue()

    def test_cmatrix_n1(self):
        """Test C for n=1, c=3/4 with closure and eigenvalues."""
        code, out, _ = self.capture(['cmatrix', '--n', '1', '--c', '3/4'])
        self.assertEqual(code, 0)
        doc = json.loads(out)
        self.assertAlmostEqual(doc['matrix'][0][0]['re'], -0.375)
        self.assertAlmostEqual(doc['matrix'][1][1]['re'], -2.71875)
        self.assertAlmostEqual(doc['closure']['A_n']['re'], -0.375)
        self.assertAlmostEqual(doc['eigen']['mu_n']['re'], -3.5)

    def test_ring_pretty(self):
        """Test the human-readable ring output."""
        code, out, _ = self.capture(['ring', '--n', '1', '--c', '0', '--format', 'pretty'])
        self.assertEqual(code, 0)
        self.assertTrue(out.startswith('ring basis=monomial'))

    def test_chebyshev_pretty(self):
        """Test the pretty polynomial rendering."""
        code, out, _ = self.capture(['chebyshev', '--k', '2', '--format', 'pretty'])
        self.assertEqual(code, 0)
        self.assertIn('4*t**2 - 1', out)

    def test_negative_k(self):
        """Test that a negative degree is a usage error."""
        code, _, err = self.capture(['chebyshev', '--k', '-1'])
        self.assertEqual(code, 2)
        self.assertIn('--k', err)

    def test_negative_c(self):
        """Test that a negative rational coupling may follow --c as its own token."""
        code, out, err = self.capture(['verify', 'residue', '--n', '3', '--c', '-2/3'])
        self.assertEqual(code, 0, err)
        doc = json.loads(out)
        self.assertEqual(doc['params']['c'], '-2/3')
        self.assertTrue(doc['passed'])

    def test_negative_t(self):
        """Test that a negative complex t is accepted after --t."""
        code, out, err = self.capture(['eta', '--n', '1', '--c', '0', '--t', '-0.5+1j'])
        self.assertEqual(code, 0, err)
        self.assertEqual(json.loads(out)['params']['t'], {'re': -0.5, 'im': 1.0})

    def test_config_sets_basis(self):
        """Test that basis and branch may come from the config file."""
        config = self.temp_path / 'run.cfg'
        config.write_text('basis = shifted\nbranch = 1\n')
        self.assertEqual(read_config_file(str(config)), {'basis': 'shifted', 'branch': 1})
        code, out, err = self.capture(['eta', '--n', '2', '--config', str(config)])
        self.assertEqual(code, 0, err)
        self.assertEqual(json.loads(out)['basis'], 'shifted')

    def test_config_basis_checked_per_command(self):
        """Test that a config basis the subcommand does not offer is a usage error."""
        config = self.temp_path / 'run.cfg'
        config.write_text('basis = interleaved\n')
        code, _, err = self.capture(['ring', '--config', str(config)])
        self.assertEqual(code, 2)
        self.assertIn('--basis', err)

    def test_config_invalid_coupling(self):
        """Test that an unknown coupling from the config file is a usage error."""
        config = self.temp_path / 'run.cfg'
        config.write_text('coupling = diagonal\n')
        code, _, err = self.capture(['solve', '--config', str(config)])
        self.assertEqual(code, 2)
        self.assertIn('--coupling', err)

    def test_resolve_options_defaults(self):
        """Test that unset flags fall back to builtin defaults."""
        args = create_parser().parse_args(['eta'])
        options = resolve_options(args)
        self.assertEqual(options, DEFAULTS)

    def test_read_config_file(self):
        """Test comments, dashes and value conversion."""
        config = self.temp_path / 'run.cfg'
        config.write_text('max-iter = 7  # sweeps\n\ntol = 1e-8\n')
        self.assertEqual(read_config_file(str(config)), {'max_iter': 7, 'tol': 1e-8})

    def test_config_bad_value(self):
        """Test that a value of the wrong type is reported with its line."""
        config = self.temp_path / 'run.cfg'
        config.write_text('n = two\n')
        with self.assertRaises(UsageError) as ctx:
            read_config_file(str(config))
        self.assertIn(':1:', str(ctx.exception))


if __name__ == '__main__':
    unittest.main()
