import csv
import pytest
from io import StringIO

from fedmuon.core.config import WORKERS_ENV
from fedmuon.core.errors import ConfigError, NumericalAbort
from fedmuon.core.output import SUMMARY_FILE, TRACE_FILE, parse_trace
from fedmuon.fedmuon import EXIT_CONFIG, EXIT_FAILURE, EXIT_NUMERICAL, EXIT_OK, main
from fedmuon.fedproto import engine
from fedmuon.modes import verify
from fedmuon.modes.counterexample import cli_counterexample, compare
from fedmuon.modes.grid import LEADERBOARD_FILE, Cell, cli_grid, grid_cells, leaderboard_rows
from fedmuon.modes.run import cli_run

QUADRATIC = '''
[problem]
kind = "quadratic"
d1 = 3
d2 = 3
k = 5
sigma = 0.05

[round]
algorithm = "{algorithm}"
n = 4
S = 2
K = 2
eta = {eta}
eta_vector = 0.01
alpha = 0.5

[experiment]
rounds = 5
seeds = [0, 1]

[grid]
eta = {grid_eta}
eta_vector = [0.01]
alpha = {grid_alpha}
'''


def write_config(tmp_path, name='experiment.toml', algorithm='fedmuon', eta=0.01,
                 grid_eta='[0.01, 0.001]', grid_alpha='[0.5, 1.0]', extra=''):
    path = tmp_path / name
    path.write_text(QUADRATIC.format(algorithm=algorithm, eta=eta, grid_eta=grid_eta,
                                     grid_alpha=grid_alpha) + extra)
    return path


def run_main(argv):
    with pytest.raises(SystemExit) as exc_info:
        main(argv)
    return exc_info.value.code


@pytest.fixture(autouse=True)
def no_workers_env(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)


# run

def test_cli_run_writes_each_seed(tmp_path):
    """Test run writes trace.jsonl and summary.csv per seed and prints one line each"""
    config = write_config(tmp_path)
    output = StringIO()

    assert cli_run(config, out=tmp_path / 'out', output=output) == 0

    for seed in (0, 1):
        directory = tmp_path / 'out' / f'seed-{seed}'
        assert len((directory / TRACE_FILE).read_text().splitlines()) == 10
        with open(directory / SUMMARY_FILE) as f:
            assert len(list(csv.DictReader(f))) == 5

    lines = output.getvalue().splitlines()
    assert lines[0] == 'seed,records,final_loss,mean_dual_grad'
    assert [line.split(',')[:2] for line in lines[1:]] == [['0', '10'], ['1', '10']]


def test_cli_run_is_reproducible(tmp_path):
    """Test rerunning a config gives byte-identical traces"""
    config = write_config(tmp_path)

    cli_run(config, out=tmp_path / 'a', output=StringIO())
    cli_run(config, out=tmp_path / 'b', workers=2, output=StringIO())

    for seed in (0, 1):
        first = (tmp_path / 'a' / f'seed-{seed}' / TRACE_FILE).read_bytes()
        second = (tmp_path / 'b' / f'seed-{seed}' / TRACE_FILE).read_bytes()
        assert first == second


def test_cli_run_seed_override(tmp_path):
    """Test --seed runs only that seed"""
    config = write_config(tmp_path)

    cli_run(config, seed=7, out=tmp_path / 'out', output=StringIO())

    assert [p.name for p in (tmp_path / 'out').iterdir()] == ['seed-7']


def test_cli_run_invalid_config_writes_nothing(tmp_path):
    """Test a config error is raised before the output directory exists"""
    config = write_config(tmp_path, extra='\n[solver]\nbeta = 0.9\n')

    with pytest.raises(ConfigError):
        cli_run(config, out=tmp_path / 'out', output=StringIO())

    assert not (tmp_path / 'out').exists()


def test_cli_run_divergence(tmp_path):
    """Test a diverging seed keeps its partial trace and raises NumericalAbort"""
    config = write_config(tmp_path, algorithm='fedavg', eta=1000.0)
    config.write_text(config.read_text().replace('rounds = 5', 'rounds = 500'))

    with pytest.raises(NumericalAbort):
        cli_run(config, out=tmp_path / 'out', output=StringIO())

    assert (tmp_path / 'out' / 'seed-0' / TRACE_FILE).read_text()
    assert not (tmp_path / 'out' / 'seed-1').exists()


def test_cli_run_streams_records(tmp_path, monkeypatch):
    """Test records already measured are on disk when a run fails mid-way"""
    config = write_config(tmp_path)
    aggregate = engine.server_aggregate
    calls = []

    def failing_aggregate(server, messages, cfg):
        calls.append(server.round)
        if len(calls) == 3:
            raise RuntimeError('worker lost')
        return aggregate(server, messages, cfg)

    monkeypatch.setattr(engine, 'server_aggregate', failing_aggregate)

    with pytest.raises(RuntimeError):
        cli_run(config, out=tmp_path / 'out', output=StringIO())

    lines = (tmp_path / 'out' / 'seed-0' / TRACE_FILE).read_text().splitlines()
    assert [parse_trace(line).round for line in lines] == [0, 0, 1, 1, 2, 2]


# main and exit codes

def test_main_run_exit_ok(tmp_path):
    """Test a successful run exits with 0 and writes the table to --output"""
    config = write_config(tmp_path)
    table = tmp_path / 'table.csv'

    code = run_main(['run', '--config', str(config), '--out', str(tmp_path / 'out'),
                     '--output', str(table)])

    assert code == EXIT_OK
    assert table.read_text().startswith('seed,records')


def test_main_config_error_exit(tmp_path, capsys):
    """Test config errors exit with 2 and name the offending key on stderr"""
    config = write_config(tmp_path)
    config.write_text(config.read_text().replace('alpha = 0.5\n', 'alpha = 0.0\n', 1))

    code = run_main(['run', '--config', str(config), '--out', str(tmp_path / 'out')])

    assert code == EXIT_CONFIG
    assert 'round.alpha' in capsys.readouterr().err
    assert not (tmp_path / 'out').exists()


def test_main_missing_config_exit(tmp_path):
    """Test a missing config file exits with 2"""
    code = run_main(['run', '--config', str(tmp_path / 'missing.toml')])

    assert code == EXIT_CONFIG


def test_main_numerical_abort_exit(tmp_path):
    """Test a diverging run exits with 3"""
    config = write_config(tmp_path, algorithm='fedavg', eta=1000.0)
    config.write_text(config.read_text().replace('rounds = 5', 'rounds = 500'))

    code = run_main(['run', '--config', str(config), '--out', str(tmp_path / 'out')])

    assert code == EXIT_NUMERICAL


# grid

def test_grid_cells_product():
    """Test the grid is the Cartesian product of its lists"""
    cells = grid_cells({'eta': [0.1, 0.01], 'eta_vector': [0.1], 'alpha': [0.5, 1.0]})

    assert len(cells) == 4
    assert cells[0].name == 'eta=0.1_etav=0.1_alpha=0.5'


def test_leaderboard_marks_lowest_finite_loss():
    """Test best goes to the lowest mean final loss and skips diverged cells"""
    a, b, c = Cell(0.1, 0.1, 0.5), Cell(0.01, 0.1, 0.5), Cell(1.0, 0.1, 0.5)
    results = [
        (a, 0, 2.0, 1.0), (a, 1, 4.0, 1.0),
        (b, 0, 1.0, 1.0), (b, 1, 3.5, 1.0),
        (c, 0, float('inf'), 1.0), (c, 1, 0.0, 1.0),
    ]

    rows = leaderboard_rows(results, [a, b, c])

    assert [row['best'] for row in rows] == [0, 1, 0]
    assert rows[0]['final_loss'] == 3.0
    assert rows[0]['seeds'] == '0 1'


def test_cli_grid_writes_leaderboard(tmp_path):
    """Test a 2x2 grid writes one directory per cell and a four-row leaderboard"""
    config = write_config(tmp_path)
    output = StringIO()

    assert cli_grid(config, seed=0, out=tmp_path / 'out', output=output) == 0

    with open(tmp_path / 'out' / LEADERBOARD_FILE) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 4
    assert sum(int(row['best']) for row in rows) == 1
    for row in rows:
        assert (tmp_path / 'out' / row['cell'] / 'seed-0' / TRACE_FILE).exists()
    assert output.getvalue().splitlines()[0].startswith('cell,eta,eta_vector,alpha')


def test_singleton_grid_matches_run(tmp_path):
    """Test a one-cell grid reproduces the run of the same settings"""
    config = write_config(tmp_path, grid_eta='[0.01]', grid_alpha='[0.5]')

    cli_run(config, seed=0, out=tmp_path / 'run', output=StringIO())
    cli_grid(config, seed=0, out=tmp_path / 'grid', output=StringIO())

    cell = tmp_path / 'grid' / 'eta=0.01_etav=0.01_alpha=0.5' / 'seed-0' / TRACE_FILE
    assert cell.read_bytes() == (tmp_path / 'run' / 'seed-0' / TRACE_FILE).read_bytes()


def test_cli_grid_empty_list(tmp_path):
    """Test an empty grid list fails before anything is written"""
    config = write_config(tmp_path, grid_eta='[]')

    with pytest.raises(ConfigError):
        cli_grid(config, out=tmp_path / 'out', output=StringIO())

    assert not (tmp_path / 'out').exists()


def test_cli_grid_invalid_cell(tmp_path):
    """Test a grid value that makes an invalid round fails before anything is written"""
    config = write_config(tmp_path, grid_alpha='[0.5, 2.0]')

    with pytest.raises(ConfigError):
        cli_grid(config, out=tmp_path / 'out', output=StringIO())

    assert not (tmp_path / 'out').exists()


# counterexample

def test_cli_counterexample_table():
    """Test the table lists LocalMuon at the floor a^2/16 = 0.0625"""
    output = StringIO()

    cli_counterexample(1.0, 0.5, 200, every=100, output=output)

    lines = output.getvalue().splitlines()
    assert lines[0] == '# floor a^2/16 = 0.0625'
    assert lines[1] == 'round,localmuon_grad2,fedmuon_grad2,floor'
    rows = [line.split(',') for line in lines[2:-1]]
    assert [row[0] for row in rows] == ['0', '100', '199']
    assert all(float(row[1]) == 0.0625 for row in rows)
    assert lines[-1].startswith('# fedmuon min grad2 = ')


def test_counterexample_floor_for_a_two():
    """Test a = 2 moves the floor to 0.25"""
    local, fed, floor = compare(2.0, 0.5, 20)

    assert floor == 0.25
    assert all(t.grad_frobenius ** 2 == 0.25 for t in local)


@pytest.mark.parametrize('a, alpha', [(0.0, 0.5), (-1.0, 0.5), (1.0, 0.0), (1.0, 1.5)])
def test_counterexample_invalid(a, alpha):
    """Test a <= 0 or alpha outside (0, 1] are config errors"""
    with pytest.raises(ConfigError):
        compare(a, alpha, 10)


def test_main_counterexample(tmp_path):
    """Test the counterexample mode through main"""
    table = tmp_path / 'table.txt'

    code = run_main(['counterexample', '--a', '2', '--rounds', '10', '--every', '5',
                     '--output', str(table)])

    assert code == EXIT_OK
    assert table.read_text().startswith('# floor a^2/16 = 0.25')


# verify

def test_verify_polynomial_bound_passes():
    """Test the analyzed Newton-Schulz coefficients satisfy the bound"""
    results = verify.run_checks(only={'lmo.polynomial_bound'})

    assert [(r.name, r.passed) for r in results] == [('lmo.polynomial_bound', True)]


def test_verify_polynomial_bound_fails_for_perturbed_coefficients():
    """Test phi(x) = x violates 1 - phi(x) <= (1 - x)^1.5"""
    results = verify.run_checks((1.0, 0.0, 0.0), only={'lmo.polynomial_bound'})

    assert not results[0].passed


def test_verify_table():
    """Test the table has one row per check and a summary line"""
    results = verify.run_checks(only={'lmo.zero_oracle', 'lmo.effective_p'})

    lines = verify.format_table(results)

    assert len(lines) == 3
    assert all('PASS' in line for line in lines[:2])
    assert lines[-1] == '2/2 checks passed'


def test_verify_covers_every_module():
    """Test the check table has entries for every module's invariants"""
    names = [name for name, _ in verify.checks()]

    assert len(names) == len(set(names))
    assert {name.split('.')[0] for name in names} == {
        'matlin', 'lmo', 'optim', 'problems', 'fedproto', 'harness',
    }


def test_verify_protocol_and_harness_checks_pass():
    """Test the quick protocol, optimizer and harness checks pass"""
    only = {
        'optim.momentum_bound',
        'problems.heterogeneity',
        'fedproto.control_variate_mean',
        'fedproto.step_bound',
        'fedproto.unsampled_clients',
        'harness.cli_run_determinism',
    }

    results = verify.run_checks(only=only)

    assert {r.name for r in results} == only
    assert [r.detail for r in results if not r.passed] == []


def test_main_verify_failure_exit(tmp_path, monkeypatch):
    """Test a failing check exits with 1"""
    all_checks = verify.checks
    monkeypatch.setattr(verify, 'checks', lambda coefficients=None: [
        item for item in all_checks(coefficients) if item[0] == 'lmo.polynomial_bound'
    ])
    table = tmp_path / 'verify.txt'

    code = run_main(['verify', '--ns-coefficients', '1', '0', '0', '--output', str(table)])

    assert code == EXIT_FAILURE
    assert 'FAIL' in table.read_text()


@pytest.mark.slow
def test_verify_all_checks_pass():
    """Test every check passes with the analyzed coefficients"""
    results = verify.run_checks()

    assert [r.name for r in results if not r.passed] == []
