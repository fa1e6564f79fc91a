"""
The `grid` mode: the Cartesian product of the [grid] lists, every seed.

Cells run in a process pool when more than one worker is configured. Each
cell owns `<out>/<cell>/`; the leaderboard averages its seeds and marks the
cell with the lowest mean final loss.
"""
import csv
import itertools
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from loguru import logger

from fedmuon.core.config import check_grid, load_config
from fedmuon.core.errors import NumericalAbort
from fedmuon.core.output import write_output
from fedmuon.modes.run import run_seed, seed_directory

LEADERBOARD_FILE = 'leaderboard.csv'

LEADERBOARD_COLUMNS = [
    'cell', 'eta', 'eta_vector', 'alpha', 'seeds', 'final_loss', 'mean_dual_grad', 'best',
]


@dataclass(frozen=True)
class Cell:
    eta: float
    eta_vector: float
    alpha: float

    @property
    def name(self):
        return f'eta={self.eta:g}_etav={self.eta_vector:g}_alpha={self.alpha:g}'


def grid_cells(grid):
    return [
        Cell(eta, eta_vector, alpha)
        for eta, eta_vector, alpha in itertools.product(
            grid['eta'], grid['eta_vector'], grid['alpha']
        )
    ]


def cell_config(config, cell):
    return replace(
        config,
        round=replace(config.round, eta=cell.eta, eta_vector=cell.eta_vector, alpha=cell.alpha),
    )


def run_cell_seed(config, cell, seed):
    """Run and write one (cell, seed) pair; returns (cell, seed, final_loss, mean_dual_grad)."""
    cfg = cell_config(config, cell)
    result = run_seed(cfg, seed, seed_directory(config.out_dir / cell.name, seed))
    return cell, seed, result.final_loss, result.mean_dual_grad


def leaderboard_rows(results, cells):
    """Average the per-seed results of each cell; best = lowest finite mean final loss."""
    rows = []
    for cell in cells:
        runs = [r for r in results if r[0] == cell]
        losses = [r[2] for r in runs]
        duals = [r[3] for r in runs]
        rows.append({
            'cell': cell.name,
            'eta': cell.eta,
            'eta_vector': cell.eta_vector,
            'alpha': cell.alpha,
            'seeds': ' '.join(str(r[1]) for r in sorted(runs, key=lambda r: r[1])),
            'final_loss': sum(losses) / len(losses),
            'mean_dual_grad': sum(duals) / len(duals),
            'best': 0,
        })

    finite = [row for row in rows if math.isfinite(row['final_loss'])]
    if finite:
        min(finite, key=lambda row: row['final_loss'])['best'] = 1
    return rows


def write_leaderboard(path, rows):
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=LEADERBOARD_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def cli_grid(config_path, seed=None, out=None, workers=None, output=sys.stdout):
    config = load_config(config_path, seed=seed, out=out, workers=workers)
    check_grid(config)

    # Build every cell config first so an invalid grid value fails before any file is written
    cells = grid_cells(config.grid)
    for cell in cells:
        cell_config(config, cell)

    jobs = [(cell, s) for cell in cells for s in config.seeds]
    logger.info(f'grid: {len(cells)} cells x {len(config.seeds)} seeds')

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(run_cell_seed, config, cell, s) for cell, s in jobs]
            results = [future.result() for future in futures]
    else:
        results = [run_cell_seed(config, cell, s) for cell, s in jobs]

    rows = leaderboard_rows(results, cells)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    write_leaderboard(config.out_dir / LEADERBOARD_FILE, rows)

    lines = [','.join(LEADERBOARD_COLUMNS)]
    lines += [','.join(str(row[column]) for column in LEADERBOARD_COLUMNS) for row in rows]
    write_output(output, lines)

    if not any(row['best'] for row in rows):
        raise NumericalAbort('every grid cell diverged')
    return 0
