"""
The `run` mode: one configuration, every configured seed.

Each seed streams `<out>/seed-<s>/trace.jsonl` while it runs and writes
`summary.csv` at the end. The config is validated in full before any
directory is created.
"""
import math
import sys
from dataclasses import dataclass, replace
from functools import partial

from loguru import logger

from fedmuon.core.config import load_config
from fedmuon.core.errors import NumericalAbort
from fedmuon.core.output import TRACE_FILE, write_output, write_summary, write_traces
from fedmuon.fedproto import run
from fedmuon.problems import build_problem


@dataclass(frozen=True)
class SeedResult:
    seed: int
    traces: list
    final_loss: float
    mean_dual_grad: float
    aborted: bool = False


def seed_directory(out_dir, seed):
    return out_dir / f'seed-{seed}'


def run_seed(config, seed, directory, workers=1):
    """
    Run one seed of `config` into `directory` and return its SeedResult.

    Records stream into trace.jsonl as each measured round finishes;
    summary.csv is written once the seed ends. final_loss is f at the last
    global parameter X(R). A numerical abort is reported through `aborted`
    with an infinite final loss; the records produced before it are kept.
    """
    round_cfg = replace(config.round, seed=seed, workers=workers)
    problem = build_problem(config.problem, round_cfg.n, seed=seed)
    directory.mkdir(parents=True, exist_ok=True)

    final = {}

    def keep_last(_, server, __):
        final['x'] = server.x

    with open(directory / TRACE_FILE, 'w') as f:
        try:
            traces = run(
                round_cfg,
                problem,
                config.rounds,
                metric_every=config.metric_every,
                wallclock=config.wallclock,
                on_round=keep_last,
                on_traces=partial(write_traces, f),
            )
        except NumericalAbort as e:
            logger.warning(f'seed {seed}: {e}')
            result = SeedResult(seed, e.traces, math.inf, _mean_dual(e.traces, round_cfg),
                                aborted=True)
        else:
            result = SeedResult(
                seed=seed,
                traces=traces,
                final_loss=problem.global_loss(final['x']),
                mean_dual_grad=_mean_dual(traces, round_cfg),
            )

    write_summary(directory, result.traces, round_cfg.norm.tag)
    return result


def _mean_dual(traces, round_cfg):
    if not traces:
        return math.nan
    tag = round_cfg.norm.tag
    return sum(trace.dual_grad(tag) for trace in traces) / len(traces)


def cli_run(config_path, seed=None, out=None, workers=None, output=sys.stdout):
    config = load_config(config_path, seed=seed, out=out, workers=workers)

    lines = ['seed,records,final_loss,mean_dual_grad']
    aborted = None
    for s in config.seeds:
        directory = seed_directory(config.out_dir, s)
        result = run_seed(config, s, directory, workers=config.workers)
        logger.info(f'seed {s}: wrote {directory}')
        lines.append(f'{s},{len(result.traces)},{result.final_loss!r},{result.mean_dual_grad!r}')
        if result.aborted:
            aborted = result
            break

    write_output(output, lines)

    if aborted is not None:
        raise NumericalAbort(f'seed {aborted.seed} diverged', traces=aborted.traces)
    return 0
