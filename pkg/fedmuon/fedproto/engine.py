"""
Round engine: sample clients, run their local loops, aggregate, measure.

Metrics are taken at the virtual average
    X(r, k) = ((n - S)/n) X(r) + (1/n) sum_{i in S_r} X_i(r, k)
          = X(r) + (1/n) sum_{i in S_r} delta_i(r, k)
and, for reference, at X(r) itself (`loss_global`).
"""
import math
import time
from concurrent.futures import ThreadPoolExecutor
from functools import partial

import numpy as np
from loguru import logger

from fedmuon.core import params as P
from fedmuon.core.errors import NumericalAbort, NumericalError
from fedmuon.core.lmo import effective_p_from_kappa
from fedmuon.core.matlin import singular_values
from fedmuon.core.output import RoundTrace
from fedmuon.fedproto.client import init_client, local_round_fedavg, local_round_fedmuon
from fedmuon.fedproto.sampling import round_rng, sample_clients
from fedmuon.fedproto.scaffold import local_round_scaffold, scaffold_aggregate
from fedmuon.fedproto.server import init_server, server_aggregate

# Noise key used for the optional one-gradient momentum initialization
INIT_KEY = (-1, 0)

LOCAL_ROUNDS = {
    'fedmuon': local_round_fedmuon,
    'localmuon': local_round_fedmuon,
    'fedavg': local_round_fedavg,
    'scaffold': local_round_scaffold,
}


def spectrum_norms(grad, p):
    """Frobenius, trace, spectral and Schatten-p norms of the block-diagonal gradient."""
    s = np.concatenate([singular_values(value) for value in grad.values()])
    top = float(s.max())
    if top == 0:
        return 0.0, 0.0, 0.0, 0.0
    frob = math.sqrt(float(np.sum(s ** 2)))
    schatten = top * float(np.sum((s / top) ** p)) ** (1.0 / p)
    return frob, float(np.sum(s)), top, schatten


def init_clients(cfg, problem, x0):
    clients = {}
    for cid in range(cfg.n):
        m0 = None
        if cfg.momentum_init == 'grad':
            m0 = problem.stoch_grad(cid, x0, INIT_KEY)
        clients[cid] = init_client(cid, x0, cfg, problem.layers, m0)
    return clients


def _round_traces(problem, cfg, x, updates, r, p_hat, running_kappa, clock):
    loss_global = problem.global_loss(x)
    traces = []
    for k in range(cfg.K):
        shift = P.zeros_like(x)
        for update in updates:
            shift = P.add(shift, update.path[k])
        x_rk = P.add(x, shift, 1.0 / cfg.n)

        loss = problem.global_loss(x_rk)
        if not math.isfinite(loss) or not math.isfinite(loss_global):
            raise NumericalError(f'Non-finite loss at round {r}, step {k}')

        frob, trace, spectral, schatten = spectrum_norms(problem.global_grad(x_rk), p_hat)
        traces.append(RoundTrace(
            round=r,
            step=k,
            loss=loss,
            loss_global=loss_global,
            grad_frobenius=frob,
            grad_trace=trace,
            grad_spectral=spectral,
            grad_schatten_phat=schatten,
            phat=p_hat,
            running_kappa=running_kappa,
            accuracy=problem.accuracy(x_rk),
            wallclock_ns=clock(),
        ))
    return traces


def run(cfg, problem, rounds, metric_every=1, wallclock=False, on_round=None, on_traces=None):
    """
    Execute `rounds` rounds of cfg.algorithm on `problem`.

    Records are emitted for every local step of rounds r with
    r % metric_every == 0 and for the last round. `on_traces(records)` receives
    each measured round's records as soon as they exist. `on_round(r, server,
    clients)` is called after each aggregation with the new state.

    Raises:
        NumericalAbort: a non-finite loss or oracle failure; `traces` holds the
            records produced before it
    """
    if problem.n_clients != cfg.n:
        raise ValueError(f'Problem has {problem.n_clients} clients but n={cfg.n}')

    start = time.perf_counter_ns()
    clock = (lambda: time.perf_counter_ns() - start) if wallclock else (lambda: 0)

    x0 = problem.init_params()
    clients = init_clients(cfg, problem, x0)
    server = init_server(x0, clients)
    local_round = LOCAL_ROUNDS[cfg.algorithm]
    p_fixed = cfg.p_hat_fixed
    running_kappa = 1.0
    traces = []

    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for r in range(rounds):
            sampled = sample_clients(cfg.n, cfg.S, round_rng(cfg.seed, r))
            work = partial(
                _run_client,
                local_round=local_round,
                server=server,
                cfg=cfg,
                problem=problem,
                round_index=r,
            )
            jobs = [clients[cid] for cid in sampled]
            results = list(pool.map(work, jobs)) if pool else [work(job) for job in jobs]

            messages = []
            for state, message in results:
                clients[state.id] = state
                messages.append(message)

            updates = [m[0] for m in messages] if cfg.algorithm == 'scaffold' else messages
            running_kappa = min([running_kappa] + [update.kappa for update in updates])

            if r % metric_every == 0 or r == rounds - 1:
                p_hat = p_fixed if p_fixed is not None else effective_p_from_kappa(
                    running_kappa, cfg.ns.steps
                )
                measured = _round_traces(
                    problem, cfg, server.x, updates, r, p_hat, running_kappa, clock
                )
                traces.extend(measured)
                if on_traces is not None:
                    on_traces(measured)

            if cfg.algorithm == 'scaffold':
                server = scaffold_aggregate(server, messages, cfg)
            else:
                server = server_aggregate(server, messages, cfg)

            if not P.is_finite(server.x):
                raise NumericalError(f'Non-finite global parameter after round {r}')
            if on_round is not None:
                on_round(r + 1, server, clients)
            logger.debug(f'round {r} done, sampled {sampled}')
    except NumericalError as e:
        logger.error(f'Run aborted: {e}')
        raise NumericalAbort(str(e), traces=traces) from e
    finally:
        if pool:
            pool.shutdown()

    return traces


def _run_client(client, local_round, server, cfg, problem, round_index):
    return local_round(
        client, server.x, server.c, cfg, problem.stoch_grad, problem.layers, round_index
    )
