"""
The `verify` mode: the invariant checks of every module with fixed seeds.

Each check either returns a short detail string or raises CheckFailed. The
table lists one row per check; the exit code is 0 only if all pass.
"""
import io
import math
import sys
import tempfile
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np
from loguru import logger

from fedmuon.core.lmo import (
    ANALYZED_COEFFICIENTS,
    NsConfig,
    effective_p,
    effective_p_from_kappa,
    lmo_bias_witness,
    lmo_exact,
    lmo_newton_schulz,
    ns_polynomial,
)
from fedmuon.core.matlin import (
    EUCLIDEAN_VEC,
    FROBENIUS,
    SPECTRAL,
    TRACE,
    NormKind,
    dual_norm_kind,
    inner,
    norm,
    rank_bound,
    singular_values,
    svd,
)
from fedmuon.core import params as P
from fedmuon.core.optim import (
    momentum_state,
    momentum_update,
    muon_corrected_direction,
    per_layer_stepsize,
)
from fedmuon.core.output import TRACE_FILE, emit_trace, parse_trace, write_output
from fedmuon.fedproto import (
    RoundConfig,
    init_client,
    local_round_fedmuon,
    round_rng,
    run,
    sample_clients,
)
from fedmuon.modes.counterexample import counterexample_config
from fedmuon.modes.run import cli_run
from fedmuon.problems import (
    CounterexampleProblem,
    MatrixQuadraticProblem,
    NoiseChannel,
    ToyClassificationProblem,
    dirichlet_partition,
    label_entropy,
)

VERIFY_SEED = 20240917
MATRIX_COUNT = 1000
STAGNATION_ROUNDS = 10_000
ESCAPE_ROUNDS = 10_000


class CheckFailed(AssertionError):
    pass


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def require(condition, detail):
    if not condition:
        raise CheckFailed(detail)


def random_matrices(seed, count, max_rows=32, max_cols=48):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        shape = (int(rng.integers(1, max_rows + 1)), int(rng.integers(1, max_cols + 1)))
        yield rng.normal(size=shape)


# matlin

def check_norm_inequalities():
    for a in random_matrices(VERIFY_SEED, MATRIX_COUNT):
        frob, trace = norm(a, FROBENIUS), norm(a, TRACE)
        require(frob <= trace * (1 + 1e-10), f'||A||_F > ||A||_trace for shape {a.shape}')
        require(trace <= rank_bound(a.shape) * frob * (1 + 1e-10),
                f'||A||_trace > sqrt(min(d1, d2)) ||A||_F for shape {a.shape}')

        chain = [norm(a, NormKind.schatten(p)) for p in (1, 1.5, 2, 3, 8)] + [norm(a, SPECTRAL)]
        for larger, smaller in zip(chain, chain[1:]):
            require(smaller <= larger * (1 + 1e-10), f'Schatten norms not monotone for {a.shape}')
    return f'{MATRIX_COUNT} matrices'


def check_svd_reconstruction():
    for a in random_matrices(VERIFY_SEED + 1, MATRIX_COUNT):
        first, second = svd(a), svd(a)
        require(np.array_equal(first.u, second.u) and np.array_equal(first.vt, second.vt),
                f'SVD factors differ between calls for shape {a.shape}')
        residual = np.linalg.norm(a - (first.u * first.s) @ first.vt) / np.linalg.norm(a)
        require(residual <= 1e-8, f'reconstruction residual {residual:.2e}')
        require(np.all(np.diff(first.s) <= 0), 'singular values not descending')
    return f'{MATRIX_COUNT} matrices'


def check_inner_dual_bound():
    rng = np.random.default_rng(VERIFY_SEED + 6)
    for a in random_matrices(VERIFY_SEED + 7, MATRIX_COUNT):
        b = rng.normal(size=a.shape)
        value = inner(a, b)
        for kind in (FROBENIUS, SPECTRAL, TRACE):
            bound = norm(a, kind) * norm(b, dual_norm_kind(kind))
            require(value <= bound * (1 + 1e-10) + 1e-12,
                    f'<A, B> > ||A||_{kind} ||B||_dual for shape {a.shape}')
    return f'{MATRIX_COUNT} pairs x frobenius, spectral, trace'


# lmo

def check_spectral_pairing():
    for g in random_matrices(VERIFY_SEED + 2, MATRIX_COUNT):
        d = lmo_exact(g, SPECTRAL)
        gap = abs(inner(g, d) + norm(g, TRACE))
        require(gap <= 1e-8, f'<g, lmo(g)> misses -||g||_trace by {gap:.2e}')
        require(abs(norm(d, SPECTRAL) - 1) <= 1e-8, '||lmo(g)||_sp != 1')
    return f'{MATRIX_COUNT} matrices'


def check_zero_oracle():
    zero = np.zeros((3, 5))
    require(not lmo_exact(zero, SPECTRAL).any(), 'spectral lmo(0) != 0')
    require(not lmo_exact(zero, FROBENIUS).any(), 'Frobenius lmo(0) != 0')
    require(not lmo_newton_schulz(zero, NsConfig()).any(), 'Newton-Schulz lmo(0) != 0')
    return 'spectral, frobenius, newton-schulz'


def check_polynomial_bound(coefficients=ANALYZED_COEFFICIENTS):
    x = np.linspace(0.0, 1.0, 100_001)
    gap = 1.0 - ns_polynomial(x, coefficients)
    worst_low = float(gap.min())
    worst_high = float(np.max(gap - (1.0 - x) ** 1.5))
    require(worst_low >= -1e-12, f'1 - phi(x) < 0 (min {worst_low:.3e}) for {coefficients}')
    require(worst_high <= 1e-12,
            f'1 - phi(x) > (1 - x)^1.5 (excess {worst_high:.3e}) for {coefficients}')
    return f'coefficients {tuple(coefficients)}'


def check_newton_schulz_sandwich():
    for g in random_matrices(VERIFY_SEED + 3, MATRIX_COUNT):
        s = singular_values(g)
        trace = float(np.sum(s))

        plain = lmo_newton_schulz(g, NsConfig(steps=0))
        require(np.array_equal(plain, -(g / np.linalg.norm(g))), 'T=0 output != -g/||g||_F')

        for steps in range(13):
            out = lmo_newton_schulz(g, NsConfig(steps=steps))
            value = inner(g, out)
            schatten = norm(g, NormKind.schatten(effective_p(s, steps).p))
            require(norm(out, SPECTRAL) <= 1 + 1e-6, f'||NS_T(g)||_sp > 1 at T={steps}')
            require(-trace - 1e-8 <= value, f'<g, NS_T(g)> < -||g||_trace at T={steps}')
            require(value <= -schatten + 1e-8,
                    f'<g, NS_T(g)> > -||g||_S(p) at T={steps}, shape {g.shape}')
    return f'{MATRIX_COUNT} matrices x T in 0..12'


def check_effective_p():
    kappas = np.linspace(0.01, 0.99, 99)
    for k in kappas:
        require(effective_p_from_kappa(k, 0) == 2.0, f'p(T=0) != 2 at kappa={k:.2f}')
        ps = [effective_p_from_kappa(k, steps) for steps in range(13)]
        require(all(b <= a for a, b in zip(ps, ps[1:])), f'p increases in T at kappa={k:.2f}')
        require(all(1.0 <= p <= 2.0 for p in ps), f'p outside [1, 2] at kappa={k:.2f}')
    require(abs(effective_p_from_kappa(0.5, 10) - 1.0) <= 1e-6, 'p(kappa=0.5, T=10) != 1')
    return 'kappa grid x T in 0..12'


def check_oracle_feasibility():
    rng = np.random.default_rng(VERIFY_SEED + 8)
    for g in random_matrices(VERIFY_SEED + 9, MATRIX_COUNT):
        require(norm(lmo_exact(g, FROBENIUS), FROBENIUS) <= 1 + 1e-8,
                f'||lmo(g)||_F > 1 for shape {g.shape}')
        v = g[:, :1]
        require(norm(lmo_exact(v, EUCLIDEAN_VEC), EUCLIDEAN_VEC) <= 1 + 1e-8,
                f'||lmo(v)||_2 > 1 for length {v.shape[0]}')
    for x in rng.normal(size=100):
        out = lmo_exact([[x]], EUCLIDEAN_VEC)[0, 0]
        require(abs(out + np.sign(x)) <= 1e-12, f'scalar lmo({x:.3f}) = {out}, not the sign of -x')
    return f'{MATRIX_COUNT} matrices and vectors, 100 scalars'


def well_conditioned(rng, rows, cols):
    """Random matrix with singular values in [0.5, 1], so every ratio is at least 0.2."""
    k = min(rows, cols)
    u, _ = np.linalg.qr(rng.normal(size=(rows, k)))
    v, _ = np.linalg.qr(rng.normal(size=(cols, k)))
    return (u * rng.uniform(0.5, 1.0, size=k)) @ v.T


def check_newton_schulz_convergence():
    rng = np.random.default_rng(VERIFY_SEED + 10)
    count = MATRIX_COUNT // 10
    worst = 0.0
    for _ in range(count):
        rows, cols = int(rng.integers(1, 33)), int(rng.integers(1, 49))
        g = well_conditioned(rng, rows, cols)
        out = lmo_newton_schulz(g, NsConfig(steps=12))
        gap = float(np.linalg.norm(out - lmo_exact(g, SPECTRAL)))
        require(gap < 1e-3, f'T=12 misses the exact oracle by {gap:.2e} for shape {g.shape}')
        worst = max(worst, gap)
    return f'{count} matrices, worst distance {worst:.1e}'


def check_lmo_bias():
    rng = np.random.default_rng(VERIFY_SEED + 4)
    ms = [rng.normal(size=(4, 3)) for _ in range(3)]
    mean_of_lmo, lmo_of_mean = lmo_bias_witness(ms, SPECTRAL)
    require(not np.allclose(mean_of_lmo, lmo_of_mean), 'averaging commuted with the oracle')
    require(abs(norm(lmo_of_mean, SPECTRAL) - 1) <= 1e-8, 'lmo of the mean is not unit')
    return f'gap {np.linalg.norm(mean_of_lmo - lmo_of_mean):.3f}'


# optim

def check_momentum_bound():
    rng = np.random.default_rng(VERIFY_SEED + 11)
    bound = 2.0
    for alpha in (0.1, 0.5, 1.0):
        state = momentum_state((4, 6), alpha)
        for step in range(500):
            g = rng.normal(size=(4, 6))
            g *= bound * rng.uniform() / np.linalg.norm(g)
            state = momentum_update(state, g)
            size = float(np.linalg.norm(state.m))
            require(size <= bound * (1 + 1e-12),
                    f'||m||_F = {size:.6f} > {bound} at alpha={alpha}, step {step}')
    return '500 steps x alpha in 0.1, 0.5, 1.0'


def check_corrected_direction_feasibility():
    rng = np.random.default_rng(VERIFY_SEED + 12)
    for m in random_matrices(VERIFY_SEED + 13, MATRIX_COUNT // 4):
        c_local, c_global = rng.normal(size=m.shape), rng.normal(size=m.shape)
        exact = muon_corrected_direction(m, c_local, c_global, SPECTRAL)
        inexact = muon_corrected_direction(m, c_local, c_global, SPECTRAL, NsConfig(steps=5))
        frob = muon_corrected_direction(m, c_local, c_global, FROBENIUS)
        require(norm(exact, SPECTRAL) <= 1 + 1e-8, f'exact direction outside the ball, {m.shape}')
        require(norm(inexact, SPECTRAL) <= 1 + 1e-6, f'NS direction outside the ball, {m.shape}')
        require(norm(frob, FROBENIUS) <= 1 + 1e-8,
                f'Frobenius direction outside the ball, {m.shape}')
    return f'{MATRIX_COUNT // 4} matrices x exact, newton-schulz, frobenius'


# problems

def _finite_difference(problem, client, params, h=1e-6):
    grad = {}
    for name, value in params.items():
        out = np.zeros_like(value)
        for index in np.ndindex(value.shape):
            step = h * max(1.0, abs(value[index]))
            plus, minus = P.copy(params), P.copy(params)
            plus[name][index] += step
            minus[name][index] -= step
            out[index] = (problem.loss(client, plus) - problem.loss(client, minus)) / (2 * step)
        grad[name] = out
    return grad


def verify_problems():
    return [
        ('counterexample', CounterexampleProblem(a=1.5)),
        ('quadratic', MatrixQuadraticProblem.generate(clients=3, d1=4, d2=3, k=6, seed=5)),
        ('classification', ToyClassificationProblem.generate(
            samples=120, features=4, classes=3, hidden=5, clients=3, batch=0, seed=5)),
    ]


def check_gradient_oracles():
    rng = np.random.default_rng(VERIFY_SEED + 5)
    for label, problem in verify_problems():
        base = problem.init_params()
        params = {name: value + 0.3 * rng.normal(size=value.shape) for name, value in base.items()}
        for client in range(problem.n_clients):
            exact = problem.grad(client, params)
            approx = _finite_difference(problem, client, params)
            scale = max(math.sqrt(sum(float(np.sum(v ** 2)) for v in exact.values())), 1e-8)
            error = P.distance(exact, approx) / scale
            require(error <= 1e-5, f'{label} client {client}: relative error {error:.2e}')
    return 'counterexample, quadratic, classification'


def check_noise_channel():
    sigma, draws = 0.5, 4000
    channel = NoiseChannel(sigma=sigma, seed=VERIFY_SEED)
    samples = channel.sample((4, 3), key=(0, 0, 0), size=draws)

    mean_norm = float(np.linalg.norm(samples.mean(axis=0)))
    require(mean_norm <= 3 * sigma / math.sqrt(draws), f'empirical mean norm {mean_norm:.3e}')

    second = float(np.mean(np.sum(samples ** 2, axis=(1, 2))))
    require(abs(second - sigma ** 2) <= 3 * sigma ** 2 / math.sqrt(draws),
            f'E||noise||^2 = {second:.4f}, expected {sigma ** 2}')

    require(np.array_equal(channel.sample((4, 3), (1, 2, 3)), channel.sample((4, 3), (1, 2, 3))),
            'same key gave different draws')
    return f'{draws} draws'


def check_smoothness_witness():
    rng = np.random.default_rng(VERIFY_SEED + 14)
    problem = MatrixQuadraticProblem.generate(clients=4, d1=5, d2=4, k=7, seed=7)
    bound = problem.smoothness_trace_spectral
    for _ in range(200):
        x, y = {'x': rng.normal(size=(5, 4))}, {'x': rng.normal(size=(5, 4))}
        for client in range(problem.n_clients):
            diff = problem.grad(client, x)['x'] - problem.grad(client, y)['x']
            require(norm(diff, TRACE) <= bound * norm(x['x'] - y['x'], SPECTRAL) * (1 + 1e-10),
                    f'client {client}: smoothness bound {bound:.3f} violated')
    return f'200 pairs, L_hat = {bound:.3f}'


def check_dirichlet_partition():
    labels = np.repeat(np.arange(10), 100)
    uniform = math.log(10)
    entropies = []
    for seed in range(20):
        shards = dirichlet_partition(labels, 16, 0.1, np.random.default_rng(VERIFY_SEED + seed))
        require(np.array_equal(np.sort(np.concatenate(shards)), np.arange(labels.size)),
                f'seed {seed}: shards do not cover every item once')
        require(all(shard.size >= 1 for shard in shards), f'seed {seed}: empty shard')
        entropies.append(float(label_entropy(labels, shards, 10).mean()))
    require(np.mean(entropies) < 0.5 * uniform,
            f'beta=0.1 mean label entropy {np.mean(entropies):.3f} not skewed')

    even = np.repeat(np.arange(10), 1000)
    shards = dirichlet_partition(even, 8, 1e6, np.random.default_rng(VERIFY_SEED))
    expected = even.size / 8
    require(all(abs(shard.size - expected) <= 0.05 * expected for shard in shards),
            'beta=1e6 shard sizes not within 5% of equal')
    return f'beta=0.1 mean entropy {np.mean(entropies):.2f} of {uniform:.2f}'


def check_heterogeneity():
    rng = np.random.default_rng(VERIFY_SEED + 15)
    a, b = rng.normal(size=(6, 3)), rng.normal(size=(6, 2))
    same = MatrixQuadraticProblem([a, a, a], [b, b, b]).heterogeneity()
    require(same.value <= 1e-10 and not same.proxy, f'identical clients give zeta {same.value:.2e}')

    base = MatrixQuadraticProblem.generate(clients=4, d1=3, d2=3, k=5, heterogeneity=1.0, seed=6)
    double = MatrixQuadraticProblem.generate(clients=4, d1=3, d2=3, k=5, heterogeneity=2.0, seed=6)
    ratio = double.heterogeneity().value / base.heterogeneity().value
    require(abs(ratio - 2.0) <= 1e-8, f'doubling the spread scales zeta by {ratio:.6f}')

    counter = CounterexampleProblem(a=1.0).heterogeneity().value
    require(abs(counter ** 2 - 0.25) <= 1e-12, f'counterexample zeta^2 = {counter ** 2}')
    return 'homogeneous, linear scaling, counterexample'


# fedproto

def check_sampling():
    seen = set()
    for r in range(200):
        ids = sample_clients(16, 8, round_rng(VERIFY_SEED, r))
        require(len(ids) == 8 and len(set(ids)) == 8, f'round {r}: sample {ids}')
        require(ids == sorted(ids), 'sample not sorted')
        require(ids == sample_clients(16, 8, round_rng(VERIFY_SEED, r)), 'sampling not seeded')
        seen.update(ids)
    require(seen == set(range(16)), 'some client never sampled in 200 rounds')
    return '200 rounds, n=16, S=8'


def check_localmuon_stagnation():
    problem = CounterexampleProblem(a=1.0)
    x0 = problem.init_params()
    for alpha in (0.25, 0.5, 1.0):
        moved = []

        def watch(r, server, _):
            if not np.array_equal(server.x['x'], x0['x']):
                moved.append(r)

        run(counterexample_config('localmuon', alpha, 0.01), problem, STAGNATION_ROUNDS,
            metric_every=STAGNATION_ROUNDS, on_round=watch)
        require(not moved, f'alpha={alpha}: X moved after round {moved[:1]}')

    grad = problem.global_grad(x0)['x'][0, 0]
    require(grad ** 2 == problem.floor, f'||grad f(X0)||^2 = {grad ** 2} != a^2/16')
    return f'{STAGNATION_ROUNDS} rounds, alpha in 0.25, 0.5, 1.0'


def check_fedmuon_escape():
    problem = CounterexampleProblem(a=1.0)
    best = math.inf
    for eta in (0.01, 0.001):
        lowest = [math.inf]

        def watch(r, server, _):
            lowest[0] = min(lowest[0], float(problem.global_grad(server.x)['x'][0, 0]) ** 2)

        run(counterexample_config('fedmuon', 0.5, eta), problem, ESCAPE_ROUNDS,
            metric_every=ESCAPE_ROUNDS, on_round=watch)
        best = min(best, lowest[0])
    require(best < problem.floor / 100, f'best ||grad f||^2 = {best:.3e}')
    return f'best ||grad f||^2 = {best:.2e}'


def check_control_variate_mean():
    problem = MatrixQuadraticProblem.generate(
        clients=6, d1=5, d2=4, k=8, seed=9, channel=NoiseChannel(0.1, seed=9)
    )
    cfg = RoundConfig(n=6, S=6, K=3, eta=0.01, alpha=0.5, seed=9)
    gaps = []

    def watch(r, server, _):
        mean = P.mean(server.c_registry[cid] for cid in sorted(server.c_registry))
        gaps.append(P.distance(server.c, mean))

    run(cfg, problem, 50, metric_every=50, on_round=watch)
    worst = max(gaps)
    require(worst <= 1e-12, f'C drifts from the client mean by {worst:.2e}')
    return f'50 rounds, max gap {worst:.1e}'


def check_step_bound():
    problem = MatrixQuadraticProblem.generate(
        clients=2, d1=6, d2=5, k=12, seed=10, channel=NoiseChannel(0.1, seed=10)
    )
    x0 = problem.init_params()
    c_global = {'x': np.random.default_rng(VERIFY_SEED + 16).normal(size=x0['x'].shape)}
    for ns, slack in ((None, 1e-8), (NsConfig(steps=5), 1e-6)):
        cfg = RoundConfig(n=2, S=2, K=8, eta=0.01, alpha=0.5, ns=ns)
        step = per_layer_stepsize(cfg.eta, problem.layers['x'], cfg.scaling)
        client = init_client(0, x0, cfg, problem.layers)
        for r in range(5):
            client, update = local_round_fedmuon(client, x0, c_global, cfg, problem.stoch_grad,
                                                 problem.layers, r)
            deltas = list(update.path) + [update.delta]
            for k, (before, after) in enumerate(zip(deltas, deltas[1:])):
                moved = norm(after['x'] - before['x'], SPECTRAL)
                require(moved <= step * (1 + slack),
                        f'round {r} step {k} moved {moved:.3e} > eta_l {step:.3e}')
    return '5 rounds x 8 steps, exact and newton-schulz'


def check_unsampled_clients():
    problem = MatrixQuadraticProblem.generate(clients=8, d1=4, d2=3, k=6, seed=12)
    cfg = RoundConfig(n=8, S=3, K=2, eta=0.01, seed=12)
    previous = {}
    failures = []

    def watch(r, server, clients):
        sampled = set(sample_clients(cfg.n, cfg.S, round_rng(cfg.seed, r - 1)))
        for cid, client in clients.items():
            if cid not in sampled and cid in previous:
                m, c = previous[cid]
                if not (np.array_equal(client.m['x'], m) and np.array_equal(client.c['x'], c)):
                    failures.append((r - 1, cid))
            previous[cid] = (client.m['x'], client.c['x'])

    run(cfg, problem, 30, metric_every=30, on_round=watch)
    require(not failures, f'unsampled clients changed state (round, id): {failures[:3]}')
    return '30 rounds, n=8, S=3'


def check_scaffold_equivalence():
    problem = MatrixQuadraticProblem.generate(
        clients=8, d1=6, d2=5, k=12, seed=3, channel=NoiseChannel(0.1, seed=3)
    )
    common = dict(n=8, S=4, K=5, eta=0.05, alpha=1.0, control_update='last', seed=11)
    fedmuon = RoundConfig(algorithm='fedmuon', direction='identity', **common)
    scaffold = RoundConfig(algorithm='scaffold', **common)

    paths = {}
    for label, cfg in (('fedmuon', fedmuon), ('scaffold', scaffold)):
        xs = []
        run(cfg, problem, 100, metric_every=100, on_round=lambda r, s, _: xs.append(s.x))
        paths[label] = xs

    gap = max(P.distance(a, b) for a, b in zip(paths['fedmuon'], paths['scaffold']))
    require(gap <= 1e-10, f'max distance {gap:.2e}')
    return f'max distance {gap:.1e} over 100 rounds'


def check_fedavg_gradient_step():
    problem = MatrixQuadraticProblem.generate(clients=4, d1=3, d2=3, k=5, seed=8)
    cfg = RoundConfig(n=4, S=4, K=1, eta=0.1, algorithm='fedavg')
    xs = []
    run(cfg, problem, 1, on_round=lambda r, s, _: xs.append(s.x))

    x0 = problem.init_params()
    expected = P.add(x0, problem.global_grad(x0), -cfg.eta)
    gap = P.distance(xs[0], expected)
    require(gap <= 1e-12, f'one round differs from gradient descent by {gap:.2e}')
    return 'S=n, K=1 matches gradient descent'


# harness

def _trace_run(workers=1):
    problem = MatrixQuadraticProblem.generate(
        clients=6, d1=5, d2=4, k=8, seed=2, channel=NoiseChannel(0.05, seed=4)
    )
    cfg = RoundConfig(n=6, S=3, K=3, eta=0.01, alpha=0.5, ns=NsConfig(steps=3), seed=4,
                      workers=workers)
    return run(cfg, problem, 20), problem


def check_trace_records():
    traces, problem = _trace_run()
    bound = problem.rho
    for trace in traces:
        require(parse_trace(emit_trace(trace)) == trace, f'record {trace.round}/{trace.step} '
                'does not survive emit/parse')
        require(min(trace.grad_frobenius, trace.grad_trace, trace.grad_spectral) >= 0,
                'negative norm')
        require(trace.grad_frobenius <= trace.grad_trace * (1 + 1e-12), 'frobenius > trace')
        require(trace.grad_trace <= bound * trace.grad_frobenius * (1 + 1e-12),
                'trace > sqrt(min(d1, d2)) frobenius')
        require(1.0 <= trace.phat <= 2.0, f'phat {trace.phat} outside [1, 2]')
    return f'{len(traces)} records'


def check_determinism():
    first = [emit_trace(t) for t in _trace_run()[0]]
    second = [emit_trace(t) for t in _trace_run()[0]]
    threaded = [emit_trace(t) for t in _trace_run(workers=3)[0]]
    require(first == second, 'rerun produced different records')
    require(first == threaded, 'client threads changed the records')
    return f'{len(first)} records identical'


CLI_RUN_CONFIG = '''
[problem]
kind = "quadratic"
d1 = 5
d2 = 4
k = 8
sigma = 0.05

[round]
n = 6
S = 3
K = 3
eta = 0.01
oracle = "newton_schulz"
ns_steps = 3

[experiment]
rounds = 20
seeds = [4]
'''


def check_cli_run_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        config = root / 'verify.toml'
        config.write_text(CLI_RUN_CONFIG)
        cli_run(config, out=root / 'first', workers=1, output=io.StringIO())
        cli_run(config, out=root / 'second', workers=3, output=io.StringIO())

        first = (root / 'first' / 'seed-4' / TRACE_FILE).read_bytes()
        second = (root / 'second' / 'seed-4' / TRACE_FILE).read_bytes()
    require(first, 'cli_run wrote an empty trace')
    require(first == second, 'two cli_run calls wrote different trace.jsonl bytes')
    return f'{len(first.splitlines())} records byte-identical'


def checks(ns_coefficients=None):
    coefficients = tuple(ns_coefficients) if ns_coefficients else ANALYZED_COEFFICIENTS
    return [
        ('matlin.norm_inequalities', check_norm_inequalities),
        ('matlin.svd_reconstruction', check_svd_reconstruction),
        ('matlin.inner_dual_bound', check_inner_dual_bound),
        ('lmo.spectral_pairing', check_spectral_pairing),
        ('lmo.zero_oracle', check_zero_oracle),
        ('lmo.oracle_feasibility', check_oracle_feasibility),
        ('lmo.polynomial_bound', partial(check_polynomial_bound, coefficients)),
        ('lmo.newton_schulz_sandwich', check_newton_schulz_sandwich),
        ('lmo.newton_schulz_convergence', check_newton_schulz_convergence),
        ('lmo.effective_p', check_effective_p),
        ('lmo.averaging_bias', check_lmo_bias),
        ('optim.momentum_bound', check_momentum_bound),
        ('optim.corrected_direction_feasibility', check_corrected_direction_feasibility),
        ('problems.gradient_oracles', check_gradient_oracles),
        ('problems.noise_channel', check_noise_channel),
        ('problems.smoothness_witness', check_smoothness_witness),
        ('problems.dirichlet_partition', check_dirichlet_partition),
        ('problems.heterogeneity', check_heterogeneity),
        ('fedproto.sampling', check_sampling),
        ('fedproto.localmuon_stagnation', check_localmuon_stagnation),
        ('fedproto.fedmuon_escape', check_fedmuon_escape),
        ('fedproto.control_variate_mean', check_control_variate_mean),
        ('fedproto.step_bound', check_step_bound),
        ('fedproto.unsampled_clients', check_unsampled_clients),
        ('fedproto.scaffold_equivalence', check_scaffold_equivalence),
        ('fedproto.fedavg_gradient_step', check_fedavg_gradient_step),
        ('harness.trace_records', check_trace_records),
        ('harness.determinism', check_determinism),
        ('harness.cli_run_determinism', check_cli_run_determinism),
    ]


def run_checks(ns_coefficients=None, only=None):
    results = []
    for name, check in checks(ns_coefficients):
        if only is not None and name not in only:
            continue
        try:
            detail = check()
            results.append(CheckResult(name, True, detail))
        except Exception as e:
            logger.warning(f'{name} failed: {e}')
            results.append(CheckResult(name, False, str(e)))
    return results


def format_table(results):
    width = max(len(result.name) for result in results)
    lines = [f'{result.name:<{width}}  {"PASS" if result.passed else "FAIL"}  {result.detail}'
             for result in results]
    passed = sum(result.passed for result in results)
    lines.append(f'{passed}/{len(results)} checks passed')
    return lines


def cli_verify(ns_coefficients=None, output=sys.stdout):
    results = run_checks(ns_coefficients)
    write_output(output, format_table(results))
    return 0 if all(result.passed for result in results) else 1
