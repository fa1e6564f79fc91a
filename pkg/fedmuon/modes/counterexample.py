"""
The `counterexample` mode: LocalMuon and FedMuon side by side on two scalar
clients f_0(x) = x^2/2 and f_1(x) = (x + a)^2/2, started at x = -a/4.

The table lists ||grad f(X(r))||^2 for both methods next to the floor a^2/16
that LocalMuon never leaves.
"""
import sys

from fedmuon.core.errors import ConfigError
from fedmuon.core.matlin import EUCLIDEAN_VEC
from fedmuon.core.output import write_output
from fedmuon.fedproto import RoundConfig, run
from fedmuon.problems import CounterexampleProblem


def counterexample_config(algorithm, alpha, eta, seed=0):
    return RoundConfig(
        n=2,
        S=2,
        K=1,
        eta=eta,
        alpha=alpha,
        algorithm=algorithm,
        norm=EUCLIDEAN_VEC,
        vector_rule='lmo',
        scaling='none',
        seed=seed,
    )


def squared_grads(traces):
    """{round: ||grad f(X(r))||^2} from the step-0 records."""
    return {t.round: t.grad_frobenius ** 2 for t in traces if t.step == 0}


def compare(a, alpha, rounds, eta=0.01, every=1):
    """
    Returns:
        (LocalMuon traces, FedMuon traces, floor a^2/16)

    Raises:
        ConfigError: a <= 0 or alpha outside (0, 1]
    """
    problems = []
    if not a > 0:
        problems.append('a')
    if not 0 < alpha <= 1:
        problems.append('alpha')
    if problems:
        raise ConfigError(
            f'Counterexample needs a > 0 and alpha in (0, 1], got a={a}, alpha={alpha}',
            keys=problems,
        )

    problem = CounterexampleProblem(a=a)
    local = run(counterexample_config('localmuon', alpha, eta), problem, rounds, metric_every=every)
    fed = run(counterexample_config('fedmuon', alpha, eta), problem, rounds, metric_every=every)
    return local, fed, problem.floor


def cli_counterexample(a, alpha, rounds, eta=0.01, every=100, output=sys.stdout):
    local, fed, floor = compare(a, alpha, rounds, eta=eta, every=every)
    local_sq, fed_sq = squared_grads(local), squared_grads(fed)

    lines = [f'# floor a^2/16 = {floor!r}', 'round,localmuon_grad2,fedmuon_grad2,floor']
    for r in sorted(local_sq):
        lines.append(f'{r},{local_sq[r]!r},{fed_sq[r]!r},{floor!r}')
    lines.append(f'# fedmuon min grad2 = {min(fed_sq.values())!r}')
    write_output(output, lines)
    return 0
