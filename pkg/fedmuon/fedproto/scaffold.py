"""
SCAFFOLD with its own local loop and aggregation.

Kept separate from the FedMuon loop so the two can be checked against each
other: FedMuon with the oracle removed and alpha = 1 must reproduce it.

Local step:      y <- y - eta (g - c_i + c)   (or an Adam / momentum step on the corrected gradient)
Control update:  'last'  c_i+ = last local gradient
                 'mean'  c_i+ = c_i - c + (x - y) / (K eta), the path-average gradient
Server:          x <- x + (1/n) sum (y_i - x),  c <- c + (1/n) sum (c_i+ - c_i)
"""
from dataclasses import replace

from fedmuon.core import params as P
from fedmuon.core.errors import ProtocolError
from fedmuon.core.optim import adam_step, sgd_momentum_step
from fedmuon.fedproto.state import ClientState, ClientUpdate


def local_round_scaffold(client, x_global, c_global, cfg, grad_oracle, layers, round_index):
    y = P.copy(x_global)
    opt = dict(client.opt)
    path = []
    grad = None

    for k in range(cfg.K):
        path.append(P.sub(y, x_global))
        grad = grad_oracle(client.id, y, (round_index, k))
        corrected = P.add(P.sub(grad, client.c), c_global)

        if cfg.local_optimizer == 'sgd':
            y = P.add(y, corrected, -cfg.eta)
        else:
            step = sgd_momentum_step if cfg.local_optimizer == 'momentum' else adam_step
            new_y = {}
            for name in layers:
                opt[name], new_y[name] = step(opt[name], y[name], corrected[name], cfg.eta)
            y = new_y

    if cfg.control_update == 'last':
        c_new = P.copy(grad)
    else:
        drift = P.scale(P.sub(x_global, y), 1.0 / (cfg.K * cfg.eta))
        c_new = P.add(P.sub(client.c, c_global), drift)

    updated = ClientState(id=client.id, x=y, m=client.m, c=c_new, opt=opt)
    # The message carries y_i itself; the engine reads `delta` only for metrics
    update = ClientUpdate(id=client.id, delta=P.sub(y, x_global), c_new=c_new,
                          path=tuple(path), kappa=1.0)
    return updated, (update, y)


def scaffold_aggregate(server, messages, cfg):
    """
    messages: list of (ClientUpdate, y_i) pairs from sampled clients.
    """
    ids = [update.id for update, _ in messages]
    if len(set(ids)) != len(ids):
        raise ProtocolError(f'Duplicate client ids in round {server.round}: {sorted(ids)}')

    x_sum = P.zeros_like(server.x)
    dc_sum = P.zeros_like(server.c)
    registry = dict(server.c_registry)
    for update, y in sorted(messages, key=lambda item: item[0].id):
        x_sum = P.add(x_sum, P.sub(y, server.x))
        dc_sum = P.add(dc_sum, P.sub(update.c_new, registry[update.id]))
        registry[update.id] = update.c_new

    return replace(
        server,
        x=P.add(server.x, x_sum, 1.0 / cfg.n),
        c=P.add(server.c, dc_sum, 1.0 / cfg.n),
        c_registry=registry,
        round=server.round + 1,
    )
