from dataclasses import replace

from loguru import logger

from fedmuon.core import params as P
from fedmuon.core.errors import ProtocolError
from fedmuon.fedproto.state import ServerState


def init_server(x0, clients):
    """C_i(0) from each client, C(0) = (1/n) sum_i C_i(0)."""
    registry = {cid: P.copy(client.c) for cid, client in sorted(clients.items())}
    return ServerState(x=P.copy(x0), c=P.mean(registry.values()), c_registry=registry, round=0)


def server_aggregate(server, updates, cfg):
    """
    Fold the sampled clients' messages into the global state.

        X(r+1) = X(r) + (1/n) sum_i delta_i
               = ((n - S)/n) X(r) + (1/n) sum_i X_i(r, K)
        C(r+1) = C(r) + (1/n) sum_i (C_i(r+1) - C_i(r))

    Contributions are summed in increasing client id so the result does not
    depend on the order updates arrive in.

    Raises:
        ProtocolError: duplicate or unknown client ids, or more than S updates
    """
    ids = [update.id for update in updates]
    if len(set(ids)) != len(ids):
        raise ProtocolError(f'Duplicate client ids in round {server.round}: {sorted(ids)}')
    unknown = [cid for cid in ids if cid not in server.c_registry]
    if unknown:
        raise ProtocolError(f'Updates from unknown clients: {unknown}')
    if len(updates) > cfg.S:
        raise ProtocolError(f'Received {len(updates)} updates but only {cfg.S} clients were sampled')

    ordered = sorted(updates, key=lambda update: update.id)
    total_delta = P.zeros_like(server.x)
    total_dc = P.zeros_like(server.c)
    registry = dict(server.c_registry)

    for update in ordered:
        total_delta = P.add(total_delta, update.delta)
        total_dc = P.add(total_dc, P.sub(update.c_new, registry[update.id]))
        registry[update.id] = update.c_new

    x = P.add(server.x, total_delta, 1.0 / cfg.n)
    c = P.add(server.c, total_dc, 1.0 / cfg.n)
    logger.debug(f'round {server.round}: aggregated clients {[u.id for u in ordered]}')

    return replace(server, x=x, c=c, c_registry=registry, round=server.round + 1)
