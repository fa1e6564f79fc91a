"""
Client-side local loops.

Clients work on a displacement from the broadcast parameter: the local
iterate is X(r) + delta and only delta is sent back. Gradients are requested
through `grad_oracle(client_id, params, key)` with key = (round, step).
"""
from fedmuon.core import params as P
from fedmuon.core.lmo import kappa
from fedmuon.core.matlin import EUCLIDEAN_VEC, svd
from fedmuon.core.optim import (
    adam_state,
    adam_step,
    heavy_ball_state,
    identity_direction,
    MomentumState,
    momentum_update,
    muon_corrected_direction,
    per_layer_stepsize,
    sgd_momentum_step,
)
from fedmuon.fedproto.state import ClientState, ClientUpdate


def init_client(client_id, x0, cfg, layers, m0=None):
    """Fresh client with M_i(0,0) = m0 (zero by default) and C_i(0) = M_i(0,0)."""
    m = P.zeros_like(x0) if m0 is None else P.copy(m0)
    opt = {}
    if cfg.local_optimizer == 'momentum':
        opt = {name: heavy_ball_state(spec.shape) for name, spec in layers.items()}
    elif cfg.local_optimizer == 'adam':
        opt = {name: adam_state(spec.shape) for name, spec in layers.items()}
    return ClientState(id=client_id, x=P.copy(x0), m=m, c=P.copy(m), opt=opt)


def _layer_step(spec, momentum, c_local, c_global, cfg):
    """Stepsize and unit-ball direction of M - C_i + C for one layer."""
    if cfg.direction == 'identity':
        return cfg.eta, identity_direction(momentum - c_local + c_global)

    if spec.is_matrix:
        step = per_layer_stepsize(cfg.eta, spec, cfg.scaling)
        return step, muon_corrected_direction(momentum, c_local, c_global, cfg.norm, cfg.ns)

    if cfg.vector_rule == 'lmo':
        step = per_layer_stepsize(cfg.eta, spec, cfg.scaling)
        return step, muon_corrected_direction(momentum, c_local, c_global, EUCLIDEAN_VEC)

    return cfg.eta_vector, identity_direction(momentum - c_local + c_global)


def local_round_fedmuon(client, x_global, c_global, cfg, grad_oracle, layers, round_index):
    """
    K local steps of FedMuon (or LocalMuon, which skips the correction).

    Each step updates the momentum with a fresh stochastic gradient and moves
    along lmo(M - C_i + C). The momentum carries over from the client's last
    round; the new control variate is the final momentum.

    Returns:
        (updated ClientState, ClientUpdate)
    """
    corrected_cv = cfg.algorithm == 'fedmuon'
    c_local = client.c if corrected_cv else P.zeros_like(x_global)
    c_glob = c_global if corrected_cv else P.zeros_like(x_global)

    m = client.m
    delta = P.zeros_like(x_global)
    path = []
    min_kappa = 1.0

    for k in range(cfg.K):
        path.append(delta)
        x_k = P.add(x_global, delta)
        grad = grad_oracle(client.id, x_k, (round_index, k))

        new_m, new_delta = {}, {}
        for name, spec in layers.items():
            new_m[name] = momentum_update(MomentumState(m[name], cfg.alpha), grad[name]).m
            step, direction = _layer_step(spec, new_m[name], c_local[name], c_glob[name], cfg)
            new_delta[name] = delta[name] + step * direction

            if cfg.ns is not None and spec.is_matrix:
                target = new_m[name] - c_local[name] + c_glob[name]
                if target.any():
                    min_kappa = min(min_kappa, kappa(svd(target).s))
        m, delta = new_m, new_delta

    c_new = P.copy(m)
    updated = ClientState(id=client.id, x=P.add(x_global, delta), m=m, c=c_new, opt=client.opt)
    update = ClientUpdate(id=client.id, delta=delta, c_new=c_new, path=tuple(path), kappa=min_kappa)
    return updated, update


def local_round_fedavg(client, x_global, c_global, cfg, grad_oracle, layers, round_index):
    """
    K local steps of the configured local optimizer (SGD, momentum SGD or Adam).

    Optimizer state persists on the client across rounds. No control variates.
    """
    delta = P.zeros_like(x_global)
    opt = dict(client.opt)
    path = []

    for k in range(cfg.K):
        path.append(delta)
        grad = grad_oracle(client.id, P.add(x_global, delta), (round_index, k))

        new_delta = {}
        for name in layers:
            if cfg.local_optimizer == 'sgd':
                new_delta[name] = delta[name] - cfg.eta * grad[name]
            elif cfg.local_optimizer == 'momentum':
                opt[name], new_delta[name] = sgd_momentum_step(opt[name], delta[name], grad[name], cfg.eta)
            else:
                opt[name], new_delta[name] = adam_step(opt[name], delta[name], grad[name], cfg.eta)
        delta = new_delta

    updated = ClientState(id=client.id, x=P.add(x_global, delta), m=client.m, c=client.c, opt=opt)
    update = ClientUpdate(id=client.id, delta=delta, c_new=client.c, path=tuple(path), kappa=1.0)
    return updated, update
