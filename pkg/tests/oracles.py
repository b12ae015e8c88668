"""Independent reference implementations used as test oracles.

These deliberately avoid the library's code paths: plain Python sorting for
pruning, mpmath for the channel chain, a hand-written FedAvg loop.
"""

import math

import mpmath
import numpy as np


def ref_top_mask(values, beta):
    n = len(values)
    k = max(1, math.floor(beta * n + 1e-9))
    order = sorted(range(n), key=lambda i: (-abs(values[i]), i))
    keep = set(order[:k])
    return [i in keep for i in range(n)]


def ref_selective_prune(theta_l, theta_ul, beta):
    m_ul = ref_top_mask(theta_ul, beta)
    m_l = ref_top_mask(theta_l, beta)
    drop = [a and not b for a, b in zip(m_ul, m_l)]
    return [0.0 if d else float(v) for v, d in zip(theta_l, drop)], drop


def ref_l1_prune(values, fraction):
    n = len(values)
    count = math.floor(fraction * n + 1e-9)
    order = sorted(range(n), key=lambda i: (abs(values[i]), i))
    drop = set(order[:count])
    return [0.0 if i in drop else float(v) for i, v in enumerate(values)]


def ref_link(drone, bs, *, a=9.6, b=0.28, psi_los=1, psi_nlos=20, fc=2e9, bw=2e6,
             n0_dbm=-174, c=3e8, power=3, dps=40):
    """High-precision air-to-ground chain: returns (pl_avg_db, gain, rate_bps)."""
    with mpmath.workdps(dps):
        dx, dy = mpmath.mpf(drone[0]) - bs[0], mpmath.mpf(drone[1]) - bs[1]
        h = mpmath.mpf(drone[2]) - bs[2]
        horiz = mpmath.sqrt(dx * dx + dy * dy)
        d = mpmath.sqrt(horiz * horiz + h * h)
        phi = mpmath.degrees(mpmath.atan2(h, horiz))
        plos = 1 / (1 + a * mpmath.exp(-mpmath.mpf(b) * (phi - a)))
        fspl = 20 * mpmath.log10(4 * mpmath.pi * fc * d / c)
        pl = plos * (fspl + psi_los) + (1 - plos) * (fspl + psi_nlos)
        gain = mpmath.power(10, -pl / 10)
        n0 = mpmath.power(10, (mpmath.mpf(n0_dbm) - 30) / 10)
        rate = bw * mpmath.log(1 + power * gain / (n0 * bw), 2)
        return float(pl), float(gain), float(rate)


def fedavg_reference(init_flat, client_data, sgd, seeds, rounds, shapes_from):
    """Plain FedAvg on flat vectors, one local_train call per client per round.

    ``seeds[r][k]`` is the per-round seed for client k; ``shapes_from`` turns a
    flat array back into the library's parameter container for training.
    """
    from soul.nn import local_train

    theta = np.array(init_flat, dtype=np.float64)
    history = []
    for r in range(rounds):
        locals_ = [
            local_train(shapes_from(theta), ds, sgd, seed=seeds[r][k]).flat
            for k, ds in enumerate(client_data)
        ]
        theta = np.mean(np.stack(locals_), axis=0)
        history.append(theta.copy())
    return history
