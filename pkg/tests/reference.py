"""Slow, literal reference implementations used as test oracles.

Everything here recomputes quantities from first principles with plain
loops so the vectorized engines are checked against independently
written code, not against themselves.
"""

import itertools
import math

import numpy as np


def pair_probability(params, xi, xj, t):
    return params.p_bar + math.sqrt(1.0 - t) * params.delta * xi * xj


def config_log_weight(x, instance, params, t, R):
    """log prior + log P(G | x) + channel terms, one configuration."""
    n = instance.n
    ab = params.alphabet
    total = 0.0
    for v in x:
        total += math.log(params.r) if v == ab.x1 else math.log(1.0 - params.r)
    st = math.sqrt(1.0 - t)
    idx = 0
    for i in range(n):
        for j in range(i + 1, n):
            v = x[i] * x[j]
            if instance.edges[idx]:
                total += math.log(1.0 + st * params.delta * v / params.p_bar)
            else:
                total += math.log(1.0 - st * params.delta * v / (1.0 - params.p_bar))
            idx += 1
    if R > 0.0:
        for i in range(n):
            total += math.sqrt(R) * instance.y[i] * x[i] - R * x[i] * x[i] / 2.0
    return total


def brackets(instance, params, t, R):
    """Posterior averages by direct summation over configurations."""
    n = instance.n
    ab = params.alphabet
    configs = [np.array(c) for c in
               itertools.product((ab.x1, ab.x2), repeat=n)]
    logw = np.array([config_log_weight(x, instance, params, t, R)
                     for x in configs])
    m = logw.max()
    z = np.exp(logw - m).sum()
    log_Z = m + math.log(z)
    p = np.exp(logw - log_Z)

    X = instance.labels
    mean_x = np.zeros(n)
    pair_xx = np.zeros((n, n))
    q_mean = 0.0
    q2_mean = 0.0
    l_mean = math.nan
    if R > 0.0 and instance.z is not None:
        l_mean = 0.0
    for w, x in zip(p, configs):
        mean_x += w * x
        pair_xx += w * np.outer(x, x)
        q = float(X @ x) / n
        q_mean += w * q
        q2_mean += w * q * q
        if R > 0.0 and instance.z is not None:
            l_obs = float(np.sum(x * x / 2.0 - X * x
                                 - instance.z * x / (2.0 * math.sqrt(R)))) / n
            l_mean += w * l_obs
    return {
        "log_Z": log_Z,
        "F": -log_Z / n,
        "mean_x": mean_x,
        "pair_xx": pair_xx,
        "Q_mean": q_mean,
        "Q2_mean": q2_mean,
        "L_mean": l_mean,
    }


def mi_tiny(params, t=0.0):
    """Per-node I(X; G) by brute double enumeration (n <= 4)."""
    n = params.n
    ab = params.alphabet
    m = n * (n - 1) // 2
    configs = list(itertools.product((ab.x1, ab.x2), repeat=n))
    priors = []
    for x in configs:
        pr = 1.0
        for v in x:
            pr *= params.r if v == ab.x1 else 1.0 - params.r
        priors.append(pr)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mi = 0.0
    for graph in range(1 << m):
        bits = [(graph >> e) & 1 for e in range(m)]
        cond = []
        for x in configs:
            pg = 1.0
            for e, (i, j) in enumerate(pairs):
                pe = pair_probability(params, x[i], x[j], t)
                pg *= pe if bits[e] else 1.0 - pe
            cond.append(pg)
        p_g = sum(w * c for w, c in zip(priors, cond))
        for w, c in zip(priors, cond):
            if w * c > 0.0:
                mi += w * c * math.log(c / p_g)
    return mi / n


def scalar_channel_free_energy(r, R, gh_order=61):
    """Per-site -E ln E_x exp(sqrt(R) y x - R x^2 / 2), y = sqrt(R) X + z.

    Direct Gauss-Hermite evaluation of the one-site decoupled model.
    """
    from numpy.polynomial.hermite import hermgauss
    x1 = math.sqrt((1.0 - r) / r)
    x2 = -math.sqrt(r / (1.0 - r))
    nodes, weights = hermgauss(gh_order)
    total = 0.0
    for X, w_x in ((x1, r), (x2, 1.0 - r)):
        for z, w_z in zip(nodes, weights):
            y = math.sqrt(R) * X + math.sqrt(2.0) * z
            inner = 0.0
            for x, w in ((x1, r), (x2, 1.0 - r)):
                inner += w * math.exp(math.sqrt(R) * y * x - R * x * x / 2.0)
            total += w_x * (w_z / math.sqrt(math.pi)) * math.log(inner)
    return -total
