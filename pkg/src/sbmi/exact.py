"""Exact posterior computations by enumeration over label configurations.

For n at or below the enumeration cap (default 20) the partition function
and all Gibbs brackets of the interpolating posterior are computed exactly
as sums over the 2^n label configurations.  The enumeration is vectorized
over bitmask arrays: per-configuration pair-type counts (edges and
non-edges within/between groups) reduce the pairwise Hamiltonian to a
handful of per-mask dot products, giving the same O(2^n * n) cost as an
incremental single-flip scan.

Mutual information per node is computed two independent ways:
 * exact_mi_tiny - full enumeration of labels AND graphs (n <= 5),
 * mi_via_free_energy - exact conditional-likelihood term plus a
   Monte-Carlo average of the exact per-instance log partition function
   (unbiased; the only error is MC noise).
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .model import ModelParams
from .rng import TAG_INSTANCE, substream
from .sampling import PlantedInstance, sample_instance

ENUM_CAP_DEFAULT = 20
MI_TINY_CAP = 5


class EnumerationSizeError(ValueError):
    """n exceeds the exact-enumeration cap; use the MCMC engine instead."""


@lru_cache(maxsize=8)
def _enum_tables(n):
    """All 2^n configurations as (masks, per-site bit matrix, group-1 sizes)."""
    masks = np.arange(1 << n, dtype=np.uint64)
    shifts = np.arange(n, dtype=np.uint64)
    bits = ((masks[None, :] >> shifts[:, None]) & np.uint64(1)).astype(float)
    k1 = bits.sum(axis=0)
    for arr in (masks, bits, k1):
        arr.setflags(write=False)
    return masks, bits, k1


# above this size the (pairs x 2^n) table outgrows its matmul advantage
_PAIR_TABLE_MAX_N = 16


@lru_cache(maxsize=4)
def _pair_tables(n):
    """Incidence matrix (n x pairs) and per-pair bit products (pairs x 2^n)."""
    _, bits, _ = _enum_tables(n)
    iu, ju = np.triu_indices(n, k=1)
    incidence = np.zeros((n, iu.size))
    incidence[iu, np.arange(iu.size)] = 1.0
    incidence[ju, np.arange(ju.size)] = 1.0
    pair_bits = bits[iu] * bits[ju]
    incidence.setflags(write=False)
    pair_bits.setflags(write=False)
    return incidence, pair_bits


class HamiltonianDomainError(ValueError):
    """A logarithm argument in the Hamiltonian is nonpositive."""


@dataclass
class GibbsReport:
    log_Z: float
    F: float
    mean_x: np.ndarray
    Q_mean: float
    Q2_mean: float
    L_mean: float
    t: float
    R: float
    pair_xx: Optional[np.ndarray] = None
    sbm_dt_mean: Optional[float] = None   # (1/n) <dH_graph/dt>, t < 1 only
    # sampled reports only: between-chain errors and mixing diagnostics
    q_stderr: Optional[float] = None
    q2_stderr: Optional[float] = None
    rhat: Optional[float] = None
    mixing_flag: Optional[bool] = None
    state_counts: Optional[np.ndarray] = None

    def to_record(self):
        rec = {
            "log_Z": float(self.log_Z),
            "F": float(self.F),
            "mean_x": [float(v) for v in self.mean_x],
            "Q_mean": float(self.Q_mean),
            "Q2_mean": float(self.Q2_mean),
            "L_mean": float(self.L_mean),
            "t": float(self.t),
            "R": float(self.R),
        }
        if self.pair_xx is not None:
            rec["pair_xx"] = [[float(v) for v in row] for row in self.pair_xx]
        if self.sbm_dt_mean is not None:
            rec["sbm_dt_mean"] = float(self.sbm_dt_mean)
        for name in ("q_stderr", "q2_stderr", "rhat"):
            val = getattr(self, name)
            if val is not None:
                rec[name] = float(val)
        if self.mixing_flag is not None:
            rec["mixing_flag"] = bool(self.mixing_flag)
        return rec


@lru_cache(maxsize=1024)
def _log_coeffs(params, t):
    """Per pair-type log factors of the graph Hamiltonian at time t.

    Returns (lp, lm): for pair-label product v, an edge contributes
    lp(v) = ln(1 + sqrt(1-t) (delta/p_bar) v) and a non-edge
    lm(v) = ln(1 - sqrt(1-t) (delta/(1-p_bar)) v) to minus the Hamiltonian.
    Pair types are indexed [x1*x1, x1*x2, x2*x2].
    """
    ab = params.alphabet
    st = math.sqrt(1.0 - t)
    kp = st * params.delta / params.p_bar
    km = st * params.delta / (1.0 - params.p_bar)
    vv = np.array([ab.x1 * ab.x1, ab.x1 * ab.x2, ab.x2 * ab.x2])
    names = ("within-group-1", "cross-group", "within-group-2")
    lp = np.empty(3)
    lm = np.empty(3)
    for a, v in enumerate(vv):
        ap = 1.0 + kp * v
        am = 1.0 - km * v
        if ap <= 0.0:
            raise HamiltonianDomainError(
                f"edge log argument 1 + sqrt(1-t)(delta/p_bar)*x*x' = {ap:.6g} "
                f"<= 0 for {names[a]} pairs")
        if am <= 0.0:
            raise HamiltonianDomainError(
                f"non-edge log argument 1 - sqrt(1-t)(delta/(1-p_bar))*x*x' = "
                f"{am:.6g} <= 0 for {names[a]} pairs")
        lp[a] = math.log(ap)
        lm[a] = math.log(am)
    lp.setflags(write=False)
    lm.setflags(write=False)
    return lp, lm


def _dt_coeffs(params, t):
    """Per pair-type coefficients of dH_graph/dt (edge and non-edge)."""
    ab = params.alphabet
    st = math.sqrt(1.0 - t)
    vv = np.array([ab.x1 * ab.x1, ab.x1 * ab.x2, ab.x2 * ab.x2])
    dv = params.delta * vv
    alpha = dv / (2.0 * st * (params.p_bar + st * dv))
    beta = -dv / (2.0 * st * (1.0 - params.p_bar - st * dv))
    return alpha, beta


def hamiltonian(x, instance: PlantedInstance, params: ModelParams, t, R):
    """Literal evaluation of the interpolating Hamiltonian at configuration x.

    Graph part: -sum_{i<j} [G_ij ln(1 + sqrt(1-t)(delta/p_bar) x_i x_j)
                            + (1-G_ij) ln(1 - sqrt(1-t)(delta/(1-p_bar)) x_i x_j)]
    Channel part: -sum_i [sqrt(R) y_i x_i - R x_i^2 / 2]
    """
    x = np.asarray(x, dtype=float)
    n = instance.n
    st = math.sqrt(1.0 - t)
    kp = st * params.delta / params.p_bar
    km = st * params.delta / (1.0 - params.p_bar)
    h = 0.0
    idx = 0
    for i in range(n):
        for j in range(i + 1, n):
            v = x[i] * x[j]
            if instance.edges[idx]:
                arg = 1.0 + kp * v
                if arg <= 0.0:
                    raise HamiltonianDomainError(
                        f"nonpositive log argument {arg:.6g} at edge ({i},{j})")
                h -= math.log(arg)
            else:
                arg = 1.0 - km * v
                if arg <= 0.0:
                    raise HamiltonianDomainError(
                        f"nonpositive log argument {arg:.6g} at non-edge ({i},{j})")
                h -= math.log(arg)
            idx += 1
    if R > 0.0:
        if instance.y is None:
            raise ValueError("R > 0 requires side observations y")
        sr = math.sqrt(R)
        h -= float(np.sum(sr * instance.y * x - R * x * x / 2.0))
    return h


def _logsumexp(a):
    m = np.max(a)
    return m + math.log(np.sum(np.exp(a - m)))


def gibbs_report(instance: PlantedInstance, params: ModelParams, t, R,
                 want_pairs=False, want_sbm_dt=False, cap=ENUM_CAP_DEFAULT):
    """Exact Gibbs brackets by enumeration over all 2^n configurations."""
    n = instance.n
    if n > cap:
        raise EnumerationSizeError(
            f"n={n} exceeds enumeration cap {cap}; use mcmc.mcmc_brackets")
    if R > 0.0 and instance.y is None:
        raise ValueError("R > 0 requires side observations y")
    ab = params.alphabet
    x1, x2 = ab.x1, ab.x2
    d = x1 - x2
    lp, lm = _log_coeffs(params, t)

    X = instance.labels
    masks, bits_mat, k1 = _enum_tables(n)
    if n <= _PAIR_TABLE_MAX_N:
        incidence, pair_bits = _pair_tables(n)
        edges_f = instance.edges.astype(np.float64)
        e11 = edges_f @ pair_bits
        deg = incidence @ edges_f
        e_tot = edges_f.sum()
    else:
        adj = instance.adjacency_bits()
        deg = np.bitwise_count(adj).astype(np.float64)
        e_tot = deg.sum() / 2.0
        # group-1 edge endpoints counted per configuration; each edge twice
        pc = np.bitwise_count(masks[None, :] & adj[:, None]).astype(np.float64)
        e11 = 0.5 * np.einsum("ic,ic->c", bits_mat, pc)
    dsum = deg @ bits_mat
    tsum = X @ bits_mat         # sum of truth labels over group-1 sites
    if R > 0.0:
        sr = math.sqrt(R)
        u = sr * instance.y * x1 - R * x1 * x1 / 2.0
        v = sr * instance.y * x2 - R * x2 * x2 / 2.0
        dv = u - v
        sumv = v.sum()
        decdot = dv @ bits_mat
    e12 = dsum - 2.0 * e11
    e22 = e_tot - e11 - e12
    k2 = n - k1
    p11 = k1 * (k1 - 1.0) / 2.0
    p12 = k1 * k2
    p22 = k2 * (k2 - 1.0) / 2.0

    logw = (k1 * math.log(ab.r) + k2 * math.log(1.0 - ab.r)
            + e11 * lp[0] + e12 * lp[1] + e22 * lp[2]
            + (p11 - e11) * lm[0] + (p12 - e12) * lm[1]
            + (p22 - e22) * lm[2])
    if R > 0.0:
        logw += sumv + decdot

    log_Z = _logsumexp(logw)
    p = np.exp(logw - log_Z)

    bitprob = bits_mat @ p
    mean_x = x2 + d * bitprob
    mean_x2 = x2 * x2 + (x1 * x1 - x2 * x2) * bitprob

    q_cfg = (x2 * X.sum() + d * tsum) / n
    q_mean = float(X @ mean_x) / n          # = <Q> by linearity
    q2_mean = float(p @ (q_cfg * q_cfg))

    if R > 0.0 and instance.z is not None:
        l_mean = float(np.sum(mean_x2 / 2.0 - X * mean_x
                              - instance.z * mean_x / (2.0 * math.sqrt(R)))) / n
    else:
        l_mean = math.nan

    pair_xx = None
    if want_pairs:
        pp = (bits_mat * p) @ bits_mat.T
        pair_xx = (x2 * x2 + x2 * d * (bitprob[:, None] + bitprob[None, :])
                   + d * d * pp)
        np.fill_diagonal(pair_xx, mean_x2)

    sbm_dt = None
    if want_sbm_dt:
        if t >= 1.0:
            sbm_dt = math.nan
        else:
            alpha, beta = _dt_coeffs(params, t)
            w_cfg = (e11 * alpha[0] + e12 * alpha[1] + e22 * alpha[2]
                     + (p11 - e11) * beta[0] + (p12 - e12) * beta[1]
                     + (p22 - e22) * beta[2])
            sbm_dt = float(p @ w_cfg) / n

    return GibbsReport(log_Z=float(log_Z), F=-float(log_Z) / n,
                       mean_x=mean_x, Q_mean=q_mean, Q2_mean=q2_mean,
                       L_mean=l_mean, t=float(t), R=float(R),
                       pair_xx=pair_xx, sbm_dt_mean=sbm_dt)


def mi_closed_form_first_term(params: ModelParams):
    """Exact conditional-log-likelihood term of the per-node MI.

    (n-1)/2 times the expectation over one pair (label product V, edge bit G)
    of G ln(1 + (delta/p_bar)V) + (1-G) ln(1 - (delta/(1-p_bar))V), written
    out over the three pair types.  No small-delta truncation.
    """
    r, pb, dl = params.r, params.p_bar, params.delta
    ab = params.alphabet
    terms = ((r * r, ab.x1 * ab.x1),
             (2.0 * r * (1.0 - r), ab.x1 * ab.x2),
             ((1.0 - r) * (1.0 - r), ab.x2 * ab.x2))
    total = 0.0
    for w, v in terms:
        ap = 1.0 + dl * v / pb
        am = 1.0 - dl * v / (1.0 - pb)
        if ap <= 0.0 or am <= 0.0:
            raise HamiltonianDomainError(
                f"log argument nonpositive for pair product {v:.6g}")
        total += w * ((pb + dl * v) * math.log(ap)
                      + (1.0 - pb - dl * v) * math.log(am))
    return (params.n - 1) / 2.0 * total


def exact_mi_tiny(params: ModelParams, t=0.0):
    """Per-node I(X; G) by full enumeration of labels and graphs (n <= 5)."""
    n = params.n
    if n > MI_TINY_CAP:
        raise EnumerationSizeError(
            f"full graph enumeration needs n <= {MI_TINY_CAP}, got {n}")
    ab = params.alphabet
    m = n * (n - 1) // 2
    nconf = 1 << n
    ngraph = 1 << m

    conf = np.arange(nconf, dtype=np.uint64)
    bits = ((conf[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)
            ).astype(np.float64)
    cfgx = ab.x2 + (ab.x1 - ab.x2) * bits
    prior = np.exp(bits.sum(axis=1) * math.log(ab.r)
                   + (n - bits.sum(axis=1)) * math.log(1.0 - ab.r))

    iu, ju = np.triu_indices(n, k=1)
    st = math.sqrt(1.0 - t)
    pe = params.p_bar + st * params.delta * cfgx[:, iu] * cfgx[:, ju]
    pe = np.clip(pe, 0.0, 1.0)

    graphs = np.arange(ngraph, dtype=np.uint64)
    gbits = ((graphs[:, None] >> np.arange(m, dtype=np.uint64)) & np.uint64(1)
             ).astype(np.float64)

    # P(G | X): (ngraph, nconf); probabilities stay in linear space (tiny n)
    p_g_given_x = np.exp(
        gbits @ np.log(np.maximum(pe, 1e-300)).T
        + (1.0 - gbits) @ np.log(np.maximum(1.0 - pe, 1e-300)).T)
    # zero-probability edges: rebuild exactly where pe hits {0, 1}
    if pe.min() <= 0.0 or pe.max() >= 1.0:
        p_g_given_x = np.ones((ngraph, nconf))
        for e in range(m):
            pcol = pe[:, e]
            ge = gbits[:, e:e + 1]
            p_g_given_x *= ge * pcol[None, :] + (1.0 - ge) * (1.0 - pcol[None, :])

    p_g = p_g_given_x @ prior
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p_g_given_x > 0.0,
                         np.log(np.where(p_g_given_x > 0.0, p_g_given_x, 1.0))
                         - np.log(p_g)[:, None], 0.0)
    mi = float(prior @ (p_g_given_x * ratio).sum(axis=0))
    return mi / n


def child_seed(seed, *tags):
    """Derived 64-bit seed for a child object (instance, chain, ...)."""
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1),
                                spawn_key=tuple(int(v) for v in tags))
    return int(ss.generate_state(1, np.uint64)[0])


def mi_via_free_energy(params: ModelParams, samples, seed,
                       cap=ENUM_CAP_DEFAULT):
    """Unbiased per-node MI: exact likelihood term minus MC-averaged log Z.

    Every sampled (X, G) pair contributes its exact log partition function,
    so the estimate carries no truncation bias, only MC noise.
    Returns (estimate, stderr).
    """
    if params.n > cap:
        raise EnumerationSizeError(
            f"n={params.n} exceeds enumeration cap {cap}")
    first = mi_closed_form_first_term(params)
    logzs = np.empty(samples)
    for s in range(samples):
        inst = sample_instance(params, t=0.0, R=0.0,
                               seed=child_seed(seed, TAG_INSTANCE, s),
                               with_noise=False)
        logzs[s] = gibbs_report(inst, params, 0.0, 0.0, cap=cap).log_Z
    estimate = first - float(logzs.mean()) / params.n
    if samples > 1:
        stderr = float(logzs.std(ddof=1)) / (params.n * math.sqrt(samples))
    else:
        stderr = math.nan
    return estimate, stderr
