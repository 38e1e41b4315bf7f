"""Fully enumerated quenched ensembles at tiny n.

Computes exact expectations over ALL sources of quenched randomness:
labels (2^n assignments), graphs (2^{n(n-1)/2} patterns), and the Gaussian
side-channel noise (tensor-product Gauss-Hermite quadrature, one axis per
node).  Every Gibbs bracket inside is itself an exact enumeration, so the
results are ground truth up to quadrature error in the Gaussian axes,
which decays super-exponentially in the order.

This is the oracle behind the posterior-truth interchange identities,
the overlap/L fluctuation comparison, the path-derivative cancellation,
and the free-energy-difference identity tests.

Implementation notes.  Both outer sums are collapsed onto orbit
representatives: labels down to one assignment per group-1 count k, and
graphs down to one representative per orbit of the label-preserving node
relabelings, with multiplicities.  This is exact because the tensor
quadrature grid is itself invariant under node relabeling, and because
the site/pair outputs are exchangeable, so only their per-group (and
per-pair-type) means are needed.  Per representative the channel part of
the Gibbs weights (the expensive exp over the quadrature grid) is reused
across graphs; each graph then costs one skinny matmul against a small
matrix of per-configuration observables.  Weights are used unshifted:
they stay inside double range unless r is microscopically small, far
outside the regime this oracle is for.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .exact import EnumerationSizeError, _dt_coeffs, _log_coeffs
from .model import ModelParams

ENSEMBLE_CAP = 5


@dataclass
class EnsembleMoments:
    t: float
    R: float
    gh_order: int
    e_f: float            # E[F]
    e_f2: float           # E[F^2]
    e_q: float            # E<Q>
    e_q2: float           # E<Q^2>
    e_l: float            # E<L>      (nan when R = 0)
    e_l2: float           # E<L^2>    (nan when R = 0)
    site_xq: np.ndarray   # E[X_i <x_i>]
    site_q2: np.ndarray   # E[<x_i>^2]
    pair_xq: np.ndarray   # E[X_i X_j <x_i x_j>]
    pair_q2: np.ndarray   # E[<x_i x_j>^2]
    e_sbm_dt: float       # (1/n) E<dH_graph/dt>   (nan at t = 1)
    e_logz: float

    @property
    def var_f(self):
        return self.e_f2 - self.e_f * self.e_f

    @property
    def var_q(self):
        """E<(Q - E<Q>)^2> = E<Q^2> - (E<Q>)^2."""
        return self.e_q2 - self.e_q * self.e_q

    @property
    def var_l(self):
        return self.e_l2 - self.e_l * self.e_l

    @property
    def e_dec_dt(self):
        """E<L_Y> where dH_channel/dt = q(t) * n * L_Y; equals E<L> + E<Q>/2."""
        return self.e_l + self.e_q / 2.0

    @property
    def nishimori_gap_site(self):
        return float(np.max(np.abs(self.site_xq - self.site_q2)))

    @property
    def nishimori_gap_pair(self):
        return float(np.max(np.abs(self.pair_xq - self.pair_q2)))


def _gh_nodes(order):
    """Nodes/weights for E over N(0,1): int f(z) e^{-z^2/2}/sqrt(2pi) dz."""
    h, w = hermgauss(order)
    return h * math.sqrt(2.0), w / math.sqrt(math.pi)


def _comb0(m, j):
    return math.comb(m, j) if 0 <= j <= m else 0


def _graph_orbits(n, k, iu, ju):
    """Graph-mask orbits under node relabelings fixing the first-k group.

    Returns {representative mask: orbit size}.  Representatives are the
    minimal masks of their orbits.
    """
    m = len(iu)
    slot = {(int(i), int(j)): s for s, (i, j) in enumerate(zip(iu, ju))}
    smaps = []
    for p in itertools.permutations(range(n)):
        if any((p[i] < k) != (i < k) for i in range(n)):
            continue
        smaps.append([slot[tuple(sorted((p[int(iu[s])], p[int(ju[s])])))]
                      for s in range(m)])
    reps = {}
    for g in range(1 << m):
        gb = [(g >> s) & 1 for s in range(m)]
        cmin = min(sum(gb[s] << sm[s] for s in range(m)) for sm in smaps)
        reps[cmin] = reps.get(cmin, 0) + 1
    return reps


def ensemble_moments(params: ModelParams, t, R, gh_order=16,
                     cap=ENSEMBLE_CAP) -> EnsembleMoments:
    n = params.n
    if n > cap:
        raise EnumerationSizeError(
            f"ensemble enumeration needs n <= {cap}, got {n}")
    ab = params.alphabet
    x1, x2 = ab.x1, ab.x2
    d = x1 - x2
    m = n * (n - 1) // 2
    nconf = 1 << n
    ngraph = 1 << m

    conf = np.arange(nconf, dtype=np.uint64)
    bits = ((conf[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)
            ).astype(np.float64)
    cfgx = x2 + d * bits                              # (C, n)
    sq = (cfgx * cfgx).sum(axis=1)                    # (C,)
    lnprior = (bits.sum(axis=1) * math.log(ab.r)
               + (n - bits.sum(axis=1)) * math.log(1.0 - ab.r))

    iu, ju = np.triu_indices(n, k=1)
    lp, lm = _log_coeffs(params, t)
    # per-pair, per-config log factors; pair type from the two config letters
    type_idx = (2 - bits[:, iu] - bits[:, ju]).astype(int)   # 0:11, 1:12, 2:22
    lp_pairs = lp[type_idx]                            # (C, m)
    lm_pairs = lm[type_idx]

    graphs = np.arange(ngraph, dtype=np.uint64)
    gbits = ((graphs[:, None] >> np.arange(max(m, 1), dtype=np.uint64))
             & np.uint64(1)).astype(np.float64)[:, :m]  # (Gn, m)
    # minus graph Hamiltonian for every (graph, config)
    mhs = gbits @ lp_pairs.T + (1.0 - gbits) @ lm_pairs.T   # (Gn, C)
    emhs = np.exp(mhs)
    if t < 1.0:
        alpha, beta = _dt_coeffs(params, t)
        wdt = gbits @ alpha[type_idx].T + (1.0 - gbits) @ beta[type_idx].T
    else:
        wdt = np.zeros((ngraph, nconf))

    st = math.sqrt(1.0 - t)

    # Gaussian axes (shared across all label assignments)
    if R > 0.0:
        z1, w1 = _gh_nodes(gh_order)
        grids = np.meshgrid(*([z1] * n), indexing="ij")
        znodes = np.stack([g.ravel() for g in grids], axis=1)   # (V, n)
        wgrids = np.meshgrid(*([w1] * n), indexing="ij")
        wz = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
        sr = math.sqrt(R)
        ez = np.exp(sr * (znodes @ cfgx.T))                     # (V, C)
        zn2 = znodes * znodes
        z_sum = znodes.sum(axis=1)                              # (V,)
        z_sum2 = z_sum * z_sum
        zpair = znodes[:, iu] * znodes[:, ju]                   # (V, m)
        k_l = 1.0 / (2.0 * sr * n)
    else:
        znodes = np.zeros((1, n))
        wz = np.ones(1)
        ez = np.ones((1, nconf))
        zn2 = np.zeros((1, n))
        z_sum = np.zeros(1)
        z_sum2 = np.zeros(1)
        zpair = np.zeros((1, m))
        k_l = 0.0

    # observable column layout for the per-graph matmul
    c_q = 1 + n + m
    c_q2 = c_q + 1
    c_lb = c_q + 2
    c_lb2 = c_q + 3
    c_lbx = c_q + 4
    c_dt = c_lbx + n
    ncol = c_dt + 1

    pairbits = bits[:, iu] * bits[:, ju]               # (C, m)
    x22 = x2 * x2
    dsq = x1 * x1 - x22

    # accumulators per canonical assignment: scalars, then per-group site
    # and diagonal means, and per-pair-type means (xq and q2 variants)
    sc = np.zeros((n + 1, 8))       # f, f2, q, q2, l, l2, sbm, logz
    site_g = np.zeros((n + 1, 2, 2))   # [k][group][xq, q2]
    diag_g = np.zeros((n + 1, 2, 2))
    pair_g = np.zeros((n + 1, 3, 2))   # [k][type 11/12/22][xq, q2]

    for k in range(n + 1):
        xa = np.where(np.arange(n) < k, x1, x2)
        prior_a = ab.r ** k * (1.0 - ab.r) ** (n - k)
        pe = params.p_bar + st * params.delta * xa[iu] * xa[ju]
        pe = np.clip(pe, 0.0, 1.0)
        lnpg = (gbits @ np.log(np.maximum(pe, 1e-300))
                + (1.0 - gbits) @ np.log(np.maximum(1.0 - pe, 1e-300)))
        pg = np.exp(lnpg)                              # (Gn,)

        cxa = cfgx @ xa                                # (C,)
        q_cfg = cxa / n
        l_base = (sq / 2.0 - cxa) / n
        # channel part of the weights, graph-independent; one exp per k
        bmat = ez * np.exp(lnprior + R * cxa - R * sq / 2.0)[None, :]

        m0 = np.empty((nconf, ncol))
        m0[:, 0] = 1.0
        m0[:, 1:1 + n] = bits
        m0[:, 1 + n:1 + n + m] = pairbits
        m0[:, c_q] = q_cfg
        m0[:, c_q2] = q_cfg * q_cfg
        m0[:, c_lb] = l_base
        m0[:, c_lb2] = l_base * l_base
        m0[:, c_lbx:c_lbx + n] = l_base[:, None] * cfgx
        m0[:, c_dt] = 0.0

        xpij = xa[iu] * xa[ju]
        t11 = ju < k
        t12 = (iu < k) & (ju >= k)
        t22 = iu >= k

        for g, mult in _graph_orbits(n, k, iu, ju).items():
            w0 = prior_a * pg[g] * mult
            if w0 == 0.0:
                continue
            mg = m0 * emhs[g][:, None]
            mg[:, c_dt] = wdt[g] * emhs[g]
            num = bmat @ mg                            # (V, ncol)
            zsum = num[:, 0]
            invz = 1.0 / zsum
            lnz = np.log(zsum)

            w_ag = w0 * wz                             # (V,)
            gv = w_ag * invz
            sc[k, 0] += -(w_ag @ lnz) / n
            sc[k, 1] += (w_ag @ (lnz * lnz)) / (n * n)
            sc[k, 7] += w_ag @ lnz
            lin = gv @ num[:, c_q:c_lb2 + 1]           # q, q2, lb, lb2
            sc[k, 2] += lin[0]
            sc[k, 3] += lin[1]
            if t < 1.0:
                sc[k, 6] += (gv @ num[:, c_dt]) / n

            bsite = num[:, 1:1 + n] * invz[:, None]    # <b_i>, (V, n)
            mx = x2 + d * bsite                        # <x_i>
            rs = w_ag @ mx                             # (n,)
            rs2 = w_ag @ (mx * mx)
            dxx = x22 + dsq * bsite                    # <x_i^2>
            rd = w_ag @ dxx
            rd2 = w_ag @ (dxx * dxx)
            if k > 0:
                site_g[k, 0, 0] += x1 * rs[:k].mean()
                site_g[k, 0, 1] += rs2[:k].mean()
                diag_g[k, 0, 0] += x1 * x1 * rd[:k].mean()
                diag_g[k, 0, 1] += rd2[:k].mean()
            if k < n:
                site_g[k, 1, 0] += x2 * rs[k:].mean()
                site_g[k, 1, 1] += rs2[k:].mean()
                diag_g[k, 1, 0] += x2 * x2 * rd[k:].mean()
                diag_g[k, 1, 1] += rd2[k:].mean()
            if m:
                bpair = num[:, 1 + n:1 + n + m] * invz[:, None]
                pxx = (x22 + x2 * d * (bsite[:, iu] + bsite[:, ju])
                       + d * d * bpair)                # <x_i x_j>, i < j
                rp = (w_ag @ pxx) * xpij
                rp2 = w_ag @ (pxx * pxx)
                for ti, mask in enumerate((t11, t12, t22)):
                    if mask.any():
                        pair_g[k, ti, 0] += rp[mask].mean()
                        pair_g[k, ti, 1] += rp2[mask].mean()

            if R > 0.0:
                # <L> and <L^2>; the z-linear part of L is reassembled from
                # site/pair brackets instead of a per-config weight pass
                blbx = num[:, c_lbx:c_lbx + n] * invz[:, None]
                zb = (znodes * bsite).sum(axis=1)
                zxb = x2 * z_sum + d * zb              # sum_i z_i <x_i>
                sc[k, 4] += lin[2] - k_l * (w_ag @ zxb)
                lbzx = (znodes * blbx).sum(axis=1)
                z2b = (zn2 * bsite).sum(axis=1)
                q2z = (x22 * z_sum2 + 2.0 * x2 * d * zb * z_sum
                       + (dsq - 2.0 * x2 * d) * z2b)
                if m:
                    q2z += 2.0 * d * d * (zpair * bpair).sum(axis=1)
                sc[k, 5] += (lin[3] - 2.0 * k_l * (w_ag @ lbzx)
                             + k_l * k_l * (w_ag @ q2z))

    # recombine canonical assignments over their relabeling orbits
    scal = np.zeros(8)
    site_val = np.zeros(2)
    diag_val = np.zeros(2)
    off_val = np.zeros(2)
    for k in range(n + 1):
        scal += math.comb(n, k) * sc[k]
        c1 = _comb0(n - 1, k - 1)
        c2 = _comb0(n - 1, k)
        site_val += c1 * site_g[k, 0] + c2 * site_g[k, 1]
        diag_val += c1 * diag_g[k, 0] + c2 * diag_g[k, 1]
        off_val += (_comb0(n - 2, k - 2) * pair_g[k, 0]
                    + 2 * _comb0(n - 2, k - 1) * pair_g[k, 1]
                    + _comb0(n - 2, k) * pair_g[k, 2])

    site_xq = np.full(n, site_val[0])
    site_q2 = np.full(n, site_val[1])
    pair_xq = np.full((n, n), off_val[0])
    np.fill_diagonal(pair_xq, diag_val[0])
    pair_q2 = np.full((n, n), off_val[1])
    np.fill_diagonal(pair_q2, diag_val[1])

    return EnsembleMoments(
        t=float(t), R=float(R), gh_order=int(gh_order),
        e_f=scal[0], e_f2=scal[1], e_q=scal[2], e_q2=scal[3],
        e_l=scal[4] if R > 0.0 else math.nan,
        e_l2=scal[5] if R > 0.0 else math.nan,
        site_xq=site_xq, site_q2=site_q2,
        pair_xq=pair_xq, pair_q2=pair_q2,
        e_sbm_dt=scal[6] if t < 1.0 else math.nan,
        e_logz=scal[7])
