"""Adaptive interpolation between the graph model and scalar channels.

The interpolating family carries the pair couplings at strength
sqrt(1 - t) while a per-site Gaussian side channel runs at SNR R(t).
Choosing R to solve the drift ODE R' = lambda_n * E<Q> turns the
free-energy chain rule into a decomposition of the per-node mutual
information: a single-letter potential evaluated at R(1), a path
variance term, a quadratic fluctuation integral, and a boundary
correction.  This module solves the ODE, audits that decomposition
term by term, and runs the supporting monotonicity, concentration and
integration-by-parts checks at enumerable sizes.
"""

import dataclasses
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .model import ModelParams, params_from_channel
from .sampling import PlantedInstance, sample_instance
from .exact import (ENUM_CAP_DEFAULT, EnumerationSizeError, _log_coeffs,
                    child_seed, gibbs_report, mi_via_free_energy)
from .mcmc import McmcConfig, mcmc_brackets
from .ensemble import ensemble_moments
from .replica import psi
from .rng import TAG_AUDIT, TAG_EPSNODE, TAG_INSTANCE, TAG_MC, TAG_MCMC

ESTIMATORS = ("exact", "mcmc")

# instance streams are keyed by the time value, not the node index, so
# grids that share a time point share quenched randomness; the scale is
# divisible by every step count in routine use (60, 100, 200, ...)
_T_TAG_SCALE = 3603600


def _t_tag(t):
    return int(round(float(t) * _T_TAG_SCALE))


@dataclass(frozen=True)
class EstimatorConfig:
    """Controls the per-node Gibbs bracket estimates along a path.

    instances is the number of fresh planted instances averaged at each
    node.  For the mcmc estimator, `mcmc` supplies the chain schedule;
    its seed field is ignored (chains are re-keyed per node and
    instance so paths with common random numbers stay aligned).
    """
    instances: int = 64
    seed: int = 0
    mcmc: Optional[McmcConfig] = None

    def __post_init__(self):
        if self.instances < 1:
            raise ValueError("instances must be >= 1")


@dataclass
class InterpolationPath:
    epsilon: float
    t_grid: np.ndarray
    R_values: np.ndarray
    q_values: np.ndarray
    q_stderrs: np.ndarray
    estimator: str
    params: ModelParams

    def to_record(self):
        return {
            "epsilon": float(self.epsilon),
            "estimator": self.estimator,
            "t": [float(v) for v in self.t_grid],
            "R": [float(v) for v in self.R_values],
            "q": [float(v) for v in self.q_values],
            "q_stderr": [float(v) for v in self.q_stderrs],
            "params": self.params.to_record(),
        }


def _check_estimator(estimator, params, config):
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    if estimator == "exact" and params.n > ENUM_CAP_DEFAULT:
        raise EnumerationSizeError(
            f"n={params.n} exceeds enumeration cap {ENUM_CAP_DEFAULT}")
    if estimator == "mcmc" and config.mcmc is None:
        raise ValueError("mcmc estimator requires config.mcmc")


def _node_report(inst, params, t, R, estimator, config, chain_key,
                 want_sbm_dt=False):
    if estimator == "exact":
        return gibbs_report(inst, params, t, R, want_sbm_dt=want_sbm_dt)
    cfg = dataclasses.replace(config.mcmc, seed=chain_key)
    return mcmc_brackets(inst, params, t, R, cfg)


def _drift_at(params, t, R, estimator, config, tag, node):
    """lambda_n * (average over fresh instances of <Q>), with stderr."""
    vals = np.empty(config.instances)
    for m in range(config.instances):
        inst = sample_instance(params, t, R,
                               seed=child_seed(config.seed, tag, node, m))
        rep = _node_report(inst, params, t, R, estimator, config,
                           child_seed(config.seed, TAG_MCMC, tag, node, m))
        vals[m] = rep.Q_mean
    lam = params.lambda_n
    mean = lam * float(vals.mean())
    if config.instances > 1:
        se = lam * float(vals.std(ddof=1)) / math.sqrt(config.instances)
    else:
        se = math.nan
    return mean, se


def solve_R_star(params, epsilon, K, estimator="exact", config=None):
    """Forward-Euler solve of R' = lambda_n * E<Q> from R(0) = epsilon.

    The drift at node k is estimated at (t_k, R_k) over config.instances
    fresh planted instances.  Negative estimates are clamped to zero
    (the drift is a quenched average of a square); a clamp beyond the
    3-stderr noise floor raises a warning.  Instance seeds depend only
    on (seed, node, replicate), never on epsilon or R, so solves at
    perturbed epsilon share their quenched randomness.
    """
    config = config or EstimatorConfig()
    _check_estimator(estimator, params, config)
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if K < 1:
        raise ValueError("K must be >= 1")
    t_grid = np.linspace(0.0, 1.0, K + 1)
    R = np.empty(K + 1)
    q = np.empty(K + 1)
    se = np.empty(K + 1)
    R[0] = float(epsilon)
    dt = 1.0 / K
    for k in range(K + 1):
        qk, sek = _drift_at(params, t_grid[k], R[k], estimator, config,
                            TAG_INSTANCE, _t_tag(t_grid[k]))
        if qk < 0.0:
            floor = 3.0 * sek if math.isfinite(sek) else 0.0
            if qk < -(floor + 1e-12):
                warnings.warn(
                    f"drift {qk:.3e} at t={t_grid[k]:.4f} is negative "
                    "beyond its noise floor; clamped to 0", RuntimeWarning)
            qk = 0.0
        q[k] = qk
        se[k] = sek
        if k < K:
            R[k + 1] = R[k] + dt * qk
    return InterpolationPath(epsilon=float(epsilon), t_grid=t_grid,
                             R_values=R, q_values=q, q_stderrs=se,
                             estimator=estimator, params=params)


def liouville_monotonicity(params, epsilon, d_eps=None, K=100,
                           estimator="exact", config=None):
    """Finite-difference dR*/d(epsilon) per node; theory demands >= 1.

    Both solves share instance seeds (common random numbers), so the
    difference quotient is far less noisy than either path alone.
    """
    if d_eps is None:
        d_eps = epsilon / 10.0 if epsilon > 0 else 1e-2
    if d_eps <= 0:
        raise ValueError("d_eps must be > 0")
    base = solve_R_star(params, epsilon, K, estimator, config)
    bump = solve_R_star(params, epsilon + d_eps, K, estimator, config)
    # divide by the realized float perturbation so node 0 is exactly 1
    d_real = (epsilon + d_eps) - epsilon
    return (bump.R_values - base.R_values) / d_real


@dataclass
class SumRuleReport:
    """Term-by-term audit of the interpolation decomposition.

    lhs_mi_per_node comes from the independent free-energy estimator;
    rhs_total = psi_term + r1 - r2_integral - r3.  r3 excludes its
    vanishing finite-size remainder (not computable), so residual
    absorbs that remainder along with quadrature and MC error.

    Node diagnostics: d1 is the leading quadratic-overlap form of the
    graph-side derivative, d2 = -(q_k/2) * E<Q> is the channel-side
    derivative (exact form), d3 is the within-bracket derivative
    observable whose quenched average vanishes identically; it is NaN
    at t = 1 and wherever R = 0 with q > 0 (the raw observable is
    singular there).
    """
    lhs_mi_per_node: float
    lhs_stderr: float
    psi_term: float
    r1: float
    r2_integral: float
    r3: float
    rhs_total: float
    residual: float
    residual_stderr: float
    r2_at_nodes: np.ndarray
    d1_at_nodes: np.ndarray
    d2_at_nodes: np.ndarray
    d3_at_nodes: np.ndarray
    d3_stderr_at_nodes: np.ndarray
    q_audit: np.ndarray
    q_audit_stderr: np.ndarray
    path: InterpolationPath
    note: str

    def to_record(self):
        rec = {
            "lhs_mi_per_node": float(self.lhs_mi_per_node),
            "lhs_stderr": float(self.lhs_stderr),
            "psi_term": float(self.psi_term),
            "r1": float(self.r1),
            "r2_integral": float(self.r2_integral),
            "r3": float(self.r3),
            "rhs_total": float(self.rhs_total),
            "residual": float(self.residual),
            "residual_stderr": float(self.residual_stderr),
            "r2_at_nodes": [float(v) for v in self.r2_at_nodes],
            "d1_at_nodes": [float(v) for v in self.d1_at_nodes],
            "d2_at_nodes": [float(v) for v in self.d2_at_nodes],
            "d3_at_nodes": [float(v) for v in self.d3_at_nodes],
            "d3_stderr_at_nodes": [float(v)
                                   for v in self.d3_stderr_at_nodes],
            "q_audit": [float(v) for v in self.q_audit],
            "q_audit_stderr": [float(v) for v in self.q_audit_stderr],
            "path": self.path.to_record(),
            "note": self.note,
        }
        return rec


def _constant_path(params, epsilon, q_const, K):
    t_grid = np.linspace(0.0, 1.0, K + 1)
    q = np.full(K + 1, float(q_const))
    R = np.empty(K + 1)
    R[0] = float(epsilon)
    # left-Riemann march, so R[-1] matches the audit's discrete integral
    R[1:] = epsilon + np.cumsum(q[:-1]) / K
    return InterpolationPath(epsilon=float(epsilon), t_grid=t_grid,
                             R_values=R, q_values=q,
                             q_stderrs=np.zeros(K + 1),
                             estimator="exact", params=params)


def sum_rule_audit(params, epsilon, q_path="solved", K=60,
                   estimator="exact", config=None, mi_samples=20000,
                   eps_prime_nodes=8):
    """Audit the per-node MI decomposition on a chosen q path.

    q_path is "solved" (the drift ODE solution), "zero", or a number
    (constant drift).  Path integrals of q and q^2 use the left-Riemann
    rule so they agree exactly with the Euler march (r1 is then a
    discrete variance, manifestly >= 0); the fluctuation term r2 uses
    the trapezoid rule on its own node values.  Audit brackets come
    from fresh instances, independent of the ones that solved the path.
    """
    config = config or EstimatorConfig()
    _check_estimator(estimator, params, config)
    lam = params.lambda_n
    if lam <= 0:
        raise ValueError("decomposition needs lambda_n > 0")
    if q_path == "solved":
        path = solve_R_star(params, epsilon, K, estimator, config)
    elif q_path == "zero":
        path = _constant_path(params, epsilon, 0.0, K)
    elif isinstance(q_path, (int, float)) and not isinstance(q_path, bool):
        if q_path < 0:
            raise ValueError("constant q must be >= 0")
        path = _constant_path(params, epsilon, float(q_path), K)
    else:
        raise ValueError(f"unknown q_path {q_path!r}")

    t_grid = path.t_grid
    nodes = len(t_grid)
    M = config.instances
    r2_at = np.empty(nodes)
    r2_se = np.empty(nodes)
    d1 = np.empty(nodes)
    d2 = np.empty(nodes)
    d3 = np.empty(nodes)
    d3_se = np.empty(nodes)
    q_audit = np.empty(nodes)
    q_audit_se = np.empty(nodes)
    ab = params.alphabet
    dx = ab.x1 - ab.x2
    for k in range(nodes):
        t_k = float(t_grid[k])
        R_k = float(path.R_values[k])
        q_k = float(path.q_values[k])
        q1 = np.empty(M)
        q2 = np.empty(M)
        d3v = np.empty(M)
        want_dt = estimator == "exact" and t_k < 1.0
        for m in range(M):
            inst = sample_instance(
                params, t_k, R_k,
                seed=child_seed(config.seed, TAG_AUDIT, _t_tag(t_k), m))
            rep = _node_report(
                inst, params, t_k, R_k, estimator, config,
                child_seed(config.seed, TAG_MCMC, TAG_AUDIT,
                           _t_tag(t_k), m),
                want_sbm_dt=want_dt)
            q1[m] = rep.Q_mean
            q2[m] = rep.Q2_mean
            sbm = rep.sbm_dt_mean if want_dt else math.nan
            if q_k == 0.0:
                dec = 0.0
            elif R_k > 0.0:
                dec = -q_k * (rep.L_mean + rep.Q_mean / 2.0)
            else:
                dec = math.nan
            d3v[m] = -(sbm + dec)
        r2v = lam * lam * q2 - 2.0 * lam * q_k * q1 + q_k * q_k
        r2_at[k] = float(r2v.mean())
        r2_se[k] = (float(r2v.std(ddof=1)) / math.sqrt(M) if M > 1
                    else math.nan)
        d1[k] = 0.25 * lam * float(q2.mean())
        d2[k] = -0.5 * q_k * float(q1.mean())
        d3[k] = float(d3v.mean())
        d3_se[k] = (float(d3v.std(ddof=1)) / math.sqrt(M) if M > 1
                    else math.nan)
        q_audit[k] = lam * float(q1.mean())
        q_audit_se[k] = (lam * float(q1.std(ddof=1)) / math.sqrt(M)
                         if M > 1 else math.nan)

    dt = 1.0 / K
    q_left = path.q_values[:-1]
    int_q = dt * float(q_left.sum())
    int_q2 = dt * float((q_left * q_left).sum())
    r1 = (int_q2 - int_q * int_q) / (4.0 * lam)
    R_final = float(path.R_values[-1])
    psi_term = float(psi(R_final, lam, params.r))
    r2_integral = float(np.trapezoid(r2_at, t_grid)) / (4.0 * lam)
    r2_int_se = float(np.sqrt(np.trapezoid(r2_se ** 2, t_grid) * dt)) \
        / (4.0 * lam)

    if epsilon > 0:
        gl_x, gl_w = np.polynomial.legendre.leggauss(eps_prime_nodes)
        eps_pts = 0.5 * epsilon * (gl_x + 1.0)
        eps_wts = 0.5 * epsilon * gl_w
        q_eps = np.empty(eps_prime_nodes)
        q_eps_se = np.empty(eps_prime_nodes)
        for j, ep in enumerate(eps_pts):
            vals = np.empty(M)
            for m in range(M):
                inst = sample_instance(
                    params, 0.0, float(ep),
                    seed=child_seed(config.seed, TAG_EPSNODE, j, m))
                rep = _node_report(
                    inst, params, 0.0, float(ep), estimator, config,
                    child_seed(config.seed, TAG_MCMC, TAG_EPSNODE, j, m))
                vals[m] = rep.Q_mean
            q_eps[j] = float(vals.mean())
            q_eps_se[j] = (float(vals.std(ddof=1)) / math.sqrt(M)
                           if M > 1 else math.nan)
        int_eps = float(eps_wts @ q_eps)
        int_eps_se = float(np.sqrt((eps_wts ** 2) @ (q_eps_se ** 2)))
    else:
        int_eps = 0.0
        int_eps_se = 0.0
    r3 = (epsilon / (4.0 * lam)) * (epsilon + 2.0 * int_q) \
        - 0.5 * int_eps

    lhs, lhs_se = mi_via_free_energy(params, mi_samples,
                                     child_seed(config.seed, TAG_MC, 0))
    rhs = psi_term + r1 - r2_integral - r3
    residual = lhs - rhs
    residual_se = math.sqrt(lhs_se ** 2 + r2_int_se ** 2
                            + (0.5 * int_eps_se) ** 2)
    note = ("r3 excludes its vanishing finite-size remainder; residual "
            "carries that remainder plus quadrature and MC error")
    return SumRuleReport(
        lhs_mi_per_node=float(lhs), lhs_stderr=float(lhs_se),
        psi_term=psi_term, r1=r1, r2_integral=r2_integral, r3=r3,
        rhs_total=float(rhs), residual=float(residual),
        residual_stderr=float(residual_se), r2_at_nodes=r2_at,
        d1_at_nodes=d1, d2_at_nodes=d2, d3_at_nodes=d3,
        d3_stderr_at_nodes=d3_se, q_audit=q_audit,
        q_audit_stderr=q_audit_se, path=path, note=note)


@dataclass
class OverlapVarianceScan:
    n_values: np.ndarray
    s_values: np.ndarray
    variances: np.ndarray
    bound_proxies: np.ndarray
    slope: float

    def to_record(self):
        return {
            "n": [int(v) for v in self.n_values],
            "s_n": [float(v) for v in self.s_values],
            "variance": [float(v) for v in self.variances],
            "bound_proxy": [float(v) for v in self.bound_proxies],
            "slope": float(self.slope),
        }


def overlap_variance_scan(params_family, t=0.0, theta=0.2, eps_nodes=5,
                          estimator="exact", config=None, K=40):
    """Epsilon-averaged posterior overlap variance per model size.

    For each model the variance E<(Q - E<Q>)^2> is averaged over an
    epsilon grid on [s_n, 2 s_n], s_n = n^(-theta), with R on the
    solved drift path at time t (at t = 0 the path gives R = epsilon
    exactly, no solve needed).  Returns the per-n averages and the
    fitted log-log slope against the (s_n^4 n)^(1/3) rate.  The plug-in
    variance estimate is biased low by Var(mean)/instances, identical
    machinery at every n, so the trend is unaffected.
    """
    config = config or EstimatorConfig()
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    params_family = list(params_family)
    if not params_family:
        raise ValueError("params_family is empty")
    M = config.instances
    n_vals = np.array([p.n for p in params_family], dtype=np.int64)
    s_vals = np.array([p.n ** (-theta) for p in params_family])
    variances = np.empty(len(params_family))
    for a, params in enumerate(params_family):
        _check_estimator(estimator, params, config)
        s_n = s_vals[a]
        grid = np.linspace(s_n, 2.0 * s_n, eps_nodes)
        var_eps = np.empty(eps_nodes)
        for j, eps in enumerate(grid):
            if t == 0.0:
                R_t = float(eps)
            else:
                path = solve_R_star(params, float(eps), K, estimator,
                                    config)
                R_t = float(np.interp(t, path.t_grid, path.R_values))
            q1 = np.empty(M)
            q2 = np.empty(M)
            for m in range(M):
                inst = sample_instance(
                    params, t, R_t,
                    seed=child_seed(config.seed, TAG_INSTANCE,
                                    params.n, j, m))
                rep = _node_report(
                    inst, params, t, R_t, estimator, config,
                    child_seed(config.seed, TAG_MCMC, params.n, j, m))
                q1[m] = rep.Q_mean
                q2[m] = rep.Q2_mean
            var_eps[j] = float(q2.mean()) - float(q1.mean()) ** 2
        # trapezoid over [s_n, 2 s_n] divided by s_n = the epsilon average
        variances[a] = float(np.trapezoid(var_eps, grid)) / s_n
    proxies = (s_vals ** 4 * n_vals) ** (1.0 / 3.0)
    if len(params_family) > 1 and np.all(variances > 0.0):
        slope = float(np.polyfit(np.log(proxies), np.log(variances), 1)[0])
    else:
        slope = math.nan
    return OverlapVarianceScan(n_values=n_vals, s_values=s_vals,
                               variances=variances, bound_proxies=proxies,
                               slope=slope)


@dataclass
class FreeEnergyVariance:
    n_values: np.ndarray
    variances: np.ndarray
    slope: float
    samples: int
    t: float
    R: float

    def to_record(self):
        return {
            "n": [int(v) for v in self.n_values],
            "variance": [float(v) for v in self.variances],
            "slope": float(self.slope),
            "samples": int(self.samples),
            "t": float(self.t),
            "R": float(self.R),
        }


def free_energy_variance(params, n_grid, samples, seed, t=0.0, R=0.0):
    """Sample variance of the free energy per node across sizes.

    Each size reuses params' (r, p_bar, lambda_n) channel; theory puts
    Var(F) at O(1/n), so the fitted log-log slope should sit near -1.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    n_vals = np.array(sorted(int(v) for v in n_grid), dtype=np.int64)
    variances = np.empty(len(n_vals))
    for a, n in enumerate(n_vals):
        pn = params_from_channel(int(n), params.r, params.p_bar,
                                 params.lambda_n)
        fs = np.empty(samples)
        for m in range(samples):
            inst = sample_instance(pn, t, R,
                                   seed=child_seed(seed, TAG_INSTANCE,
                                                   int(n), m))
            fs[m] = gibbs_report(inst, pn, t, R).F
        variances[a] = float(fs.var(ddof=1))
    if len(n_vals) > 1 and np.all(variances > 0.0):
        slope = float(np.polyfit(np.log(n_vals), np.log(variances), 1)[0])
    else:
        slope = math.nan
    return FreeEnergyVariance(n_values=n_vals, variances=variances,
                              slope=slope, samples=int(samples),
                              t=float(t), R=float(R))


# Test functions for the moment-expansion identity, with supremum
# bounds on derivatives 1..4.  Bounds are safe upper roundings of the
# analytic extrema; the suite re-verifies them on a dense grid.
def _bump(u):
    w = 1.0 - u * u
    return np.where(np.abs(u) < 1.0, w ** 5, 0.0)


def _bump_prime(u):
    w = 1.0 - u * u
    return np.where(np.abs(u) < 1.0, -10.0 * u * w ** 4, 0.0)


G_FUNCTIONS = {
    "linear": (lambda u: 0.3 + 1.7 * u,
               lambda u: 1.7 * np.ones_like(np.asarray(u, dtype=float)),
               (1.7, 0.0, 0.0, 0.0)),
    "cos": (np.cos, lambda u: -np.sin(u), (1.0, 1.0, 1.0, 1.0)),
    "tanh": (np.tanh, lambda u: 1.0 / np.cosh(u) ** 2,
             (1.0, 0.7699, 2.0, 4.086)),
    "logistic": (lambda u: 1.0 / (1.0 + np.exp(-u)),
                 lambda u: np.exp(-u) / (1.0 + np.exp(-u)) ** 2,
                 (0.25, 0.09623, 0.125, 0.128)),
    "bump": (_bump, _bump_prime, (2.0812, 10.0, 44.0, 240.0)),
}

U_LAWS = ("bernoulli", "shifted-bernoulli", "small-gaussian")


class IbpCheck(NamedTuple):
    residual: float
    bound: float
    passed: bool


def _affine_ibp_check(pts, wts):
    """Exact rational evaluation for the affine test function.

    With g(u) = 3/10 + (17/10) u the identity has no Taylor remainder;
    rational arithmetic keeps the cancellation exact where floating
    summation would leave ~1e-17 of rounding.
    """
    a = Fraction(3, 10)
    b = Fraction(17, 10)
    w = [Fraction(float(v)) for v in wts]
    tot = sum(w)
    w = [v / tot for v in w]
    u = [Fraction(float(v)) for v in pts]
    m1 = sum(wv * uv for wv, uv in zip(w, u))
    m2 = sum(wv * uv * uv for wv, uv in zip(w, u))
    e_ug = sum(wv * uv * (a + b * uv) for wv, uv in zip(w, u))
    e_gp = sum(wv * b for wv in w)
    residual = float(abs(e_ug - e_gp * m2 - a * m1))
    return IbpCheck(residual=residual, bound=0.0,
                    passed=bool(residual <= 1e-12))


def _law_support(u_law, p, mu, sigma):
    if u_law == "bernoulli":
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        return np.array([1.0, 0.0]), np.array([p, 1.0 - p])
    if u_law == "shifted-bernoulli":
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        return np.array([1.0 - p, -p]), np.array([p, 1.0 - p])
    if u_law == "small-gaussian":
        if sigma <= 0:
            raise ValueError("sigma must be > 0")
        # Gauss-Hermite; exact for the moments, spectrally accurate for
        # the smooth g expectations
        x, w = np.polynomial.hermite.hermgauss(81)
        return mu + math.sqrt(2.0) * sigma * x, w / math.sqrt(math.pi)
    raise ValueError(f"unknown U law {u_law!r}")


def approx_ibp_check(g_id, u_law, p=0.3, mu=0.0, sigma=0.1):
    """Check |E[Ug(U)] - E[g'(U)]E[U^2] - g(0)E[U]| against its bound.

    The bound is C2(|EU^3|/2 + E[U^2]|EU|) + C3(E[U^4]/24 + E[U^2]^2/2)
    + C4 |EU^3| E[U^2]/6 with C_k the supremum of |g^(k)|.  Every
    expectation is a finite sum for the two-point laws and a
    Gauss-Hermite sum for the small-gaussian law.  The affine test
    function runs in exact rational arithmetic (weights normalized to
    total mass one), so its vanishing residual is exact, not rounded.
    """
    if g_id not in G_FUNCTIONS:
        raise ValueError(f"unknown test function {g_id!r}")
    g, gp, (c1, c2, c3, c4) = G_FUNCTIONS[g_id]
    pts, wts = _law_support(u_law, p, mu, sigma)
    if c2 == c3 == c4 == 0.0:
        return _affine_ibp_check(pts, wts)
    m1 = float(wts @ pts)
    m2 = float(wts @ pts ** 2)
    m3 = float(wts @ pts ** 3)
    m4 = float(wts @ pts ** 4)
    e_ug = float(wts @ (pts * g(pts)))
    e_gp = float(wts @ gp(pts))
    g0 = float(g(np.array(0.0)))
    residual = abs(e_ug - e_gp * m2 - g0 * m1)
    bound = (c2 * (abs(m3) / 2.0 + m2 * abs(m1))
             + c3 * (m4 / 24.0 + m2 * m2 / 2.0)
             + c4 * abs(m3) * m2 / 6.0)
    return IbpCheck(residual=residual, bound=bound,
                    passed=bool(residual <= bound + 1e-12))


def _enum_bits(n):
    cfgs = np.arange(1 << n, dtype=np.int64)
    return ((cfgs[:, None] >> np.arange(n)) & 1).astype(np.float64)


def edge_relaxed_log_z(instance, params, t, i, j, edge_weight,
                       cap=ENUM_CAP_DEFAULT):
    """log Z with pair (i, j)'s graph term at a real-valued edge weight.

    The pair energy is affine in the edge variable, so evaluating it at
    a real weight g means g * (present coefficient) + (1 - g) *
    (absent coefficient).  edge_weight equal to the instance's actual
    bit reproduces the ordinary partition function.
    """
    n = instance.n
    if n > cap:
        raise EnumerationSizeError(f"n={n} exceeds enumeration cap {cap}")
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValueError("need distinct site indices in range")
    lp, lm = _log_coeffs(params, t)
    ab = params.alphabet
    x1, x2 = ab.x1, ab.x2
    B = _enum_bits(n)
    k1 = B.sum(axis=1)
    A = instance.adjacency_matrix().astype(np.float64)
    A[i, j] = A[j, i] = 0.0
    deg = A.sum(axis=1)
    e11 = 0.5 * np.einsum("ck,ck->c", B @ A, B)
    e1dot = B @ deg
    e12 = e1dot - 2.0 * e11
    e22 = 0.5 * float(deg.sum()) - e11 - e12
    bi = B[:, i]
    bj = B[:, j]
    both = bi * bj
    one = bi + bj - 2.0 * both
    none = 1.0 - bi - bj + both
    p11 = 0.5 * k1 * (k1 - 1.0) - both
    p12 = k1 * (n - k1) - one
    p22 = 0.5 * (n - k1) * (n - k1 - 1.0) - none
    logw = (k1 * math.log(params.r)
            + (n - k1) * math.log(1.0 - params.r)
            + e11 * lp[0] + e12 * lp[1] + e22 * lp[2]
            + (p11 - e11) * lm[0] + (p12 - e12) * lm[1]
            + (p22 - e22) * lm[2])
    if instance.R > 0.0:
        if instance.y is None:
            raise ValueError("R > 0 requires side observations y")
        d = x1 - x2
        sv = B @ (instance.y * d) + x2 * float(instance.y.sum())
        sq = n * x2 * x2 + (x1 * x1 - x2 * x2) * k1
        logw = logw + math.sqrt(instance.R) * sv - 0.5 * instance.R * sq
    g = float(edge_weight)
    pair_p = lp[0] * both + lp[1] * one + lp[2] * none
    pair_m = lm[0] * both + lm[1] * one + lm[2] * none
    logw = logw + g * pair_p + (1.0 - g) * pair_m
    m = float(logw.max())
    return m + math.log(float(np.exp(logw - m).sum()))


class EdgeIbpCheck(NamedTuple):
    lhs: float
    rhs: float
    err: float


def gibbs_edge_ibp_residual(instance, params, t, i, j, fd_step=1e-5):
    """Both sides of the edge-variable integration-by-parts identity.

    lhs = E[G_ij F] over the conditional edge law; rhs uses the edge
    derivative of the free energy (central differences in the relaxed
    edge weight) plus the F(edge absent) boundary term.  F is the free
    energy per node, -log(Z)/n.
    """
    n = instance.n
    X = instance.labels
    p_ij = float(params.edge_probability(X[i], X[j], t))

    def f_of(g):
        return -edge_relaxed_log_z(instance, params, t, i, j, g) / n

    h = float(fd_step)
    f1 = f_of(1.0)
    f0 = f_of(0.0)
    d1 = (f_of(1.0 + h) - f_of(1.0 - h)) / (2.0 * h)
    d0 = (f_of(h) - f_of(-h)) / (2.0 * h)
    lhs = p_ij * f1
    e_fprime = p_ij * d1 + (1.0 - p_ij) * d0
    rhs = e_fprime * p_ij + f0 * p_ij
    return EdgeIbpCheck(lhs=lhs, rhs=rhs, err=abs(lhs - rhs))


def channel_gap_identity(params, epsilon, eps_nodes=12, gh_order=20):
    """Free-energy drop from raising the side-channel SNR at t = 0,
    against the overlap half-integral.  Equal up to quadrature error.

    Both sides come from full ensemble enumeration (tiny n only):
    lhs = E[F at R=0] - E[F at R=epsilon], rhs = (1/2) times the
    Gauss-Legendre integral over [0, epsilon] of E<Q> at t = 0.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    lhs = (ensemble_moments(params, 0.0, 0.0, gh_order=gh_order).e_f
           - ensemble_moments(params, 0.0, epsilon,
                              gh_order=gh_order).e_f)
    gl_x, gl_w = np.polynomial.legendre.leggauss(eps_nodes)
    pts = 0.5 * epsilon * (gl_x + 1.0)
    wts = 0.5 * epsilon * gl_w
    vals = np.array([ensemble_moments(params, 0.0, float(ep),
                                      gh_order=gh_order).e_q
                     for ep in pts])
    rhs = 0.5 * float(wts @ vals)
    return lhs, rhs


def bracket_derivative_gap(params, t, R, gh_order=20):
    """Ensemble averages of the two within-bracket derivative pieces.

    Returns (channel piece per unit drift, graph piece); the posterior-
    mean identity forces both to vanish, so each should be numerically
    zero.  The graph piece is NaN at t = 1.
    """
    m = ensemble_moments(params, t, R, gh_order=gh_order)
    return m.e_dec_dt, m.e_sbm_dt
