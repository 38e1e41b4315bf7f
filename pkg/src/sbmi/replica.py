"""Single-letter variational potential and its phase diagram.

The asymptotic mutual information per node is the minimum over q in
[0, lambda] of

    psi(q) = lambda/4 + q^2/(4 lambda)
             - E ln sum_x P_r(x) exp(sqrt(q) Z x + q X x - q x^2/2),

with Z standard normal and X drawn from the two-letter prior.  The outer
expectation is a two-point sum over X times a quadrature over Z, and the
inner sum is evaluated in log space.  With two letters the inner log-sum
is an affine function of Z plus softplus(alpha Z + beta) where
alpha = sqrt(q) (x1 - x2), so the Z-expectation reduces to moments of a
logistic function of a Gaussian.  Plain Gauss-Hermite of moderate order
cannot resolve the logistic transition once alpha is a few units wide
(the nodes straddle it), so above a switch point the expectation is
computed exactly for the piecewise-linear part (a Phi/phi closed form)
plus a fixed Gauss-Legendre panel rule for the exponentially localized
remainder; below the switch plain Gauss-Hermite at the requested order
is used and is accurate to machine precision.  Both branches agree to
~1e-14 at the switch.  Everything here is a pure function of
(q, lambda, r).
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import expit, ndtr

from .model import Alphabet

QUAD_ORDER_DEFAULT = 61
GRID_POINTS_DEFAULT = 2048

# Tricritical prior asymmetry: the transition in lambda is continuous for
# class-1 probability at or above this value and first-order below it.
R_STAR_TRICRITICAL = (1.0 - 1.0 / math.sqrt(3.0)) / 2.0

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_SQRT2PI = math.sqrt(2.0 * math.pi)

# Gauss-Hermite handles the logistic transition only while it is wider
# than the node spacing; beyond this alpha the panel branch takes over.
_ALPHA_GH_MAX = 1.5

# fixed Gauss-Legendre panels for the residual ln(1+e^{-|v|}) and
# sigma(v)-step(v) terms; integrands are smooth inside every panel (the
# |v| kink sits on a panel edge) and < 2e-22 beyond |v| = 50
_PANEL_EDGES = (-50.0, -25.0, -12.0, -6.0, -3.0, 0.0,
                3.0, 6.0, 12.0, 25.0, 50.0)


def _panel_rule(nodes_per_panel=24):
    gx, gw = np.polynomial.legendre.leggauss(nodes_per_panel)
    vs, ws = [], []
    for a, b in zip(_PANEL_EDGES[:-1], _PANEL_EDGES[1:]):
        vs.append(0.5 * (b - a) * gx + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * gw)
    return np.concatenate(vs), np.concatenate(ws)


_PV, _PW = _panel_rule()
_PW_SOFT = _PW * np.log1p(np.exp(-np.abs(_PV)))           # ln(1+e^-|v|)
_PW_SIG = _PW * (expit(_PV) - (_PV > 0.0))                # sigma - step
_PW_VSIG = _PW * _PV * (expit(_PV) - (_PV > 0.0))


def _gh_nodes(order):
    """Nodes/weights for E over N(0,1)."""
    h, w = hermgauss(order)
    return h * math.sqrt(2.0), w / math.sqrt(math.pi)


def _logistic_gauss_moments(alpha, beta, quad_order, want_sigma):
    """E[softplus(V)], E[sigma(V)], E[V sigma(V)] for V ~ N(beta, alpha^2).

    alpha, beta: equal-shape 1-d arrays, alpha >= 0.  Small alpha goes
    through Gauss-Hermite at quad_order; large alpha through the exact
    linear part plus the localized-residual panel rule.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    esp = np.empty_like(alpha)
    esig = np.empty_like(alpha) if want_sigma else None
    evsig = np.empty_like(alpha) if want_sigma else None

    gh = alpha <= _ALPHA_GH_MAX
    if gh.any():
        z, w = _gh_nodes(quad_order)
        v = alpha[gh, None] * z + beta[gh, None]
        esp[gh] = np.logaddexp(0.0, v) @ w
        if want_sigma:
            sg = expit(v)
            esig[gh] = sg @ w
            evsig[gh] = (v * sg) @ w
    big = ~gh
    if big.any():
        al = alpha[big, None]
        be = beta[big, None]
        ratio = (beta[big] / alpha[big])
        lin = (beta[big] * ndtr(ratio)
               + alpha[big] * np.exp(-0.5 * ratio * ratio) / _SQRT2PI)
        pdf = np.exp(-0.5 * ((_PV - be) / al) ** 2) / (al * _SQRT2PI)
        esp[big] = lin + pdf @ _PW_SOFT
        if want_sigma:
            esig[big] = ndtr(ratio) + pdf @ _PW_SIG
            evsig[big] = lin + pdf @ _PW_VSIG
    return esp, esig, evsig


def _channel_moments(q, r, quad_order, want_sigma=False):
    """Per-truth-letter moments of the scalar-channel posterior.

    Returns (esp, esig, evsig), each shaped q_shape + (2,) over the true
    letter X; esp = E_Z[softplus(alpha Z + beta_X)] etc.
    """
    ab = Alphabet.from_r(r)
    x1, x2 = ab.x1, ab.x2
    d = x1 - x2
    q_arr = np.asarray(q, dtype=float)
    xs = np.array([x1, x2])
    alpha = np.sqrt(q_arr)[..., None] * d * np.ones(2)
    beta = (math.log(ab.r / (1.0 - ab.r))
            + q_arr[..., None] * xs * d
            - q_arr[..., None] * (x1 * x1 - x2 * x2) / 2.0)
    esp, esig, evsig = _logistic_gauss_moments(
        alpha.ravel(), beta.ravel(), quad_order, want_sigma)
    shape = q_arr.shape + (2,)
    return (esp.reshape(shape),
            esig.reshape(shape) if want_sigma else None,
            evsig.reshape(shape) if want_sigma else None)


def psi(q, lam, r, quad_order=QUAD_ORDER_DEFAULT):
    """The variational potential; vectorized over q."""
    if quad_order < 3:
        raise ValueError("quad_order must be >= 3")
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr < 0.0):
        raise ValueError("q must be nonnegative")
    ab = Alphabet.from_r(r)
    x1, x2 = ab.x1, ab.x2
    xs = np.array([x1, x2])
    px = np.array(ab.weights)
    esp, _, _ = _channel_moments(q_arr, r, quad_order)
    # ln sum_x = ln P(x2) + sqrt(q) Z x2 + q X x2 - q x2^2/2 + softplus(v)
    base = (math.log(1.0 - ab.r)
            + q_arr[..., None] * xs * x2 - q_arr[..., None] * x2 * x2 / 2.0)
    e_ln = ((base + esp) * px).sum(axis=-1)
    out = lam / 4.0 + q_arr * q_arr / (4.0 * lam) - e_ln
    return out if out.shape else float(out)


def scalar_overlap(q, r, quad_order=QUAD_ORDER_DEFAULT):
    """E[X <x>_q] for the scalar observation channel; vectorized over q."""
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr < 0.0):
        raise ValueError("q must be nonnegative")
    ab = Alphabet.from_r(r)
    x1, x2 = ab.x1, ab.x2
    d = x1 - x2
    xs = np.array([x1, x2])
    px = np.array(ab.weights)
    _, esig, _ = _channel_moments(q_arr, r, quad_order, want_sigma=True)
    # <x> = x2 + d sigma(v)
    out = ((x2 + d * esig) * px * xs).sum(axis=-1)
    return out if out.shape else float(out)


def psi_prime(q, lam, r, quad_order=QUAD_ORDER_DEFAULT):
    """dPsi/dq by a 5-point stencil; one-sided when q is near zero."""
    if q <= 0.0:
        raise ValueError("q must be positive")
    h = max(1e-5, 1e-5 * q)
    if q - 2.0 * h > 0.0:
        qs = q + h * np.array([-2.0, -1.0, 1.0, 2.0])
        f = psi(qs, lam, r, quad_order)
        return float((f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h))
    qs = q + h * np.arange(5.0)
    f = psi(qs, lam, r, quad_order)
    return float((-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2]
                  + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h))


def psi_prime_analytic(q, lam, r, quad_order=QUAD_ORDER_DEFAULT):
    """dPsi/dq by differentiating the integrand under the quadrature."""
    if q <= 0.0:
        raise ValueError("q must be positive")
    ab = Alphabet.from_r(r)
    x1, x2 = ab.x1, ab.x2
    d = x1 - x2
    xs = np.array([x1, x2])
    px = np.array(ab.weights)
    _, esig, evsig = _channel_moments(
        np.asarray(q, dtype=float), r, quad_order, want_sigma=True)
    beta = (math.log(ab.r / (1.0 - ab.r)) + q * xs * d
            - q * (x1 * x1 - x2 * x2) / 2.0)
    # d/dq E ln sum = X x2 - x2^2/2 + E[sigma v'] with
    # v' = Z d/(2 sqrt q) + X d - (x1^2 - x2^2)/2 and
    # E[Z sigma] = (E[v sigma] - beta E[sigma]) / alpha, alpha = sqrt(q) d
    dlnz = (xs * x2 - x2 * x2 / 2.0
            + (evsig - beta * esig) / (2.0 * q)
            + (xs * d - (x1 * x1 - x2 * x2) / 2.0) * esig)
    return float(q / (2.0 * lam) - (px * dlnz).sum())


@dataclass
class ReplicaSolution:
    lam: float
    r: float
    q_star: float
    psi_star: float
    local_minima: List[Tuple[float, float]]
    transition_order: str = "none"      # none | continuous | discontinuous
    quad_order: int = QUAD_ORDER_DEFAULT

    def to_record(self):
        return {
            "lambda": self.lam,
            "r": self.r,
            "q_star": self.q_star,
            "psi_star": self.psi_star,
            "local_minima": [[q, p] for q, p in self.local_minima],
            "transition_order": self.transition_order,
            "quad_order": self.quad_order,
        }


def _golden_min(f, a, b, tol):
    """Golden-section minimum of f on [a, b] to bracket width tol."""
    fa, fb = f(a), f(b)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, fb = d, fd
            d, fd = c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, fa = c, fc
            c, fc = d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    pts = [(a, fa), (b, fb), (c, fc), (d, fd)]
    x, fx = min(pts, key=lambda p: p[1])
    return x, fx


def minimize_psi(lam, r, tol=1e-10, quad_order=QUAD_ORDER_DEFAULT,
                 grid_points=GRID_POINTS_DEFAULT) -> ReplicaSolution:
    """Global minimum of psi over [0, lambda].

    A dense grid locates every descent basin (first-order transitions
    produce two); each is refined by golden section.  Ties within tol
    are genuine coexistence and are both kept in local_minima; q_star
    breaks ties by smaller psi, then smaller q.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    qs = np.linspace(0.0, lam, grid_points)
    vals = psi(qs, lam, r, quad_order)

    def f(x):
        return psi(x, lam, r, quad_order)

    cand = []
    for i in range(grid_points):
        left_ok = i == 0 or vals[i] <= vals[i - 1]
        right_ok = i == grid_points - 1 or vals[i] <= vals[i + 1]
        if left_ok and right_ok:
            a = qs[max(i - 1, 0)]
            b = qs[min(i + 1, grid_points - 1)]
            if b - a < tol:
                cand.append((float(qs[i]), float(vals[i])))
            else:
                cand.append(_golden_min(f, a, b, tol))

    # merge refinements that landed in the same basin; the basin scale
    # is set by the grid, not by tol
    cand.sort()
    minima: List[Tuple[float, float]] = []
    sep = lam / grid_points
    for x, fx in cand:
        if minima and abs(x - minima[-1][0]) < sep:
            if fx < minima[-1][1]:
                minima[-1] = (x, fx)
        else:
            minima.append((x, fx))
    # a minimum pinned to the left edge is the uninformative point,
    # where the potential is lambda/4 identically
    minima = [(0.0, lam / 4.0) if x < sep else (x, fx) for x, fx in minima]

    best = min(minima, key=lambda p: (p[1], p[0]))
    return ReplicaSolution(
        lam=float(lam), r=float(r), q_star=best[0], psi_star=best[1],
        local_minima=minima, quad_order=quad_order)


def state_evolution(lam, r, q0, damping=1.0, max_iter=500, tol=1e-12,
                    quad_order=QUAD_ORDER_DEFAULT):
    """Damped fixed-point iteration q <- lambda E[X <x>_q].

    Returns (q_fixed, iterates, converged).  The uninformative point
    q = 0 is always a fixed point; iterating from q0 = lambda finds the
    largest stable one.
    """
    if not 0.0 <= q0 <= lam:
        raise ValueError("q0 must lie in [0, lambda]")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must be in (0, 1]")
    q = float(q0)
    iterates = [q]
    converged = False
    for _ in range(max_iter):
        q_new = (1.0 - damping) * q + damping * lam * scalar_overlap(
            q, r, quad_order)
        iterates.append(q_new)
        if abs(q_new - q) < tol:
            q = q_new
            converged = True
            break
        q = q_new
    return q, iterates, converged


@dataclass
class TransitionReport:
    r: float
    lambda_c: Optional[float]
    order: str                      # none | continuous | discontinuous
    max_jump: float
    coexistence_seen: bool


@dataclass
class PhaseDiagram:
    solutions: List[ReplicaSolution]
    reports: List[TransitionReport]
    r_star_estimate: Optional[float]
    q_threshold: float
    jump_tol_factor: float


def _interior_gap(sol, interior_q_min):
    """Best interior local-minimum value minus psi(0) = lam/4.

    +inf when the solution has no local minimum above interior_q_min.
    A negative gap means the informative basin owns the global minimum.
    """
    vals = [v for q, v in sol.local_minima if q > interior_q_min]
    if not vals:
        return np.inf
    return min(vals) - 0.25 * sol.lam


def _refine_lambda_c(lo, hi, r, interior_q_min, refine_tol, tol,
                     quad_order, grid_points):
    """Bisect the basin switch: gap >= 0 at lo, gap < 0 at hi."""
    for _ in range(64):
        if hi - lo <= refine_tol:
            break
        mid = 0.5 * (lo + hi)
        sol = minimize_psi(mid, r, tol=tol, quad_order=quad_order,
                           grid_points=grid_points)
        if _interior_gap(sol, interior_q_min) < 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def phase_diagram(lambda_grid, r_grid, tol=1e-8,
                  quad_order=QUAD_ORDER_DEFAULT, q_threshold=0.01,
                  jump_tol_factor=0.05, coex_sep_factor=0.02,
                  grid_points=GRID_POINTS_DEFAULT, interior_q_min=2e-3,
                  order_delta=1e-6, refine_tol=1e-9) -> PhaseDiagram:
    """Sweep (lambda, r), classify each r-slice, and bracket the flip.

    The sweep records q_star(lambda) per r and two coarse diagnostics:
    the largest consecutive q_star jump (jump_tol_factor scales its
    significance threshold) and whether any lambda shows two separated
    local minima (coex_sep_factor sets the separation).  Classification
    itself does not rely on those scan-step artifacts.  lambda_c is
    refined by bisecting the basin switch, the point where an interior
    local minimum of the potential first drops below the uninformative
    value lambda/4.  Since q = 0 stays locally stable for every
    lambda < 1, an interior basin winning at some lambda < 1 means the
    minimizer jumps there (coexisting minima, first-order transition);
    a slice is classified discontinuous exactly when the refined
    lambda_c sits below 1 - order_delta.  When the whole grid is past
    the transition the bracket is extended below the grid; if no
    bracket exists the coarse signals decide.  The tricritical estimate
    is the midpoint between the last discontinuous r and the first
    continuous r, scanning r ascending.
    """
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    r_grid = np.asarray(r_grid, dtype=float)
    solutions = []
    reports = []
    for r in r_grid:
        slice_sols = []
        for lam in lambda_grid:
            sol = minimize_psi(lam, r, tol=tol, quad_order=quad_order,
                               grid_points=grid_points)
            slice_sols.append(sol)
        q_stars = np.array([s.q_star for s in slice_sols])
        jumps = np.abs(np.diff(q_stars))
        max_jump = float(jumps.max()) if jumps.size else 0.0
        jump_hit = bool(np.any(
            jumps >= jump_tol_factor * lambda_grid[1:]))
        coex = False
        for s in slice_sols:
            if len(s.local_minima) >= 2:
                q_lo = s.local_minima[0][0]
                q_hi = s.local_minima[-1][0]
                if q_hi - q_lo >= coex_sep_factor * s.lam:
                    coex = True
                    break

        gaps = np.array([_interior_gap(s, interior_q_min)
                         for s in slice_sols])
        neg = np.nonzero(gaps < 0.0)[0]
        lambda_c = None
        order = "none"
        if neg.size:
            hi_idx = int(neg[0])
            if hi_idx > 0:
                lo = float(lambda_grid[hi_idx - 1])
                hi = float(lambda_grid[hi_idx])
            else:
                # Whole grid past the transition: walk the bracket down
                # until the uninformative basin owns the minimum again.
                lo = None
                hi = float(lambda_grid[0])
                walk = hi
                while walk > 0.02:
                    cand = max(walk - 0.1, 0.02)
                    sol = minimize_psi(cand, r, tol=tol,
                                       quad_order=quad_order,
                                       grid_points=grid_points)
                    if _interior_gap(sol, interior_q_min) >= 0.0:
                        lo = cand
                        hi = walk
                        break
                    walk = cand
            if lo is not None:
                lambda_c = _refine_lambda_c(
                    lo, hi, r, interior_q_min, refine_tol, tol,
                    quad_order, grid_points)
                order = ("discontinuous"
                         if lambda_c < 1.0 - order_delta
                         else "continuous")
        if lambda_c is None and (jump_hit or coex):
            order = "discontinuous"
        for s in slice_sols:
            s.transition_order = order
        solutions.extend(slice_sols)
        reports.append(TransitionReport(
            r=float(r), lambda_c=lambda_c, order=order,
            max_jump=max_jump, coexistence_seen=coex))

    r_star = None
    for lo_rep, hi_rep in zip(reports, reports[1:]):
        if (lo_rep.order == "discontinuous"
                and hi_rep.order == "continuous"):
            r_star = 0.5 * (lo_rep.r + hi_rep.r)
            break
    return PhaseDiagram(
        solutions=solutions, reports=reports, r_star_estimate=r_star,
        q_threshold=q_threshold, jump_tol_factor=jump_tol_factor)
