"""Model parametrizations for the dense two-group planted partition model.

Hidden labels take two values x1 = sqrt((1-r)/r) (probability r) and
x2 = -sqrt(r/(1-r)) (probability 1-r), so E[X] = 0 and E[X^2] = 1.
Conditionally on the labels, edges are independent Bernoulli with

    P(edge ij) = p_bar + delta * X_i * X_j.

Two equivalent parametrizations are kept side by side: the degree form
(d_n, b_n, r) with within/cross-group factors a_n, b_n, c_n, and the
channel form (p_bar, delta) with signal-to-noise ratio
lambda_n = n * delta^2 / (p_bar * (1 - p_bar)).
"""

import math
from dataclasses import dataclass, asdict
from functools import lru_cache


class ParametrizationError(ValueError):
    """Raised when requested parameters leave the valid model family."""


@dataclass(frozen=True)
class Alphabet:
    """Two-letter centered unit-variance label alphabet."""
    r: float
    x1: float
    x2: float

    @classmethod
    def from_r(cls, r):
        if not 0.0 < r <= 0.5:
            raise ParametrizationError(f"r must be in (0, 1/2], got {r}")
        return _alphabet_cached(float(r))

    @property
    def weights(self):
        return (self.r, 1.0 - self.r)

    @property
    def values(self):
        return (self.x1, self.x2)

    def moment(self, k):
        """E[X^k] under the prior."""
        return self.r * self.x1 ** k + (1.0 - self.r) * self.x2 ** k


@lru_cache(maxsize=256)
def _alphabet_cached(r):
    return Alphabet(r=r, x1=math.sqrt((1.0 - r) / r),
                    x2=-math.sqrt(r / (1.0 - r)))


@dataclass(frozen=True)
class ModelParams:
    n: int
    r: float
    p_bar: float
    delta: float
    d_n: float
    b_n: float
    a_n: float
    c_n: float
    lambda_n: float

    @property
    def alphabet(self):
        return Alphabet.from_r(self.r)

    def edge_probability(self, xi, xj, t=0.0):
        """P(edge | labels xi, xj) for the model interpolated to time t."""
        return self.p_bar + math.sqrt(1.0 - t) * self.delta * xi * xj

    def to_record(self):
        return {k: (int(v) if k == "n" else float(v))
                for k, v in asdict(self).items()}

    @classmethod
    def from_record(cls, rec):
        fields = ("n", "r", "p_bar", "delta", "d_n", "b_n", "a_n", "c_n",
                  "lambda_n")
        return cls(**{k: (int(rec[k]) if k == "n" else float(rec[k]))
                      for k in fields})


def _validate_probabilities(n, r, p_bar, delta, d_n=None):
    """All four conditional edge probabilities must lie in [0, 1]."""
    ab = Alphabet.from_r(r)
    entries = (("a_n", ab.x1 * ab.x1), ("b_n", ab.x1 * ab.x2),
               ("c_n", ab.x2 * ab.x2))
    worst = None
    for name, xx in entries:
        p = p_bar + delta * xx
        if not 0.0 <= p <= 1.0:
            if worst is None or abs(xx) > abs(worst[1]):
                worst = (name, xx, p)
    if worst is not None:
        name, xx, p = worst
        raise ParametrizationError(
            f"edge probability for the {name} entry is {p:.6g} (label product "
            f"{xx:.6g}), outside [0, 1]")


def params_from_degrees(n, r, d_n, b_n):
    """Degree parametrization (n, r, d_n, b_n) -> ModelParams.

    The within-group factors follow from requiring every node's expected
    degree to equal d_n regardless of its group:

        a_n = 1 - (1 - 1/r)(1 - b_n)
        c_n = 1 - (1 - b_n)/(1 - 1/r)
    """
    n = int(n)
    if n < 1:
        raise ParametrizationError(f"n must be >= 1, got {n}")
    if not 0.0 < r <= 0.5:
        raise ParametrizationError(f"r must be in (0, 1/2], got {r}")
    if not 0.0 < d_n < n:
        raise ParametrizationError(f"d_n must be in (0, n), got {d_n}")
    p_bar = d_n / n
    delta = d_n * (1.0 - b_n) / n
    a_n = 1.0 - (1.0 - 1.0 / r) * (1.0 - b_n)
    c_n = 1.0 - (1.0 - b_n) / (1.0 - 1.0 / r)
    _validate_probabilities(n, r, p_bar, delta)
    lambda_n = n * delta * delta / (p_bar * (1.0 - p_bar))
    return ModelParams(n=n, r=float(r), p_bar=p_bar, delta=delta,
                       d_n=float(d_n), b_n=float(b_n), a_n=a_n, c_n=c_n,
                       lambda_n=lambda_n)


def params_from_channel(n, r, p_bar, lam, sign=1):
    """Channel parametrization (n, r, p_bar, lambda, sign) -> ModelParams.

    lambda is stored exactly; delta = sign * sqrt(lambda p_bar (1-p_bar) / n).
    sign = -1 gives the disassortative model (cross-group edges favored).
    """
    n = int(n)
    if n < 1:
        raise ParametrizationError(f"n must be >= 1, got {n}")
    if not 0.0 < r <= 0.5:
        raise ParametrizationError(f"r must be in (0, 1/2], got {r}")
    if not 0.0 < p_bar < 1.0:
        raise ParametrizationError(f"p_bar must be in (0, 1), got {p_bar}")
    if lam < 0.0:
        raise ParametrizationError(f"lambda must be >= 0, got {lam}")
    if sign not in (1, -1):
        raise ParametrizationError(f"sign must be +1 or -1, got {sign}")
    delta = sign * math.sqrt(lam * p_bar * (1.0 - p_bar) / n)
    ab = Alphabet.from_r(r)
    xx_max = max(ab.x1 * ab.x1, abs(ab.x1 * ab.x2), ab.x2 * ab.x2)
    if abs(delta) * xx_max > min(p_bar, 1.0 - p_bar):
        _validate_probabilities(n, r, p_bar, delta)
    d_n = n * p_bar
    b_n = 1.0 - delta / p_bar
    a_n = 1.0 - (1.0 - 1.0 / r) * (1.0 - b_n)
    c_n = 1.0 - (1.0 - b_n) / (1.0 - 1.0 / r)
    return ModelParams(n=n, r=float(r), p_bar=float(p_bar), delta=delta,
                       d_n=d_n, b_n=b_n, a_n=a_n, c_n=c_n,
                       lambda_n=float(lam))


@dataclass(frozen=True)
class DenseDiagnostics:
    np_cubed: float        # n * p_bar * (1 - p_bar)^3
    correction_ratio: float  # |delta| / (p_bar (1-p_bar)^2) = sqrt(lambda/np_cubed)
    threshold: float
    large_corrections: bool


def check_dense_hypotheses(params, ratio_threshold=0.1):
    """Advisory diagnostics for the dense-regime asymptotics.

    Flags (never rejects) parameter sets where finite-size corrections to
    the large-n limit are expected to be large.
    """
    q = 1.0 - params.p_bar
    np3 = params.n * params.p_bar * q ** 3
    ratio = abs(params.delta) / (params.p_bar * q * q)
    return DenseDiagnostics(np_cubed=np3, correction_ratio=ratio,
                            threshold=ratio_threshold,
                            large_corrections=ratio > ratio_threshold)
