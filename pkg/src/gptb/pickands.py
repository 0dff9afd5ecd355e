"""Lower-bound surrogates for the Pickands constants H_alpha.

Shao's stationary process is sampled at t_i = i/M with
M = floor((b u^2 alpha / 2)^(1/alpha)), and the stationary tail bound with
pivot M (last grid point) is rescaled by the normalisation of Pickands'
theorem (h = 1, C = 1/2).  The result is a finite-u quantity whose lim inf
lower-bounds H_alpha up to an absolute constant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, InstanceTooLargeError
from .gaussian_core import SQRT2PI, CorrelationMatrix, cholesky, matrix_cap
from .tail_bounds import BoundConfig, stationary_evaluation

E_OVER_2 = math.e / 2.0
TAIL_PRODUCT_LEVEL = 0.99


def ln_gamma(x: float) -> float:
    """log Gamma(x) for x > 0."""
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"ln_gamma needs a finite x > 0, got {x}")
    return math.lgamma(x)


# ---------------------------------------------------------------------------
# Covariances
# ---------------------------------------------------------------------------

def _check_alpha_open(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
    return alpha


def shao_one_minus(alpha: float, t) -> np.ndarray:
    """1 - r(t) for Shao's covariance, written without cancellation:

        1 - r(t) = (2 sinh(t/2))^alpha / 2 - 2 sinh(alpha t / 4)^2
    """
    alpha = _check_alpha_open(alpha)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0):
        raise DomainError("t must be non-negative")
    return 0.5 * (2.0 * np.sinh(0.5 * t)) ** alpha - 2.0 * np.sinh(0.25 * alpha * t) ** 2


def shao_covariance(alpha: float, t):
    """r(t) = (e^{alpha t/2} + e^{-alpha t/2} - (e^{t/2} - e^{-t/2})^alpha) / 2."""
    out = 1.0 - shao_one_minus(alpha, t)
    return float(out) if np.ndim(out) == 0 else out


def pickands_covariance(alpha: float, t):
    """Covariance used on the grid: Shao's kernel for 0 < alpha < 2.

    At alpha = 2 Shao's formula collapses to r = 1, so the Gaussian kernel
    exp(-t^2/2), which has the same local behaviour 1 - t^2/2, is used.
    """
    alpha = float(alpha)
    if alpha == 2.0:
        t = np.asarray(t, dtype=np.float64)
        out = np.exp(-0.5 * t * t)
        return float(out) if np.ndim(out) == 0 else out
    return shao_covariance(alpha, t)


def kernel_name(alpha: float) -> str:
    return "gaussian" if float(alpha) == 2.0 else "shao"


def regime(alpha: float) -> str:
    if float(alpha) >= 1.0:
        return "outside proof regime (alpha >= 1)"
    return "small-alpha regime (admissible bound unknown)"


def pickands_grid_size(alpha: float, u: float, b: float) -> int:
    """M = floor((b u^2 alpha / 2)^(1/alpha)), checked against the matrix cap."""
    cap = matrix_cap()
    log_m = math.log(b * u * u * alpha / 2.0) / alpha
    if log_m > math.log(cap + 1.0):
        raise InstanceTooLargeError(f"grid size exp({log_m:.3g}) exceeds the cap {cap}")
    M = math.floor(math.exp(log_m))
    if M > cap:
        raise InstanceTooLargeError(f"grid size {M} exceeds the cap {cap}")
    return M


def _grid_lags(alpha: float, M: int) -> np.ndarray:
    return pickands_covariance(alpha, np.arange(M) / M)


def pickands_grid_matrix(alpha: float, M: int, check_psd: bool = True) -> CorrelationMatrix:
    """Correlation matrix of the process at t_i = i/M, i = 1..M."""
    if M < 2:
        raise ConfigurationError("the grid needs M >= 2")
    if M > matrix_cap():
        raise InstanceTooLargeError(f"grid size {M} exceeds the cap {matrix_cap()}")
    m = CorrelationMatrix.from_stationary(_grid_lags(alpha, M), M)
    if check_psd:
        cholesky(m)
    return m


# ---------------------------------------------------------------------------
# Surrogate
# ---------------------------------------------------------------------------

@dataclass
class PickandsEvaluation:
    alpha: float
    u: float
    M: int
    b: float
    a: float
    delta: float
    finite_u_value: float
    stationary_bound: float
    inf_pmh: float
    B_delta: float
    tail_product: float
    kernel: str
    regime: str
    references: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        if not math.isfinite(out["B_delta"]):
            out["B_delta"] = None
        return out

    def csv_row(self) -> dict:
        row = {k: getattr(self, k) for k in ("alpha", "u", "M", "b", "a", "delta", "finite_u_value")}
        for k in ("conjecture", "shao_lower", "dmr", "michna", "corollary1_shape"):
            row[k] = self.references.get(k)
        return row


CSV_COLUMNS = ("alpha", "u", "M", "b", "a", "delta", "finite_u_value",
               "conjecture", "shao_lower", "dmr", "michna", "corollary1_shape")


def tail_product(log_factors_by_lag: np.ndarray, M: int) -> float:
    """Product of the comparison factors over lags j > M^(1/4)."""
    lags = np.arange(1, len(log_factors_by_lag) + 1)
    return math.exp(math.fsum(log_factors_by_lag[lags > M ** 0.25]))


def pickands_lower_surrogate(alpha: float, u: float, b: float = E_OVER_2, a: float = 1.0,
                             delta: float | None = None) -> PickandsEvaluation:
    """Finite-u lower-bound surrogate for H_alpha:

        2^{1/alpha} u^{-2/alpha} M a e^{-a - a^2/(2u^2)} inf_{0<=h<=a/u} P(M, h)

    which equals 2^{1/alpha} u^{1 - 2/alpha} sqrt(2 pi) e^{u^2/2} times the
    stationary tail bound.  When the comparison thresholds u - r(1/M)(u + a/u)
    go negative the only available bound on P(M, h) is 0, and the value is 0.
    """
    alpha = float(alpha)
    if not 0.0 < alpha <= 2.0:
        raise DomainError(f"alpha must lie in (0, 2], got {alpha}")
    if not 1.0 <= b <= 10.0:
        raise ConfigurationError(f"b must lie in [1, 10], got {b}")
    if not u > 0.0 or not a > 0.0:
        raise ConfigurationError("u and a must be positive")
    delta = alpha if delta is None else float(delta)
    M = pickands_grid_size(alpha, u, b)
    if M < 2:
        raise ConfigurationError(f"u = {u} gives M = {M}; increase u so that M >= 2")
    r = _grid_lags(alpha, M)
    cfg = BoundConfig(u=u, H=a / u, delta=delta, cd_rule="stationary-complement")
    ev = stationary_evaluation(r, M, u, a, cfg, on_inapplicable="zero")
    if ev.inf_pmh > 0.0:
        log_val = (math.log(2.0) / alpha - 2.0 / alpha * math.log(u) + math.log(M) + math.log(a)
                   - a - a * a / (2.0 * u * u) + math.log(ev.inf_pmh))
        value = math.exp(log_val)
        # pivot factor for j has lag M - j
        tail = tail_product(ev.log_factors[::-1], M)
    else:
        value, tail = 0.0, 0.0
    return PickandsEvaluation(alpha, u, M, b, a, delta, value, ev.bound, ev.inf_pmh, ev.B_delta,
                              tail, kernel_name(alpha), regime(alpha),
                              reference_bounds(alpha), list(ev.notes))


def largest_feasible_u(alpha: float, b: float = E_OVER_2, u_max: float = 8.0,
                       step: float = 0.25, u_min: float = 1.0) -> float | None:
    """Largest u on the grid u_min, u_min + step, ..., u_max whose M is within the cap."""
    grid = np.arange(u_min, u_max + step / 2, step)
    best = None
    for u in grid:
        try:
            M = pickands_grid_size(alpha, float(u), b)
        except InstanceTooLargeError:
            break
        if M >= 2:
            best = float(u)
    return best


# ---------------------------------------------------------------------------
# Published bounds
# ---------------------------------------------------------------------------

def reference_bounds(alpha: float) -> dict:
    """Named published bounds on H_alpha (None outside their range).

    conjecture        1 / Gamma(1/alpha)
    shao_lower        (alpha/4)^{1/alpha} (1 - e^{-1/alpha}(1 + 1/alpha)),    0 < alpha < 1
    shao_upper        alpha^{1/alpha} (2.41 sqrt(8.8 - alpha log(0.4 + 2.5/alpha)) + 0.77 sqrt(alpha))^{2/alpha},
                      0 < alpha < 1
    dmr               alpha / (8 Gamma(1/alpha)) (1/4)^{1/alpha}
    michna            2 * dmr
    corollary1_shape  sqrt(alpha) (e alpha / 2)^{1/alpha}, up to an unspecified constant
    """
    alpha = float(alpha)
    if not 0.0 < alpha <= 2.0:
        raise DomainError(f"alpha must lie in (0, 2], got {alpha}")
    inv = 1.0 / alpha
    lg = ln_gamma(inv)
    out = {
        "conjecture": math.exp(-lg),
        "shao_lower": None,
        "shao_upper": None,
        "dmr": math.exp(math.log(alpha / 8.0) - lg - inv * math.log(4.0)),
    }
    out["michna"] = 2.0 * out["dmr"]
    if alpha < 1.0:
        out["shao_lower"] = math.exp(inv * math.log(alpha / 4.0)) * (1.0 - math.exp(-inv) * (1.0 + inv))
        inner = 2.41 * math.sqrt(8.8 - alpha * math.log(0.4 + 2.5 * inv)) + 0.77 * math.sqrt(alpha)
        out["shao_upper"] = math.exp(inv * math.log(alpha) + 2.0 * inv * math.log(inner))
    out["corollary1_shape"] = math.exp(0.5 * math.log(alpha) + inv * math.log(math.e * alpha / 2.0))
    return out


def pickands_tail_normaliser(alpha: float, u: float) -> float:
    """2^{1/alpha} u^{1-2/alpha} sqrt(2 pi) e^{u^2/2}: maps P(sup > u) to the H_alpha scale."""
    return math.exp(math.log(2.0) / alpha + (1.0 - 2.0 / alpha) * math.log(u) + 0.5 * u * u) * SQRT2PI
