"""Transfer of Gaussian supremum bounds to Rademacher sums.

For X_t = sum_i alpha_i(t) eps_i (Rademacher eps) and Y_t = sum_i alpha_i(t) g_i
(standard normal g), the exchangeable-pair CLT bound with a C^3 smoothing of
the box indicator gives

    P(max_t X_t <= a) <= P(max_t Y_t <= b) + (1/3) cap * sum_{s,t,u} sum_i |alpha_i(s) alpha_i(t) alpha_i(u)|,

where cap bounds the mixed third partials of h(x) = prod_t s(x_t), and s
falls from 1 at a to 0 at b.  The exchangeable pair itself is never
simulated.  Its regression identity E(X' - X | X) = -X/n is what makes the
variance term of the bound vanish for Rademacher variables.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import rng
from .errors import DomainError, InstanceTooLargeError
from .gaussian_core import CorrelationMatrix, MCEstimate, cholesky, orthant_prob_oracle

# Smoothing polynomial: s(z) = 1 - S((z - a)/(b - a)) with
# S(x) = 35x^4 - 84x^5 + 70x^6 - 20x^7, the degree-7 polynomial with
# S(0) = 0, S(1) = 1 and S', S'', S''' vanishing at both ends.
#   S'(x)   = 140 x^3 (1-x)^3,             max at x = 1/2:          35/16
#   S''(x)  = 420 x^2 (1-x)^2 (1-2x),      max at x = (5 -+ sqrt5)/10: 84 sqrt5 / 25
#   S'''(x) = 840 x (1-x)(5x^2 - 5x + 1),  max at x = (5 -+ sqrt15)/10 and x = 1/2: 105/2
C1 = 35.0 / 16.0
C2 = 84.0 * math.sqrt(5.0) / 25.0
C3 = 105.0 / 2.0
EXACT_T_MAX = 64


@dataclass(frozen=True, eq=False)
class CoefficientArray:
    """Coefficients alpha_i(t): rows index the variables i, columns the points t."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"alpha must be a non-empty 2-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        norms = np.einsum("ij,ij->j", a, a)
        bad = np.flatnonzero(norms <= 0.0)
        if bad.size:
            raise ValueError(f"columns {bad.tolist()} are identically zero")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def T(self) -> int:
        return self.alpha.shape[1]

    def scaled(self, lam: float) -> "CoefficientArray":
        return CoefficientArray(self.alpha * lam)

    def covariance(self) -> np.ndarray:
        return self.alpha.T @ self.alpha

    def to_dict(self) -> dict:
        return {"n": self.n, "T": self.T, "alpha": self.alpha.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "CoefficientArray":
        a = np.asarray(obj["alpha"], dtype=np.float64)
        if "n" in obj and "T" in obj and a.shape != (int(obj["n"]), int(obj["T"])):
            raise ValueError(f"declared shape ({obj['n']}, {obj['T']}) does not match {a.shape}")
        return cls(a)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CoefficientArray":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Smoothing
# ---------------------------------------------------------------------------

def smoothing_value(z, a: float, b: float) -> tuple:
    """(s, s', s'', s''') at z for the C^3 step that is 1 for z <= a and 0 for z >= b."""
    if not a < b:
        raise DomainError(f"need a < b, got a={a}, b={b}")
    w = b - a
    x = np.clip((np.asarray(z, dtype=np.float64) - a) / w, 0.0, 1.0)
    x2, y = x * x, 1.0 - x
    S = x2 * x2 * (35.0 - 84.0 * x + 70.0 * x2 - 20.0 * x2 * x)
    d1 = 140.0 * x2 * x * y ** 3
    d2 = 420.0 * x2 * y * y * (1.0 - 2.0 * x)
    d3 = 840.0 * x * y * (5.0 * x2 - 5.0 * x + 1.0)
    out = (1.0 - S, -d1 / w, -d2 / w ** 2, -d3 / w ** 3)
    if np.ndim(z) == 0:
        return tuple(float(v) for v in out)
    return out


def derivative_caps(a: float, b: float) -> tuple[float, float, float]:
    """(sup|s'|, sup|s''|, sup|s'''|) = (C1/w, C2/w^2, C3/w^3), w = b - a."""
    if not a < b:
        raise DomainError(f"need a < b, got a={a}, b={b}")
    w = b - a
    return C1 / w, C2 / w ** 2, C3 / w ** 3


def third_derivative_cap(T: int, a: float, b: float) -> float:
    """Bound on |d^3 prod_t s(x_t) / dx_s dx_t dx_u| over every (s, t, u).

    Each factor not differentiated is at most 1, so the bound is the largest
    of s''' (one repeated index), s'' s' (two distinct) and s'^3 (three
    distinct) over the patterns available with T coordinates.
    """
    c1, c2, c3 = derivative_caps(a, b)
    patterns = [c3]
    if T >= 2:
        patterns.append(c2 * c1)
    if T >= 3:
        patterns.append(c1 ** 3)
    return max(patterns)


@dataclass
class CLTErrorReport:
    cube_sum: float
    full_triple_sum: float
    third_deriv_cap: float
    total_error: float
    mode: str
    triple_sum_used: float

    def to_dict(self) -> dict:
        return asdict(self)


def rr_error_bound(coeffs: CoefficientArray, a: float, b: float, mode: str = "exact") -> CLTErrorReport:
    """Error term of the smoothed transfer inequality.

    ``mode="exact"`` uses sum_{s,t,u} sum_i |alpha_i(s) alpha_i(t) alpha_i(u)|
    = sum_i (sum_t |alpha_i(t)|)^3 (T <= 64); ``mode="max"`` uses the
    overestimate T^3 sum_i max_t |alpha_i(t)|^3.
    """
    if mode not in ("exact", "max"):
        raise ValueError(f"mode must be 'exact' or 'max', got {mode!r}")
    cap = third_derivative_cap(coeffs.T, a, b)
    abs_a = np.abs(coeffs.alpha)
    cube_sum = math.fsum(abs_a.max(axis=1) ** 3)
    overestimate = coeffs.T ** 3 * cube_sum
    if mode == "exact":
        if coeffs.T > EXACT_T_MAX:
            raise InstanceTooLargeError(f"exact triple sum needs T <= {EXACT_T_MAX}, got {coeffs.T}")
        full = math.fsum(abs_a.sum(axis=1) ** 3)
        used = full
    else:
        full = overestimate
        used = overestimate
    return CLTErrorReport(cube_sum, full, cap, cap * used / 3.0, mode, used)


# ---------------------------------------------------------------------------
# Empirical transfer check
# ---------------------------------------------------------------------------

def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root; tolerates singular covariances."""
    w, v = np.linalg.eigh(cov)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def mc_rademacher_all_below(coeffs: CoefficientArray, level: float, n_samples: int, seed: int,
                            chunk: int = 1 << 16) -> MCEstimate:
    """Monte Carlo P(max_t sum_i alpha_i(t) eps_i <= level)."""
    # keep each sign block near 2^22 entries whatever n is
    chunk = max(1, min(chunk, (1 << 22) // coeffs.n))
    hits = 0
    for start, count in rng.chunk_ranges(n_samples, chunk):
        eps = rng.signs(seed, rng.STREAM_RADEMACHER, start, count, coeffs.n)
        x = eps @ coeffs.alpha
        hits += int(np.count_nonzero(np.all(x <= level, axis=1)))
    return MCEstimate.from_count(hits, n_samples, seed)


def mc_gaussian_all_below(coeffs: CoefficientArray, level: float, n_samples: int, seed: int,
                          chunk: int = 1 << 16) -> MCEstimate:
    """Monte Carlo P(max_t Y_t <= level), Y ~ N(0, alpha^T alpha)."""
    root = _psd_sqrt(coeffs.covariance())
    hits = 0
    for start, count in rng.chunk_ranges(n_samples, chunk):
        g = rng.normals(seed, rng.STREAM_TWIN_GAUSS, start, count, coeffs.T)
        y = g @ root
        hits += int(np.count_nonzero(np.all(y <= level, axis=1)))
    return MCEstimate.from_count(hits, n_samples, seed)


def gaussian_all_below_oracle(coeffs: CoefficientArray, level: float) -> float:
    cov = coeffs.covariance()
    sd = np.sqrt(np.diag(cov))
    corr = CorrelationMatrix(cov / np.outer(sd, sd))
    return orthant_prob_oracle(corr, level / sd)


@dataclass
class TransferReport:
    threshold_low: float
    threshold_high: float
    rademacher: MCEstimate
    gaussian_p: float
    gaussian_std_err: float
    gaussian_method: str
    error: CLTErrorReport
    rhs: float
    slack: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "threshold_low": self.threshold_low,
            "threshold_high": self.threshold_high,
            "rademacher": self.rademacher.to_dict(),
            "gaussian_p": self.gaussian_p,
            "gaussian_std_err": self.gaussian_std_err,
            "gaussian_method": self.gaussian_method,
            "error": self.error.to_dict(),
            "rhs": self.rhs,
            "slack": self.slack,
            "holds": self.holds,
        }


def transfer_bound(coeffs: CoefficientArray, threshold_low: float, threshold_high: float,
                   n_samples: int = 1_000_000, seed: int = 0, mode: str | None = None,
                   gaussian: str = "auto") -> TransferReport:
    """Check P(max X <= low) <= P(max Y <= high) + error within 4 combined std errors.

    ``gaussian`` selects the Gaussian side: "oracle" (T <= 3, non-singular),
    "mc", or "auto" (oracle when possible).
    """
    if not threshold_low < threshold_high:
        raise DomainError("threshold_low must be below threshold_high")
    if mode is None:
        mode = "exact" if coeffs.T <= EXACT_T_MAX else "max"
    err = rr_error_bound(coeffs, threshold_low, threshold_high, mode)
    rad = mc_rademacher_all_below(coeffs, threshold_low, n_samples, seed)
    method = gaussian
    if gaussian == "auto":
        method = "mc"
        if coeffs.T <= 3:
            cov = coeffs.covariance()
            sd = np.sqrt(np.diag(cov))
            try:
                cholesky(CorrelationMatrix(cov / np.outer(sd, sd)))
                method = "oracle"
            except Exception:
                pass
    if method == "oracle":
        gp, gse = gaussian_all_below_oracle(coeffs, threshold_high), 0.0
    elif method == "mc":
        est = mc_gaussian_all_below(coeffs, threshold_high, n_samples, seed)
        gp, gse = est.p_hat, est.std_err
    else:
        raise ValueError(f"unknown gaussian method {gaussian!r}")
    rhs = gp + err.total_error
    slack = 4.0 * math.hypot(rad.std_err, gse)
    return TransferReport(threshold_low, threshold_high, rad, gp, gse, method, err, rhs, slack,
                          rad.p_hat <= rhs + slack)
