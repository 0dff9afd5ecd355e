"""Normal special functions, correlation matrices, sampling and exact oracles.

Everything else in the package builds on this module:

* ``std_normal_cdf`` / ``bivariate_normal_density``: the scalar kernels that
  appear in every bound.
* ``CorrelationMatrix`` / ``cholesky``: the input object and its factor.
* ``mc_sup_tail``: Monte-Carlo estimate of P(max_i Z_i > u), reproducible
  for any number of workers.
* ``orthant_prob_oracle``: P(Z <= thresholds) by adaptive quadrature for
  dimension at most three.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.linalg import lapack
from scipy.special import ndtri

from . import rng
from .errors import (
    DegenerateCorrelationError,
    NotPositiveDefiniteError,
    UnsupportedDimensionError,
)

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
PIVOT_TOL = 1e-12
SYMMETRY_TOL = 1e-12
DEFAULT_MATRIX_CAP = 4096
# two-sided 99.7% normal quantile
CI_Z = float(ndtri(0.9985))


def matrix_cap() -> int:
    """Dimension cap, overridable through the GPTB_MATRIX_CAP variable."""
    return int(os.environ.get("GPTB_MATRIX_CAP", DEFAULT_MATRIX_CAP))


# ---------------------------------------------------------------------------
# Scalar kernels
# ---------------------------------------------------------------------------

def std_normal_cdf(x: float) -> float:
    """Standard normal CDF, evaluated through erfc so both tails keep full
    relative precision.  Saturates to exactly 0 or 1 for |x| > 40."""
    x = float(x)
    if x > 40.0:
        return 1.0
    if x < -40.0:
        return 0.0
    return 0.5 * math.erfc(-x / SQRT2)


def std_normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / SQRT2PI


def bivariate_normal_density(x: float, y: float, r: float) -> float:
    """Standard bivariate normal density with correlation ``r``."""
    if not abs(r) < 1.0:
        raise DegenerateCorrelationError(f"correlation must satisfy |r| < 1, got {r}")
    one_minus = 1.0 - r * r
    q = (x * x - 2.0 * r * x * y + y * y) / (2.0 * one_minus)
    return math.exp(-q) / (2.0 * math.pi * math.sqrt(one_minus))


# ---------------------------------------------------------------------------
# Correlation matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Symmetric, unit-diagonal matrix of pairwise correlations.

    Positive semi-definiteness is not checked on construction; ``cholesky``
    is the validator.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"correlation matrix must be square and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("correlation matrix has non-finite entries")
        asym = float(np.max(np.abs(a - a.T)))
        if asym > SYMMETRY_TOL:
            raise ValueError(f"correlation matrix is not symmetric (max mismatch {asym:.3e})")
        if np.any(np.abs(np.diag(a) - 1.0) > SYMMETRY_TOL):
            raise ValueError("correlation matrix must have unit diagonal")
        if np.any(np.abs(a) > 1.0 + SYMMETRY_TOL):
            raise ValueError("correlations must lie in [-1, 1]")
        a = 0.5 * (a + a.T)
        np.fill_diagonal(a, 1.0)
        np.clip(a, -1.0, 1.0, out=a)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, idx):
        return self.entries[idx]

    def max_offdiag_abs(self) -> float:
        if self.n == 1:
            return 0.0
        off = self.entries[~np.eye(self.n, dtype=bool)]
        return float(np.max(np.abs(off)))

    def submatrix(self, idx: Sequence[int]) -> "CorrelationMatrix":
        idx = np.asarray(idx)
        return CorrelationMatrix(self.entries[np.ix_(idx, idx)])

    @classmethod
    def identity(cls, n: int) -> "CorrelationMatrix":
        return cls(np.eye(n))

    @classmethod
    def equicorrelated(cls, n: int, r: float) -> "CorrelationMatrix":
        a = np.full((n, n), float(r))
        np.fill_diagonal(a, 1.0)
        return cls(a)

    @classmethod
    def from_stationary(cls, r: Sequence[float], n: int | None = None) -> "CorrelationMatrix":
        """Toeplitz matrix with entries r(|j - k|)."""
        r = np.asarray(r, dtype=np.float64)
        n = len(r) if n is None else n
        if len(r) < n:
            raise ValueError(f"need {n} lags, got {len(r)}")
        lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        return cls(r[lag])

    def to_dict(self) -> dict:
        return {"n": self.n, "entries": self.entries.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "CorrelationMatrix":
        entries = np.asarray(obj["entries"], dtype=np.float64)
        if "n" in obj and entries.shape != (int(obj["n"]), int(obj["n"])):
            raise ValueError(f"declared n={obj['n']} does not match entries of shape {entries.shape}")
        return cls(entries)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CorrelationMatrix":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    lower: np.ndarray

    @property
    def n(self) -> int:
        return self.lower.shape[0]


def cholesky(m: CorrelationMatrix, jitter: float = 0.0) -> CholeskyFactor:
    """Lower Cholesky factor of ``m + jitter * I``.

    Raises NotPositiveDefiniteError naming the first pivot (squared diagonal
    of the factor) that is <= 1e-12.
    """
    a = np.array(m.entries, dtype=np.float64, order="F")
    if jitter:
        a[np.diag_indices_from(a)] += jitter
    lower, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(int(info) - 1, float("nan"))
    if info < 0:
        raise ValueError(f"dpotrf rejected argument {-info}")
    pivots = np.diag(lower) ** 2
    bad = np.flatnonzero(pivots <= PIVOT_TOL)
    if bad.size:
        raise NotPositiveDefiniteError(int(bad[0]), float(pivots[bad[0]]))
    lower = np.ascontiguousarray(lower)
    lower.setflags(write=False)
    return CholeskyFactor(lower)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    p_hat: float
    n_samples: int
    std_err: float
    seed: int
    ci_low: float
    ci_high: float

    @classmethod
    def from_count(cls, hits: int, n_samples: int, seed: int) -> "MCEstimate":
        p = hits / n_samples
        se = math.sqrt(p * (1.0 - p) / n_samples)
        return cls(p, n_samples, se, int(seed), max(0.0, p - CI_Z * se), min(1.0, p + CI_Z * se))

    def complement(self) -> "MCEstimate":
        q = 1.0 - self.p_hat
        return MCEstimate(q, self.n_samples, self.std_err, self.seed,
                          max(0.0, q - CI_Z * self.std_err), min(1.0, q + CI_Z * self.std_err))

    def to_dict(self) -> dict:
        return {"p_hat": self.p_hat, "n_samples": self.n_samples, "std_err": self.std_err,
                "seed": self.seed, "ci_low": self.ci_low, "ci_high": self.ci_high}


def _default_chunk(width: int) -> int:
    # ~16 MB of doubles per chunk
    return max(256, (1 << 21) // max(width, 1))


def count_max_exceed(lower: np.ndarray, thresholds: np.ndarray, n_samples: int, seed: int,
                     stream: int = rng.STREAM_GAUSS, workers: int = 1,
                     chunk: int | None = None) -> int:
    """Number of samples g @ lower.T whose componentwise max exceeds thresholds.

    A sample "exceeds" when any coordinate is strictly above its threshold.
    """
    n = lower.shape[0]
    chunk = chunk or _default_chunk(n)
    lt = np.ascontiguousarray(lower.T)

    def work(span):
        start, count = span
        g = rng.normals(seed, stream, start, count, n)
        z = g @ lt
        return int(np.count_nonzero(np.any(z > thresholds, axis=1)))

    spans = list(rng.chunk_ranges(n_samples, chunk))
    if workers <= 1:
        return sum(map(work, spans))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(work, spans))


def mc_sup_tail(m: CorrelationMatrix, u: float, n_samples: int, seed: int,
                workers: int = 1, chunk: int | None = None,
                factor: CholeskyFactor | None = None) -> MCEstimate:
    """Monte-Carlo estimate of P(max_i Z_i > u) for Z ~ N(0, m)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    factor = factor or cholesky(m)
    thresholds = np.full(m.n, float(u))
    hits = count_max_exceed(factor.lower, thresholds, n_samples, seed,
                            workers=workers, chunk=chunk)
    return MCEstimate.from_count(hits, n_samples, seed)


def mc_orthant(m: CorrelationMatrix, thresholds: Sequence[float], n_samples: int, seed: int,
               workers: int = 1, factor: CholeskyFactor | None = None) -> MCEstimate:
    """Monte-Carlo estimate of P(Z <= thresholds componentwise)."""
    factor = factor or cholesky(m)
    t = np.asarray(thresholds, dtype=np.float64)
    hits = count_max_exceed(factor.lower, t, n_samples, seed, workers=workers)
    return MCEstimate.from_count(hits, n_samples, seed).complement()


# ---------------------------------------------------------------------------
# Exact low-dimensional oracle
# ---------------------------------------------------------------------------

_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-12, limit=200)
# phi(39) ~ 1e-331: the normal mass beyond this is below double precision
_Z_CUT = 39.0


def _conditioned_integral(integrand, a: float, breaks=()) -> float:
    """Integrate phi(z) * integrand(z) over z <= a."""
    hi = min(a, _Z_CUT)
    lo = -_Z_CUT
    if hi <= lo:
        return 0.0
    pts = sorted({p for p in (*breaks, -8.0, 0.0, 8.0) if lo < p < hi})

    def f(z):
        return math.exp(-0.5 * z * z) / SQRT2PI * integrand(z)

    val, _ = integrate.quad(f, lo, hi, points=pts or None, **_QUAD_OPTS)
    return min(max(val, 0.0), 1.0)


def _bvn_lower(a: float, b: float, r: float) -> float:
    """P(Z1 <= a, Z2 <= b) for correlation r, |r| < 1, by conditioning on Z1."""
    if r == 0.0:
        return std_normal_cdf(a) * std_normal_cdf(b)
    s = math.sqrt((1.0 - r) * (1.0 + r))
    return _conditioned_integral(lambda z: std_normal_cdf((b - r * z) / s), a, (b / r,))


def _tvn_lower(a: float, b: float, c: float, m: np.ndarray) -> float:
    """P(Z1 <= a, Z2 <= b, Z3 <= c): condition on Z1, then reduce to the
    bivariate case for the Schur-complement pair."""
    r12, r13, r23 = m[0, 1], m[0, 2], m[1, 2]
    s2 = math.sqrt(1.0 - r12 * r12)
    s3 = math.sqrt(1.0 - r13 * r13)
    rho = (r23 - r12 * r13) / (s2 * s3)
    if not abs(rho) < 1.0:
        raise NotPositiveDefiniteError(2, 0.0)

    def inner(z):
        return _bvn_lower((b - r12 * z) / s2, (c - r13 * z) / s3, rho)

    breaks = [v for v, w in ((b, r12), (c, r13)) if w != 0.0 for v in (v / w,)]
    return _conditioned_integral(inner, a, breaks)


def orthant_prob_oracle(m: CorrelationMatrix, thresholds: Sequence[float]) -> float:
    """P(Z_j <= thresholds_j for all j), Z ~ N(0, m), for n <= 3."""
    t = [float(v) for v in thresholds]
    if len(t) != m.n:
        raise ValueError(f"expected {m.n} thresholds, got {len(t)}")
    if m.n > 3:
        raise UnsupportedDimensionError(f"exact oracle supports n <= 3, got n={m.n}")
    if m.n == 1:
        return std_normal_cdf(t[0])
    cholesky(m)  # rejects singular input
    a = m.entries
    if m.n == 2:
        return _bvn_lower(t[0], t[1], float(a[0, 1]))
    return _tvn_lower(t[0], t[1], t[2], a)
