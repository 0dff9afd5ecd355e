"""The prime-indexed Gaussian process

    Z_y(t) = sum_{y<=p<=x} g_p cos(t log p) / p^{1/2 + 1/log x}, normalised to variance one,

sampled on the grids T_n = {2n + 1 + iE/log x : 1 <= i <= M}.  Covariances
are exact prime sums; the logarithmic approximation is kept for diagnostics
only, and every bound is evaluated on the exact matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng
from .clt_transfer import CoefficientArray
from .errors import (
    ConfigurationError,
    EmptyRangeError,
    ResourceError,
)
from .gaussian_core import (
    CorrelationMatrix,
    MCEstimate,
    cholesky,
    count_max_exceed,
    matrix_cap,
)
from .tail_bounds import (
    BoundConfig,
    TailBoundResult,
    auto_cd,
    comparison_bound,
    max_feasible_h,
    prop1_bound,
    validate_cd,
)

DEFAULT_SIEVE_BUDGET = 1 << 30  # bytes
_SEGMENT = 1 << 20


# ---------------------------------------------------------------------------
# Primes
# ---------------------------------------------------------------------------

def _small_primes(limit: int) -> np.ndarray:
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return np.flatnonzero(sieve)


def sieve_primes(limit: float, memory_budget: int = DEFAULT_SIEVE_BUDGET) -> np.ndarray:
    """All primes <= limit, ascending, by a segmented sieve of Eratosthenes."""
    if not limit >= 2:
        raise ValueError(f"limit must be >= 2, got {limit}")
    n = int(math.floor(limit))
    # output array plus one segment
    need = 8 * int(1.26 * n / math.log(n) + 16) + _SEGMENT
    if need > memory_budget:
        raise ResourceError(f"sieving to {n} needs about {need} bytes, budget is {memory_budget}")
    return _sieve_cached(n)


@lru_cache(maxsize=8)
def _sieve_cached(n: int) -> np.ndarray:
    base = _small_primes(math.isqrt(n))
    chunks = [base]
    lo = math.isqrt(n) + 1
    while lo <= n:
        hi = min(lo + _SEGMENT, n + 1)
        seg = np.ones(hi - lo, dtype=bool)
        for p in base:
            start = max(p * p, -(-lo // p) * p)
            if start >= hi:
                break
            seg[start - lo::p] = False
        chunks.append(np.flatnonzero(seg) + lo)
        lo = hi
    out = np.concatenate(chunks).astype(np.int64)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class PrimeProcessConfig:
    """Parameters of the prime process.

    ``y="auto"`` means log^8 x, or log x when log^8 x >= x (every x below
    about 10^13).  ``E="auto"`` means sqrt(loglog x); ``M=None`` means
    floor(log x / (K E log y)); ``B=None`` means floor((loglog x)^2).
    """

    x: float
    y: float | str = "auto"
    E: float | str = "auto"
    K: float = 2.0
    M: int | None = None
    block_n: int = 0
    B: int | None = None
    notes: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        self.x = float(self.x)
        if not self.x >= 100.0:
            raise ConfigurationError(f"x must be >= 100, got {self.x}")
        L = math.log(self.x)
        LL = math.log(L)
        self.notes = []
        if self.y == "auto":
            y8 = L ** 8
            if y8 < self.x:
                self.y = y8
            else:
                self.y = L
                self.notes.append("log^8 x >= x, so y = log x")
        self.y = float(self.y)
        if self.y < L * (1.0 - 1e-12):
            raise ConfigurationError(f"y must be >= log x = {L:.6g}, got {self.y}")
        if math.log(self.y) > LL ** 100:
            raise ConfigurationError("y must be <= exp((loglog x)^100)")
        if self.y > self.x:
            raise EmptyRangeError(f"y = {self.y:.6g} exceeds x = {self.x:.6g}; no primes in [y, x]")
        if self.E == "auto":
            self.E = math.sqrt(LL)
        self.E = float(self.E)
        if not self.E > 0.0:
            raise ConfigurationError("E must be positive")
        if self.E > math.exp(math.sqrt(LL)):
            raise ConfigurationError(f"E must be <= exp(sqrt(loglog x)) = {math.exp(math.sqrt(LL)):.6g}")
        if self.E < math.sqrt(LL) * (1.0 - 1e-12):
            self.notes.append("E below sqrt(loglog x): outside proof regime")
        if not self.K > 0.0:
            raise ConfigurationError("K must be positive")
        if self.M is None:
            self.M = int(math.floor(L / (self.K * self.E * math.log(self.y))))
        self.M = int(self.M)
        if self.M < 1:
            raise ConfigurationError(f"M must be >= 1, got {self.M}")
        if self.M * self.E > L * (1.0 + 1e-12):
            raise ConfigurationError(f"M E / log x = {self.M * self.E / L:.4g} > 1: grid leaves its block")
        self.block_n = int(self.block_n)
        if self.block_n < 0:
            raise ConfigurationError("block_n must be >= 0")
        if self.B is None:
            self.B = int(math.floor(LL * LL))
        self.B = int(self.B)
        if self.B < 0:
            raise ConfigurationError("B must be >= 0")

    @property
    def log_x(self) -> float:
        return math.log(self.x)

    @property
    def loglog_x(self) -> float:
        return math.log(math.log(self.x))

    @property
    def gap(self) -> float:
        """loglog x - loglog y."""
        return self.loglog_x - math.log(math.log(self.y))

    @property
    def full_grid_M(self) -> int:
        return int(math.floor(self.log_x / self.E))

    def grid(self, block: int | None = None, M: int | None = None) -> np.ndarray:
        n = self.block_n if block is None else block
        M = self.M if M is None else M
        return 2 * n + 1 + np.arange(1, M + 1) * self.E / self.log_x

    def full_grid(self) -> np.ndarray:
        return np.concatenate([self.grid(block=n) for n in range(self.B + 1)])

    def with_(self, **kw) -> "PrimeProcessConfig":
        base = dict(x=self.x, y=self.y, E=self.E, K=self.K, M=self.M, block_n=self.block_n, B=self.B)
        if any(k in kw for k in ("x", "y", "E", "K")) and "M" not in kw:
            base["M"] = None
        base.update(kw)
        return PrimeProcessConfig(**base)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "E": self.E, "K": self.K, "M": self.M,
                "block_n": self.block_n, "B": self.B, "gap": self.gap, "notes": list(self.notes)}


@dataclass(frozen=True)
class _PrimeData:
    primes: np.ndarray
    logp: np.ndarray
    weight: np.ndarray  # p^{-(1 + 2/log x)}


@lru_cache(maxsize=16)
def _prime_data(lo: float, hi: float, x: float, closed_hi: bool = True) -> _PrimeData:
    ps = sieve_primes(hi)
    ps = ps[ps >= lo] if closed_hi else ps[(ps >= lo) & (ps < hi)]
    if ps.size == 0:
        raise EmptyRangeError(f"no primes in [{lo:.6g}, {hi:.6g}]")
    logp = np.log(ps.astype(np.float64))
    weight = np.exp(-(1.0 + 2.0 / math.log(x)) * logp)
    for a in (logp, weight):
        a.setflags(write=False)
    return _PrimeData(ps, logp, weight)


def _range_data(cfg: PrimeProcessConfig) -> _PrimeData:
    return _prime_data(cfg.y, cfg.x, cfg.x)


# ---------------------------------------------------------------------------
# Covariances
# ---------------------------------------------------------------------------

def _cos_sum(data: _PrimeData, freq: float) -> float:
    """sum_p cos(freq log p) p^{-(1+2/log x)}, ascending p, correctly rounded."""
    return math.fsum(np.cos(freq * data.logp) * data.weight)


def exact_covariance(cfg: PrimeProcessConfig, t: float, s: float) -> float:
    """(1/2) sum_{y<=p<=x} (cos((t+s) log p) + cos((t-s) log p)) / p^{1+2/log x}."""
    if t < 1.0 or s < 1.0:
        raise ConfigurationError("t and s must be >= 1")
    data = _range_data(cfg)
    return 0.5 * (_cos_sum(data, t + s) + _cos_sum(data, t - s))


def _covariance_matrix(cfg: PrimeProcessConfig, pts: np.ndarray) -> np.ndarray:
    data = _range_data(cfg)
    cache: dict[float, float] = {}

    def S(f: float) -> float:
        f = abs(float(f))
        if f not in cache:
            cache[f] = _cos_sum(data, f)
        return cache[f]

    n = len(pts)
    cov = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            cov[i, j] = cov[j, i] = 0.5 * (S(pts[i] + pts[j]) + S(pts[i] - pts[j]))
    return cov


def exact_correlation_matrix(cfg: PrimeProcessConfig, pts: np.ndarray) -> tuple[CorrelationMatrix, np.ndarray]:
    """(normalised correlation matrix, variances) at the points ``pts``."""
    if len(pts) > matrix_cap():
        raise ResourceError(f"dimension {len(pts)} exceeds the matrix cap {matrix_cap()}")
    cov = _covariance_matrix(cfg, np.asarray(pts, dtype=np.float64))
    var = np.diag(cov).copy()
    sd = np.sqrt(var)
    return CorrelationMatrix(cov / np.outer(sd, sd)), var


def approx_correlation(cfg: PrimeProcessConfig, t: float, s: float) -> float:
    """log(1 / (|t - s| log y)) / (loglog x - loglog y), clamped to [-1, 1]; 1 when t = s."""
    if t == s:
        return 1.0
    v = math.log(1.0 / (abs(t - s) * math.log(cfg.y))) / cfg.gap
    return min(1.0, max(-1.0, v))


@dataclass
class ProcessCovarianceReport:
    exact: CorrelationMatrix
    approx: CorrelationMatrix
    max_residual: float
    loglog_x_minus_loglog_y: float
    grid: np.ndarray
    variances: np.ndarray
    min_exact_correlation: float
    k_check_passed: bool
    admissible_M: int
    psd: bool

    def to_dict(self, matrices: bool = False) -> dict:
        out = {
            "M": self.exact.n,
            "max_residual": self.max_residual,
            "loglog_x_minus_loglog_y": self.loglog_x_minus_loglog_y,
            "grid": self.grid.tolist(),
            "variances": self.variances.tolist(),
            "min_exact_correlation": self.min_exact_correlation,
            "k_check_passed": self.k_check_passed,
            "admissible_M": self.admissible_M,
            "psd": self.psd,
        }
        if matrices:
            out["exact"] = self.exact.to_dict()
            out["approx"] = self.approx.to_dict()
        return out


def _admissible_prefix(corr: np.ndarray, floor: float) -> int:
    """Largest M such that the leading M x M block has every entry >= floor."""
    n = corr.shape[0]
    for M in range(1, n + 1):
        if corr[M - 1, :M].min() < floor:
            return M - 1
    return n


def build_block_matrix(cfg: PrimeProcessConfig, check_admissible: bool = True) -> ProcessCovarianceReport:
    """Exact and approximate correlation matrices on the grid T_{block_n}."""
    pts = cfg.grid()
    exact, var = exact_correlation_matrix(cfg, pts)
    M = len(pts)
    approx = np.array([[approx_correlation(cfg, a, b) for b in pts] for a in pts])
    approx_m = CorrelationMatrix(approx)
    resid = float(np.max(np.abs(exact.entries - approx))) if M > 1 else 0.0
    floor = 1.0 / cfg.loglog_x
    min_corr = float(exact.entries.min())
    k_ok = min_corr >= floor
    admissible = M
    if check_admissible and M < cfg.full_grid_M:
        full, _ = exact_correlation_matrix(cfg, cfg.grid(M=cfg.full_grid_M))
        admissible = _admissible_prefix(full.entries, floor)
    elif not k_ok:
        admissible = _admissible_prefix(exact.entries, floor)
    try:
        cholesky(exact)
        psd = True
    except Exception:
        psd = False
    return ProcessCovarianceReport(exact, approx_m, resid, cfg.gap, pts, var, min_corr, k_ok, admissible, psd)


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

def halasz_parameters(cfg: PrimeProcessConfig) -> tuple[float, float, float]:
    """(u, H, delta) = (sqrt(2 gap), 1/u, 1/loglog x)."""
    u = math.sqrt(2.0 * cfg.gap)
    return u, 1.0 / u, 1.0 / cfg.loglog_x


def halasz_cd(cfg: PrimeProcessConfig, pivot: int) -> tuple[np.ndarray, np.ndarray]:
    """c_j = max(0, 1 - log((m - j) E) / gap), d_j = 1 - c_j."""
    lags = pivot - np.arange(1, pivot)
    c = np.maximum(0.0, 1.0 - np.log(lags * cfg.E) / cfg.gap)
    return c, 1.0 - c


def _halasz_provider(cfg: PrimeProcessConfig, reports: dict):
    def provider(m: CorrelationMatrix, pivot: int):
        c, d = halasz_cd(cfg, pivot)
        rep = validate_cd(m, pivot, c, d)
        reports[pivot] = rep.to_dict()
        col = m.entries[: pivot - 1, pivot - 1]
        candidates = [("logarithmic", (c, d)), ("stationary-complement", (col.copy(), 1.0 - col))]
        return auto_cd(m, pivot, candidates)
    return provider


def halasz_bound_instance(cfg: PrimeProcessConfig, block: int | None = None,
                          matrix: CorrelationMatrix | None = None) -> TailBoundResult:
    """Lower bound for P(sup_{T_n} Z_y > sqrt(2 gap)) on the exact matrix.

    (c, d) per pivot: the logarithmic rule, else c_j = r_jm, d_j = 1 - r_jm,
    else that choice with c shrunk; a pivot with no admissible choice
    contributes the trivial bound 0.  H = 1/u is reduced to the largest h
    keeping every conditional threshold non-negative when needed.
    """
    if matrix is None:
        matrix, _ = exact_correlation_matrix(cfg, cfg.grid(block=block))
    u, H, delta = halasz_parameters(cfg)
    notes = []
    h_max = max_feasible_h(matrix, u)
    if h_max < H:
        notes.append(f"H reduced from 1/u = {H:.6g} to {h_max:.6g} to keep thresholds non-negative")
        H = h_max
    bcfg = BoundConfig(u=u, H=H, delta=delta, cd_rule="stationary-complement")
    reports: dict = {}
    res = prop1_bound(matrix, bcfg, cd_provider=_halasz_provider(cfg, reports), on_inapplicable="zero")
    res.diagnostics[:0] = notes
    failed = {p: r for p, r in reports.items() if not r["passed"]}
    if failed:
        res.diagnostics.append(f"logarithmic (c, d) rule failed for pivots {sorted(failed)}")
    res.params_echo["prime_config"] = cfg.to_dict()
    res.params_echo["log_rule_reports"] = {str(p): r for p, r in failed.items()}
    return res


def full_matrix(cfg: PrimeProcessConfig) -> CorrelationMatrix:
    """Exact correlation matrix over the blocks T_0, ..., T_B."""
    dim = (cfg.B + 1) * cfg.M
    if dim > matrix_cap():
        raise ResourceError(f"(B + 1) M = {dim} exceeds the matrix cap {matrix_cap()}")
    m, _ = exact_correlation_matrix(cfg, cfg.full_grid())
    return m


def block_diagonal(m: CorrelationMatrix, block: int) -> CorrelationMatrix:
    idx = np.arange(m.n) // block
    return CorrelationMatrix(np.where(idx[:, None] == idx[None, :], m.entries, 0.0))


def block_decoupling_error(cfg: PrimeProcessConfig, variant: int = 2,
                           matrix: CorrelationMatrix | None = None) -> float:
    """Bound on |P(max over all blocks <= u) - P(same with blocks made independent)|.

    Comparison bounds are one-sided, so both directions are evaluated
    (exact vs block-diagonal and back) and the larger is returned.
    """
    if cfg.B == 0:
        return 0.0
    m = full_matrix(cfg) if matrix is None else matrix
    w = block_diagonal(m, cfg.M)
    u, _, _ = halasz_parameters(cfg)
    th = np.full(m.n, u)
    return max(comparison_bound(m, w, th, variant), comparison_bound(w, m, th, variant))


def small_prime_variance(cfg: PrimeProcessConfig) -> float:
    """sum_{p<y} 1 / (2 p^{1 + 2/log x})."""
    if cfg.y <= 2.0:
        return 0.0
    data = _prime_data(2.0, cfg.y, cfg.x, closed_hi=False)
    return 0.5 * math.fsum(data.weight)


@dataclass
class Corollary2Report:
    config: dict
    u: float
    dimension: int
    mc_p_all_below: MCEstimate
    block_bounds: list[float]
    decoupling_error: float
    analytic_p_all_below: float
    sound: bool
    small_prime_variance: float
    chebyshev_threshold: float

    def to_dict(self) -> dict:
        return {
            "config": self.config, "u": self.u, "dimension": self.dimension,
            "mc_p_all_below": self.mc_p_all_below.to_dict(),
            "block_bounds": list(self.block_bounds),
            "decoupling_error": self.decoupling_error,
            "analytic_p_all_below": self.analytic_p_all_below,
            "sound": self.sound,
            "small_prime_variance": self.small_prime_variance,
            "chebyshev_threshold": self.chebyshev_threshold,
        }


def corollary2_experiment(cfg: PrimeProcessConfig, n_samples: int, seed: int,
                          workers: int = 1) -> Corollary2Report:
    """Monte Carlo P(max over T_0..T_B <= u) against the analytic upper bound

        prod_n (1 - lower bound for block n) + decoupling error.
    """
    m = full_matrix(cfg)
    M = cfg.M
    u, _, _ = halasz_parameters(cfg)
    blocks = [halasz_bound_instance(cfg, matrix=m.submatrix(range(n * M, (n + 1) * M))).bound
              for n in range(cfg.B + 1)]
    dec = block_decoupling_error(cfg, 2, matrix=m)
    analytic = min(1.0, math.prod(1.0 - b for b in blocks) + dec)
    est = _mc_all_below(m, u, n_samples, seed, workers)
    sound = est.p_hat <= analytic + 4.0 * est.std_err
    lll = math.log(cfg.loglog_x)
    cheb = lll ** 0.75 if lll > 0 else 0.0
    return Corollary2Report(cfg.to_dict(), u, m.n, est, blocks, dec, analytic, sound,
                            small_prime_variance(cfg), cheb)


def _mc_all_below(m: CorrelationMatrix, u: float, n_samples: int, seed: int, workers: int) -> MCEstimate:
    f = cholesky(m)
    hits = count_max_exceed(f.lower, np.full(m.n, u), n_samples, seed, workers=workers)
    return MCEstimate.from_count(hits, n_samples, seed).complement()


# ---------------------------------------------------------------------------
# Rademacher analogue and coefficient arrays
# ---------------------------------------------------------------------------

def prime_coefficients(cfg: PrimeProcessConfig, points: np.ndarray | None = None,
                       normalized: bool = True) -> CoefficientArray:
    """alpha_p(t) = cos(t log p) / p^{1/2 + 1/log x} for y <= p <= x, optionally
    divided by the standard deviation at t so each column has unit norm."""
    data = _range_data(cfg)
    pts = cfg.grid() if points is None else np.asarray(points, dtype=np.float64)
    alpha = np.cos(np.outer(data.logp, pts)) * np.sqrt(data.weight)[:, None]
    if normalized:
        alpha /= np.sqrt(np.einsum("ij,ij->j", alpha, alpha))
    return CoefficientArray(alpha)


def rademacher_process_sample(cfg: PrimeProcessConfig, seed: int, sample_index: int = 0,
                              force_plus: bool = False) -> np.ndarray:
    """Normalised sums sum_p f(p) cos(t log p) / p^{1/2+1/log x} on the grid,
    with f(p) independent Rademacher signs.  ``force_plus`` fixes every
    f(p) = +1 (deterministic test hook)."""
    coeffs = prime_coefficients(cfg).alpha
    if force_plus:
        eps = np.ones(coeffs.shape[0])
    else:
        eps = rng.signs(seed, rng.STREAM_RADEMACHER, sample_index, 1, coeffs.shape[0])[0]
    return eps @ coeffs


def rademacher_process_samples(cfg: PrimeProcessConfig, n_samples: int, seed: int,
                               chunk: int = 4096) -> np.ndarray:
    """``n_samples`` independent draws, shape (n_samples, M); row i uses the
    same signs as ``rademacher_process_sample(cfg, seed, i)`` (values agree
    up to the rounding of the matrix product)."""
    coeffs = prime_coefficients(cfg).alpha
    out = np.empty((n_samples, coeffs.shape[1]))
    for start, count in rng.chunk_ranges(n_samples, chunk):
        eps = rng.signs(seed, rng.STREAM_RADEMACHER, start, count, coeffs.shape[0])
        out[start:start + count] = eps @ coeffs
    return out
