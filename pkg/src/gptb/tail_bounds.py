"""Lower bounds for P(max_i Z_i > u) and the classical comparison bounds.

The lower bound decomposes the supremum event by the first index m whose
value exceeds u, integrates the exceedance height over [u, u + H], and
bounds each conditional orthant probability P(m, h) by comparing with an
explicitly constructed Gaussian vector (Brownian-motion maximal equality
plus independent noise).

Indices follow the mathematical convention: ``pivot`` and the (j, k) pairs
in validation reports are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr, ndtr

from .errors import (
    BUndefinedError,
    ConfigurationError,
    DegenerateCorrelationError,
    HTooLargeError,
    HypothesisError,
    RepeatedVariableError,
)
from .gaussian_core import (
    SQRT2,
    SQRT2PI,
    CorrelationMatrix,
    cholesky,
    mc_orthant,
    orthant_prob_oracle,
)

BOUNDARY_TOL = 1e-12
CLAMP_NOTE_TOL = 1e-12
_ROW_BLOCK = 256
CD_RULES = ("explicit", "stationary-complement", "auto")

CDPair = tuple[np.ndarray, np.ndarray]


# ---------------------------------------------------------------------------
# Configuration and results
# ---------------------------------------------------------------------------

@dataclass
class BoundConfig:
    """Free parameters of the conditioning and comparison steps.

    ``c`` and ``d`` are only read when ``cd_rule == "explicit"``.  They may be
    a single sequence, aligned by distance to the pivot so that a shorter
    pivot m uses its last m - 1 entries, or a list of per-pivot sequences, ``c[m - 1]`` holding
    c_1..c_{m-1} for pivot m.
    """

    u: float
    H: float = 0.0
    delta: float = 0.0
    c: list | None = None
    d: list | None = None
    h_grid_points: int = 17
    cd_rule: str = "stationary-complement"

    def __post_init__(self):
        self.u = float(self.u)
        self.H = float(self.H)
        self.delta = float(self.delta)
        if not math.isfinite(self.u):
            raise ConfigurationError("u must be finite")
        if not self.H >= 0.0:
            raise ConfigurationError(f"H must be >= 0, got {self.H}")
        if not self.delta >= 0.0:
            raise ConfigurationError(f"delta must be >= 0, got {self.delta}")
        if int(self.h_grid_points) < 1:
            raise ConfigurationError("h_grid_points must be a positive integer")
        self.h_grid_points = int(self.h_grid_points)
        if self.cd_rule not in CD_RULES:
            raise ConfigurationError(f"unknown cd_rule {self.cd_rule!r}; expected one of {CD_RULES}")
        if self.cd_rule == "explicit" and (self.c is None or self.d is None):
            raise ConfigurationError("cd_rule 'explicit' needs both c and d")

    def cd_for(self, m: CorrelationMatrix, pivot: int) -> CDPair:
        """The (c, d) sequences for ``pivot`` under this configuration's rule."""
        if self.cd_rule == "stationary-complement":
            return stationary_complement_cd(m, pivot)
        if self.cd_rule == "auto":
            found = auto_cd(m, pivot)
            if found is None:
                raise ConfigurationError(f"no admissible (c, d) found for pivot {pivot}")
            return found[0], found[1]
        return _explicit_cd(self.c, self.d, pivot)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("c", "d"):
            if out[key] is not None:
                out[key] = np.asarray(out[key], dtype=object).tolist()
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "BoundConfig":
        known = {"u", "H", "delta", "c", "d", "h_grid_points", "cd_rule"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigurationError(f"unknown BoundConfig keys: {sorted(unknown)}")
        return cls(**obj)


def _explicit_cd(c, d, pivot: int) -> CDPair:
    def pick(seq):
        if len(seq) and isinstance(seq[0], (list, tuple, np.ndarray)):
            if len(seq) < pivot:
                raise ConfigurationError(f"per-pivot (c, d) list has no entry for pivot {pivot}")
            return np.asarray(seq[pivot - 1], dtype=np.float64)
        return np.asarray(seq, dtype=np.float64)

    c, d = pick(c), pick(d)
    if c.ndim == 1 and len(c) > pivot - 1 and len(c) == len(d):
        # a single sequence is aligned by distance to the pivot: the last
        # entry belongs to j = pivot - 1
        c, d = c[len(c) - pivot + 1:], d[len(d) - pivot + 1:]
    return c, d


@dataclass(frozen=True)
class PivotTerm:
    m: int
    inf_h_value: float
    h_at_inf: float
    B_delta: float
    rule: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TailBoundResult:
    bound: float
    per_m: list[PivotTerm]
    params_echo: dict
    prefactor: float
    diagnostics: list[str] = field(default_factory=list)

    def recompute(self) -> float:
        return min(1.0, self.prefactor * math.fsum(t.inf_h_value for t in self.per_m))

    def to_dict(self) -> dict:
        return {
            "bound": self.bound,
            "prefactor": self.prefactor,
            "per_m": [t.to_dict() for t in self.per_m],
            "params_echo": self.params_echo,
            "diagnostics": list(self.diagnostics),
        }

    def csv_rows(self) -> list[dict]:
        return [t.to_dict() for t in self.per_m]


# ---------------------------------------------------------------------------
# (c, d) hypotheses
# ---------------------------------------------------------------------------

@dataclass
class Violation:
    j: int
    k: int
    margin: float
    boundary: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ValidationReport:
    pivot: int
    monotone_ok: bool
    pairs_ok: bool
    denominators_ok: bool
    sign_ok: bool
    monotone_breaks: list[int] = field(default_factory=list)
    pair_violations: list[Violation] = field(default_factory=list)
    denominator_violations: list[tuple[int, float]] = field(default_factory=list)
    min_margin: float = math.inf

    @property
    def passed(self) -> bool:
        return self.monotone_ok and self.pairs_ok and self.denominators_ok and self.sign_ok

    @property
    def passed_nonstrict(self) -> bool:
        """As ``passed`` but tolerating pairs that sit exactly on the boundary."""
        strict_pairs = all(v.boundary for v in self.pair_violations)
        return self.monotone_ok and strict_pairs and self.denominators_ok and self.sign_ok

    @property
    def boundary(self) -> bool:
        return any(v.boundary for v in self.pair_violations)

    def to_dict(self) -> dict:
        return {
            "pivot": self.pivot,
            "passed": self.passed,
            "hypothesis_i": self.monotone_ok and self.sign_ok,
            "hypothesis_ii": self.pairs_ok,
            "denominators_positive": self.denominators_ok,
            "boundary": self.boundary,
            "monotone_breaks": list(self.monotone_breaks),
            "pair_violations": [v.to_dict() for v in self.pair_violations],
            "denominator_violations": [list(v) for v in self.denominator_violations],
            "min_margin": self.min_margin if math.isfinite(self.min_margin) else None,
        }


def _pivot_column(m: CorrelationMatrix, pivot: int) -> np.ndarray:
    if not 1 <= pivot <= m.n:
        raise ConfigurationError(f"pivot must lie in 1..{m.n}, got {pivot}")
    return np.asarray(m.entries[: pivot - 1, pivot - 1])


def validate_cd(m: CorrelationMatrix, pivot: int, c: Sequence[float], d: Sequence[float],
                tol: float = BOUNDARY_TOL) -> ValidationReport:
    """Check the comparison-step hypotheses for ``pivot``.

    (i)  c_j >= 0, d_j > 0 and c_j / d_j non-decreasing;
    (ii) c_min(j,k) d_max(j,k) < r_jk - r_jm r_km strictly for j < k < m;
    plus positivity of the product denominators 1 - r_jm^2 - c_j d_j.
    Margins within ``tol`` of zero are failures flagged ``boundary``.
    """
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if c.shape != (pivot - 1,) or d.shape != (pivot - 1,):
        raise ConfigurationError(
            f"pivot {pivot} needs c and d of length {pivot - 1}, got {c.shape} and {d.shape}")
    col = _pivot_column(m, pivot)
    rep = ValidationReport(pivot, True, True, True, True)
    if pivot == 1:
        return rep

    if np.any(c < 0.0) or np.any(d <= 0.0) or not np.all(np.isfinite(c)) or not np.all(np.isfinite(d)):
        rep.sign_ok = False
    ratio = c / np.where(d > 0, d, np.nan)
    steps = np.diff(ratio)
    breaks = np.flatnonzero(~(steps >= -tol * np.maximum(1.0, np.abs(ratio[:-1]))))
    if breaks.size:
        rep.monotone_ok = False
        rep.monotone_breaks = (breaks + 2).tolist()

    denom = 1.0 - col * col - c * d
    bad = np.flatnonzero(~(denom > tol))
    if bad.size:
        rep.denominators_ok = False
        rep.denominator_violations = [(int(j) + 1, float(denom[j])) for j in bad]

    if pivot >= 3:
        n1 = pivot - 1
        # for j < k: c_min d_max = c_j d_k; rows in blocks to bound memory
        for lo in range(0, n1 - 1, _ROW_BLOCK):
            hi = min(lo + _ROW_BLOCK, n1 - 1)
            rows = np.asarray(m.entries[lo:hi, :n1])
            margins = rows - np.outer(col[lo:hi], col) - np.outer(c[lo:hi], d)
            upper = np.arange(n1)[None, :] > np.arange(lo, hi)[:, None]
            margins = np.where(upper, margins, np.inf)
            rep.min_margin = min(rep.min_margin, float(margins.min()))
            jj, kk = np.nonzero(~(margins > tol))
            if jj.size:
                rep.pairs_ok = False
                rep.pair_violations.extend(
                    Violation(int(j) + lo + 1, int(k) + 1, float(margins[j, k]),
                              bool(abs(margins[j, k]) <= tol))
                    for j, k in zip(jj, kk))
    return rep


def stationary_complement_cd(m: CorrelationMatrix, pivot: int) -> CDPair:
    """c_j = r_{j,m}, d_j = 1 - r_{j,m}; for a stationary sequence this is
    c_j = r(m - j), d_j = 1 - r(m - j)."""
    col = _pivot_column(m, pivot).copy()
    return col, 1.0 - col


SHRINK_FACTORS = (1.0, 0.5, 0.25, 0.1, 0.01)
PROPORTIONAL_RATIOS = (0.1, 0.01, 0.001)


def auto_cd(m: CorrelationMatrix, pivot: int,
            candidates: Sequence[tuple[str, CDPair]] = ()) -> tuple[np.ndarray, np.ndarray, str] | None:
    """First admissible (c, d) among ``candidates``, shrunken
    stationary-complement choices c_j = lam * max(r_jm, 0), d_j = 1 - r_jm,
    and proportional choices c_j = kappa * d_j.

    Returns None when nothing passes, which happens whenever some
    r_jk - r_jm r_km <= 0 (no c >= 0, d > 0 can then satisfy (ii)).
    """
    if pivot == 1:
        return np.empty(0), np.empty(0), "empty"
    for name, (c, d) in candidates:
        if validate_cd(m, pivot, c, d).passed and c[-1] > 0.0:
            return np.asarray(c), np.asarray(d), name
    col = _pivot_column(m, pivot)
    base_c = np.maximum(col, 0.0)
    base_d = 1.0 - col
    for lam in SHRINK_FACTORS:
        c = lam * base_c
        if c[-1] <= 0.0:
            break
        if validate_cd(m, pivot, c, base_d).passed:
            return c, base_d.copy(), f"shrink-{lam:g}"
    # constant ratio c_j / d_j = kappa: covers non-positive pivot columns
    for kappa in PROPORTIONAL_RATIOS:
        c = kappa * base_d
        if validate_cd(m, pivot, c, base_d).passed:
            return c, base_d.copy(), f"proportional-{kappa:g}"
    return None


# ---------------------------------------------------------------------------
# Comparison step
# ---------------------------------------------------------------------------

def _pmh_terms(col: np.ndarray, c: np.ndarray, d: np.ndarray, u: float, h: float,
               delta: float) -> tuple[float, float, np.ndarray]:
    """(lower bound, B, per-j log factors) for one pivot and height h."""
    caps = u - col * (u + h)
    if np.any(caps < 0.0):
        j = int(np.argmin(caps)) + 1
        raise HTooLargeError(
            f"h={h:g} makes the conditional threshold of V_{j} negative ({caps[j - 1]:.3e})")
    if not c[-1] >= 0.0:
        raise BUndefinedError("B(delta) needs c_{m-1} >= 0")
    lead = float(np.min(caps / d))
    if c[-1] == 0.0:
        # no shared component: B is the c -> 0+ limit
        B = math.inf if lead > 0.0 and delta > 0.0 else 0.0
    else:
        B = delta * math.sqrt(d[-1] / c[-1]) * lead
    brownian = math.erf(B / SQRT2)  # Phi(B) - Phi(-B)
    denom = np.sqrt(1.0 - col * col - c * d)
    logs = log_ndtr((1.0 - delta) * caps / denom)
    value = brownian * math.exp(math.fsum(logs)) if brownian > 0.0 else 0.0
    return value, B, logs


def prop2_pmh_bound(m: CorrelationMatrix, pivot: int, cfg: BoundConfig, h: float,
                    cd: CDPair | None = None, validate: bool = True) -> float:
    """Lower bound for the conditional orthant probability P(pivot, h).

    Returns (Phi(B) - Phi(-B)) * prod_j Phi((1 - delta) w_j / sqrt(1 - r_jm^2 - c_j d_j))
    with w_j = u - r_jm (u + h) and B = delta sqrt(d_{m-1}/c_{m-1}) min_j w_j / d_j.
    """
    if pivot == 1:
        return 1.0
    c, d = cd if cd is not None else cfg.cd_for(m, pivot)
    if validate:
        rep = validate_cd(m, pivot, c, d)
        if not rep.passed:
            raise ConfigurationError(f"(c, d) hypotheses fail for pivot {pivot}", report=rep)
    col = _pivot_column(m, pivot)
    value, _, _ = _pmh_terms(col, np.asarray(c, float), np.asarray(d, float), cfg.u, float(h), cfg.delta)
    return min(max(value, 0.0), 1.0)


def max_feasible_h(m: CorrelationMatrix, u: float, pivots: Sequence[int] | None = None) -> float:
    """Largest h with u - r_jm (u + h) >= 0 for every j < m over ``pivots``."""
    a = m.entries
    pivots = range(2, m.n + 1) if pivots is None else pivots
    best = math.inf
    for p in pivots:
        col = a[: p - 1, p - 1]
        pos = col[col > 0.0]
        if pos.size:
            h = max(float(np.min(u * (1.0 - pos) / pos)), 0.0)
            # step down until the thresholds are non-negative in floating point
            while h > 0.0 and np.any(u - pos * (u + h) < 0.0):
                h = math.nextafter(h, 0.0)
            best = min(best, h)
    return best


# ---------------------------------------------------------------------------
# Conditioning step
# ---------------------------------------------------------------------------

OnInapplicable = Literal["raise", "zero"]
CDProvider = Callable[[CorrelationMatrix, int], tuple[np.ndarray, np.ndarray, str] | None]


def _clamp(value: float, what: str, notes: list[str]) -> float:
    clamped = min(max(value, 0.0), 1.0)
    if abs(clamped - value) > CLAMP_NOTE_TOL:
        notes.append(f"{what}: clamped {value!r} into [0, 1]")
    return clamped


def _pivot_inf(m: CorrelationMatrix, pivot: int, cfg: BoundConfig, h_max: float,
               cd: CDPair, notes: list[str]) -> tuple[float, float, float]:
    """(inf over h in [0, h_max], argmin h, B at argmin) of the comparison bound.

    The bound is log-concave in h (log Phi of affine maps, and erf of a
    concave non-negative B), so its infimum over an interval is attained at
    an endpoint; the grid always contains both endpoints.
    """
    col = _pivot_column(m, pivot)
    c, d = (np.asarray(v, dtype=np.float64) for v in cd)
    if np.all(col >= 0.0):
        hs = [h_max]
    else:
        hs = list(np.linspace(0.0, h_max, max(2, cfg.h_grid_points)))
    best = (math.inf, 0.0, 0.0)
    for h in hs:
        value, B, _ = _pmh_terms(col, c, d, cfg.u, float(h), cfg.delta)
        value = _clamp(value, f"P({pivot},{h:g})", notes)
        if value < best[0]:
            best = (value, float(h), B)
    return best


def prop1_bound(m: CorrelationMatrix, cfg: BoundConfig, *,
                cd_provider: CDProvider | None = None,
                on_inapplicable: OnInapplicable = "raise",
                allow_boundary: bool = False,
                check_psd: bool = True) -> TailBoundResult:
    """Lower bound for P(max_i Z_i > u):

        H exp(-(u+H)^2/2) / sqrt(2 pi) * sum_m inf_{0<=h<=H} P(m, h),

    with each P(m, h) replaced by the comparison-step bound.

    ``on_inapplicable="zero"`` replaces a pivot term by the trivial bound 0
    when its (c, d) fail validation or the thresholds go negative, instead
    of raising.  ``allow_boundary`` accepts pairs whose margin is exactly
    zero (the comparison inequality only needs <=).
    """
    if cfg.u < 0.0:
        raise ConfigurationError("the conditioning step needs u >= 0")
    if m.max_offdiag_abs() >= 1.0:
        raise RepeatedVariableError("off-diagonal correlation of absolute value 1")
    if check_psd:
        cholesky(m)
    notes: list[str] = []
    u, H = cfg.u, cfg.H
    prefactor = H * math.exp(-0.5 * (u + H) ** 2) / SQRT2PI
    terms: list[PivotTerm] = []
    for pivot in range(1, m.n + 1):
        if pivot == 1:
            terms.append(PivotTerm(1, 1.0, 0.0, math.inf, "empty"))
            continue
        rule = cfg.cd_rule
        try:
            if cd_provider is not None:
                found = cd_provider(m, pivot)
                if found is None:
                    raise ConfigurationError(f"no admissible (c, d) for pivot {pivot}")
                c, d, rule = found
            else:
                c, d = cfg.cd_for(m, pivot)
            rep = validate_cd(m, pivot, c, d)
            ok = rep.passed_nonstrict if allow_boundary else rep.passed
            if not ok:
                raise ConfigurationError(f"(c, d) hypotheses fail for pivot {pivot}", report=rep)
            if rep.boundary:
                notes.append(f"pivot {pivot}: boundary pairs accepted")
            value, h_at, B = _pivot_inf(m, pivot, cfg, H, (c, d), notes)
        except ConfigurationError as exc:
            if on_inapplicable == "raise":
                raise
            notes.append(f"pivot {pivot}: term set to 0 ({exc})")
            terms.append(PivotTerm(pivot, 0.0, 0.0, 0.0, "inapplicable"))
            continue
        terms.append(PivotTerm(pivot, value, h_at, B, rule))
    total = prefactor * math.fsum(t.inf_h_value for t in terms)
    bound = _clamp(total, "bound", notes)
    return TailBoundResult(bound, terms, cfg.to_dict(), prefactor, notes)


# ---------------------------------------------------------------------------
# Stationary specialisations
# ---------------------------------------------------------------------------

def _check_stationary(r: np.ndarray, need: int) -> None:
    if len(r) < need:
        raise ConfigurationError(f"need at least {need} correlation lags, got {len(r)}")
    if abs(r[0] - 1.0) > 1e-12:
        raise HypothesisError("stationary correlation must have r(0) = 1")
    if np.any(r < 0.0):
        raise HypothesisError("stationary correlation must be non-negative")
    if np.any(np.diff(r) > 0.0):
        raise HypothesisError("stationary correlation must be non-increasing")


@dataclass
class StationaryEvaluation:
    bound: float
    inf_pmh: float
    h_at_inf: float
    B_delta: float
    log_factors: np.ndarray
    notes: list[str]


def stationary_evaluation(r: Sequence[float], M: int, u: float, a: float, cfg: BoundConfig,
                          on_inapplicable: OnInapplicable = "raise") -> StationaryEvaluation:
    """Stationary refinement with the last index as the only pivot:

        M * exp(-u^2/2) / (sqrt(2 pi) u) * a exp(-a - a^2/(2u^2)) * inf_{0<=h<=a/u} P(M, h).
    """
    r = np.asarray(r, dtype=np.float64)
    _check_stationary(r, M)
    if not u > 0.0 or not a > 0.0:
        raise ConfigurationError("u and a must be positive")
    notes: list[str] = []
    pre = M * math.exp(-0.5 * u * u) / (SQRT2PI * u) * a * math.exp(-a - a * a / (2.0 * u * u))
    if M == 1:
        return StationaryEvaluation(min(pre, 1.0), 1.0, 0.0, math.inf, np.empty(0), notes)
    m = CorrelationMatrix.from_stationary(r, M)
    local = replace(cfg, u=u, H=a / u)
    c, d = local.cd_for(m, M)
    rep = validate_cd(m, M, c, d)
    try:
        # boundary ties are accepted, as in theorem1_bound
        if not rep.passed_nonstrict:
            raise ConfigurationError(f"(c, d) hypotheses fail for pivot {M}", report=rep)
        col = _pivot_column(m, M)
        value, B, logs = _pmh_terms(col, np.asarray(c, float), np.asarray(d, float), u, a / u, local.delta)
        value = _clamp(value, f"P({M},{a / u:g})", notes)
    except ConfigurationError as exc:
        if on_inapplicable == "raise":
            raise
        notes.append(f"pivot {M}: inf over h set to 0 ({exc})")
        return StationaryEvaluation(0.0, 0.0, a / u, 0.0, np.empty(0), notes)
    bound = _clamp(pre * value, "stationary bound", notes)
    return StationaryEvaluation(bound, value, a / u, B, logs, notes)


def stationary_prop1_bound(r: Sequence[float], M: int, u: float, a: float, cfg: BoundConfig,
                           on_inapplicable: OnInapplicable = "raise") -> float:
    """Stationary lower bound M * P(Z_M > u, Z_j <= u for j < M); see
    ``stationary_evaluation``.  ``cfg`` supplies delta and the (c, d) rule;
    its u and H are overridden by ``u`` and ``a / u``."""
    return stationary_evaluation(r, M, u, a, cfg, on_inapplicable).bound


def theorem1_parameters(r1: float, u: float) -> tuple[float, float]:
    """(H, delta) = (1/u, min(u^-2, sqrt(r(1) / (u^2 (1 - r(1))))))."""
    H = 1.0 / u
    delta = min(u ** -2, math.sqrt(r1 / (u * u * (1.0 - r1))))
    return H, delta


def theorem1_bound(r: Sequence[float], n: int, u: float) -> TailBoundResult:
    """Explicit lower bound for a stationary sequence with decreasing
    non-negative correlations, using H = 1/u, the delta above and
    c_j = r(m - j), d_j = 1 - r(m - j) for every pivot m.

    When r(1) = 0 the sequence is independent and each P(m, h) equals
    Phi(u)^{m-1} exactly; that value is used directly.
    """
    r = np.asarray(r, dtype=np.float64)
    _check_stationary(r, n)
    if u < 1.0:
        raise HypothesisError(f"u must be >= 1, got {u}")
    r1 = float(r[1]) if n > 1 else 0.0
    if r1 * (1.0 + 2.0 / (u * u)) > 1.0:
        raise HypothesisError(f"r(1)(1 + 2u^-2) = {r1 * (1 + 2 / u**2):.6g} exceeds 1")
    H, delta = theorem1_parameters(r1, u)
    cfg = BoundConfig(u=u, H=H, delta=delta, cd_rule="stationary-complement")
    m = CorrelationMatrix.from_stationary(r, n)
    if r1 == 0.0:
        prefactor = H * math.exp(-0.5 * (u + H) ** 2) / SQRT2PI
        log_phi = math.log(float(ndtr(u)))
        terms = [PivotTerm(k, math.exp((k - 1) * log_phi), H, math.inf, "independent")
                 for k in range(1, n + 1)]
        bound = min(1.0, prefactor * math.fsum(t.inf_h_value for t in terms))
        return TailBoundResult(bound, terms, cfg.to_dict(), prefactor, ["independent sequence"])
    return prop1_bound(m, cfg, allow_boundary=True)


# ---------------------------------------------------------------------------
# Classical comparison bounds
# ---------------------------------------------------------------------------

def _pairs(covX: CorrelationMatrix, covW: CorrelationMatrix, thresholds):
    if covX.n != covW.n:
        raise ValueError("matrices must have the same dimension")
    t = np.asarray(thresholds, dtype=np.float64)
    if t.shape != (covX.n,):
        raise ValueError(f"expected {covX.n} thresholds")
    iu = np.triu_indices(covX.n, k=1)
    r1 = covX.entries[iu]
    r0 = covW.entries[iu]
    keep = r1 > r0
    i, j = iu[0][keep], iu[1][keep]
    return r1[keep], r0[keep], t[i] ** 2 + t[j] ** 2


def comparison_bound(covX: CorrelationMatrix, covW: CorrelationMatrix,
                     thresholds: Sequence[float], variant: int) -> float:
    """Upper bound for P(X <= u) - P(W <= u).

    variant 1: (1/2pi) sum int_{r0}^{r1} (1-t^2)^{-1/2} exp(-(ui^2+uj^2)/(2(1+|t|))) dt
    variant 2: (1/2pi) sum (arcsin r1 - arcsin r0) exp(-(ui^2+uj^2)/(2(1+rmax)))
    variant 3: (2/pi) sum (1+rmax)^{3/2} / ((ui^2+uj^2) sqrt(1-rmax)) exp(-(ui^2+uj^2)/(2(1+rmax)))
    Sums run over pairs with r1 > r0; rmax = max(|r1|, |r0|).
    """
    r1, r0, s = _pairs(covX, covW, thresholds)
    if r1.size == 0:
        return 0.0
    rmax = np.maximum(np.abs(r1), np.abs(r0))
    if variant == 1:
        total = []
        for a, b, q in zip(r0, r1, s):
            lo, hi = math.asin(a), math.asin(b)
            # t = sin(theta) removes the endpoint singularity
            f = lambda th, q=q: math.exp(-q / (2.0 * (1.0 + abs(math.sin(th)))))
            pts = [0.0] if lo < 0.0 < hi else None
            val, _ = integrate.quad(f, lo, hi, points=pts, epsabs=1e-15, epsrel=1e-12, limit=200)
            total.append(val)
        return math.fsum(total) / (2.0 * math.pi)
    if variant == 2:
        terms = (np.arcsin(r1) - np.arcsin(r0)) * np.exp(-s / (2.0 * (1.0 + rmax)))
        return math.fsum(terms) / (2.0 * math.pi)
    if variant == 3:
        if np.any(rmax >= 1.0):
            raise DegenerateCorrelationError("variant 3 needs max(|r1|, |r0|) < 1")
        if np.any(s == 0.0):
            raise ZeroDivisionError("variant 3 needs u_i^2 + u_j^2 > 0 for every compared pair")
        terms = (1.0 + rmax) ** 1.5 / (s * np.sqrt(1.0 - rmax)) * np.exp(-s / (2.0 * (1.0 + rmax)))
        return 2.0 / math.pi * math.fsum(terms)
    raise ValueError(f"variant must be 1, 2 or 3, got {variant}")


@dataclass
class SlepianVerdict:
    p_x: float
    p_w: float
    verdict: Literal["holds", "equal", "violated"]
    method: str
    tolerance: float

    def to_dict(self) -> dict:
        return asdict(self)


def slepian_check(covX: CorrelationMatrix, covW: CorrelationMatrix,
                  thresholds: Sequence[float], n_samples: int = 1_000_000,
                  seed: int = 0) -> SlepianVerdict:
    """Check P(X <= u) <= P(W <= u) for entrywise r1 <= r0.

    Uses the quadrature oracle for n <= 3 (tolerance 1e-8) and Monte Carlo
    with common random numbers otherwise (tolerance 4 combined std errors).
    """
    if covX.n != covW.n:
        raise ValueError("matrices must have the same dimension")
    if np.any(covX.entries > covW.entries + 1e-15):
        raise HypothesisError("Slepian ordering needs r1_jk <= r0_jk for every pair")
    if covX.n <= 3:
        px = orthant_prob_oracle(covX, thresholds)
        pw = orthant_prob_oracle(covW, thresholds)
        tol, method = 1e-8, "oracle"
    else:
        ex = mc_orthant(covX, thresholds, n_samples, seed)
        ew = mc_orthant(covW, thresholds, n_samples, seed)
        px, pw = ex.p_hat, ew.p_hat
        tol, method = 4.0 * math.hypot(ex.std_err, ew.std_err), "monte-carlo"
    gap = pw - px
    if abs(gap) <= 1e-12:
        verdict = "equal"
    elif gap >= -tol:
        verdict = "holds"
    else:
        verdict = "violated"
    return SlepianVerdict(px, pw, verdict, method, tol)
