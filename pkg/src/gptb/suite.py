"""Random instance families and the soundness sweep.

Every family is driven by an explicit seed (numpy ``default_rng``), so a
suite specification fully determines its instances and their references.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError
from .gaussian_core import CorrelationMatrix, mc_sup_tail, orthant_prob_oracle
from .pickands import pickands_grid_matrix, pickands_grid_size, pickands_lower_surrogate
from .prime_process import (
    PrimeProcessConfig,
    exact_correlation_matrix,
    halasz_bound_instance,
    halasz_parameters,
)
from .tail_bounds import BoundConfig, max_feasible_h, prop1_bound, theorem1_bound, validate_cd

ORACLE_SLACK = 1e-8
FAMILIES = ("random_psd", "random_stationary", "shao", "prime")


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def random_correlation(n: int, gen: np.random.Generator, extra: int = 1) -> CorrelationMatrix:
    """A A^T normalised to unit diagonal, A of shape (n, n + extra)."""
    a = gen.normal(size=(n, n + extra))
    cov = a @ a.T
    sd = np.sqrt(np.diag(cov))
    return CorrelationMatrix(cov / np.outer(sd, sd))


def random_cd(m: CorrelationMatrix, pivot: int, gen: np.random.Generator,
              tries: int = 200) -> tuple[np.ndarray, np.ndarray] | None:
    """Random (c, d) passing validate_cd with c_{pivot-1} > 0, or None.

    Ratios c_j/d_j are drawn sorted, then d_j uniformly; the scale of the
    ratios shrinks by 20% after every rejection so that small admissible
    choices are eventually found when any exist.
    """
    k = pivot - 1
    if k == 0:
        return np.empty(0), np.empty(0)
    scale = 2.0
    for _ in range(tries):
        q = np.sort(gen.uniform(0.0, scale, size=k))
        d = gen.uniform(0.05, 1.0, size=k)
        c = q * d
        if c[-1] > 0.0 and validate_cd(m, pivot, c, d).passed:
            return c, d
        scale *= 0.8
    return None


@dataclass
class OracleInstance:
    matrix: CorrelationMatrix
    cd: list
    delta: float


def oracle_instances(count: int, seed: int, dims=(2, 3)) -> list[OracleInstance]:
    """``count`` random matrices of dimension in ``dims`` that admit a valid
    (c, d) for every pivot (rejection sampling)."""
    gen = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(gen.choice(dims))
        m = random_correlation(n, gen)
        cds = [random_cd(m, p, gen) for p in range(1, n + 1)]
        if any(cd is None for cd in cds):
            continue
        out.append(OracleInstance(m, cds, float(gen.uniform(0.05, 0.95))))
    return out


def oracle_bound(inst: OracleInstance, u: float) -> float:
    m = inst.matrix
    H = min(1.0 / u, max_feasible_h(m, u))
    cfg = BoundConfig(u=u, H=H, delta=inst.delta, c=[list(c) for c, _ in inst.cd],
                      d=[list(d) for _, d in inst.cd], cd_rule="explicit")
    return prop1_bound(m, cfg).bound


def random_stationary(n: int, u: float, gen: np.random.Generator) -> np.ndarray:
    """Decreasing non-negative r(0..n-1) with r(1)(1 + 2/u^2) <= 1.

    A mixture of a geometric and a polynomial decay.  Both are convex and
    decreasing, hence positive definite; the lags >= 1 are then scaled by a
    factor at most 1 (a mixture with the identity), which keeps the Toeplitz
    matrix positive definite while placing r(1) at a random fraction of the
    admissible maximum.
    """
    k = np.arange(n, dtype=np.float64)
    rho = gen.uniform(0.2, 0.98)
    p = gen.uniform(0.3, 2.0)
    w = gen.uniform(0.0, 1.0)
    shape = w * rho ** k + (1.0 - w) * (1.0 + k) ** (-p)
    r1_max = 1.0 / (1.0 + 2.0 / (u * u))
    r1 = gen.uniform(0.05, 1.0) * min(r1_max, shape[1])
    r = shape * (r1 / shape[1]) if n > 1 else shape
    r[0] = 1.0
    return r


@dataclass
class StationaryInstance:
    r: np.ndarray
    n: int
    u: float
    seed: int


def stationary_instances(count: int, seed: int, n_max: int = 256) -> list[StationaryInstance]:
    gen = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(round(math.exp(gen.uniform(math.log(4), math.log(n_max)))))
        u = float(gen.uniform(1.0, 3.5))
        out.append(StationaryInstance(random_stationary(n, u, gen), n, u, seed * 100003 + i))
    return out


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

ROW_FIELDS = ("family", "index", "n", "u", "bound", "reference", "std_err", "method", "passed")


@dataclass
class SweepRow:
    family: str
    index: int
    n: int
    u: float
    bound: float
    reference: float
    std_err: float
    method: str
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _mc_row(family, i, m, u, bound, samples, seed, workers, corrupt):
    est = mc_sup_tail(m, u, samples, seed, workers=workers)
    bound = bound + corrupt
    ok = bound <= est.p_hat + 4.0 * est.std_err
    return SweepRow(family, i, m.n, u, bound, est.p_hat, est.std_err, "monte-carlo", ok)


def run_family(fam: dict, workers: int = 1, corrupt: float = 0.0) -> list[SweepRow]:
    kind = fam.get("type")
    if kind not in FAMILIES:
        raise ConfigurationError(f"unknown family type {kind!r}; expected one of {FAMILIES}")
    if "seed" not in fam:
        raise ConfigurationError(f"family {kind!r} has no seed; seeds are mandatory")
    count = int(fam.get("count", 0))
    seed = int(fam["seed"])
    samples = int(fam.get("samples", 100_000))
    rows: list[SweepRow] = []
    if kind == "random_psd":
        us = fam.get("u", [0.5, 1.0, 2.0, 3.0])
        for i, inst in enumerate(oracle_instances(count, seed, tuple(fam.get("dims", (2, 3))))):
            for u in us:
                b = oracle_bound(inst, u) + corrupt
                ref = 1.0 - orthant_prob_oracle(inst.matrix, [u] * inst.matrix.n)
                rows.append(SweepRow(kind, i, inst.matrix.n, u, b, ref, 0.0, "oracle",
                                     b <= ref + ORACLE_SLACK))
    elif kind == "random_stationary":
        for i, inst in enumerate(stationary_instances(count, seed, int(fam.get("n_max", 256)))):
            m = CorrelationMatrix.from_stationary(inst.r, inst.n)
            b = theorem1_bound(inst.r, inst.n, inst.u).bound
            rows.append(_mc_row(kind, i, m, inst.u, b, samples, inst.seed, workers, corrupt))
    elif kind == "shao":
        i = 0
        for alpha in fam.get("alpha", [0.3, 0.5]):
            for u in fam.get("u", [3.0, 4.0]):
                M = pickands_grid_size(alpha, u, fam.get("b", math.e / 2))
                if M < 2 or M > 256:
                    continue
                ev = pickands_lower_surrogate(alpha, u, fam.get("b", math.e / 2), fam.get("a", 1.0),
                                              fam.get("delta"))
                m = pickands_grid_matrix(alpha, M)
                rows.append(_mc_row(kind, i, m, u, ev.stationary_bound, samples, seed + i, workers, corrupt))
                i += 1
    elif kind == "prime":
        for i, x in enumerate(fam.get("x", [1e4])):
            cfg = PrimeProcessConfig(float(x), K=fam.get("K", 1.0))
            m, _ = exact_correlation_matrix(cfg, cfg.grid())
            u, _, _ = halasz_parameters(cfg)
            b = halasz_bound_instance(cfg, matrix=m).bound
            rows.append(_mc_row(kind, i, m, u, b, samples, seed + i, workers, corrupt))
    return rows


def run_suite(spec: dict, workers: int = 1) -> list[SweepRow]:
    """Run every family of a suite specification in order.

    ``spec["corrupt_bound"]`` (default 0) is added to every bound: a
    self-test hook for the failure path.
    """
    corrupt = float(spec.get("corrupt_bound", 0.0))
    rows: list[SweepRow] = []
    for fam in spec.get("families", []):
        rows.extend(run_family(fam, workers, corrupt))
    return rows

