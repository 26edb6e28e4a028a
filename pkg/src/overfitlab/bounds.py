"""Theoretical bound parameters for interpolation risk guarantees.

This module evaluates, for a given spectrum and sample size, every quantity
appearing in the high-probability guarantees:

    k*       smallest truncation level balancing net entropy against the
             per-row anti-concentration exponent
    nu       slack at k*, giving the probability floor 1 - e^(-nu) - e^(-cN)
    rho      estimation-error bound
    r*       prediction-error bound (fixed point of the localized width)
    s_min    lower bound for the smallest singular value of the design
    DM route trace-based alternative bounds valid when N is far below the
             stable rank tr(Sigma)/lambda_1

Two conventions deserve a note.  First, the radicand 3 c0 (1 - x) - 1 admits
two published variants: x = c0 makes it negative for every c0 in (0, 1), so
the default uses x = frak_R_k (the anti-concentration bound at the working
truncation), which is positive whenever c0 > 1/3 and frak_R_k is small; both
variants stay available through `radicand_form`.  Second, every absolute
constant left free by the theory (the e^(-cN) rate, the operator-norm
constant, the Dvoretzky-Milman constant) is an explicit config field with
default 1, never a hidden fudge factor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, asdict, replace
from typing import NamedTuple

import numpy as np

from .designs import compute_c0
from .spectra import Spectrum, rank_profile, stable_rank4

__all__ = [
    "RADICAND_FORMS",
    "WIDTH_PROXY_MODES",
    "InfeasibleBoundError",
    "BoundConfig",
    "BoundReport",
    "PerKRow",
    "KStarScan",
    "RStarResult",
    "DMBounds",
    "width_proxies",
    "operator_norm_bound",
    "find_k_star",
    "select_working_k",
    "compute_nu",
    "probability_floor",
    "compute_rho",
    "compute_r_star",
    "s_min_lower_bound",
    "dm_bounds",
    "dm_prediction_threshold",
    "prediction_exclusion_threshold",
    "bound_report",
]

RADICAND_FORMS = ("proof_frak_r", "statement_c0")
WIDTH_PROXY_MODES = ("gaussian_width", "monte_carlo")

# bisection contract for r1*
_R1_REL_TOL = 1e-10
_R1_BRACKET_LO = 1e-12
_R1_BRACKET_HI = 10.0


class InfeasibleBoundError(ValueError):
    """The small-ball radicand is non-positive for every admissible truncation."""


@dataclass(frozen=True)
class BoundConfig:
    """Free constants of the guarantees, all surfaced.

    epsilon        free margin of the smallest-singular-value bound (0, 1);
                   also divides the noise term of rho
    c0             coordinate fraction; None means compute exactly from the
                   spectrum via the row-norm floor
    c_small        the constant c < 1 inside frak_R_k
    zeta1, zeta2   width-threshold constants defining r1* and r2*
    q_moment       moment order q of the diameter proxy (>= 2)
    theta          localization ratio r*/r in (0, 1)
    lambda_width_proxy  reporting flag: widths below are sub-gaussian proxies
    c1_dm, delta_dm     Dvoretzky-Milman applicability constants, delta in (0, 1/2)
    radicand_form  "proof_frak_r" (default) or "statement_c0"; see module note
    smin_denominator    2 (statement variant) or 8 (proof tail variant)
    op_norm_C      multiplicative constant of the operator-norm bound
    prob_c         rate constant of the e^(-cN) probability term
    """

    epsilon: float = 0.1
    c0: float | None = None
    c_small: float = 0.5
    zeta1: float = 1.0
    zeta2: float = 0.1
    q_moment: float = 4.0
    theta: float = 0.5
    lambda_width_proxy: str = "gaussian_width"
    c1_dm: float = 1.0
    delta_dm: float = 0.25
    radicand_form: str = "proof_frak_r"
    smin_denominator: float = 2.0
    op_norm_C: float = 1.0
    prob_c: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.c0 is not None and not 0.0 < self.c0 <= 1.0:
            raise ValueError(f"c0 must lie in (0, 1], got {self.c0}")
        if not 0.0 < self.c_small < 1.0:
            raise ValueError(f"c_small must lie in (0, 1), got {self.c_small}")
        if self.zeta1 <= 0:
            raise ValueError("zeta1 must be positive")
        if self.zeta2 < 0:
            raise ValueError("zeta2 must be non-negative")
        if self.q_moment < 2:
            raise ValueError("q_moment must be at least 2")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.lambda_width_proxy not in WIDTH_PROXY_MODES:
            raise ValueError(f"lambda_width_proxy must be one of {WIDTH_PROXY_MODES}")
        if self.c1_dm <= 0:
            raise ValueError("c1_dm must be positive")
        if not 0.0 < self.delta_dm < 0.5:
            raise ValueError(f"invalid delta: delta_dm must lie in (0, 0.5), got {self.delta_dm}")
        if self.radicand_form not in RADICAND_FORMS:
            raise ValueError(f"radicand_form must be one of {RADICAND_FORMS}")
        if self.smin_denominator not in (2.0, 8.0):
            raise ValueError("smin_denominator must be 2 or 8")
        if self.op_norm_C <= 0 or self.prob_c <= 0:
            raise ValueError("op_norm_C and prob_c must be positive")

    def to_json_obj(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BoundConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown BoundConfig fields: {sorted(extra)}")
        return cls(**obj)


class PerKRow(NamedTuple):
    """One line of the k-scan: both sides of the balance inequality at k."""

    k: int
    lhs: float
    rhs: float
    frak_R_k: float
    radicand: float
    feasible: bool


class KStarScan(NamedTuple):
    k_star: int | None  # None encodes the empty-set sentinel (infinity)
    table: tuple[PerKRow, ...]
    c0: float


def _resolve_c0(spectrum: Spectrum, config: BoundConfig) -> float:
    return config.c0 if config.c0 is not None else compute_c0(spectrum)


def width_proxies(spectrum: Spectrum, config: BoundConfig) -> tuple[float, float]:
    """Sub-gaussian width proxies of the unit-ball class.

    lambda_tilde_D = sqrt(2 tr(Sigma)) bounds the expected gaussian supremum
    over the image of the unit ball; d_q_D = sqrt(2 q lambda_1) bounds its
    L_q diameter.  For heavy-tailed factors these remain proxies (the flag
    `lambda_width_proxy` travels with every report).
    """
    lam1 = float(spectrum.eigenvalues[0])
    return (
        math.sqrt(2.0 * spectrum.trace()),
        math.sqrt(2.0 * config.q_moment * lam1),
    )


def operator_norm_bound(spectrum: Spectrum, N: int, config: BoundConfig) -> float:
    """High-probability envelope for the design operator norm.

    sqrt(N) * sqrt(C * (d_q * lt / sqrt(p) + lt^2 / p) + lambda_1) with the
    ambient dimension p playing the concentration dimension of the unit ball.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    lt, dq = width_proxies(spectrum, config)
    p = spectrum.p
    lam1 = float(spectrum.eigenvalues[0])
    inner = config.op_norm_C * (dq * lt / math.sqrt(p) + lt * lt / p) + lam1
    return math.sqrt(N) * math.sqrt(inner)


def _net_width_factor(spectrum: Spectrum, config: BoundConfig) -> float:
    """sqrt(d_q lt / sqrt(p) + lt^2 / p + lambda_1) * sqrt(p / tr), the
    k-independent numerator of the balance inequality."""
    lt, dq = width_proxies(spectrum, config)
    p = spectrum.p
    lam1 = float(spectrum.eigenvalues[0])
    inner = dq * lt / math.sqrt(p) + lt * lt / p + lam1
    return math.sqrt(inner) * math.sqrt(p / spectrum.trace())


def _frak_vector(eig: np.ndarray, c_small: float) -> np.ndarray:
    """frak_R_k for k = 0..p-1 in one vector pass; NaN where undefined
    (degenerate tail or truncation beyond srank_4 of the covariance)."""
    p = eig.size
    tail1 = np.cumsum(eig[::-1])[::-1]
    tail2 = np.cumsum((eig**2)[::-1])[::-1]
    ks = np.arange(p, dtype=np.float64)
    s4 = float((eig**2).sum() ** 2 / (eig**4).sum())
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        R = tail1**2 / tail2
        R_k2 = (1.0 - np.sqrt(ks / s4)) * R
        denom_sq = (4.0 * p - ks) ** 2
        expo = (16.0 * p * p / denom_sq) * R_k2
        frak = (denom_sq / (8.0 * p)) * np.power(c_small, expo) / R_k2
    frak = np.where((tail2 > 0) & (R_k2 > 0), frak, np.nan)
    return frak


def find_k_star(spectrum: Spectrum, N: int, config: BoundConfig) -> KStarScan:
    """Scan k = 0..p-1 for the smallest k balancing entropy against exponent.

    LHS(k) = p log(1 + W / sqrt(radicand_k)) with W the net width factor;
    RHS(k) = N (c0 frak_R_k + 1 - c0) / 2 + log(p).  Rows with non-positive
    radicand or undefined frak_R_k are infeasible.  An empty feasible set is
    a value (k_star = None), not an error.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    eig = spectrum.eigenvalues
    p = spectrum.p
    c0 = _resolve_c0(spectrum, config)
    frak = _frak_vector(eig, config.c_small)
    if config.radicand_form == "proof_frak_r":
        radicand = 3.0 * c0 * (1.0 - frak) - 1.0
    else:
        radicand = np.full(p, 3.0 * c0 * (1.0 - c0) - 1.0)
        radicand[np.isnan(frak)] = np.nan
    W = _net_width_factor(spectrum, config)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = p * np.log1p(W / np.sqrt(radicand))
    rhs = N * (c0 * frak + 1.0 - c0) / 2.0 + math.log(p)
    usable = np.isfinite(frak) & (radicand > 0)
    feasible = usable & (lhs <= rhs)
    k_star = int(np.argmax(feasible)) if feasible.any() else None
    table = tuple(
        PerKRow(
            k=int(k),
            lhs=float(lhs[k]) if usable[k] else math.inf,
            rhs=float(rhs[k]) if np.isfinite(frak[k]) else math.nan,
            frak_R_k=float(frak[k]),
            radicand=float(radicand[k]),
            feasible=bool(feasible[k]),
        )
        for k in range(p)
    )
    return KStarScan(k_star=k_star, table=table, c0=c0)


def select_working_k(scan: KStarScan) -> int:
    """Truncation level used by the bound evaluators.

    k* itself when finite; otherwise the radicand-feasible k closest to
    balancing the scan (smallest LHS - RHS gap), so that rho and the
    smallest-singular-value bound stay computable when the balance inequality
    has no solution at desk scale.  Raises when no k has a positive radicand.
    """
    if scan.k_star is not None:
        return scan.k_star
    best_k = None
    best_gap = math.inf
    for row in scan.table:
        if row.radicand > 0 and math.isfinite(row.lhs) and math.isfinite(row.rhs):
            gap = row.lhs - row.rhs
            if gap < best_gap:
                best_gap = gap
                best_k = row.k
    if best_k is None:
        raise InfeasibleBoundError(
            "no truncation level yields a positive radicand "
            f"(c0={scan.c0:.6g}, form includes 3*c0*(1-x)-1 <= 0 for all k)"
        )
    return best_k


def _radicand_at(spectrum: Spectrum, config: BoundConfig, c0: float, k_used: int | None) -> float:
    if config.radicand_form == "statement_c0":
        return 3.0 * c0 * (1.0 - c0) - 1.0
    if k_used is None:
        raise ValueError("k_used is required for the proof_frak_r radicand form")
    frak = rank_profile(spectrum, k_used, config.c_small).frak_R_k
    return 3.0 * c0 * (1.0 - frak) - 1.0


def compute_nu(spectrum: Spectrum, N: int, k_star: int | None, config: BoundConfig) -> float:
    """Slack RHS(k*) - LHS(k*) of the balance inequality, non-negative by
    definition of k*.  Raises for the infinite sentinel."""
    if k_star is None:
        raise InfeasibleBoundError("k* is infinite: the balance inequality never holds")
    c0 = _resolve_c0(spectrum, config)
    frak = rank_profile(spectrum, k_star, config.c_small).frak_R_k
    radicand = (
        3.0 * c0 * (1.0 - frak) - 1.0
        if config.radicand_form == "proof_frak_r"
        else 3.0 * c0 * (1.0 - c0) - 1.0
    )
    if radicand <= 0:
        raise InfeasibleBoundError(f"non-positive radicand {radicand:.6g} at k={k_star}")
    p = spectrum.p
    W = _net_width_factor(spectrum, config)
    lhs = p * math.log1p(W / math.sqrt(radicand))
    rhs = N * (c0 * frak + 1.0 - c0) / 2.0 + math.log(p)
    return rhs - lhs


def probability_floor(nu: float, N: int, config: BoundConfig) -> float:
    """1 - e^(-nu) - e^(-c N); NaN propagates for an undefined nu."""
    if math.isnan(nu):
        return math.nan
    return 1.0 - math.exp(-nu) - math.exp(-config.prob_c * N)


def compute_rho(
    spectrum: Spectrum,
    alpha_star_norm: float,
    noise_psi2: float,
    config: BoundConfig,
    k_used: int | None = None,
) -> float:
    """Estimation-error bound.

    rho = |alpha*| + sqrt(2 / radicand) * sqrt(p / tr) * psi2 / epsilon,
    with the radicand taken at the working truncation (see module note on
    the two radicand forms).
    """
    if alpha_star_norm < 0 or noise_psi2 < 0:
        raise ValueError("norms must be non-negative")
    c0 = _resolve_c0(spectrum, config)
    radicand = _radicand_at(spectrum, config, c0, k_used)
    if radicand <= 0:
        raise InfeasibleBoundError(
            f"invalid denominator: radicand {radicand:.6g} is non-positive"
        )
    noise_term = (
        math.sqrt(2.0 / radicand)
        * math.sqrt(spectrum.p / spectrum.trace())
        * noise_psi2
        / config.epsilon
    )
    return alpha_star_norm + noise_term


class RStarResult(NamedTuple):
    r_star: float
    r1_star: float
    r2_star: float


def _width_condition(eig: np.ndarray, rho: float, zeta1p: float, r: float) -> bool:
    """sqrt(2) * sqrt(sum min(lambda rho^2, r^2)) <= sqrt(zeta1 p) * r, squared."""
    lhs = 2.0 * float(np.minimum(eig * rho * rho, r * r).sum())
    return lhs <= zeta1p * r * r


def compute_r_star(spectrum: Spectrum, rho: float, config: BoundConfig) -> RStarResult:
    """Prediction-error bound as the fixed point of the localized width.

    r1* is the smallest r such that the gaussian-width proxy of the
    localized set (l2 ball of radius rho intersected with the covariance
    ellipsoid of radius r) drops below sqrt(zeta1 p) r.  In sub-gaussian
    proxy mode the diameter fixed point r2* is zero, so r* = r1*.

    The condition is monotone (its feasible set is an upper ray), so
    bisection is exact: bracket [1e-12, 10] * rho * sqrt(lambda_1), relative
    tolerance 1e-10.  If the bracket top never satisfies the condition the
    infimum does not exist at reachable scales and the sentinel inf is
    returned.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    eig = spectrum.eigenvalues
    zeta1p = config.zeta1 * spectrum.p
    scale = rho * math.sqrt(float(eig[0]))
    lo = _R1_BRACKET_LO * scale
    hi = _R1_BRACKET_HI * scale
    if _width_condition(eig, rho, zeta1p, lo):
        # the width threshold is slack all the way down: infimum is zero
        return RStarResult(r_star=0.0, r1_star=0.0, r2_star=0.0)
    for _ in range(64):
        if _width_condition(eig, rho, zeta1p, hi):
            break
        hi *= 2.0
    else:
        warnings.warn("no crossing for r1*: width never drops below threshold", stacklevel=2)
        return RStarResult(r_star=math.inf, r1_star=math.inf, r2_star=0.0)
    while hi - lo > _R1_REL_TOL * hi:
        mid = 0.5 * (lo + hi)
        if _width_condition(eig, rho, zeta1p, mid):
            hi = mid
        else:
            lo = mid
    r1 = hi
    r2 = 0.0
    return RStarResult(r_star=r1 + r2, r1_star=r1, r2_star=r2)


def s_min_lower_bound(
    spectrum: Spectrum, N: int, config: BoundConfig, k_used: int | None = None
) -> float:
    """epsilon * sqrt(radicand / denom) * sqrt(N) * sqrt(tr / p).

    denom is 2 by default (the statement variant) or 8 (the proof tail
    variant); both are reported with every BoundReport.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    c0 = _resolve_c0(spectrum, config)
    radicand = _radicand_at(spectrum, config, c0, k_used)
    if radicand <= 0:
        raise InfeasibleBoundError(f"invalid radicand {radicand:.6g}: must be positive")
    return (
        config.epsilon
        * math.sqrt(radicand / config.smin_denominator)
        * math.sqrt(N)
        * math.sqrt(spectrum.trace() / spectrum.p)
    )


class DMBounds(NamedTuple):
    applicable: bool
    s_min_bound: float
    estimation_bound: float


def dm_bounds(
    spectrum: Spectrum,
    N: int,
    config: BoundConfig,
    alpha_star_norm: float = 0.0,
    noise_psi2: float = 0.0,
) -> DMBounds:
    """Trace-based route via random embeddings of the covariance ellipsoid.

    Applicable when N <= c1 * delta^2 / log(1/delta) * r0 with r0 = tr / lambda_1;
    then the design ball contains (1 - delta) sqrt(tr) B_2^N, giving
    s_min >= (1 - delta) sqrt(tr) and the estimation bound
    |alpha*| + psi2 sqrt(N / tr).  The (1 - delta) factor is used here even
    where a published variant multiplies by 4 at delta = 1/4; the variant is
    inconsistent with delta < 1/2 and is not reproduced.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    delta = config.delta_dm
    tr = spectrum.trace()
    r0 = tr / float(spectrum.eigenvalues[0])
    applicable = bool(N <= config.c1_dm * delta * delta / math.log(1.0 / delta) * r0)
    s_min = (1.0 - delta) * math.sqrt(tr)
    est = alpha_star_norm + noise_psi2 * math.sqrt(N / tr)
    return DMBounds(applicable=applicable, s_min_bound=s_min, estimation_bound=est)


def dm_prediction_threshold(
    r: float, spectrum: Spectrum, N: int, config: BoundConfig, noise_psi2: float
) -> float:
    """Audit-only exclusion level of the trace-based route:
    r^2 (16 tr / N - zeta1 / 2) - psi2^2 / 2.  Tied to the inconsistent
    4 sqrt(tr) reading (see dm_bounds), hence reported but never asserted."""
    tr = spectrum.trace()
    return r * r * (16.0 * tr / N - 0.5 * config.zeta1) - 0.5 * noise_psi2**2


def prediction_exclusion_threshold(
    r_star: float, noise_psi2: float, config: BoundConfig
) -> float:
    """Lower bound on the empirical excess risk outside the localized set.

    (r*)^2 (theta^-2 - zeta1 zeta2 theta^-2 - zeta2 theta^-2 - zeta2) - psi2^2 / 2.
    The exclusion argument needs the (r*)^2 coefficient positive; a
    diagnostic is emitted when the chosen constants break that."""
    th2 = config.theta**-2
    coeff = th2 - config.zeta1 * config.zeta2 * th2 - config.zeta2 * th2 - config.zeta2
    if coeff <= 0:
        warnings.warn(
            f"non-positive exclusion coefficient {coeff:.6g}: "
            "zeta1/zeta2/theta too large for the exclusion argument",
            stacklevel=2,
        )
    return r_star * r_star * coeff - 0.5 * noise_psi2**2


@dataclass(frozen=True)
class BoundReport:
    """Every theoretical quantity for one (spectrum, N, config) triple."""

    k_star: int | None
    k_used: int
    c0_used: float
    nu: float
    probability_floor: float
    rho: float
    r_star: float
    r1_star: float
    r2_star: float
    s_min_bound: float
    lambda_tilde_D: float
    d_q_D: float
    dm_applicable: bool
    dm_s_min_bound: float
    dm_estimation_bound: float
    proxy_mode: str
    config: BoundConfig
    per_k_table: tuple[PerKRow, ...]

    def to_json_obj(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v

        obj = {
            "k_star": self.k_star,
            "k_used": self.k_used,
            "c0_used": self.c0_used,
            "nu": clean(self.nu),
            "probability_floor": clean(self.probability_floor),
            "rho": clean(self.rho),
            "r_star": clean(self.r_star),
            "r1_star": clean(self.r1_star),
            "r2_star": clean(self.r2_star),
            "s_min_bound": self.s_min_bound,
            "lambda_tilde_D": self.lambda_tilde_D,
            "d_q_D": self.d_q_D,
            "dm_applicable": self.dm_applicable,
            "dm_s_min_bound": self.dm_s_min_bound,
            "dm_estimation_bound": self.dm_estimation_bound,
            "proxy_mode": self.proxy_mode,
            "config": self.config.to_json_obj(),
            "per_k_table": [
                {
                    "k": row.k,
                    "lhs": clean(row.lhs),
                    "rhs": clean(row.rhs),
                    "frak_R_k": clean(row.frak_R_k),
                    "radicand": clean(row.radicand),
                    "feasible": row.feasible,
                }
                for row in self.per_k_table
            ],
        }
        return obj

    def per_k_csv(self) -> str:
        lines = ["k,lhs,rhs,frak_R_k,feasible"]
        for row in self.per_k_table:
            lines.append(
                f"{row.k},{row.lhs:.17g},{row.rhs:.17g},{row.frak_R_k:.17g},"
                f"{'true' if row.feasible else 'false'}"
            )
        return "\n".join(lines) + "\n"


def bound_report(
    spectrum: Spectrum,
    N: int,
    config: BoundConfig,
    alpha_star_norm: float,
    noise_psi2: float,
) -> BoundReport:
    """Evaluate the full bound suite once for a configuration.

    When the balance inequality has no solution (k* infinite) the report
    carries NaN for nu and the probability floor but still evaluates rho,
    r* and the singular-value bound at the working truncation, because the
    empirical side of an experiment remains meaningful.
    """
    scan = find_k_star(spectrum, N, config)
    k_used = select_working_k(scan)
    if scan.k_star is not None:
        nu = compute_nu(spectrum, N, scan.k_star, config)
        floor = probability_floor(nu, N, config)
    else:
        nu = math.nan
        floor = math.nan
    rho = compute_rho(spectrum, alpha_star_norm, noise_psi2, config, k_used=k_used)
    rstar = compute_r_star(spectrum, rho, config)
    smin = s_min_lower_bound(spectrum, N, config, k_used=k_used)
    lt, dq = width_proxies(spectrum, config)
    dm = dm_bounds(spectrum, N, config, alpha_star_norm=alpha_star_norm, noise_psi2=noise_psi2)
    return BoundReport(
        k_star=scan.k_star,
        k_used=k_used,
        c0_used=scan.c0,
        nu=nu,
        probability_floor=floor,
        rho=rho,
        r_star=rstar.r_star,
        r1_star=rstar.r1_star,
        r2_star=rstar.r2_star,
        s_min_bound=smin,
        lambda_tilde_D=lt,
        d_q_D=dq,
        dm_applicable=dm.applicable,
        dm_s_min_bound=dm.s_min_bound,
        dm_estimation_bound=dm.estimation_bound,
        proxy_mode=config.lambda_width_proxy,
        config=config,
        per_k_table=scan.table,
    )
