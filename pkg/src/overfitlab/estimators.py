"""Monte Carlo estimators confronting the theoretical quantities with samples.

Every estimator derives its randomness from (seed, fixed stream tags, chunk
index), so a result is a pure function of its arguments: rerunning with the
same seed reproduces it bit-for-bit, and trials may be partitioned across
workers without changing the outcome.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .designs import DesignSpec, rng_stream, sample_design
from .interpolator import RegressionInstance
from .spectra import Spectrum

__all__ = [
    "MCEstimate",
    "SminDistribution",
    "CandidateOutsideLocalizationError",
    "estimate_coordinate_smallball_prob",
    "estimate_smin_distribution",
    "estimate_gaussian_width",
    "empirical_process_suprema",
    "sample_localized_candidates",
]

_SMALLBALL_TAG = 21
_SMIN_TAG = 22
_WIDTH_TAG = 23
_CANDIDATE_TAG = 24

_CHUNK = 4096  # fixed so the chunking itself never affects the streams


@dataclass(frozen=True)
class MCEstimate:
    """A Monte Carlo value with its uncertainty and provenance."""

    value: float
    stderr: float
    trials: int
    seed: int
    elapsed_ms: int


@dataclass(frozen=True, eq=False)
class SminDistribution:
    """Empirical smallest-singular-value distribution over sampled designs."""

    quantiles: dict
    exceed_rate: float | None
    rank_deficient: int
    trials: int
    values: np.ndarray


class CandidateOutsideLocalizationError(ValueError):
    """A candidate deviates from the center by more than the localized set allows."""


def estimate_coordinate_smallball_prob(
    spec: DesignSpec,
    epsilon: float,
    c0: float,
    trials: int = 10_000,
    substream: Sequence[int] = (),
) -> MCEstimate:
    """P{ at most c0 * p coordinates of a design row clear epsilon * sqrt(tr/p) }.

    The theory predicts this probability is tiny whenever the spectrum is
    spread; the estimator simply counts over sampled rows.
    """
    if trials < 1000:
        raise ValueError(f"insufficient trials {trials}: need at least 1000")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0.0 <= c0 <= 1.0:
        raise ValueError("c0 must lie in [0, 1]")
    t0 = time.perf_counter()
    spectrum = spec.spectrum
    threshold = epsilon * math.sqrt(spectrum.trace() / spectrum.p)
    cutoff = c0 * spectrum.p
    hits = 0
    done = 0
    idx = 0
    while done < trials:
        n = min(_CHUNK, trials - done)
        rows = sample_design(spec, n, substream=(_SMALLBALL_TAG, *substream, idx))
        counts = (np.abs(rows) >= threshold).sum(axis=1)
        hits += int(np.count_nonzero(counts <= cutoff))
        done += n
        idx += 1
    p_hat = hits / trials
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / trials)
    return MCEstimate(
        value=p_hat,
        stderr=stderr,
        trials=trials,
        seed=spec.seed,
        elapsed_ms=int((time.perf_counter() - t0) * 1000),
    )


def estimate_smin_distribution(
    spec: DesignSpec,
    N: int,
    trials: int = 200,
    bound: float | None = None,
    substream: Sequence[int] = (),
) -> SminDistribution:
    """Sample designs, record the smallest singular value of each.

    Returns the 1%, 5% and 50% empirical quantiles plus, when a theoretical
    bound is supplied, the fraction of trials whose s_min clears it.
    Rank-deficient draws (possible only for discrete factors) are excluded
    from the quantiles and reported separately.
    """
    if N < 1 or N >= spec.spectrum.p:
        raise ValueError(f"need 1 <= N < p, got N={N}, p={spec.spectrum.p}")
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    values = np.empty(trials)
    deficient = 0
    for t in range(trials):
        X = sample_design(spec, N, substream=(_SMIN_TAG, *substream, t))
        s = np.linalg.svd(X, compute_uv=False)
        if s[-1] <= 1e-12 * s[0]:
            deficient += 1
            values[t] = np.nan
        else:
            values[t] = s[-1]
    valid = values[~np.isnan(values)]
    quantiles = {
        "q01": float(np.quantile(valid, 0.01)),
        "q05": float(np.quantile(valid, 0.05)),
        "q50": float(np.quantile(valid, 0.50)),
    }
    exceed = float(np.mean(valid >= bound)) if bound is not None else None
    return SminDistribution(
        quantiles=quantiles,
        exceed_rate=exceed,
        rank_deficient=deficient,
        trials=trials,
        values=values,
    )


def _sup_linear_over_intersection(
    g: np.ndarray,
    eig: np.ndarray,
    rho: float,
    r: float,
    grid_points: int,
    bisect_iters: int = 64,
) -> np.ndarray:
    """sup over {|a| <= rho, |Sigma^(1/2) a| <= r} of <g, Sigma^(1/2) a>, per row of g.

    Case analysis in the eigenbasis with c = sqrt(lambda) * g:
    if the plain-ball maximizer meets the ellipsoid constraint it wins; if
    the ellipsoid maximizer meets the ball constraint it wins; otherwise both
    constraints are active and the solution is a(nu) proportional to
    c / (1 + nu lambda), with the dual ratio nu found by monotone bisection
    (bracketed on a geometric grid of `grid_points` candidates).
    """
    c = g * np.sqrt(eig)[None, :]
    pos = eig > 0
    c2 = c * c
    norm_c = np.sqrt(c2.sum(axis=1))
    out = np.zeros(g.shape[0])
    nonzero = norm_c > 0

    # ball maximizer a = rho c / |c|
    with np.errstate(invalid="ignore", divide="ignore"):
        sig_ball = rho * np.sqrt((c2 * eig).sum(axis=1)) / norm_c
    ball_ok = nonzero & (sig_ball <= r)
    out[ball_ok] = rho * norm_c[ball_ok]

    # ellipsoid maximizer: value r sqrt(sum c^2 / lambda); zero-lambda
    # coordinates carry c = 0 and contribute nothing
    q1 = (c2[:, pos] / eig[pos]).sum(axis=1)       # = sum g_i^2 on the support
    q2 = (c2[:, pos] / eig[pos] ** 2).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        norm_ell = r * np.sqrt(q2) / np.sqrt(q1)
    ell_ok = nonzero & ~ball_ok & (norm_ell <= rho)
    out[ell_ok] = r * np.sqrt(q1[ell_ok])

    both = nonzero & ~ball_ok & ~ell_ok
    if np.any(both):
        cb = c2[both]
        lam = eig[None, :]

        def sigma_at(nu):
            d2 = cb / (1.0 + nu[:, None] * lam) ** 2
            return rho * np.sqrt((d2 * lam).sum(axis=1) / d2.sum(axis=1))

        # bracket the dual ratio on a geometric grid, then bisect
        grid = np.geomspace(1e-12, 1e12, max(grid_points, 8))
        lo = np.zeros(int(both.sum()))
        hi = np.full_like(lo, grid[-1])
        found = np.zeros(both.sum(), dtype=bool)
        prev = np.zeros_like(lo)
        for nu_val in grid:
            s = sigma_at(np.full_like(lo, nu_val))
            newly = ~found & (s <= r)
            lo[newly] = prev[newly]
            hi[newly] = nu_val
            found |= newly
            prev = np.where(found, prev, nu_val)
        for _ in range(bisect_iters):
            mid = 0.5 * (lo + hi)
            s = sigma_at(mid)
            too_wide = s > r
            lo = np.where(too_wide, mid, lo)
            hi = np.where(too_wide, hi, mid)
        nu = hi
        d = cb / (1.0 + nu[:, None] * lam)
        out[both] = rho * d.sum(axis=1) / np.sqrt((d * d / _nonzero_guard(cb)).sum(axis=1))
    return out


def _nonzero_guard(c2: np.ndarray) -> np.ndarray:
    # zero entries of c^2 pair with zero numerators; 1.0 keeps the division clean
    return np.where(c2 > 0, c2, 1.0)


def estimate_gaussian_width(
    spectrum: Spectrum,
    rho: float,
    r: float,
    trials: int = 10_000,
    inner_samples: int = 64,
    seed: int = 0,
) -> MCEstimate:
    """E sup over the localized set of <g, Sigma^(1/2) a>, g standard gaussian.

    The inner maximization over the ball-ellipsoid intersection is exact up
    to the dual bisection tolerance; `inner_samples` sets the bracketing grid
    resolution.  The estimate should never exceed
    sqrt(2) sqrt(sum min(lambda rho^2, r^2)) beyond sampling noise.
    """
    if rho <= 0 or r <= 0:
        raise ValueError("rho and r must be positive")
    if trials < 100:
        raise ValueError("need at least 100 trials")
    t0 = time.perf_counter()
    eig = spectrum.eigenvalues
    sups = np.empty(trials)
    done = 0
    idx = 0
    while done < trials:
        n = min(_CHUNK, trials - done)
        g = rng_stream(seed, _WIDTH_TAG, idx).standard_normal((n, spectrum.p))
        sups[done : done + n] = _sup_linear_over_intersection(
            g, eig, rho, r, grid_points=inner_samples
        )
        done += n
        idx += 1
    value = float(sups.mean())
    stderr = float(sups.std(ddof=1) / math.sqrt(trials))
    return MCEstimate(
        value=value,
        stderr=stderr,
        trials=trials,
        seed=seed,
        elapsed_ms=int((time.perf_counter() - t0) * 1000),
    )


class ProcessSuprema(NamedTuple):
    Q_sup: float
    M_sup: float


def empirical_process_suprema(
    instance: RegressionInstance,
    candidates: np.ndarray,
    spectrum: Spectrum,
    r: float,
    rho: float,
    tol: float = 1e-9,
) -> ProcessSuprema:
    """Maxima of the quadratic deviation and the multiplier term over a
    finite candidate set inside the localized region.

    Q = max |(1/N) sum <X_i, a - a*>^2 - |Sigma^(1/2)(a - a*)|^2|
    M = max |(2/N) sum xi_i <X_i, a - a*>|

    The population second moment is exact (the spectrum is known), so Q
    isolates the empirical fluctuation.  Finite maxima are lower bounds on
    the continuum suprema; checks built on them are one-sided.
    """
    cand = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    if cand.shape[1] != instance.p:
        raise ValueError(f"candidates must have {instance.p} columns")
    dev = cand - instance.alpha_star[None, :]
    norms = np.linalg.norm(dev, axis=1)
    signorms = np.sqrt((dev * dev) @ spectrum.eigenvalues)
    bad = (norms > rho * (1.0 + tol)) | (signorms > r * (1.0 + tol))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise CandidateOutsideLocalizationError(
            f"candidate {i} outside localization: |dev|={norms[i]:.6g} (rho={rho:.6g}), "
            f"|dev|_Sigma={signorms[i]:.6g} (r={r:.6g})"
        )
    proj = instance.design @ dev.T  # (N, m)
    emp_second = (proj * proj).mean(axis=0)
    pop_second = signorms * signorms
    Q = float(np.max(np.abs(emp_second - pop_second))) if cand.size else 0.0
    mult = 2.0 * (instance.noise @ proj) / instance.N
    M = float(np.max(np.abs(mult))) if cand.size else 0.0
    return ProcessSuprema(Q_sup=Q, M_sup=M)


def sample_localized_candidates(
    spectrum: Spectrum,
    r: float,
    rho: float,
    count: int = 512,
    seed: int = 0,
    center: np.ndarray | None = None,
) -> np.ndarray:
    """Boundary points of the localized set around a center.

    Random directions are scaled until they touch whichever constraint binds
    first, giving candidates on the boundary of the ball-ellipsoid
    intersection (valid inputs for one-sided suprema checks).
    """
    if r <= 0 or rho <= 0:
        raise ValueError("r and rho must be positive")
    rng = rng_stream(seed, _CANDIDATE_TAG)
    dirs = rng.standard_normal((count, spectrum.p))
    norms = np.linalg.norm(dirs, axis=1)
    signorms = np.sqrt((dirs * dirs) @ spectrum.eigenvalues)
    with np.errstate(divide="ignore"):
        scale = np.minimum(rho / norms, np.where(signorms > 0, r / signorms, np.inf))
    pts = dirs * scale[:, None]
    if center is not None:
        pts = pts + np.asarray(center, dtype=np.float64)[None, :]
    return pts
