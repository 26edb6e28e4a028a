"""Random design generation and distributional hypothesis checks.

Design rows are X_i = Sigma^(1/2) Z_i with Z isotropic (zero mean, identity
covariance after normalization).  Since all spectra are stored in the
eigenbasis, Sigma^(1/2) is a diagonal scaling.  Four factor families are
supported:

    gaussian               standard normal coordinates
    rademacher             +-1 coordinates (bounded sanity case)
    student_t(df)          scaled to unit variance; df=3 has infinite fourth
                           moment, the genuinely heavy-tailed regime
    exponential_symmetric  Laplace coordinates with unit variance

Sampling is backed by the counter-based Philox generator so that a
(seed, stream...) pair pins the output bit-for-bit across platforms and
worker schedules.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .spectra import Spectrum

__all__ = [
    "FAMILIES",
    "DesignSpec",
    "SmallBallParams",
    "PaleyZygmundCheck",
    "WsbaEstimate",
    "rng_stream",
    "sample_design",
    "sample_isotropic",
    "check_paley_zygmund",
    "compute_c0",
    "estimate_wsba",
    "coordinate_smallball_count",
]

FAMILIES = ("gaussian", "rademacher", "student_t", "exponential_symmetric")

# leading stream tags; other modules use disjoint leading tags
_WSBA_TAG = 11
_WSBA_SUBSPACE_TAG = 12


def rng_stream(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for the (seed, stream...) substream.

    Streams derived from distinct tuples are statistically independent, so
    Monte Carlo loops can be partitioned across workers with per-trial tags
    and stay schedule-independent.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class DesignSpec:
    """Recipe for sampling design rows: spectrum, factor family, seed."""

    spectrum: Spectrum
    family: str = "gaussian"
    df: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.family == "student_t":
            if self.df is None or not self.df > 2:
                raise ValueError("student_t requires df > 2 for unit-variance normalization")
        elif self.df is not None:
            raise ValueError(f"df is only meaningful for student_t, got family {self.family!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit an unsigned 64-bit integer")

    def to_json_obj(self) -> dict:
        return {
            "family": self.family,
            "df": self.df,
            "seed": int(self.seed),
            "spectrum": {"eigenvalues": [float(v) for v in self.spectrum.eigenvalues]},
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DesignSpec":
        spectrum = Spectrum(np.asarray(obj["spectrum"]["eigenvalues"], dtype=np.float64))
        return cls(
            spectrum=spectrum,
            family=obj.get("family", "gaussian"),
            df=obj.get("df"),
            seed=int(obj.get("seed", 0)),
        )


@dataclass(frozen=True)
class SmallBallParams:
    """Anti-concentration constants: envelope (L_const, kappa) for projections,
    moment-condition constants (delta1, delta2), and the coordinate fraction c0."""

    L_const: float = 1.0
    kappa: float = 0.1
    delta1: float = 1.0
    delta2: float = 1.0
    c0: float = 1.0

    def __post_init__(self) -> None:
        if self.L_const <= 0 or self.kappa <= 0:
            raise ValueError("L_const and kappa must be positive")
        if self.delta1 <= 0:
            raise ValueError("delta1 must be positive")
        if self.delta2 < 1:
            raise ValueError("delta2 must be at least 1")
        if not 0 < self.c0 <= 1:
            raise ValueError("c0 must lie in (0, 1]")
        if self.L_const * self.kappa >= 1:
            raise ValueError("need L_const * kappa < 1 for a nontrivial envelope")


class PaleyZygmundCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


class WsbaEstimate(NamedTuple):
    p_hat: float
    stderr: float
    trials: int


def _sample_factor(rng: np.random.Generator, family: str, df: float | None, shape) -> np.ndarray:
    if family == "gaussian":
        return rng.standard_normal(shape)
    if family == "rademacher":
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    if family == "student_t":
        return rng.standard_t(df, size=shape) * math.sqrt((df - 2.0) / df)
    if family == "exponential_symmetric":
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), size=shape)
    raise ValueError(f"unknown family {family!r}")


def sample_isotropic(spec: DesignSpec, n: int, substream: Sequence[int] = ()) -> np.ndarray:
    """n isotropic factor rows Z (no covariance applied)."""
    if n < 1:
        raise ValueError("need at least one row")
    rng = rng_stream(spec.seed, *substream)
    return _sample_factor(rng, spec.family, spec.df, (n, spec.spectrum.p))


def sample_design(spec: DesignSpec, N: int, substream: Sequence[int] = ()) -> np.ndarray:
    """N design rows X_i = Sigma^(1/2) Z_i, deterministic given (seed, substream, N)."""
    Z = sample_isotropic(spec, N, substream)
    return Z * np.sqrt(spec.spectrum.eigenvalues)[None, :]


def check_paley_zygmund(
    spectrum: Spectrum, delta1: float, delta2: float
) -> PaleyZygmundCheck:
    """Moment condition on the rows of Sigma^(1/2).

    lhs = ((1/p) sum_i |Sigma^(1/2) e_i|^(2+delta1))^(1/(2+delta1)) evaluated
    in the eigenbasis, where |Sigma^(1/2) e_i| = sqrt(lambda_i);
    rhs = delta2 * sqrt(tr(Sigma)/p).  Holding guarantees a constant fraction
    of coordinates carries an honest share of the trace.
    """
    if delta1 <= 0:
        raise ValueError("delta1 must be positive")
    if delta2 < 1:
        raise ValueError("delta2 must be at least 1")
    eig = spectrum.eigenvalues
    p = spectrum.p
    power = (2.0 + delta1) / 2.0
    lhs = float(np.mean(eig**power) ** (1.0 / (2.0 + delta1)))
    rhs = float(delta2 * math.sqrt(spectrum.trace() / p))
    return PaleyZygmundCheck(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs))


def compute_c0(spectrum: Spectrum) -> float:
    """Exact fraction of eigenbasis coordinates passing the row-norm floor
    lambda_i >= tr(Sigma) / (2p)."""
    floor = spectrum.trace() / (2.0 * spectrum.p)
    return float(np.count_nonzero(spectrum.eigenvalues >= floor) / spectrum.p)


def estimate_wsba(
    spec: DesignSpec,
    subspace_dim: int,
    kappa: float,
    shift: np.ndarray | None = None,
    trials: int = 100_000,
    random_subspace: bool = False,
    substream: Sequence[int] = (),
) -> WsbaEstimate:
    """Monte Carlo frequency of {|P_F Z - z| <= kappa * sqrt(k)}.

    The event is evaluated on the isotropic factor Z, because the
    anti-concentration hypothesis is placed on Z, not on the correlated rows.
    The subspace F defaults to the span of the leading k eigenbasis
    coordinates; `random_subspace` draws a seeded Haar-ish orthonormal frame
    instead.  Certifying all subspaces is infeasible, so this is an estimate
    of the envelope, never a certificate.
    """
    p = spec.spectrum.p
    k = int(subspace_dim)
    if not 1 <= k <= p - 1:
        raise ValueError(f"subspace_dim must lie in [1, {p - 1}], got {k}")
    if trials < 1000:
        raise ValueError(f"insufficient trials {trials}: need at least 1000")
    if kappa <= 0:
        raise ValueError("kappa must be positive")

    Q = None
    if random_subspace:
        g = rng_stream(spec.seed, _WSBA_SUBSPACE_TAG, *substream).standard_normal((p, k))
        Q, _ = np.linalg.qr(g)

    if shift is None:
        z = np.zeros(k)
    else:
        shift = np.asarray(shift, dtype=np.float64)
        if shift.shape == (k,):
            z = shift
        elif shift.shape == (p,):
            z = (Q.T @ shift) if Q is not None else shift[:k]
        else:
            raise ValueError(f"shift must have length {k} or {p}")

    radius = kappa * math.sqrt(k)
    chunk = 8192
    hits = 0
    done = 0
    idx = 0
    while done < trials:
        n = min(chunk, trials - done)
        rng = rng_stream(spec.seed, _WSBA_TAG, *substream, idx)
        if Q is None:
            proj = _sample_factor(rng, spec.family, spec.df, (n, k))
        else:
            proj = _sample_factor(rng, spec.family, spec.df, (n, p)) @ Q
        dist = np.linalg.norm(proj - z[None, :], axis=1)
        hits += int(np.count_nonzero(dist <= radius))
        done += n
        idx += 1
    p_hat = hits / trials
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / trials)
    return WsbaEstimate(p_hat=p_hat, stderr=stderr, trials=trials)


def coordinate_smallball_count(
    row: np.ndarray, spectrum: Spectrum, epsilon: float
) -> int:
    """Number of coordinates of a design row at least epsilon * sqrt(tr/p) in magnitude."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (spectrum.p,):
        raise ValueError(f"row must have length {spectrum.p}, got shape {row.shape}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    threshold = epsilon * math.sqrt(spectrum.trace() / spectrum.p)
    return int(np.count_nonzero(np.abs(row) >= threshold))
