"""Covariance spectra and their rank functionals.

Everything downstream works in the eigenbasis of the covariance matrix, so
the sorted eigenvalue sequence is the only representation of the covariance
that ever exists in memory.  All rank functionals here are exact functions of
that sequence:

    r_k      = (sum of eigenvalues beyond index k) / (the (k+1)-th eigenvalue)
    R_k      = (tail sum)^2 / (tail sum of squares)
    srank_4  = squared-Schatten-norm ratio, for the matrix or its square root
    R_{k,2}  = (1 - sqrt(k / srank_4(S))) * R_k(S)
    frak_R_k = ((4p-k)^2 / 8p) * c^((16p^2/(4p-k)^2) * R_{k,2}) / R_{k,2}

The last one is the anti-concentration failure bound that drives every
downstream guarantee; the constant c < 1 it contains is not pinned by theory
and is therefore an explicit argument (`c_small`) everywhere.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "Spectrum",
    "RankProfile",
    "StableRankCheck",
    "TruncationError",
    "effective_rank_r",
    "effective_rank_R",
    "stable_rank4",
    "rank_profile",
    "stable_rank_lower_bound_check",
    "make_example_spectrum",
]


class TruncationError(ValueError):
    """Truncation index k falls outside the usable range of a spectrum."""


@dataclass(frozen=True, repr=False, eq=False)
class Spectrum:
    """Non-negative eigenvalues of a covariance matrix, sorted descending.

    Invariants: at least one strictly positive entry, finite positive trace.
    The stored array is made read-only so instances are safe to share across
    concurrent workers.
    """

    eigenvalues: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, Spectrum):
            return NotImplemented
        return np.array_equal(self.eigenvalues, other.eigenvalues)

    def __hash__(self) -> int:
        return hash((self.eigenvalues.shape, self.eigenvalues.tobytes()))

    def __post_init__(self) -> None:
        eig = np.asarray(self.eigenvalues, dtype=np.float64).copy()
        if eig.ndim != 1 or eig.size == 0:
            raise ValueError("eigenvalues must form a non-empty 1-d sequence")
        if not np.all(np.isfinite(eig)):
            raise ValueError("eigenvalues must all be finite")
        if eig.min() < 0:
            raise ValueError("eigenvalues must be non-negative")
        if np.any(np.diff(eig) > 0):
            raise ValueError("eigenvalues must be sorted in descending order")
        if eig[0] <= 0:
            raise ValueError("a spectrum needs at least one positive eigenvalue")
        if not math.isfinite(eig.sum()):
            raise ValueError("trace must be finite")
        eig.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eig)

    def __repr__(self) -> str:
        return f"Spectrum(p={self.p}, trace={self.trace():.6g}, lambda1={self.eigenvalues[0]:.6g})"

    @property
    def p(self) -> int:
        return int(self.eigenvalues.size)

    def trace(self) -> float:
        return float(self.eigenvalues.sum())

    def rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues))

    def scaled(self, t: float) -> "Spectrum":
        """Spectrum of t * Sigma (t > 0)."""
        if t <= 0:
            raise ValueError("scale factor must be positive")
        return Spectrum(self.eigenvalues * t)

    # -- serialization: JSON object and one-column CSV, both round-trip
    # -- bit-exactly for finite doubles (float repr is the shortest exact form)

    def to_json(self) -> str:
        return json.dumps({"eigenvalues": [float(v) for v in self.eigenvalues]})

    @classmethod
    def from_json(cls, text: str) -> "Spectrum":
        obj = json.loads(text)
        if not isinstance(obj, dict) or "eigenvalues" not in obj:
            raise ValueError('spectrum JSON must be an object with an "eigenvalues" key')
        return cls(np.asarray(obj["eigenvalues"], dtype=np.float64))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("eigenvalue\n")
        for v in self.eigenvalues:
            buf.write(repr(float(v)))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Spectrum":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "eigenvalue":
            raise ValueError('spectrum CSV must start with an "eigenvalue" header')
        return cls(np.asarray([float(ln) for ln in lines[1:]], dtype=np.float64))


class RankProfile(NamedTuple):
    """All rank functionals of one spectrum at one truncation level."""

    k: int
    r_k: float
    R_k: float
    srank4_sqrt: float
    srank4: float
    R_k2: float
    frak_R_k: float
    c_small: float


class StableRankCheck(NamedTuple):
    """Outcome of the deterministic stable-rank inequality at one k."""

    lhs: float
    rhs: float
    holds: bool
    floor_ok: bool


def _check_k(k: int, p: int) -> None:
    if not 0 <= k < p:
        raise TruncationError(f"truncation index k={k} outside [0, {p - 1}]")


def effective_rank_r(spectrum: Spectrum, k: int) -> float:
    """Tail-sum-over-largest-tail-eigenvalue rank r_k.

    Indexing is 1-based in formulas: the tail is eigenvalues k+1 .. p and the
    denominator is the (k+1)-th eigenvalue.
    """
    eig = spectrum.eigenvalues
    _check_k(k, spectrum.p)
    if eig[k] <= 0:
        raise TruncationError(f"degenerate tail: eigenvalue {k + 1} is zero")
    return float(eig[k:].sum() / eig[k])


def effective_rank_R(spectrum: Spectrum, k: int) -> float:
    """Squared-tail-sum-over-tail-sum-of-squares rank R_k (truncated stable rank)."""
    eig = spectrum.eigenvalues
    _check_k(k, spectrum.p)
    tail2 = float((eig[k:] ** 2).sum())
    if tail2 <= 0:
        raise TruncationError(f"degenerate tail: eigenvalues beyond {k} are all zero")
    tail1 = float(eig[k:].sum())
    return tail1 * tail1 / tail2


def stable_rank4(spectrum: Spectrum, of_square_root: bool = True) -> float:
    """4-Schatten stable rank of the covariance or of its square root.

    For the square root this is (sum lam)^2 / (sum lam^2); for the matrix
    itself it is (sum lam^2)^2 / (sum lam^4).
    """
    eig = spectrum.eigenvalues
    if of_square_root:
        s = float(eig.sum())
        return s * s / float((eig**2).sum())
    s2 = float((eig**2).sum())
    return s2 * s2 / float((eig**4).sum())


def rank_profile(spectrum: Spectrum, k: int, c_small: float = 0.5) -> RankProfile:
    """Evaluate every rank functional at truncation level k.

    `c_small` is the free constant (< 1) inside the anti-concentration bound
    frak_R_k; it is never defaulted silently downstream.  Requires
    k <= srank_4(Sigma), otherwise R_{k,2} would be negative and frak_R_k
    meaningless.
    """
    _check_k(k, spectrum.p)
    if not 0.0 < c_small < 1.0:
        raise ValueError(f"c_small must lie in (0, 1), got {c_small}")
    eig = spectrum.eigenvalues
    if eig[k] <= 0:
        raise TruncationError(f"degenerate tail: eigenvalue {k + 1} is zero")
    p = spectrum.p
    r_k = effective_rank_r(spectrum, k)
    R_k = effective_rank_R(spectrum, k)
    s4_sqrt = stable_rank4(spectrum, of_square_root=True)
    s4 = stable_rank4(spectrum, of_square_root=False)
    R_k2 = (1.0 - math.sqrt(k / s4)) * R_k if k <= s4 else -1.0
    if R_k2 <= 0:
        raise ValueError(
            f"negative R_k2: truncation k={k} exceeds srank_4(Sigma)={s4:.6g}"
        )
    ratio = (4.0 * p - k) ** 2 / (8.0 * p)
    expo = (16.0 * p * p / (4.0 * p - k) ** 2) * R_k2
    frak = ratio * math.pow(c_small, expo) / R_k2
    return RankProfile(
        k=k,
        r_k=r_k,
        R_k=R_k,
        srank4_sqrt=s4_sqrt,
        srank4=s4,
        R_k2=R_k2,
        frak_R_k=frak,
        c_small=c_small,
    )


def stable_rank_lower_bound_check(
    spectrum: Spectrum, k: int, tol: float = 1e-9
) -> StableRankCheck:
    """Check srank_4(Sigma^(1/2)) >= (16p^2/(4p-k)^2) * R_{k,2}(Sigma).

    The inequality is guaranteed only under the row-norm floor
    min lambda_i >= tr(Sigma) / (2p); `floor_ok` reports whether that
    hypothesis is met (the comparison is evaluated either way and merely
    flagged unchecked when the floor fails).  k beyond srank_4(Sigma) makes
    the right-hand side negative, so the inequality is vacuously true there;
    such k are allowed here, unlike in `rank_profile`.
    """
    _check_k(k, spectrum.p)
    eig = spectrum.eigenvalues
    if eig[k] <= 0:
        raise TruncationError(f"degenerate tail: eigenvalue {k + 1} is zero")
    p = spectrum.p
    lhs = stable_rank4(spectrum, of_square_root=True)
    s4 = stable_rank4(spectrum, of_square_root=False)
    R_k = effective_rank_R(spectrum, k)
    R_k2 = (1.0 - math.sqrt(k / s4)) * R_k
    rhs = (16.0 * p * p / (4.0 * p - k) ** 2) * R_k2
    floor_ok = bool(eig[-1] >= spectrum.trace() / (2.0 * p))
    holds = bool(lhs >= rhs - tol * max(1.0, abs(rhs)))
    return StableRankCheck(lhs=lhs, rhs=rhs, holds=holds, floor_ok=floor_ok)


def make_example_spectrum(N: int, epsilon: float, c_ratio: float = 1.0) -> Spectrum:
    """Exponential-decay-plus-flat-tail benchmark spectrum.

    lambda_k = exp(-k) + epsilon for k = 1..p with p = ceil(c_ratio * N * log(1/epsilon)).
    This is the canonical family where interpolation stays benign: a fast
    head carries the signal and a long flat tail absorbs the noise.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"invalid epsilon {epsilon}: must lie in (0, 1)")
    if c_ratio <= 0:
        raise ValueError(f"c_ratio must be positive, got {c_ratio}")
    if N <= 0:
        raise ValueError(f"N must be positive, got {N}")
    log_inv = math.log(1.0 / epsilon)
    if not log_inv < N:
        raise ValueError(f"need log(1/epsilon)={log_inv:.4g} < N={N}")
    p = math.ceil(c_ratio * N * log_inv)
    eig = np.exp(-np.arange(1, p + 1, dtype=np.float64)) + epsilon
    return Spectrum(eig)
