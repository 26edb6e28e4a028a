"""Minimum-l2-norm interpolation and its exact algebraic diagnostics.

The interpolant is alpha_hat = pinv(X) Y, computed by full SVD with a fixed
relative cutoff.  Besides the solution itself this module provides the exact
identities that hold for squared loss regardless of any distributional
assumption: the quadratic/multiplier decomposition of the empirical excess
risk and the exclusion identity at the interpolant (its empirical excess
risk equals minus the mean squared noise).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .spectra import Spectrum

__all__ = [
    "RELATIVE_SV_CUTOFF",
    "RankDeficientDesignError",
    "RegressionInstance",
    "InterpolationResult",
    "DecompositionCheck",
    "ExclusionCheck",
    "min_norm_interpolate",
    "estimation_error",
    "prediction_error",
    "empirical_excess_risk",
    "decomposition_check",
    "exclusion_event_check",
]

# singular values below cutoff * s_max are treated as exact zeros
RELATIVE_SV_CUTOFF = 1e-12


class RankDeficientDesignError(ValueError):
    """The design matrix does not have full row rank at the SVD cutoff."""


@dataclass(frozen=True, eq=False)
class RegressionInstance:
    """One synthetic regression problem: Y = X alpha_star + noise.

    Responses are always constructed from the stated ground truth, never
    fitted, so every error measurement downstream has an exact reference.
    `noise_psi2` is the declared sub-gaussian scale of the noise (gaussian
    noise with standard deviation sigma is declared at sigma); it is a
    convention, not an estimate.
    """

    design: np.ndarray
    alpha_star: np.ndarray
    noise: np.ndarray
    noise_psi2: float = 1.0
    responses: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        X = np.ascontiguousarray(np.asarray(self.design, dtype=np.float64))
        a = np.ascontiguousarray(np.asarray(self.alpha_star, dtype=np.float64))
        xi = np.ascontiguousarray(np.asarray(self.noise, dtype=np.float64))
        if X.ndim != 2:
            raise ValueError("design must be a 2-d matrix")
        N, p = X.shape
        if a.shape != (p,):
            raise ValueError(f"alpha_star must have length {p}, got {a.shape}")
        if xi.shape != (N,):
            raise ValueError(f"noise must have length {N}, got {xi.shape}")
        if self.noise_psi2 < 0:
            raise ValueError("noise_psi2 must be non-negative")
        if N >= p:
            warnings.warn(
                f"N={N} >= p={p}: not the interpolation regime", stacklevel=3
            )
        y = X @ a + xi
        for arr in (X, a, xi, y):
            arr.setflags(write=False)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "alpha_star", a)
        object.__setattr__(self, "noise", xi)
        object.__setattr__(self, "responses", y)

    @property
    def N(self) -> int:
        return int(self.design.shape[0])

    @property
    def p(self) -> int:
        return int(self.design.shape[1])


@dataclass(frozen=True, eq=False)
class InterpolationResult:
    """Minimum-norm solution plus the diagnostics that certify it.

    residual_norm certifies interpolation (X alpha_hat = Y); row_space_leak
    certifies minimality (the solution carries no null-space component).
    """

    alpha_hat: np.ndarray
    singular_values: np.ndarray
    s_min: float
    residual_norm: float
    row_space_leak: float
    rank: int

    def to_json_obj(self, elide_above: int = 10_000) -> dict:
        obj = {
            "s_min": float(self.s_min),
            "residual_norm": float(self.residual_norm),
            "row_space_leak": float(self.row_space_leak),
            "rank": int(self.rank),
            "alpha_norm": float(np.linalg.norm(self.alpha_hat)),
            "singular_values": [float(s) for s in self.singular_values],
        }
        if self.alpha_hat.size > elide_above:
            obj["alpha_elided"] = True
        else:
            obj["alpha_elided"] = False
            obj["alpha_hat"] = [float(v) for v in self.alpha_hat]
        return obj


def min_norm_interpolate(
    instance: RegressionInstance, cutoff: float = RELATIVE_SV_CUTOFF
) -> InterpolationResult:
    """Minimum-l2-norm solution of X alpha = Y via SVD.

    Raises RankDeficientDesignError when the design has fewer than N singular
    values above cutoff * s_max: the strictly overparameterized regime is
    required, and silently regularizing would change the estimator.
    """
    X = instance.design
    Y = instance.responses
    N = instance.N
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    keep = s > cutoff * s[0]
    rank = int(np.count_nonzero(keep))
    if rank < N:
        raise RankDeficientDesignError(
            f"design rank {rank} < N={N} at relative cutoff {cutoff}; "
            "the effective dimension of the covariance must exceed N"
        )
    coeff = (U[:, keep].T @ Y) / s[keep]
    alpha = Vt[keep].T @ coeff
    residual = float(np.linalg.norm(X @ alpha - Y))
    leak = float(np.linalg.norm(alpha - Vt[keep].T @ (Vt[keep] @ alpha)))
    return InterpolationResult(
        alpha_hat=alpha,
        singular_values=s,
        s_min=float(s[keep][-1]),
        residual_norm=residual,
        row_space_leak=leak,
        rank=rank,
    )


def estimation_error(result: InterpolationResult, instance: RegressionInstance) -> float:
    """l2 distance between the interpolant and the ground truth."""
    return float(np.linalg.norm(result.alpha_hat - instance.alpha_star))


def prediction_error(
    result: InterpolationResult, instance: RegressionInstance, spectrum: Spectrum
) -> float:
    """Covariance-weighted error sqrt(sum_i lambda_i (alpha_hat_i - alpha*_i)^2).

    This is the excess root-risk of the interpolant under squared loss,
    evaluated exactly in the eigenbasis.
    """
    if spectrum.p != instance.p:
        raise ValueError(f"spectrum dimension {spectrum.p} != design dimension {instance.p}")
    diff = result.alpha_hat - instance.alpha_star
    return float(math.sqrt(float(spectrum.eigenvalues @ (diff * diff))))


def empirical_excess_risk(alpha: np.ndarray, instance: RegressionInstance) -> float:
    """Mean squared loss of alpha minus mean squared loss of the ground truth."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (instance.p,):
        raise ValueError(f"alpha must have length {instance.p}")
    resid = instance.design @ alpha - instance.responses
    return float(np.mean(resid * resid) - np.mean(instance.noise * instance.noise))


class DecompositionCheck(NamedTuple):
    quadratic: float
    multiplier: float
    identity_gap: float


def decomposition_check(alpha: np.ndarray, instance: RegressionInstance) -> DecompositionCheck:
    """Quadratic and multiplier components of the empirical excess risk.

    quadratic  = (1/N) sum <X_i, alpha - alpha*>^2
    multiplier = (2/N) sum xi_i <X_i, alpha - alpha*>

    For squared loss the excess risk equals quadratic - multiplier exactly;
    identity_gap is the numerical discrepancy and should be at rounding level.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (instance.p,):
        raise ValueError(f"alpha must have length {instance.p}")
    dev = instance.design @ (alpha - instance.alpha_star)
    quadratic = float(np.mean(dev * dev))
    multiplier = float(2.0 * np.mean(instance.noise * dev))
    gap = abs(empirical_excess_risk(alpha, instance) - (quadratic - multiplier))
    return DecompositionCheck(quadratic=quadratic, multiplier=multiplier, identity_gap=gap)


class ExclusionCheck(NamedTuple):
    threshold: float
    excess_at_interpolant: float
    excluded: bool


def exclusion_event_check(instance: RegressionInstance) -> ExclusionCheck:
    """Exclusion level test at the interpolant.

    Any interpolant has empirical excess risk exactly -(1/N) sum xi_i^2; the
    exclusion argument needs that value to sit below -psi2^2 / 2.  Both sides
    are computed from declared quantities, no solver involved.
    """
    excess = float(-np.mean(instance.noise * instance.noise))
    threshold = -0.5 * instance.noise_psi2**2
    return ExclusionCheck(
        threshold=threshold,
        excess_at_interpolant=excess,
        excluded=bool(excess <= threshold),
    )
