"""Decomposed fusion of consecutive adapter weights.

The previous task's weight W_old is factored by full SVD into an orthonormal
basis B and coefficients R_old; the new weight is projected into the same
basis (R_new = B^T W_new, lossless since B is square). An importance mask
derived from |R_new - R_old|, normalized by its maximum and shifted by a
constant bias, blends the two coefficient matrices elementwise; the fused
weight is reconstructed as B R. With ``decompose`` off the same masking runs
directly on the weight matrices (the coarse variant, kept for ablation).

Everything here is pure float64 matrix algebra; no state, thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, NumericalError

ORTHONORMAL_TOL = 1e-8
DEFAULT_ZERO_CHANGE_EPS = 1e-12


@dataclass(frozen=True)
class FusionConfig:
    bias_b: float = 0.0
    decompose: bool = True
    zero_change_epsilon: float = DEFAULT_ZERO_CHANGE_EPS

    def __post_init__(self) -> None:
        if not 0.0 <= self.bias_b <= 1.0:
            raise ContractViolation(f"bias_b must lie in [0, 1], got {self.bias_b}")
        if self.zero_change_epsilon <= 0.0:
            raise ContractViolation("zero_change_epsilon must be > 0")


@dataclass(frozen=True)
class FusionTrace:
    """Every intermediate of one fusion step, for logging and verification."""

    basis: np.ndarray  # (d, d) orthonormal
    r_old: np.ndarray
    r_new: np.ndarray
    mask: np.ndarray  # entries in [0, 1]
    r_fused: np.ndarray
    weight: np.ndarray  # reconstructed fused weight
    zero_change: bool
    recon_residual: float  # ||B R_old - W_old||_F / ||W_old||_F

    def summary(self) -> dict:
        delta = np.abs(self.r_new - self.r_old)
        return {
            "mean_mask": float(self.mask.mean()),
            "clamped_fraction": float(np.mean(self.mask >= 1.0)),
            "max_coeff_change": float(delta.max()) if delta.size else 0.0,
            "reconstruction_residual": self.recon_residual,
            "zero_change": self.zero_change,
        }


def decompose(w_old: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full SVD factorization W = B R with B = U orthonormal, R = S V^T."""
    w_old = np.asarray(w_old, dtype=np.float64)
    if not np.all(np.isfinite(w_old)):
        raise NumericalError("cannot decompose a non-finite weight matrix")
    try:
        u, s, vh = np.linalg.svd(w_old, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed to converge: {exc}") from exc
    return u, s[:, None] * vh


def project(basis: np.ndarray, w_new: np.ndarray) -> np.ndarray:
    """Coefficients of W_new in the basis: R_new = B^T W_new (lossless for square B)."""
    basis = np.asarray(basis, dtype=np.float64)
    gram_err = np.linalg.norm(basis.T @ basis - np.eye(basis.shape[1]))
    if gram_err > ORTHONORMAL_TOL:
        raise ContractViolation(f"basis is not orthonormal (||B^T B - I||_F = {gram_err:.3e})")
    return basis.T @ np.asarray(w_new, dtype=np.float64)


def importance_mask(
    r_new: np.ndarray,
    r_old: np.ndarray,
    bias_b: float,
    zero_change_epsilon: float = DEFAULT_ZERO_CHANGE_EPS,
) -> tuple[np.ndarray, bool]:
    """Elementwise fusion weights min(1, |dR| / max|dR| + b), clamped to [0, 1].

    Returns the mask and a zero-change flag; when max|dR| is below the epsilon
    the normalized term is taken as 0 and the mask is the constant clamp(b).
    """
    if r_new.shape != r_old.shape:
        raise ContractViolation(f"shape mismatch {r_new.shape} vs {r_old.shape}")
    delta = np.abs(np.asarray(r_new, dtype=np.float64) - np.asarray(r_old, dtype=np.float64))
    mx = float(delta.max()) if delta.size else 0.0
    if mx < zero_change_epsilon:
        return np.full(delta.shape, min(1.0, max(0.0, bias_b))), True
    return np.minimum(1.0, delta / mx + bias_b), False


def fuse(
    w_old: np.ndarray, w_new: np.ndarray, config: FusionConfig
) -> tuple[np.ndarray, FusionTrace]:
    """Blend consecutive weights by importance mask; returns (fused W, trace)."""
    w_old = np.asarray(w_old, dtype=np.float64)
    w_new = np.asarray(w_new, dtype=np.float64)
    if w_old.shape != w_new.shape or w_old.ndim != 2 or w_old.shape[0] != w_old.shape[1]:
        raise ContractViolation("fusion expects two square matrices of equal shape")

    if config.decompose:
        basis, r_old = decompose(w_old)
        r_new = project(basis, w_new)
    else:
        basis = np.eye(w_old.shape[0])
        r_old, r_new = w_old, w_new

    mask, zero_change = importance_mask(
        r_new, r_old, config.bias_b, config.zero_change_epsilon
    )
    r_fused = (1.0 - mask) * r_old + mask * r_new
    weight = basis @ r_fused
    w_old_norm = float(np.linalg.norm(w_old))
    residual = 0.0 if w_old_norm == 0.0 else float(
        np.linalg.norm(basis @ r_old - w_old) / w_old_norm
    )
    trace = FusionTrace(
        basis=basis,
        r_old=r_old,
        r_new=r_new,
        mask=mask,
        r_fused=r_fused,
        weight=weight,
        zero_change=zero_change,
        recon_residual=residual,
    )
    return weight, trace
