"""Trainable square linear adapter over frozen image embeddings.

The adapter maps a raw image embedding e to a unit vector W e / ||W e||;
classification scores are cosine similarities against fixed unit-norm text
embeddings, scaled by a temperature. Both losses (cross-entropy over classes,
margin hinge for neighboring-class separation) come with analytic gradients
with respect to W, including the derivative through the output normalization.

All math here is float64; optimizer updates are plain Adam with bias
correction and are fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolation, NumericalError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

DEFAULT_TEMPERATURE = 0.01
DEFAULT_MARGIN = 0.1

_ZERO_DIST = 1e-12  # below this, a distance term contributes no gradient


@dataclass(frozen=True)
class AdapterState:
    weight: np.ndarray  # (d, d) float64
    adam_m: np.ndarray  # (d, d) first moment
    adam_v: np.ndarray  # (d, d) second moment, elementwise >= 0
    step_count: int
    temperature: float

    @property
    def dim(self) -> int:
        return int(self.weight.shape[0])


@dataclass(frozen=True)
class Batch:
    """One training minibatch: labeled features for cross-entropy plus an
    optional payload of (generated old-class feature, old idx, new idx)
    triples that only feed the separation hinge."""

    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) int, indices into the seen-class text matrix
    hinge_features: np.ndarray | None = None  # (m, d)
    hinge_old: np.ndarray | None = None  # (m,) int
    hinge_new: np.ndarray | None = None  # (m,) int


@dataclass(frozen=True)
class LossReport:
    ce: float
    hinge: float

    @property
    def total(self) -> float:
        return self.ce + self.hinge


def init_adapter(dim: int, temperature: float = DEFAULT_TEMPERATURE) -> AdapterState:
    """Identity-initialized adapter: step 0 reproduces the zero-shot backbone."""
    if temperature <= 0:
        raise ContractViolation(f"temperature must be > 0, got {temperature}")
    return AdapterState(
        weight=np.eye(dim),
        adam_m=np.zeros((dim, dim)),
        adam_v=np.zeros((dim, dim)),
        step_count=0,
        temperature=temperature,
    )


def reset_optimizer(state: AdapterState) -> AdapterState:
    """Fresh Adam moments for a new training phase; the weight is kept."""
    d = state.dim
    return replace(state, adam_m=np.zeros((d, d)), adam_v=np.zeros((d, d)), step_count=0)


def forward_batch(state: AdapterState, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Adapter outputs for a feature matrix: returns (unit rows, pre-norm lengths)."""
    u = np.asarray(features, dtype=np.float64) @ state.weight.T
    norms = np.linalg.norm(u, axis=-1)
    if np.any(norms == 0.0):
        raise NumericalError("adapter projected a feature to the zero vector")
    return u / norms[..., None], norms


def forward(state: AdapterState, feature: np.ndarray) -> np.ndarray:
    """Unit-normalized adapter output W e / ||W e|| for a single feature."""
    out, _ = forward_batch(state, np.asarray(feature, dtype=np.float64)[None, :])
    return out[0]


def logits(state: AdapterState, feature: np.ndarray, text_matrix: np.ndarray) -> np.ndarray:
    """Pre-softmax scores cos(adapter output, text_j) / temperature."""
    text_matrix = np.asarray(text_matrix, dtype=np.float64)
    if text_matrix.ndim != 2 or text_matrix.shape[0] < 1:
        raise ContractViolation("text_matrix must hold at least one seen class")
    return forward(state, feature) @ text_matrix.T / state.temperature


def _backprop_through_norm(
    g_out: np.ndarray, out: np.ndarray, norms: np.ndarray, features: np.ndarray
) -> np.ndarray:
    """Map gradients w.r.t. normalized outputs to a gradient w.r.t. W.

    For u = W e, out = u/||u||:  dL/du = (g - (g.out) out)/||u||, dL/dW = du^T e.
    """
    g_u = (g_out - np.sum(g_out * out, axis=1, keepdims=True) * out) / norms[:, None]
    return g_u.T @ features


def ce_loss_and_grad(
    state: AdapterState, batch: Batch, text_matrix: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its analytic dL/dW."""
    feats = np.asarray(batch.features, dtype=np.float64)
    labels = np.asarray(batch.labels)
    text_matrix = np.asarray(text_matrix, dtype=np.float64)
    n = feats.shape[0]
    if n == 0:
        raise ContractViolation("cross-entropy needs a nonempty batch")
    n_seen = text_matrix.shape[0]
    if labels.min() < 0 or labels.max() >= n_seen:
        raise ContractViolation(
            f"label outside the {n_seen} seen classes: {int(labels.min())}..{int(labels.max())}"
        )

    out, norms = forward_batch(state, feats)
    scores = out @ text_matrix.T / state.temperature  # (n, n_seen)

    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    z = exp.sum(axis=1)
    log_probs = shifted - np.log(z)[:, None]
    loss = float(-log_probs[np.arange(n), labels].mean())

    probs = exp / z[:, None]
    probs[np.arange(n), labels] -= 1.0
    g_out = (probs @ text_matrix) / (state.temperature * n)
    return loss, _backprop_through_norm(g_out, out, norms, feats)


def hinge_loss_and_grad(
    state: AdapterState,
    hinge_features: np.ndarray,
    hinge_old: np.ndarray,
    hinge_new: np.ndarray,
    text_matrix: np.ndarray,
    margin: float = DEFAULT_MARGIN,
) -> tuple[float, np.ndarray]:
    """Margin hinge pulling generated old-class features toward their own text
    embedding and away from the paired new class's, summed over the payload.

    Each payload entry contributes max(||a - t_old|| - ||a - t_new|| + margin, 0)
    with a the normalized adapter output; the payload size (how many features
    are drawn per neighboring pair each iteration) therefore sets the strength
    of the separation pressure. Satisfied entries contribute zero gradient;
    the subgradient at the exact kink is taken as zero.
    """
    if margin < 0:
        raise ContractViolation(f"margin must be >= 0, got {margin}")
    feats = np.asarray(hinge_features, dtype=np.float64)
    old_idx = np.asarray(hinge_old)
    new_idx = np.asarray(hinge_new)
    text_matrix = np.asarray(text_matrix, dtype=np.float64)
    d = state.dim
    if feats.shape[0] == 0:
        return 0.0, np.zeros((d, d))
    n_seen = text_matrix.shape[0]
    for idx in (old_idx, new_idx):
        if idx.min() < 0 or idx.max() >= n_seen:
            raise ContractViolation("hinge payload references a class outside the seen set")

    out, norms = forward_batch(state, feats)
    diff_old = out - text_matrix[old_idx]
    diff_new = out - text_matrix[new_idx]
    d_old = np.linalg.norm(diff_old, axis=1)
    d_new = np.linalg.norm(diff_new, axis=1)
    terms = d_old - d_new + margin
    active = terms > 0.0
    loss = float(terms[active].sum()) if np.any(active) else 0.0

    g_out = np.zeros_like(out)
    safe_old = active & (d_old > _ZERO_DIST)
    safe_new = active & (d_new > _ZERO_DIST)
    g_out[safe_old] += diff_old[safe_old] / d_old[safe_old, None]
    g_out[safe_new] -= diff_new[safe_new] / d_new[safe_new, None]
    return loss, _backprop_through_norm(g_out, out, norms, feats)


def adam_step(state: AdapterState, gradient: np.ndarray, lr: float) -> AdapterState:
    """One Adam update with bias correction; returns the new state."""
    gradient = np.asarray(gradient, dtype=np.float64)
    if not np.all(np.isfinite(gradient)):
        raise NumericalError("non-finite gradient passed to adam_step")
    t = state.step_count + 1
    m = ADAM_BETA1 * state.adam_m + (1.0 - ADAM_BETA1) * gradient
    v = ADAM_BETA2 * state.adam_v + (1.0 - ADAM_BETA2) * gradient * gradient
    m_hat = m / (1.0 - ADAM_BETA1**t)
    v_hat = v / (1.0 - ADAM_BETA2**t)
    weight = state.weight - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return replace(state, weight=weight, adam_m=m, adam_v=v, step_count=t)


def lr_at(epoch: int, base_lr: float, milestones: list[int], gamma: float) -> float:
    """Step-decay schedule: base_lr * gamma^(number of milestones <= epoch)."""
    if any(b >= a for a, b in zip(milestones[1:], milestones)):
        raise ContractViolation("milestones must be strictly increasing")
    decays = sum(1 for m in milestones if m <= epoch)
    return base_lr * gamma**decays
