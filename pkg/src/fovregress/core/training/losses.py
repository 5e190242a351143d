"""
losses.py

Pairwise training objectives on unit-norm descriptors a = θ(x_i), b = θ(x_j)
with Euclidean distance d = ‖a - b‖:

    mse  (d - (1 - ψ))²                          graded regression target
    cl   ψ d² + (1 - ψ) max(0, m - d)²          ψ ∈ {0, 1}
    gcl  ψ d² + (1 - ψ) max(0, m - d)²          ψ ∈ [0, 1]

All three depend on the descriptors only through a - b, so grad_j = -grad_i.
At the non-differentiable points (d = 0, m - d = 0) the subgradient is 0.
"""

from dataclasses import dataclass

import numpy as np

from fovregress.utils.exceptions import InputError

LOSSES = ("mse", "cl", "gcl")
DEFAULT_MARGIN = 1.0


@dataclass(frozen=True)
class LossOutput:
    """Loss value and its gradients with respect to both descriptors."""

    value: float
    grad_i: np.ndarray
    grad_j: np.ndarray


def _check_psi(psi):
    if not (0.0 <= psi <= 1.0):
        raise InputError(f"psi must lie in [0, 1], got {psi}")


def euclidean_distance(a, b):
    """‖a - b‖₂; in [0, 2] for unit vectors."""
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def _pair_loss(kind, a, b, psi, margin=DEFAULT_MARGIN):
    """One-pair view of batch_loss."""
    value, _, grad_i, grad_j = batch_loss(kind, np.atleast_2d(a), np.atleast_2d(b), [psi], margin=margin)
    return LossOutput(value, grad_i[0], grad_j[0])


def mse_loss(a, b, psi):
    """
    Squared gap between the descriptor distance and the target 1 - ψ.

    Parameters:
        a, b (ndarray): Descriptors of equal dimension.
        psi (float): Graded similarity in [0, 1].

    Returns:
        LossOutput
    """
    _check_psi(psi)
    return _pair_loss("mse", a, b, psi)


def contrastive_loss(a, b, psi_binary, margin=DEFAULT_MARGIN):
    """
    Binary contrastive loss: pull positives together, push negatives past `margin`.

    Raises:
        InputError: if psi_binary is not exactly 0 or 1.
    """
    if psi_binary not in (0, 1):
        raise InputError(f"Contrastive loss needs a binary label, got {psi_binary}")
    return _pair_loss("cl", a, b, float(psi_binary), margin)


def gcl_loss(a, b, psi, margin=DEFAULT_MARGIN):
    """Generalized contrastive loss: attraction weighted by ψ, repulsion by 1 - ψ."""
    _check_psi(psi)
    return _pair_loss("gcl", a, b, float(psi), margin)


def binarize_psi(psi, threshold=0.5):
    """1 if ψ > threshold else 0 (strict)."""
    if not (0.0 < threshold < 1.0):
        raise InputError(f"Binarization threshold must lie in (0, 1), got {threshold}")
    _check_psi(psi)
    return 1 if psi > threshold else 0


def batch_loss(kind, desc_i, desc_j, psi, margin=DEFAULT_MARGIN, binarize_threshold=0.5):
    """
    Mean loss over a batch of descriptor pairs.

    Parameters:
        kind (str): "mse", "cl" or "gcl".
        desc_i, desc_j (ndarray): (B, d) descriptors of the two branches.
        psi (ndarray): (B,) graded similarities. For "cl" they are binarized
            with `binarize_threshold` first.
        margin (float): Margin of cl/gcl.

    Returns:
        tuple: (mean value, per-pair values (B,), grad_i (B, d), grad_j (B, d));
        gradients are those of the mean, i.e. already divided by B.
    """
    if kind not in LOSSES:
        raise InputError(f"Unknown loss '{kind}', expected one of {LOSSES}")
    desc_i = np.atleast_2d(np.asarray(desc_i, dtype=float))
    desc_j = np.atleast_2d(np.asarray(desc_j, dtype=float))
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    n = len(psi)
    if n == 0 or desc_i.shape != desc_j.shape or len(desc_i) != n:
        raise InputError(f"Batch shapes do not match: {desc_i.shape}, {desc_j.shape}, {psi.shape}")
    if np.any(psi < 0.0) or np.any(psi > 1.0):
        raise InputError("psi must lie in [0, 1] for every pair")

    diff = desc_i - desc_j
    d = np.linalg.norm(diff, axis=1)
    safe_d = np.where(d > 0.0, d, 1.0)
    unit = np.where(d[:, None] > 0.0, diff / safe_d[:, None], 0.0)

    if kind == "mse":
        residual = d - (1.0 - psi)
        values = residual * residual
        grad = 2.0 * residual[:, None] * unit
    else:
        if kind == "cl" and not (0.0 < binarize_threshold < 1.0):
            raise InputError(f"Binarization threshold must lie in (0, 1), got {binarize_threshold}")
        weight = psi if kind == "gcl" else (psi > binarize_threshold).astype(float)
        hinge = np.maximum(0.0, margin - d)
        values = weight * d * d + (1.0 - weight) * hinge * hinge
        grad = 2.0 * weight[:, None] * diff - 2.0 * ((1.0 - weight) * hinge)[:, None] * unit

    grad = grad / n
    return float(values.mean()), values, grad, -grad
