"""Segmentation losses, evaluation metrics, and their analytic gradients.

All losses are pure functions returning (loss, gradient) with the gradient
taken with respect to the prediction, so they can be verified against
finite differences without any autodiff framework.
"""

from dataclasses import dataclass

import numpy as np

from .core import PredictionBundle, as_mask, as_scalar_map, check_same_shape


@dataclass(frozen=True)
class LossWeights:
    """Term weights of the combined loss. The cross-entropy factor of 10
    is the only value fixed by design; the rest default to 1."""

    w_dice: float = 1.0
    w_ce: float = 10.0
    w_mse: float = 1.0
    w_grad: float = 1.0

    def __post_init__(self):
        if min(self.w_dice, self.w_ce, self.w_mse, self.w_grad) < 0:
            raise ValueError("loss weights must be >= 0")


def dice_score(pred, gt) -> float:
    """Overlap metric 2|P & G| / (|P| + |G|); 1.0 when both masks are empty."""
    pred = as_mask(pred)
    gt = as_mask(gt)
    check_same_shape(pred, gt)
    denom = int(pred.sum()) + int(gt.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((pred & gt).sum()) / denom


def dice_loss(pred_prob, gt, eps: float = 1e-6):
    """Soft Dice loss 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps).

    Returns (loss, grad) with grad the derivative w.r.t. each probability.
    """
    p = as_scalar_map(pred_prob)
    g = as_mask(gt).astype(np.float64)
    check_same_shape(p, g)
    if eps <= 0:
        raise ValueError("eps must be > 0")
    num = 2.0 * np.sum(p * g) + eps
    den = np.sum(p) + np.sum(g) + eps
    loss = 1.0 - num / den
    grad = -(2.0 * g * den - num) / den**2
    return loss, grad


def bce_loss(pred_prob, gt, eps: float = 1e-7):
    """Mean binary cross-entropy with probabilities clamped to [eps, 1-eps].

    The gradient is zero where the clamp is active.
    """
    p = as_scalar_map(pred_prob)
    g = as_mask(gt).astype(np.float64)
    check_same_shape(p, g)
    if eps <= 0:
        raise ValueError("eps must be > 0")
    pc = np.clip(p, eps, 1.0 - eps)
    n = p.size
    loss = -np.sum(g * np.log(pc) + (1.0 - g) * np.log(1.0 - pc)) / n
    grad = (-g / pc + (1.0 - g) / (1.0 - pc)) / n
    grad[(p < eps) | (p > 1.0 - eps)] = 0.0
    return loss, grad


def mse_loss(pred, gt, mask):
    """Mean squared error over foreground pixels only; 0 when mask is empty."""
    p = as_scalar_map(pred)
    g = as_scalar_map(gt)
    m = as_mask(mask)
    check_same_shape(p, g, m)
    count = int(m.sum())
    grad = np.zeros_like(p)
    if count == 0:
        return 0.0, grad
    diff = (p - g) * m
    loss = np.sum(diff**2) / count
    grad = 2.0 * diff / count
    return loss, grad


def _central_diff(f, axis):
    """Central finite difference with replicate borders along one axis."""
    if f.shape[axis] < 2:
        return np.zeros_like(f)
    padded = np.concatenate(
        [np.take(f, [0], axis=axis), f, np.take(f, [-1], axis=axis)], axis=axis
    )
    n = f.shape[axis]
    upper = np.take(padded, range(2, n + 2), axis=axis)
    lower = np.take(padded, range(0, n), axis=axis)
    return (upper - lower) / 2.0


def _central_diff_adjoint(u, axis):
    """Adjoint of _central_diff: maps a cotangent on the difference back to
    a cotangent on the input."""
    out = np.zeros_like(u)
    if u.shape[axis] < 2:
        return out
    half = u / 2.0
    n = u.shape[axis]
    idx_all = [slice(None)] * u.ndim

    def sl(lo, hi):
        idx = list(idx_all)
        idx[axis] = slice(lo, hi)
        return tuple(idx)

    # interior stencil: out[i] = (u[i-1 contribution] ...) built by scatter
    out[sl(2, n)] += half[sl(1, n - 1)]
    out[sl(0, n - 2)] -= half[sl(1, n - 1)]
    # replicate-border stencils at both ends
    out[sl(1, 2)] += half[sl(0, 1)]
    out[sl(0, 1)] -= half[sl(0, 1)]
    out[sl(n - 1, n)] += half[sl(n - 1, n)]
    out[sl(n - 2, n - 1)] -= half[sl(n - 1, n)]
    return out


def gradient_mse_loss(pred_h, pred_v, gt_h, gt_v, mask):
    """MSE between spatial gradients of predicted and true distance maps.

    The horizontal map is differentiated along x, the vertical map along y,
    both with a central difference and replicate borders. The loss averages
    over foreground pixels; adding a constant to both predictions leaves it
    unchanged. Returns (loss, (grad_h, grad_v)).
    """
    ph = as_scalar_map(pred_h)
    pv = as_scalar_map(pred_v)
    gh = as_scalar_map(gt_h)
    gv = as_scalar_map(gt_v)
    m = as_mask(mask)
    check_same_shape(ph, pv, gh, gv, m)
    count = int(m.sum())
    if count == 0:
        return 0.0, (np.zeros_like(ph), np.zeros_like(pv))
    res_x = (_central_diff(ph, axis=1) - _central_diff(gh, axis=1)) * m
    res_y = (_central_diff(pv, axis=0) - _central_diff(gv, axis=0)) * m
    loss = (np.sum(res_x**2) + np.sum(res_y**2)) / count
    grad_h = _central_diff_adjoint(2.0 * res_x / count, axis=1)
    grad_v = _central_diff_adjoint(2.0 * res_y / count, axis=0)
    return loss, (grad_h, grad_v)


def total_loss(pred: PredictionBundle, gt_tissue, gt_pen, gt_h, gt_v,
               weights: LossWeights = LossWeights()) -> float:
    """Combined training objective over all four output heads.

    Dice + cross-entropy for both segmentation heads, plus the distance MSE
    and gradient-MSE terms averaged over the ground-truth tissue foreground.
    """
    gt_tissue = as_mask(gt_tissue)
    gt_pen = as_mask(gt_pen)
    d_t, _ = dice_loss(pred.tissue_prob, gt_tissue)
    d_p, _ = dice_loss(pred.pen_prob, gt_pen)
    b_t, _ = bce_loss(pred.tissue_prob, gt_tissue)
    b_p, _ = bce_loss(pred.pen_prob, gt_pen)
    m_h, _ = mse_loss(pred.h_dist, gt_h, gt_tissue)
    m_v, _ = mse_loss(pred.v_dist, gt_v, gt_tissue)
    g, _ = gradient_mse_loss(pred.h_dist, pred.v_dist, gt_h, gt_v, gt_tissue)
    return (
        weights.w_dice * (d_t + d_p)
        + weights.w_ce * (b_t + b_p)
        + weights.w_mse * (m_h + m_v)
        + weights.w_grad * g
    )


def count_error(pred_labels, gt_count: int) -> int:
    """Absolute difference between predicted and annotated section counts."""
    if gt_count < 0:
        raise ValueError("gt_count must be >= 0")
    labels = np.asarray(pred_labels)
    n_pred = int(labels.max()) if labels.size else 0
    return abs(n_pred - gt_count)
