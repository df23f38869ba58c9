"""Differentiable calibration loss, NLL, and the curriculum-weighted
joint training objective.

The calibration term replaces the 0/1 correctness indicator inside the
binned calibration error with sigmoid(tan(pi*q - pi/2)), a smooth,
strictly increasing map of a probability q onto (0, 1) with fixed point
0.5. Probabilities are clamped to [epsilon, 1-epsilon] before the tangent
so the loss and its gradient stay finite at the interval ends. Two
choices of q ship: the max probability (the confidence itself, the
default) and the true-class probability, which tracks the hard
correctness indicator more closely.

The joint objective adds the calibration term to the NLL with a weight
that ramps linearly from 0 (at epoch ``s_e``) to ``gamma_e`` (at epoch
``total_epochs``), or stays constant at ``gamma_e`` when the curriculum
is switched off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError
from .kernels import bin_edges, soft_ece_backward, soft_ece_forward


class IndicatorVariant(Enum):
    """Which probability feeds the smoothed correctness indicator."""

    MAX_PROB = "max_prob"
    TRUE_CLASS_PROB = "true_class_prob"


@dataclass(frozen=True)
class LossConfig:
    """Settings of the joint objective.

    gamma_e: target weight of the calibration term.
    s_e: epoch at which the calibration term starts ramping in.
    total_epochs: ramp length N; the ramp hits gamma_e at epoch N.
    m_train: confidence bins used inside the loss (10 by default).
    epsilon: probability clamp for the indicator and the NLL log.
    """

    gamma_e: float
    s_e: int = 0
    total_epochs: int = 50
    m_train: int = 10
    epsilon: float = 1e-6
    indicator_variant: IndicatorVariant = IndicatorVariant.MAX_PROB

    def __post_init__(self):
        # 0 is allowed so the joint objective can degenerate to plain NLL.
        if self.gamma_e < 0:
            raise DomainError(f"gamma_e must be non-negative, got {self.gamma_e}")
        if self.total_epochs < 1:
            raise DomainError(f"total_epochs must be >= 1, got {self.total_epochs}")
        if not 0 <= self.s_e < self.total_epochs:
            raise DomainError(
                f"s_e must satisfy 0 <= s_e < total_epochs, got {self.s_e}"
            )
        if not 0.0 < self.epsilon < 0.5:
            raise DomainError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")
        if self.m_train < 1:
            raise DomainError(f"m_train must be >= 1, got {self.m_train}")


@dataclass(frozen=True, eq=False)
class LossValue:
    """One evaluation of the joint objective on a batch.

    ``total`` always equals ``nll + ece_weight * soft_ece``;
    ``grad_logits`` is the matching (batch, K) gradient.
    """

    nll: float
    soft_ece: float
    ece_weight: float
    total: float
    grad_logits: np.ndarray


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    if z.shape[-1] < 2:
        raise DomainError(f"softmax needs K >= 2 classes, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise DomainError("softmax input contains non-finite entries")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(probs, labels):
    p = np.ascontiguousarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0:
        raise DomainError(f"expected a non-empty (n, K) batch, got shape {p.shape}")
    y = np.ascontiguousarray(labels, dtype=np.int64)
    if y.shape != (p.shape[0],):
        raise DomainError("labels must be one class index per batch row")
    if y.min() < 0 or y.max() >= p.shape[1]:
        raise DomainError(f"labels outside [0, {p.shape[1]})")
    return p, y


def nll_loss(probs, labels, epsilon: float = 1e-6):
    """Mean negative log-likelihood and its gradient with respect to logits.

    Probabilities are clamped below by ``epsilon`` inside the log. The
    gradient is the usual (softmax - onehot) / batch_size.
    """
    p, y = _as_batch(probs, labels)
    n = p.shape[0]
    picked = np.maximum(p[np.arange(n), y], epsilon)
    loss = float(-np.log(picked).mean())
    grad = p.copy()
    grad[np.arange(n), y] -= 1.0
    grad /= n
    return loss, grad


def soft_indicator(p: float, epsilon: float = 1e-6) -> float:
    """Smoothed correctness indicator sigmoid(tan(pi*p - pi/2)).

    Total on [0, 1]: ``p`` is clamped to [epsilon, 1-epsilon] before the
    tangent, so the endpoints map to finite values just shy of 0 and 1.
    """
    q = min(max(p, epsilon), 1.0 - epsilon)
    t = math.tan(math.pi * q - 0.5 * math.pi)
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def soft_ece(probs, labels, n_bins: int, variant: IndicatorVariant = IndicatorVariant.MAX_PROB,
             epsilon: float = 1e-6) -> float:
    """Binned calibration error with the smoothed indicator in place of 0/1
    correctness; binning (by max probability) stays the hard one."""
    p, y = _as_batch(probs, labels)
    if n_bins < 1:
        raise DomainError(f"bin count must be >= 1, got {n_bins}")
    return float(soft_ece_forward(p, y, bin_edges(n_bins), epsilon,
                                  variant is IndicatorVariant.TRUE_CLASS_PROB))


def soft_ece_grad(logits, labels, n_bins: int, variant: IndicatorVariant = IndicatorVariant.MAX_PROB,
                  epsilon: float = 1e-6) -> np.ndarray:
    """Analytic gradient of ``soft_ece(softmax(logits), ...)`` wrt logits.

    Bin membership is treated as fixed at its forward value; the absolute
    value contributes sign(gap) with sign(0) = 0.
    """
    p, y = _as_batch(softmax(logits), labels)
    if n_bins < 1:
        raise DomainError(f"bin count must be >= 1, got {n_bins}")
    _, grad = soft_ece_backward(p, y, bin_edges(n_bins), epsilon,
                                variant is IndicatorVariant.TRUE_CLASS_PROB)
    return grad


def curriculum_weight(c_e: int, config: LossConfig) -> float:
    """Linear ramp ((c_e - s_e) / (N - s_e)) * gamma_e, zero before s_e."""
    if c_e < 0 or c_e > config.total_epochs:
        raise DomainError(
            f"epoch {c_e} outside [0, {config.total_epochs}]"
        )
    if c_e < config.s_e:
        return 0.0
    return ((c_e - config.s_e) / (config.total_epochs - config.s_e)) * config.gamma_e


def weighted_loss(logits, labels, weight: float, config: LossConfig) -> LossValue:
    """NLL plus ``weight`` times the calibration term, with joint gradient."""
    z = np.ascontiguousarray(logits, dtype=np.float64)
    p, y = _as_batch(softmax(z), labels)
    nll, nll_grad = nll_loss(p, y, config.epsilon)
    soft_val, soft_grad = soft_ece_backward(
        p, y, bin_edges(config.m_train), config.epsilon,
        config.indicator_variant is IndicatorVariant.TRUE_CLASS_PROB,
    )
    return LossValue(
        nll=nll,
        soft_ece=float(soft_val),
        ece_weight=weight,
        total=nll + weight * float(soft_val),
        grad_logits=nll_grad + weight * soft_grad,
    )


def combined_loss(logits, labels, c_e: int, config: LossConfig,
                  curriculum: bool = True) -> LossValue:
    """The joint objective at epoch ``c_e``: ramped weight when
    ``curriculum`` is on, constant ``gamma_e`` when off."""
    weight = curriculum_weight(c_e, config) if curriculum else config.gamma_e
    return weighted_loss(logits, labels, weight, config)


def auto_gamma(nll_sample: float, soft_ece_sample: float) -> float:
    """Target weight that equalizes the magnitudes of two observed losses."""
    if nll_sample <= 0 or soft_ece_sample <= 0:
        raise DomainError("loss samples must both be positive")
    return nll_sample / soft_ece_sample
