"""Loss terms for membership training from pairwise labels, with exact gradients.

Three pieces: the clamped pairwise logistic loss (optionally routed through a
learnable K x K interaction matrix), the negative log-det volume regularizer
on a membership block, and the chain rule through the sigmoid that keeps the
interaction matrix inside (0, 1).
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import linalg
from .exceptions import ConfigError, DataError, ShapeError

SIMPLEX_TOL = 1e-9


@dataclass
class PairBatch:
    """One minibatch of annotated pairs.

    left/right are K x B membership blocks (column b of each is one endpoint
    of pair b); labels holds the 0/1 similarity annotations.
    """

    left: np.ndarray
    right: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=np.float64)
        self.right = np.asarray(self.right, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.left.shape != self.right.shape or self.left.ndim != 2:
            raise ShapeError(
                f"membership blocks must share a KxB shape, got "
                f"{self.left.shape} and {self.right.shape}"
            )
        if self.labels.shape != (self.left.shape[1],):
            raise ShapeError(
                f"labels shape {self.labels.shape} does not match batch size "
                f"{self.left.shape[1]}"
            )
        if self.left.shape[1] == 0:
            raise DataError("empty pair batch")
        if not np.isin(self.labels, (0, 1)).all():
            raise DataError("pair labels must be 0 or 1")
        for name, block in (("left", self.left), ("right", self.right)):
            if np.abs(block.sum(axis=0) - 1.0).max() > SIMPLEX_TOL:
                raise DataError(f"{name} memberships are not column-stochastic")

    @property
    def size(self):
        return self.left.shape[1]


class PairLossResult(NamedTuple):
    value: float
    grad_left: np.ndarray
    grad_right: np.ndarray
    grad_b: np.ndarray
    clamp_hits: int


@dataclass
class LossValue:
    """Scalar summary of one training step."""

    cc: float
    vol: float
    clamp_hits: int = 0

    @property
    def total(self):
        return self.cc + self.vol


def loss_cc(batch, b, clamp=1e-6):
    """Clamped pairwise logistic loss and its gradients.

    Per pair, p = clip(m_i^T b m_j, clamp, 1 - clamp) and the loss is the mean
    of -y log p - (1-y) log(1-p). Pairs that hit the clamp contribute zero
    gradient. With b = I this is the plain pairwise logistic loss.
    """
    if not 0.0 < clamp < 0.5:
        raise ConfigError(f"clamp must lie in (0, 0.5), got {clamp}")
    b = linalg.as_matrix(b)
    k = batch.left.shape[0]
    if b.shape != (k, k):
        raise ShapeError(f"interaction matrix must be {k}x{k}, got {b.shape}")
    y = batch.labels.astype(np.float64)
    n = batch.size

    b_right = b @ batch.right
    p_raw = np.sum(batch.left * b_right, axis=0)
    clamped = (p_raw < clamp) | (p_raw > 1.0 - clamp)
    p = np.clip(p_raw, clamp, 1.0 - clamp)

    value = float(np.mean(-y * np.log(p) - (1.0 - y) * np.log(1.0 - p)))

    # dloss/dp = (p - y) / (p (1 - p)), zeroed where the clamp was active
    w = np.where(clamped, 0.0, (p - y) / (p * (1.0 - p))) / n
    grad_left = b_right * w
    grad_right = (b.T @ batch.left) * w
    grad_b = (batch.left * w) @ batch.right.T
    return PairLossResult(value, grad_left, grad_right, grad_b, int(clamped.sum()))


def loss_vol(m_batch, lam, ridge=1e-8):
    """Volume regularizer -lam * logdet(m m^T + ridge I) and its gradient in m.

    lam = 0 short-circuits to exact zeros (no Gram factorization attempted).
    """
    if lam < 0.0:
        raise ConfigError(f"lam must be nonnegative, got {lam}")
    m = linalg.as_matrix(m_batch)
    if lam == 0.0:
        return 0.0, np.zeros_like(m)
    value, grad = linalg.logdet_gram(m, ridge)
    return -lam * value, -lam * grad


def grad_bprime(grad_b, b):
    """Chain grad wrt the interaction matrix through its sigmoid parameterization."""
    grad_b = np.asarray(grad_b, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if grad_b.shape != b.shape:
        raise ShapeError(f"shape mismatch: {grad_b.shape} vs {b.shape}")
    return grad_b * b * (1.0 - b)
