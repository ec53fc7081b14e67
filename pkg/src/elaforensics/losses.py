"""Detection losses and bilinear fusion with hand-written gradients.

The region-proposal loss mixes a classification term averaged over the
mini-batch with a smooth-L1 box term that only positive anchors pay::

    L = (1/n_cls) sum_i CE(g_i, g*_i) + lam * (1/n_reg) sum_i g*_i * sum_d smoothL1(f_i[d] - f*_i[d])
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, LengthMismatch, NegativeComponent, ShapeMismatch
from .geometry import RegressionTarget

EPS = 1e-12
DEFAULT_LAMBDA = 10.0


def _scalar_or_array(v):
    return float(v) if np.ndim(v) == 0 else v


def cross_entropy(p, label, eps: float = EPS):
    pc = np.clip(np.asarray(p, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(label, dtype=np.float64)
    return _scalar_or_array(-(y * np.log(pc) + (1.0 - y) * np.log1p(-pc)))


def cross_entropy_grad(p, label, eps: float = EPS):
    """d CE / d p; zero where the clamp is active."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    pc = np.clip(p, eps, 1.0 - eps)
    g = -y / pc + (1.0 - y) / (1.0 - pc)
    return _scalar_or_array(np.where((p > eps) & (p < 1.0 - eps), g, 0.0))


def smooth_l1(x, beta: float = 1.0):
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    return _scalar_or_array(np.where(ax < beta, 0.5 * x * x / beta, ax - 0.5 * beta))


def smooth_l1_grad(x, beta: float = 1.0):
    x = np.asarray(x, dtype=np.float64)
    return _scalar_or_array(np.where(np.abs(x) < beta, x / beta, np.sign(x)))


def _targets_array(f, name: str) -> np.ndarray:
    if len(f) and isinstance(f[0], RegressionTarget):
        arr = np.array([t.as_array() for t in f])
    else:
        arr = np.asarray(f, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ShapeMismatch(f"{name} must be a list of 4-d regression targets")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameter(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class AnchorBatch:
    g: np.ndarray
    g_star: np.ndarray
    f: np.ndarray
    f_star: np.ndarray
    n_cls: int
    n_reg: int
    lam: float = DEFAULT_LAMBDA

    @classmethod
    def create(cls, g, g_star, f, f_star, n_cls=None, n_reg=None, lam=DEFAULT_LAMBDA) -> "AnchorBatch":
        """Build a validated batch; ``n_cls`` and ``n_reg`` default to the anchor count."""
        g = np.asarray(g, dtype=np.float64).reshape(-1)
        g_star = np.asarray(g_star, dtype=np.float64).reshape(-1)
        f = _targets_array(f, "f")
        f_star = _targets_array(f_star, "f_star")
        n = len(g)
        if not (len(g_star) == len(f) == len(f_star) == n):
            raise LengthMismatch(
                f"lengths differ: g={n} g_star={len(g_star)} f={len(f)} f_star={len(f_star)}"
            )
        if n < 1:
            raise InvalidParameter("batch must hold at least one anchor")
        if not np.all((g_star == 0) | (g_star == 1)):
            raise InvalidParameter("g_star labels must be 0 or 1")
        if not np.all((g >= 0) & (g <= 1)):
            raise InvalidParameter("g must be probabilities in [0, 1]")
        n_cls = n if n_cls is None else int(n_cls)
        n_reg = n if n_reg is None else int(n_reg)
        if n_cls < 1 or n_reg < 1:
            raise InvalidParameter("n_cls and n_reg must be positive")
        if lam < 0:
            raise InvalidParameter("lambda must be non-negative")
        return cls(g, g_star, f, f_star, n_cls, n_reg, float(lam))

    def __len__(self) -> int:
        return len(self.g)


def rpn_loss(batch: AnchorBatch) -> float:
    cls_term = np.sum(cross_entropy(batch.g, batch.g_star)) / batch.n_cls
    per_anchor = np.sum(smooth_l1(batch.f - batch.f_star), axis=1)
    reg_term = batch.lam * np.sum(batch.g_star * per_anchor) / batch.n_reg
    return float(cls_term + reg_term)


def rpn_loss_grad(batch: AnchorBatch) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`rpn_loss` with respect to ``g`` and ``f``."""
    dg = np.asarray(cross_entropy_grad(batch.g, batch.g_star)) / batch.n_cls
    df = (batch.lam / batch.n_reg) * batch.g_star[:, None] * smooth_l1_grad(batch.f - batch.f_star)
    return dg, df


def _feature_matrix(m, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatch(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameter(f"{name} must be finite")
    return arr


def bilinear_pool(f_rgb, f_jpgc, normalize: bool = False) -> np.ndarray:
    """Fuse two RoI feature maps sharing a spatial grid into ``f_rgb.T @ f_jpgc``.

    Rows index spatial positions and columns index channels, so the result is
    the ``(c_rgb, c_jpgc)`` channel-interaction matrix summed over positions.
    ``normalize`` applies signed square root followed by L2 normalisation.
    """
    a = _feature_matrix(f_rgb, "f_rgb")
    b = _feature_matrix(f_jpgc, "f_jpgc")
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    x = a.T @ b
    if normalize:
        x = np.sign(x) * np.sqrt(np.abs(x))
        norm = np.linalg.norm(x)
        if norm > 0:
            x = x / norm
    return x


@dataclass(frozen=True)
class LossBreakdown:
    l_rpn: float
    l_tamper: float
    l_bbox: float
    l_total: float


def total_loss(l_rpn: float, l_tamper: float, l_bbox: float) -> LossBreakdown:
    parts = {"l_rpn": float(l_rpn), "l_tamper": float(l_tamper), "l_bbox": float(l_bbox)}
    for name, v in parts.items():
        if not v >= 0:
            raise NegativeComponent(f"{name} must be non-negative, got {v}")
    return LossBreakdown(l_total=parts["l_rpn"] + parts["l_tamper"] + parts["l_bbox"], **parts)
