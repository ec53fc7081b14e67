"""Central-difference gradient checks for the loss kernel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import losses

TOLERANCE = 1e-4
DEFAULT_STEP = 1e-5
_DENOM_FLOOR = 1e-10


def grad_check(
    loss: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    point,
    h: float = DEFAULT_STEP,
) -> float:
    """Max relative error between ``grad(point)`` and central differences of ``loss``.

    ``point`` must stay at least ``10 * h`` away from any kink of ``loss``.
    """
    x = np.array(point, dtype=np.float64).reshape(-1)
    analytic = np.asarray(grad(x.copy()), dtype=np.float64).reshape(-1)
    if analytic.shape != x.shape:
        raise ValueError(f"gradient has shape {analytic.shape}, expected {x.shape}")
    worst = 0.0
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        numeric = (loss(xp) - loss(xm)) / (2 * h)
        denom = max(abs(analytic[k]), abs(numeric), _DENOM_FLOOR)
        worst = max(worst, abs(analytic[k] - numeric) / denom)
    return worst


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_error: float
    worst_point: tuple
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def _away_from_kink(rng: np.random.Generator, size, h: float, low=-3.0, high=3.0) -> np.ndarray:
    x = rng.uniform(low, high, size)
    bad = np.abs(np.abs(x) - 1.0) < 10 * h
    while bad.any():
        x[bad] = rng.uniform(low, high, int(bad.sum()))
        bad = np.abs(np.abs(x) - 1.0) < 10 * h
    return x


def check_cross_entropy(rng: np.random.Generator, n_points: int = 100, h: float = DEFAULT_STEP) -> CheckResult:
    worst, where = 0.0, ()
    for _ in range(n_points):
        p = rng.uniform(0.02, 0.98)
        label = int(rng.integers(0, 2))
        err = grad_check(
            lambda v: losses.cross_entropy(v[0], label),
            lambda v: np.array([losses.cross_entropy_grad(v[0], label)]),
            [p],
            h,
        )
        if err >= worst:
            worst, where = err, (p, label)
    return CheckResult("cross_entropy", worst, where)


def check_smooth_l1(rng: np.random.Generator, n_points: int = 100, h: float = DEFAULT_STEP) -> CheckResult:
    worst, where = 0.0, ()
    for x in _away_from_kink(rng, n_points, h):
        err = grad_check(
            lambda v: losses.smooth_l1(v[0]),
            lambda v: np.array([losses.smooth_l1_grad(v[0])]),
            [x],
            h,
        )
        if err >= worst:
            worst, where = err, (float(x),)
    return CheckResult("smooth_l1", worst, where)


def random_batch(rng: np.random.Generator, n_anchors: int = 5, h: float = DEFAULT_STEP) -> losses.AnchorBatch:
    g_star = rng.integers(0, 2, n_anchors)
    f_star = rng.normal(0.0, 1.0, (n_anchors, 4))
    f = f_star + _away_from_kink(rng, (n_anchors, 4), h)
    return losses.AnchorBatch.create(
        rng.uniform(0.02, 0.98, n_anchors), g_star, f, f_star, lam=float(rng.uniform(0.5, 10.0))
    )


def _rpn_closures(batch: losses.AnchorBatch):
    n = len(batch)

    def rebuild(v):
        return losses.AnchorBatch(
            v[:n], batch.g_star, v[n:].reshape(n, 4), batch.f_star, batch.n_cls, batch.n_reg, batch.lam
        )

    def loss(v):
        return losses.rpn_loss(rebuild(v))

    def grad(v):
        dg, df = losses.rpn_loss_grad(rebuild(v))
        return np.concatenate([dg, df.reshape(-1)])

    return loss, grad, np.concatenate([batch.g, batch.f.reshape(-1)])


def check_rpn_loss(rng: np.random.Generator, n_points: int = 100, h: float = DEFAULT_STEP) -> CheckResult:
    worst, where = 0.0, ()
    for k in range(n_points):
        loss, grad, x0 = _rpn_closures(random_batch(rng, h=h))
        err = grad_check(loss, grad, x0, h)
        if err >= worst:
            worst, where = err, ("batch", k)
    return CheckResult("rpn_loss", worst, where)


def check_bilinear_transpose(rng: np.random.Generator, n_points: int = 100) -> CheckResult:
    worst, where = 0.0, ()
    for k in range(n_points):
        rows = int(rng.integers(1, 8))
        a = rng.normal(size=(rows, int(rng.integers(1, 6))))
        b = rng.normal(size=(rows, int(rng.integers(1, 6))))
        err = float(np.max(np.abs(losses.bilinear_pool(a, b).T - losses.bilinear_pool(b, a))))
        if err >= worst:
            worst, where = err, ("pair", k)
    return CheckResult("bilinear_transpose", worst, where)


def check_total_composition(rng: np.random.Generator, n_points: int = 100) -> CheckResult:
    worst, where = 0.0, ()
    for k in range(n_points):
        parts = rng.uniform(0.0, 5.0, 3)
        b = losses.total_loss(*parts)
        err = abs(b.l_total - (b.l_rpn + b.l_tamper + b.l_bbox))
        if err >= worst:
            worst, where = err, tuple(float(p) for p in parts)
    return CheckResult("total_loss_sum", worst, where)


def run_loss_checks(seed: int = 0, n_points: int = 100) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        check_cross_entropy(rng, n_points),
        check_smooth_l1(rng, n_points),
        check_rpn_loss(rng, n_points),
        check_bilinear_transpose(rng, n_points),
        check_total_composition(rng, n_points),
    ]
