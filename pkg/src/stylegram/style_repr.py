"""Style and content statistics with their losses and analytic feature gradients.

Four style representations over a feature map F of shape (N, X, Y):

* global Gram        G[i,j]        = sum_xy F_i(x,y) F_j(x,y)           -> (N, N)
* spatial            G[i](dx,dy)   = sum_xy F_i(x,y) F_i(x+dx, y+dy)    -> (N, 2X-1, 2Y-1)
* pixelwise Gram     G[i,j](x,y)   = F_i(x,y) F_j(x,y)                  -> (N, N, X, Y)
* localized Gram     G[i,j](x,y)   = sum_{|dx|,|dy|<=s} w(dx,dy)
                                       F_i(x+dx,y+dy) F_j(x+dx,y+dy)    -> (N, N, X, Y)

with the distance decay w(dx,dy) = 1 / (1 + dx^2 + dy^2). Every loss is the
quadratic deviation from a target statistic A, normalized by 1/(4 N^2 M^2)
where M = X*Y (content: 1/(2 N M)), and every gradient is the exact analytic
derivative of the implemented loss, which finite differences verify.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatchError
from .tensor_core import full_xcorr, valid_xcorr

GLOBAL = "global"
SPATIAL = "spatial"
PIXELWISE = "pixelwise"
LOCALIZED = "localized"
STYLE_KINDS = (GLOBAL, SPATIAL, PIXELWISE, LOCALIZED)


def _as_feature(F) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 3:
        raise ShapeMismatchError(f"feature map must be (N, X, Y), got shape {F.shape}")
    return F


def _norms(F: np.ndarray) -> tuple[int, int]:
    n = F.shape[0]
    m = F.shape[1] * F.shape[2]
    return n, m


def gram(F) -> np.ndarray:
    """Global Gram matrix of pairwise feature inner products, exactly symmetric."""
    F = _as_feature(F)
    flat = F.reshape(F.shape[0], -1)
    g = flat @ flat.T
    return np.triu(g) + np.triu(g, 1).T  # mirror the upper triangle: bitwise symmetric


def gram_loss(F, A) -> float:
    """Squared Frobenius deviation from the target Gram, scaled by 1/(4 N^2 M^2)."""
    F = _as_feature(F)
    n, m = _norms(F)
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (n, n):
        raise ShapeMismatchError(f"gram target shape {A.shape} does not match ({n}, {n})")
    d = gram(F) - A
    return float(np.sum(d * d) / (4.0 * n * n * m * m))


def gram_loss_grad(F, A) -> np.ndarray:
    """Exact derivative of gram_loss with respect to F."""
    F = _as_feature(F)
    n, m = _norms(F)
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (n, n):
        raise ShapeMismatchError(f"gram target shape {A.shape} does not match ({n}, {n})")
    d = gram(F) - A
    flat = F.reshape(n, -1)
    grad = (d + d.T) @ flat / (2.0 * n * n * m * m)
    return grad.reshape(F.shape)


def spatial_gram(F) -> np.ndarray:
    """Per-channel full autocorrelation planes, shape (N, 2X-1, 2Y-1)."""
    F = _as_feature(F)
    return np.stack([full_xcorr(F[i], F[i]) for i in range(F.shape[0])])


def _check_spatial_target(F: np.ndarray, A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    n, x, y = F.shape
    if A.shape != (n, 2 * x - 1, 2 * y - 1):
        raise ShapeMismatchError(
            f"spatial target shape {A.shape} does not match ({n}, {2 * x - 1}, {2 * y - 1})"
        )
    return A


def spatial_loss(F, A) -> float:
    """Squared deviation of the autocorrelation planes, scaled by 1/(4 N^2 M^2)."""
    F = _as_feature(F)
    A = _check_spatial_target(F, A)
    n, m = _norms(F)
    d = spatial_gram(F) - A
    return float(np.sum(d * d) / (4.0 * n * n * m * m))


def spatial_loss_grad(F, A) -> np.ndarray:
    """Exact derivative of spatial_loss, feature-shaped.

    Each plane's residual D acts on F through valid correlation from both
    displacement orientations (u and u+d both carry dG/dF terms); for
    centrally symmetric targets the two coincide.
    """
    F = _as_feature(F)
    A = _check_spatial_target(F, A)
    n, m = _norms(F)
    d = spatial_gram(F) - A
    grad = np.empty_like(F)
    for i in range(n):
        t1 = valid_xcorr(d[i], F[i])
        t2 = valid_xcorr(d[i][::-1, ::-1], F[i])
        grad[i] = (t1 + t2)[::-1, ::-1]
    return grad / (2.0 * n * n * m * m)


def pixelwise_gram(F) -> np.ndarray:
    """Per-location products F_i(x,y) F_j(x,y), shape (N, N, X, Y)."""
    F = _as_feature(F)
    return F[:, None] * F[None, :]


def _check_field_target(F: np.ndarray, A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    n, x, y = F.shape
    if A.shape != (n, n, x, y):
        raise ShapeMismatchError(
            f"gram field target shape {A.shape} does not match ({n}, {n}, {x}, {y})"
        )
    return A


def pixelwise_loss(F, A) -> float:
    """Squared deviation of the pixelwise Gram field, scaled by 1/(4 N^2 M^2)."""
    F = _as_feature(F)
    A = _check_field_target(F, A)
    n, m = _norms(F)
    d = pixelwise_gram(F) - A
    return float(np.sum(d * d) / (4.0 * n * n * m * m))


def pixelwise_loss_grad(F, A) -> np.ndarray:
    """Exact derivative of pixelwise_loss."""
    F = _as_feature(F)
    A = _check_field_target(F, A)
    n, m = _norms(F)
    d = pixelwise_gram(F) - A
    dsym = d + np.swapaxes(d, 0, 1)
    grad = np.einsum("ijxy,jxy->ixy", dsym, F)
    return grad / (2.0 * n * n * m * m)


def decay_weight(dx: int, dy: int) -> float:
    """Distance decay 1 / (1 + dx^2 + dy^2)."""
    return 1.0 / (1.0 + dx * dx + dy * dy)


def _window_weighted_sum(field: np.ndarray, s: int) -> np.ndarray:
    """Decay-weighted sum of (2s+1)^2 shifted copies of the trailing-2D field.

    Offsets reaching outside the map contribute zero. The decay is symmetric
    in sign, so this serves both the statistic and its adjoint.
    """
    if s == 0:
        return field.copy()
    x, y = field.shape[-2:]
    pad = [(0, 0)] * (field.ndim - 2) + [(s, s), (s, s)]
    padded = np.pad(field, pad)
    out = np.zeros_like(field)
    for dx in range(-s, s + 1):
        for dy in range(-s, s + 1):
            out += decay_weight(dx, dy) * padded[..., s + dx : s + dx + x, s + dy : s + dy + y]
    return out


def localized_gram(F, s: int) -> np.ndarray:
    """Decay-weighted windowed correlations around every location, (N, N, X, Y).

    s = 0 (with w(0,0) = 1) degenerates to pixelwise_gram exactly.
    """
    if s < 0:
        raise ShapeMismatchError(f"window radius must be >= 0, got {s}")
    F = _as_feature(F)
    return _window_weighted_sum(pixelwise_gram(F), s)


def localized_loss(F, A, s: int) -> float:
    """Squared deviation of the localized Gram field, scaled by 1/(4 N^2 M^2)."""
    F = _as_feature(F)
    A = _check_field_target(F, A)
    n, m = _norms(F)
    d = localized_gram(F, s) - A
    return float(np.sum(d * d) / (4.0 * n * n * m * m))


def localized_loss_grad(F, A, s: int) -> np.ndarray:
    """Exact derivative of localized_loss.

    The adjoint of the decay window is the window itself (w is even in dx, dy),
    so the symmetrized residual is window-summed and contracted against F.
    """
    F = _as_feature(F)
    A = _check_field_target(F, A)
    n, m = _norms(F)
    d = localized_gram(F, s) - A
    dsym = d + np.swapaxes(d, 0, 1)
    t = _window_weighted_sum(dsym, s)
    grad = np.einsum("ijxy,jxy->ixy", t, F)
    return grad / (2.0 * n * n * m * m)


def content_loss(F, P) -> float:
    """Squared feature distance to the content target, scaled by 1/(2 N M)."""
    F = _as_feature(F)
    P = np.asarray(P, dtype=np.float64)
    if P.shape != F.shape:
        raise ShapeMismatchError(f"content target shape {P.shape} does not match {F.shape}")
    n, m = _norms(F)
    d = F - P
    return float(np.sum(d * d) / (2.0 * n * m))


def content_loss_grad(F, P) -> np.ndarray:
    """Exact derivative of content_loss: (F - P) / (N M)."""
    F = _as_feature(F)
    P = np.asarray(P, dtype=np.float64)
    if P.shape != F.shape:
        raise ShapeMismatchError(f"content target shape {P.shape} does not match {F.shape}")
    n, m = _norms(F)
    return (F - P) / (n * m)
