"""Synthetic Gram-matrix style targets and Gram statistics of real images.

Texture synthesis needs no style image: a target Gram matrix can be a one-hot
matrix (a single symmetric nonzero correlation) or a random sparse matrix of
absolute Gaussian values under a zero-one mask. Both live in the space of
real Gram matrices, i.e. they are symmetric; positive semidefiniteness is not
enforced — the quadratic loss is well defined without it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class SparseGramSpec:
    """Parameters of the random sparse generator.

    sparsity is the expected fraction of zero entries in the mask; sigma the
    standard deviation of the Gaussian the magnitudes are drawn from.
    """

    n: int
    sparsity: float
    sigma: float
    seed: int
    layer: str | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"matrix dimension must be >= 1, got {self.n}")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ConfigurationError(f"sparsity must lie in [0, 1], got {self.sparsity}")
        if self.sigma <= 0.0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")


@dataclass
class GramStats:
    """Histogram and summary statistics over the magnitudes of Gram entries."""

    bin_edges: np.ndarray
    counts: np.ndarray
    zero_fraction: float
    max_abs: float
    mean_abs: float
    layer: str | None = None


def one_hot_gram(n: int, i: int, j: int, magnitude: float) -> np.ndarray:
    """Target with a single nonzero correlation, set symmetrically at (i,j) and (j,i)."""
    if not (0 <= i < n and 0 <= j < n):
        raise ConfigurationError(f"one-hot indices ({i}, {j}) out of range for n={n}")
    if magnitude <= 0:
        raise ConfigurationError(f"one-hot magnitude must be positive, got {magnitude}")
    target = np.zeros((n, n))
    target[i, j] = magnitude
    target[j, i] = magnitude
    return target


def random_sparse_gram(spec: SparseGramSpec) -> np.ndarray:
    """Symmetric sparse target: |N(0, sigma^2)| magnitudes under a zero-one mask.

    Magnitudes and mask are drawn for the upper triangle and mirrored, so the
    zero fraction of the symmetric result tracks spec.sparsity (masking a full
    square matrix and averaging with its transpose would square the zero
    probability off the diagonal instead). Deterministic in spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    values = np.abs(rng.normal(0.0, spec.sigma, size=(n, n)))
    mask = (rng.random(size=(n, n)) >= spec.sparsity).astype(np.float64)
    upper = np.triu(values * mask)
    target = upper + np.triu(upper, 1).T
    return target


def gram_stats(G, bins: int = 20, tau: float = 1e-12, layer: str | None = None) -> GramStats:
    """Histogram over |entries| plus zero fraction at tolerance tau."""
    if bins < 1:
        raise ConfigurationError(f"bins must be >= 1, got {bins}")
    G = np.asarray(G, dtype=np.float64)
    mags = np.abs(G).ravel()
    top = float(mags.max()) if mags.size else 0.0
    counts, edges = np.histogram(mags, bins=bins, range=(0.0, top if top > 0 else 1.0))
    return GramStats(
        bin_edges=edges,
        counts=counts,
        zero_fraction=float(np.mean(mags <= tau)),
        max_abs=top,
        mean_abs=float(mags.mean()) if mags.size else 0.0,
        layer=layer,
    )


def format_stats_table(stats: GramStats) -> str:
    """Plain-text table: summary header lines, then one 'bin-edge count' row per bin."""
    lines = []
    if stats.layer:
        lines.append(f"# layer {stats.layer}")
    lines.append(f"# zero_fraction {stats.zero_fraction!r}")
    lines.append(f"# max_abs {stats.max_abs!r}")
    lines.append(f"# mean_abs {stats.mean_abs!r}")
    for edge, count in zip(stats.bin_edges[:-1], stats.counts):
        lines.append(f"{edge!r} {int(count)}")
    return "\n".join(lines) + "\n"
