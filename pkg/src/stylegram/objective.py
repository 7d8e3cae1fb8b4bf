"""Weighted multi-layer objectives: total loss and its pixel gradient.

An objective pairs a feature network with a layer partition (content entries
and style entries of any representation kind), caches the per-layer targets,
and evaluates loss(image) together with d loss / d image in one forward and
one backward pass. Layers may serve both pools at once; their feature-space
gradients simply accumulate before backpropagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import network as net
from . import style_repr as sr
from .errors import ConfigurationError, ShapeMismatchError


@dataclass(frozen=True)
class ContentEntry:
    layer: str
    weight: float | None = None


@dataclass(frozen=True)
class StyleEntry:
    layer: str
    weight: float | None = None
    kind: str = sr.GLOBAL
    s: int = 0  # window radius, localized kind only


@dataclass(frozen=True)
class LayerPartition:
    """Content and style layer pools. A layer may appear in both pools.

    Entry weights default to 1/(pool size) when left as None.
    """

    content: tuple[ContentEntry, ...] = ()
    style: tuple[StyleEntry, ...] = ()

    def __post_init__(self):
        if not self.content and not self.style:
            raise ConfigurationError("partition needs at least one content or style entry")
        for entry in self.content:
            if entry.weight is not None and entry.weight < 0:
                raise ConfigurationError(f"negative weight for content layer {entry.layer!r}")
        for entry in self.style:
            if entry.weight is not None and entry.weight < 0:
                raise ConfigurationError(f"negative weight for style layer {entry.layer!r}")
            if entry.kind not in sr.STYLE_KINDS:
                raise ConfigurationError(
                    f"unknown style kind {entry.kind!r} for layer {entry.layer!r}"
                )
            if entry.kind == sr.LOCALIZED and entry.s < 0:
                raise ConfigurationError("localized window radius must be >= 0")

    def content_weights(self) -> list[float]:
        default = 1.0 / len(self.content) if self.content else 0.0
        return [e.weight if e.weight is not None else default for e in self.content]

    def style_weights(self) -> list[float]:
        default = 1.0 / len(self.style) if self.style else 0.0
        return [e.weight if e.weight is not None else default for e in self.style]

    def layer_names(self) -> list[str]:
        seen: list[str] = []
        for entry in list(self.content) + list(self.style):
            if entry.layer not in seen:
                seen.append(entry.layer)
        return seen


@dataclass
class Term:
    """One breakdown row of an evaluation."""

    name: str
    pool: str  # content | style
    layer: str
    kind: str
    loss: float  # raw E_l for this entry
    weight: float  # entry weight within its pool
    contribution: float  # pool scale * weight * loss


def _style_statistic(entry: StyleEntry, F: np.ndarray) -> np.ndarray:
    if entry.kind == sr.GLOBAL:
        return sr.gram(F)
    if entry.kind == sr.SPATIAL:
        return sr.spatial_gram(F)
    if entry.kind == sr.PIXELWISE:
        return sr.pixelwise_gram(F)
    return sr.localized_gram(F, entry.s)


def _style_loss_and_grad(entry: StyleEntry, F: np.ndarray, A: np.ndarray):
    if entry.kind == sr.GLOBAL:
        return sr.gram_loss(F, A), sr.gram_loss_grad(F, A)
    if entry.kind == sr.SPATIAL:
        return sr.spatial_loss(F, A), sr.spatial_loss_grad(F, A)
    if entry.kind == sr.PIXELWISE:
        return sr.pixelwise_loss(F, A), sr.pixelwise_loss_grad(F, A)
    return sr.localized_loss(F, A, entry.s), sr.localized_loss_grad(F, A, entry.s)


def _entry_label(entry, pool: str, counts: dict[str, int]) -> str:
    base = f"{pool}:{entry.layer}"
    if pool == "style":
        kind = entry.kind if entry.kind != sr.LOCALIZED else f"localized{entry.s}"
        base = f"{base}:{kind}"
    counts[base] = counts.get(base, 0) + 1
    return base if counts[base] == 1 else f"{base}#{counts[base]}"


class Objective:
    """Immutable after build, except for targets refreshed by a target provider."""

    def __init__(self, config: net.NetworkConfig, weights: net.WeightStore,
                 partition: LayerPartition, content_targets: dict[str, np.ndarray],
                 style_targets: dict[int, np.ndarray], alpha: float, beta: float,
                 input_shape: tuple[int, int, int] | None,
                 target_provider=None):
        self.config = config
        self.weights = weights
        self.partition = partition
        self.content_targets = content_targets
        self.style_targets = style_targets
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.input_shape = input_shape
        self.target_provider = target_provider
        self._content_weights = partition.content_weights()
        self._style_weights = partition.style_weights()

    def regenerate_targets(self, iteration: int) -> None:
        """Refresh style targets from the provider hook, if one is installed."""
        if self.target_provider is None:
            return
        fresh = self.target_provider(iteration)
        for index, target in fresh.items():
            if index not in self.style_targets:
                raise ConfigurationError(f"target provider returned unknown entry index {index}")
            self.style_targets[index] = np.asarray(target, dtype=np.float64)

    def eval(self, image: np.ndarray) -> tuple[float, np.ndarray, list[Term]]:
        """Total loss, its pixel gradient, and the per-entry breakdown."""
        image = np.asarray(image, dtype=np.float64)
        if self.input_shape is not None and image.shape != self.input_shape:
            raise ShapeMismatchError(
                f"image shape {image.shape} does not match objective shape {self.input_shape}"
            )
        cache = net.forward(self.config, self.weights, image, self.partition.layer_names())

        breakdown: list[Term] = []
        label_counts: dict[str, int] = {}
        layer_grads: dict[str, np.ndarray] = {}

        def add_grad(layer: str, grad: np.ndarray) -> None:
            if layer in layer_grads:
                layer_grads[layer] = layer_grads[layer] + grad
            else:
                layer_grads[layer] = grad

        for entry, weight in zip(self.partition.content, self._content_weights):
            F = cache.features[entry.layer]
            P = self.content_targets[entry.layer]
            loss = sr.content_loss(F, P)
            scale = self.alpha * weight
            if scale != 0.0:
                add_grad(entry.layer, scale * sr.content_loss_grad(F, P))
            label = _entry_label(entry, "content", label_counts)
            breakdown.append(Term(label, "content", entry.layer, "content", loss, weight,
                                  scale * loss))

        for index, (entry, weight) in enumerate(zip(self.partition.style, self._style_weights)):
            F = cache.features[entry.layer]
            A = self.style_targets[index]
            loss, grad = _style_loss_and_grad(entry, F, A)
            scale = self.beta * weight
            if scale != 0.0:
                add_grad(entry.layer, scale * grad)
            kind = entry.kind if entry.kind != sr.LOCALIZED else f"{entry.kind}(s={entry.s})"
            label = _entry_label(entry, "style", label_counts)
            breakdown.append(Term(label, "style", entry.layer, kind, loss, weight, scale * loss))

        total = 0.0
        for term in breakdown:
            total += term.contribution

        if layer_grads:
            grad = net.backward(self.config, self.weights, cache, layer_grads)
        else:
            grad = np.zeros_like(image)
        return total, grad, breakdown


def build_objective(config: net.NetworkConfig, weights: net.WeightStore,
                    partition: LayerPartition, content_image: np.ndarray | None = None,
                    style_image: np.ndarray | None = None,
                    style_targets: dict[int, np.ndarray] | None = None,
                    alpha: float = 1.0, beta: float = 1.0,
                    target_provider=None) -> Objective:
    """Extract targets with one forward pass per source image and assemble an objective.

    Style targets may be injected directly through ``style_targets`` (keyed by
    style entry index), e.g. synthetic Gram matrices; remaining style entries
    require a style image. Representation kinds with spatial extent demand
    content and style images of equal size — resize beforehand.
    """
    style_targets = dict(style_targets or {})

    if partition.content and content_image is None:
        raise ConfigurationError("partition has content entries but no content image was given")
    needs_style_image = [i for i in range(len(partition.style)) if i not in style_targets]
    if needs_style_image and style_image is None:
        raise ConfigurationError(
            "style entries without injected targets need a style image"
        )

    spatial_kinds = [e for e in partition.style if e.kind != sr.GLOBAL]
    if spatial_kinds and content_image is not None and style_image is not None:
        if content_image.shape != style_image.shape:
            raise ShapeMismatchError(
                f"content {content_image.shape} and style {style_image.shape} sizes differ; "
                f"{spatial_kinds[0].kind} style targets are location-bound — resize the images "
                "to the same dimensions first"
            )

    content_targets: dict[str, np.ndarray] = {}
    if partition.content:
        wanted = sorted({e.layer for e in partition.content})
        cache = net.forward(config, weights, content_image, wanted)
        content_targets = {name: cache.features[name].copy() for name in wanted}

    if needs_style_image:
        wanted = sorted({partition.style[i].layer for i in needs_style_image})
        cache = net.forward(config, weights, style_image, wanted)
        for i in needs_style_image:
            entry = partition.style[i]
            style_targets[i] = _style_statistic(entry, cache.features[entry.layer])

    for i, entry in enumerate(partition.style):
        if i not in style_targets:
            raise ConfigurationError(f"no target for style entry {i} ({entry.layer!r})")
        style_targets[i] = np.asarray(style_targets[i], dtype=np.float64)

    input_shape = None
    if content_image is not None:
        input_shape = tuple(content_image.shape)
    elif style_image is not None and spatial_kinds:
        input_shape = tuple(style_image.shape)

    return Objective(config, weights, partition, content_targets, style_targets,
                     alpha, beta, input_shape, target_provider)
