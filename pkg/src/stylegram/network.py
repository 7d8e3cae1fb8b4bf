"""Configurable VGG-like feature extractor with hand-implemented forward/backward.

A network is an ordered list of named conv/relu/pool layers. ``forward``
produces feature maps for a requested set of layer names, computing only as
deep as necessary; ``backward`` propagates arbitrary per-layer feature
gradients down to the input image by composing the primitive adjoints.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import tensor_core as tc
from .errors import ConfigurationError, ShapeMismatchError, WeightFormatError

_MAGIC = b"GFW1"


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the stack. Conv fields apply to kind='conv', pool fields to kind='pool'."""

    name: str
    kind: str  # conv | relu | pool
    out_channels: int = 0
    kernel_size: int = 3
    stride: int = 1
    padding: str = "same"
    pool_mode: str = "max"
    pool_size: int = 2
    pool_stride: int = 2


def conv(name: str, out_channels: int, kernel_size: int = 3, stride: int = 1,
         padding: str = "same") -> LayerSpec:
    return LayerSpec(name, "conv", out_channels=out_channels, kernel_size=kernel_size,
                     stride=stride, padding=padding)


def relu(name: str) -> LayerSpec:
    return LayerSpec(name, "relu")


def pool(name: str, mode: str = "max", size: int = 2, stride: int = 2) -> LayerSpec:
    return LayerSpec(name, "pool", pool_mode=mode, pool_size=size, pool_stride=stride)


@dataclass(frozen=True)
class NetworkConfig:
    """Layer sequence plus input channel count and preprocessing mean.

    ``features`` selects whether the feature map published for a conv layer is
    taken before ("pre") or after ("post") the ReLU that immediately follows it.
    """

    layers: tuple[LayerSpec, ...]
    input_channels: int = 3
    mean: tuple[float, ...] = (0.0, 0.0, 0.0)
    features: str = "post"

    def __post_init__(self):
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ConfigurationError("layer names must be unique within a network")
        if not any(layer.kind == "conv" for layer in self.layers):
            raise ConfigurationError("network needs at least one conv layer")
        if self.features not in ("pre", "post"):
            raise ConfigurationError(f"features must be 'pre' or 'post', got {self.features!r}")
        for layer in self.layers:
            if layer.kind not in ("conv", "relu", "pool"):
                raise ConfigurationError(f"unknown layer kind {layer.kind!r} in {layer.name}")

    def layer_names(self) -> list[str]:
        return [layer.name for layer in self.layers]

    def conv_layers(self) -> list[LayerSpec]:
        return [layer for layer in self.layers if layer.kind == "conv"]

    def conv_in_channels(self) -> dict[str, int]:
        """Input channel count of every conv layer, inferred from the chain."""
        channels = self.input_channels
        result = {}
        for layer in self.layers:
            if layer.kind == "conv":
                result[layer.name] = channels
                channels = layer.out_channels
        return result

    def feature_position(self, name: str) -> int:
        """Chain position (1-based layer output index) where the named feature lives."""
        names = self.layer_names()
        if name not in names:
            raise ConfigurationError(f"unknown layer name {name!r}")
        idx = names.index(name)
        if (
            self.features == "post"
            and self.layers[idx].kind == "conv"
            and idx + 1 < len(self.layers)
            and self.layers[idx + 1].kind == "relu"
        ):
            idx += 1
        return idx + 1


@dataclass
class WeightStore:
    """Per-conv-layer kernels and biases, keyed by layer name."""

    kernels: dict[str, np.ndarray]
    biases: dict[str, np.ndarray]
    provenance: str = "unspecified"


@dataclass
class FeatureCache:
    """Forward-pass state: published features plus everything the adjoints need."""

    features: dict[str, np.ndarray]
    outputs: list[np.ndarray]  # outputs[0] is the input image, outputs[i] of layers[i-1]
    pool_records: dict[int, tc.PoolRecord] = field(default_factory=dict)
    positions: dict[str, int] = field(default_factory=dict)


def random_init(config: NetworkConfig, seed: int) -> WeightStore:
    """Seeded He-style initialization: zero-mean normals scaled by 1/sqrt(fan-in).

    Values are rounded to float32 precision so that a save/load round trip
    through the float32 weight file reproduces the store bit-for-bit.
    """
    rng = np.random.default_rng(seed)
    kernels: dict[str, np.ndarray] = {}
    biases: dict[str, np.ndarray] = {}
    in_channels = config.conv_in_channels()
    for layer in config.conv_layers():
        c_in = in_channels[layer.name]
        k = layer.kernel_size
        fan_in = c_in * k * k
        kern = rng.standard_normal((layer.out_channels, c_in, k, k)) / np.sqrt(fan_in)
        kernels[layer.name] = kern.astype(np.float32).astype(np.float64)
        biases[layer.name] = np.zeros(layer.out_channels)
    return WeightStore(kernels, biases, provenance=f"seeded-random({seed})")


def _check_weights(config: NetworkConfig, weights: WeightStore) -> None:
    in_channels = config.conv_in_channels()
    for layer in config.conv_layers():
        if layer.name not in weights.kernels:
            raise ConfigurationError(f"weights missing for conv layer {layer.name!r}")
        expect = (layer.out_channels, in_channels[layer.name], layer.kernel_size, layer.kernel_size)
        got = weights.kernels[layer.name].shape
        if got != expect:
            raise ShapeMismatchError(
                f"kernel shape {got} for layer {layer.name!r} does not match config {expect}"
            )


def forward(config: NetworkConfig, weights: WeightStore, image: np.ndarray,
            wanted) -> FeatureCache:
    """Run the stack on one image and cache features for the wanted layer names.

    Layers past the deepest wanted feature are never executed.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != config.input_channels:
        raise ShapeMismatchError(
            f"image shape {image.shape} does not match {config.input_channels} input channels"
        )
    _check_weights(config, weights)
    wanted = list(wanted)
    positions = {name: config.feature_position(name) for name in wanted}
    if not positions:
        raise ConfigurationError("forward needs at least one wanted layer")
    deepest = max(positions.values())

    outputs = [image]
    pool_records: dict[int, tc.PoolRecord] = {}
    x = image
    for idx in range(deepest):
        layer = config.layers[idx]
        if layer.kind == "conv":
            x = tc.conv2d(x, weights.kernels[layer.name], weights.biases[layer.name],
                          stride=layer.stride, padding=layer.padding)
        elif layer.kind == "relu":
            x = tc.relu(x)
        else:
            x, record = tc.pool2d(x, layer.pool_mode, layer.pool_size, layer.pool_stride)
            pool_records[idx] = record
        outputs.append(x)

    features = {name: outputs[pos] for name, pos in positions.items()}
    return FeatureCache(features, outputs, pool_records, positions)


def backward(config: NetworkConfig, weights: WeightStore, cache: FeatureCache,
             layer_grads: dict[str, np.ndarray]) -> np.ndarray:
    """Propagate per-layer feature gradients to the input image.

    Gradients injected at several layers accumulate along the shared backward
    path, so the result is the derivative of sum_l <layer_grads[l], F_l>.
    """
    inject: dict[int, np.ndarray] = {}
    for name, grad in layer_grads.items():
        if name not in cache.features:
            raise ConfigurationError(f"layer {name!r} was not captured in the forward cache")
        pos = cache.positions[name]
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != cache.outputs[pos].shape:
            raise ShapeMismatchError(
                f"gradient shape {grad.shape} for layer {name!r} does not match "
                f"feature shape {cache.outputs[pos].shape}"
            )
        inject[pos] = inject.get(pos, 0.0) + grad

    if not inject:
        return np.zeros_like(cache.outputs[0])
    top = max(inject)
    g = np.zeros_like(cache.outputs[top])
    for pos in range(top, 0, -1):
        if pos in inject:
            g = g + inject[pos]
        layer = config.layers[pos - 1]
        below = cache.outputs[pos - 1]
        if layer.kind == "conv":
            g = tc.conv2d_input_grad(g, weights.kernels[layer.name], stride=layer.stride,
                                     padding=layer.padding, input_hw=below.shape[1:])
        elif layer.kind == "relu":
            g = tc.relu_grad(g, below)
        else:
            g = tc.pool2d_grad(g, cache.pool_records[pos - 1])
    return g


def save_weights(store: WeightStore, config: NetworkConfig, path) -> None:
    """Write conv weights in the little-endian "GFW1" binary format.

    Layout: magic "GFW1"; u32 layer count; per conv layer: u16 name length,
    UTF-8 name, four u32 kernel dims (out, in, kh, kw), kernel values as f32
    row-major, u32 bias length, bias values as f32.
    """
    _check_weights(config, store)
    layers = config.conv_layers()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(layers)))
        for layer in layers:
            name = layer.name.encode("utf-8")
            kern = store.kernels[layer.name]
            bias = store.biases[layer.name]
            fh.write(struct.pack("<H", len(name)))
            fh.write(name)
            fh.write(struct.pack("<4I", *kern.shape))
            fh.write(kern.astype("<f4").tobytes())
            fh.write(struct.pack("<I", bias.size))
            fh.write(bias.astype("<f4").tobytes())


def load_weights(config: NetworkConfig, path) -> WeightStore:
    """Read a "GFW1" weight file and validate it against the network config."""
    with open(path, "rb") as fh:
        data = fh.read()

    view = memoryview(data)
    offset = 0

    def take(n: int, what: str) -> memoryview:
        nonlocal offset
        if offset + n > len(view):
            raise WeightFormatError(f"truncated weight file: unexpected end while reading {what}")
        chunk = view[offset : offset + n]
        offset += n
        return chunk

    magic = bytes(take(4, "magic"))
    if magic != _MAGIC:
        raise WeightFormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    (count,) = struct.unpack("<I", take(4, "layer count"))
    entries: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = bytes(take(name_len, "layer name")).decode("utf-8")
        dims = struct.unpack("<4I", take(16, f"kernel dims of {name!r}"))
        n_kernel = int(np.prod(dims))
        kern = np.frombuffer(take(4 * n_kernel, f"kernel of {name!r}"), dtype="<f4")
        (bias_len,) = struct.unpack("<I", take(4, f"bias length of {name!r}"))
        bias = np.frombuffer(take(4 * bias_len, f"bias of {name!r}"), dtype="<f4")
        entries[name] = (kern.astype(np.float64).reshape(dims), bias.astype(np.float64))

    in_channels = config.conv_in_channels()
    kernels: dict[str, np.ndarray] = {}
    biases: dict[str, np.ndarray] = {}
    for layer in config.conv_layers():
        if layer.name not in entries:
            raise WeightFormatError(f"weight file has no entry for conv layer {layer.name!r}")
        kern, bias = entries[layer.name]
        expect = (layer.out_channels, in_channels[layer.name], layer.kernel_size, layer.kernel_size)
        if kern.shape != expect:
            raise WeightFormatError(
                f"layer {layer.name!r}: kernel shape {kern.shape} does not match config {expect}"
            )
        if bias.shape != (layer.out_channels,):
            raise WeightFormatError(
                f"layer {layer.name!r}: bias length {bias.size} does not match "
                f"{layer.out_channels} output channels"
            )
        kernels[layer.name] = kern
        biases[layer.name] = bias
    return WeightStore(kernels, biases, provenance=f"loaded-from-file({path})")


def _vgg_block(block: int, convs: int, channels: int, pool_mode: str) -> list[LayerSpec]:
    layers = []
    for i in range(1, convs + 1):
        layers.append(conv(f"conv{block}-{i}", channels))
        layers.append(relu(f"relu{block}-{i}"))
    layers.append(pool(f"pool{block}", mode=pool_mode))
    return layers


def preset_config(name: str, pool_mode: str = "max", features: str = "post",
                  mean: tuple[float, float, float] | None = None) -> NetworkConfig:
    """Built-in architectures: "tinyvgg" (desk-scale fixture) and "vgg19"."""
    if name == "tinyvgg":
        layers = [
            conv("conv1-1", 8), relu("relu1-1"),
            conv("conv1-2", 8), relu("relu1-2"),
            pool("pool1", mode=pool_mode),
            conv("conv2-1", 16), relu("relu2-1"),
            conv("conv2-2", 16), relu("relu2-2"),
            pool("pool2", mode=pool_mode),
            conv("conv3-1", 32), relu("relu3-1"),
        ]
        default_mean = (0.0, 0.0, 0.0)
    elif name == "vgg19":
        layers = (
            _vgg_block(1, 2, 64, pool_mode)
            + _vgg_block(2, 2, 128, pool_mode)
            + _vgg_block(3, 4, 256, pool_mode)
            + _vgg_block(4, 4, 512, pool_mode)
            + _vgg_block(5, 4, 512, pool_mode)
        )
        default_mean = (123.68, 116.779, 103.939)
    else:
        raise ConfigurationError(f"unknown network preset {name!r}")
    return NetworkConfig(tuple(layers), input_channels=3,
                         mean=mean if mean is not None else default_mean,
                         features=features)
