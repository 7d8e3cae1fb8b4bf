"""Job configuration: JSON documents describing transfer/texture/stats/check runs.

A job document holds every knob that matters (network, layer partition with
representation kinds and weights, content/style weights, initialization,
optimizer settings, paths); command-line flags only pick the command, the
config path, and may override the output path and the seed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import container
from . import network as net
from . import style_repr as sr
from .errors import ConfigurationError
from .objective import ContentEntry, LayerPartition, StyleEntry
from .optimizer import OptConfig
from .style_synth import SparseGramSpec, one_hot_gram, random_sparse_gram


def load_job(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        job = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(job, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    return job


def _section(job: dict, key: str, required: bool = False) -> dict:
    value = job.get(key)
    if value is None:
        if required:
            raise ConfigurationError(f"config is missing the {key!r} section")
        return {}
    if not isinstance(value, dict):
        raise ConfigurationError(f"config section {key!r} must be an object")
    return value


def build_network(job: dict) -> tuple[net.NetworkConfig, net.WeightStore]:
    section = _section(job, "network", required=True)
    preset = section.get("preset", "tinyvgg")
    mean = tuple(section["mean"]) if "mean" in section else None
    config = net.preset_config(
        preset,
        pool_mode=section.get("pooling", "max"),
        features=section.get("features", "post"),
        mean=mean,
    )
    has_weights = "weights" in section
    has_seed = "seed" in section
    if has_weights == has_seed:
        raise ConfigurationError(
            "network section needs exactly one of 'weights' (file path) or 'seed'"
        )
    if has_weights:
        weights = net.load_weights(config, section["weights"])
    else:
        weights = net.random_init(config, int(section["seed"]))
    return config, weights


def clamp_range(mean) -> tuple[float, float]:
    """Preprocessed dynamic range of 8-bit pixels under the given channel mean."""
    mean = np.asarray(mean, dtype=np.float64)
    return (float(-mean.max()), float(255.0 - mean.min()))


def _content_entries(job: dict, config: net.NetworkConfig) -> tuple[ContentEntry, ...]:
    section = _section(job, "content")
    entries = []
    for raw in section.get("layers", []):
        layer = raw.get("layer")
        if layer not in config.layer_names():
            raise ConfigurationError(f"content layer {layer!r} does not exist in the network")
        weight = raw.get("weight")
        entries.append(ContentEntry(layer, None if weight is None else float(weight)))
    return tuple(entries)


def _style_entries(job: dict, config: net.NetworkConfig) -> tuple[StyleEntry, ...]:
    section = _section(job, "style")
    entries = []
    for raw in section.get("layers", []):
        layer = raw.get("layer")
        if layer not in config.layer_names():
            raise ConfigurationError(f"style layer {layer!r} does not exist in the network")
        kind = raw.get("kind", sr.GLOBAL)
        weight = raw.get("weight")
        entries.append(StyleEntry(layer, None if weight is None else float(weight),
                                  kind, int(raw.get("s", 0))))
    return tuple(entries)


def build_partition(job: dict, config: net.NetworkConfig) -> LayerPartition:
    return LayerPartition(_content_entries(job, config), _style_entries(job, config))


def _layer_filters(config: net.NetworkConfig, layer: str) -> int:
    for spec in config.conv_layers():
        if spec.name == layer:
            return spec.out_channels
    raise ConfigurationError(f"layer {layer!r} is not a conv layer")


def _make_target(raw: dict, n: int, kind: str):
    ttype = raw.get("type")
    if ttype == "one_hot":
        return one_hot_gram(n, int(raw.get("i", 0)), int(raw.get("j", 0)),
                            float(raw["magnitude"]))
    if ttype == "sparse":
        spec = SparseGramSpec(n=n, sparsity=float(raw["sparsity"]),
                              sigma=float(raw["sigma"]), seed=int(raw.get("seed", 0)))
        return random_sparse_gram(spec)
    if ttype == "file":
        return container.load_array(raw["path"])
    raise ConfigurationError(f"unknown style target type {ttype!r}")


def _derived_seed(seed: int, iteration: int) -> int:
    return (int(seed) * 1_000_003 + iteration) % (2**63)


def build_style_targets(job: dict, config: net.NetworkConfig, partition: LayerPartition):
    """Synthetic targets keyed by style entry index, plus an optional provider hook.

    Entries without a "target" object fall back to statistics of the style
    image (resolved later by build_objective). With "regenerate_each_iteration"
    every synthetic target is redrawn per iteration: one-hot targets get a
    fresh random position, sparse targets a fresh matrix.
    """
    section = _section(job, "style")
    raw_layers = section.get("layers", [])
    targets: dict[int, np.ndarray] = {}
    synthetic: dict[int, tuple[str, dict, int]] = {}
    for index, raw in enumerate(raw_layers):
        raw_target = raw.get("target")
        if raw_target is None:
            continue
        entry = partition.style[index]
        if entry.kind != sr.GLOBAL:
            raise ConfigurationError(
                f"synthetic targets are Gram matrices; style entry {index} has kind {entry.kind!r}"
            )
        n = _layer_filters(config, entry.layer)
        targets[index] = _make_target(raw_target, n, entry.kind)
        if raw_target.get("type") in ("one_hot", "sparse"):
            synthetic[index] = (raw_target["type"], raw_target, n)

    provider = None
    if section.get("regenerate_each_iteration", False):
        if not synthetic:
            raise ConfigurationError(
                "regenerate_each_iteration needs at least one one_hot or sparse target"
            )

        def provider(iteration: int) -> dict[int, np.ndarray]:
            fresh = {}
            for index, (ttype, raw_target, n) in synthetic.items():
                seed = _derived_seed(int(raw_target.get("seed", 0)), iteration)
                if ttype == "one_hot":
                    rng = np.random.default_rng(seed)
                    i, j = (int(v) for v in rng.integers(0, n, size=2))
                    fresh[index] = one_hot_gram(n, i, j, float(raw_target["magnitude"]))
                else:
                    spec = SparseGramSpec(n=n, sparsity=float(raw_target["sparsity"]),
                                          sigma=float(raw_target["sigma"]), seed=seed)
                    fresh[index] = random_sparse_gram(spec)
            return fresh

    return targets, provider


def build_opt_config(job: dict, mean) -> OptConfig:
    section = _section(job, "optimizer")
    clamp = section.get("clamp", "auto")
    if clamp == "auto":
        clamp = clamp_range(mean)
    elif clamp is not None:
        clamp = (float(clamp[0]), float(clamp[1]))
    return OptConfig(
        max_iterations=int(section.get("max_iterations", 500)),
        method=section.get("method", "lbfgs"),
        memory=int(section.get("memory", 10)),
        c1=float(section.get("c1", 1e-4)),
        c2=float(section.get("c2", 0.9)),
        adam_step=float(section.get("adam_step", 1.0)),
        adam_beta1=float(section.get("adam_beta1", 0.9)),
        adam_beta2=float(section.get("adam_beta2", 0.999)),
        adam_eps=float(section.get("adam_eps", 1e-8)),
        clamp=clamp,
        tolerance=float(section.get("tolerance", 1e-7)),
        trace_every=int(section.get("trace_every", 1)),
    )


def init_settings(job: dict, seed_override: int | None) -> tuple[str, int]:
    section = _section(job, "init")
    mode = section.get("mode", "noise")
    seed = int(section.get("seed", job.get("seed", 0)))
    if seed_override is not None:
        seed = seed_override
    return mode, seed


def output_paths(job: dict, output_override: str | None) -> tuple[str, str | None]:
    section = _section(job, "output", required=True)
    image = output_override if output_override is not None else section.get("image")
    if image is None:
        raise ConfigurationError("output section needs an 'image' path")
    return image, section.get("trace")
