"""Command-line front end: transfer, texture, gram-stats and gradcheck commands.

Every command takes a JSON config file; flags only override the output image
path and the initialization seed. Exit codes: 0 success, 1 runtime failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from . import container
from . import image_pipeline as ip
from . import network as net
from . import style_repr as sr
from .errors import (
    ConfigurationError,
    ImageFormatError,
    ShapeMismatchError,
    StylegramError,
    WeightFormatError,
)
from .objective import build_objective
from .optimizer import OptConfig, grad_check, init_image, minimize
from .style_synth import format_stats_table, gram_stats


def write_trace_csv(path, trace) -> None:
    """Header row, then one row per recorded iteration; one column per entry."""
    header = ["iteration", "total"] + [term.name for term in trace[0].breakdown]
    lines = [",".join(header)]
    for point in trace:
        row = [str(point.iteration), repr(point.loss)]
        row += [repr(term.contribution) for term in point.breakdown]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _prepare_output(path) -> None:
    parent = Path(path).parent
    if parent and not parent.exists():
        parent.mkdir(parents=True, exist_ok=True)


def _load_preprocessed(path, mean) -> np.ndarray:
    return ip.preprocess(ip.load_image(path), mean)


def _run_and_save(objective, start, opt_config: OptConfig, mean, image_path, trace_path):
    run = minimize(objective, start, opt_config)
    _prepare_output(image_path)
    ip.save_image(image_path, ip.deprocess(run.image, mean))
    if trace_path:
        _prepare_output(trace_path)
        write_trace_csv(trace_path, run.trace)
    print(f"{run.reason} after {run.iterations} iterations "
          f"({run.evaluations} evaluations), final loss {run.trace[-1].loss:.6g}")
    print(f"wrote {image_path}" + (f" and {trace_path}" if trace_path else ""))
    return 0


def cmd_transfer(args) -> int:
    job = cfg.load_job(args.config)
    network, weights = cfg.build_network(job)
    partition = cfg.build_partition(job, network)
    if not partition.content:
        raise ConfigurationError("transfer needs at least one content layer")

    content_section = job.get("content", {})
    if "image" not in content_section:
        raise ConfigurationError("transfer needs a content image")
    content = _load_preprocessed(content_section["image"], network.mean)

    style_section = job.get("style", {})
    style = None
    if "image" in style_section:
        raw_style = ip.load_image(style_section["image"])
        if style_section.get("resize_to_content", False):
            raw_style = ip.resize_bilinear(raw_style, content.shape[1], content.shape[2])
        style = ip.preprocess(raw_style, network.mean)

    targets, provider = cfg.build_style_targets(job, network, partition)
    objective = build_objective(
        network, weights, partition, content_image=content, style_image=style,
        style_targets=targets, alpha=float(job.get("alpha", 1.0)),
        beta=float(job.get("beta", 1.0)), target_provider=provider,
    )

    mode, seed = cfg.init_settings(job, args.seed)
    start = init_image(mode, content, style, seed=seed,
                       noise_range=cfg.clamp_range(network.mean))
    opt_config = cfg.build_opt_config(job, network.mean)
    image_path, trace_path = cfg.output_paths(job, args.output)
    return _run_and_save(objective, start, opt_config, network.mean, image_path, trace_path)


def cmd_texture(args) -> int:
    job = cfg.load_job(args.config)
    network, weights = cfg.build_network(job)
    partition = cfg.build_partition(job, network)
    if partition.content:
        raise ConfigurationError("texture synthesis takes no content entries")
    if not partition.style:
        raise ConfigurationError("texture synthesis needs style entries")

    targets, provider = cfg.build_style_targets(job, network, partition)
    missing = [i for i in range(len(partition.style)) if i not in targets]
    if missing:
        raise ConfigurationError(
            f"texture style entries {missing} have no synthetic target; "
            "give each entry a 'target' object"
        )

    size = job.get("size")
    if not size or len(size) != 2:
        raise ConfigurationError("texture needs a canvas 'size': [height, width]")
    canvas = np.zeros((network.input_channels, int(size[0]), int(size[1])))

    objective = build_objective(network, weights, partition, style_targets=targets,
                                beta=float(job.get("beta", 1.0)), target_provider=provider)

    mode, seed = cfg.init_settings(job, args.seed)
    if mode != "noise":
        raise ConfigurationError("texture synthesis starts from noise; set init mode 'noise'")
    start = init_image("noise", canvas, seed=seed, noise_range=cfg.clamp_range(network.mean))
    opt_config = cfg.build_opt_config(job, network.mean)
    image_path, trace_path = cfg.output_paths(job, args.output)
    return _run_and_save(objective, start, opt_config, network.mean, image_path, trace_path)


def cmd_gram_stats(args) -> int:
    job = cfg.load_job(args.config)
    network, weights = cfg.build_network(job)
    image_path = job.get("image")
    if not image_path:
        raise ConfigurationError("gram-stats needs an 'image' path")
    layers = job.get("layers") or [spec.name for spec in network.conv_layers()]
    for layer in layers:
        if layer not in network.layer_names():
            raise ConfigurationError(f"layer {layer!r} does not exist in the network")
    bins = int(job.get("bins", 20))
    tau = float(job.get("tau", 1e-12))
    out_dir = Path(args.output if args.output is not None else job.get("output", "."))
    out_dir.mkdir(parents=True, exist_ok=True)

    image = _load_preprocessed(image_path, network.mean)
    cache = net.forward(network, weights, image, layers)
    for layer in layers:
        g = sr.gram(cache.features[layer])
        stats = gram_stats(g, bins=bins, tau=tau, layer=layer)
        (out_dir / f"{layer}.txt").write_text(format_stats_table(stats))
        container.save_array(out_dir / f"{layer}.gfg", g)
        print(f"{layer}: n={g.shape[0]} zero_fraction={stats.zero_fraction:.4f} "
              f"max|G|={stats.max_abs:.6g}")
    print(f"wrote per-layer tables to {out_dir}")
    return 0


class _QuadraticProbe:
    """||x - c||^2 with exact gradient; sanity floor for the checker itself."""

    target_provider = None

    def __init__(self, center):
        self.center = center

    def eval(self, x):
        d = x - self.center
        return float(np.sum(d * d)), 2.0 * d, []


class _CorruptedGradient:
    """Test hook: scales the analytic gradient so the check must fail."""

    target_provider = None

    def __init__(self, inner):
        self.inner = inner

    def eval(self, x):
        loss, grad, breakdown = self.inner.eval(x)
        return loss, 1.5 * grad, breakdown


def _gradcheck_kind(kind: str, network, weights, layer, rng_images) -> object:
    from .objective import ContentEntry, LayerPartition, StyleEntry

    image_a, image_b = rng_images
    if kind == "quadratic":
        # unit-scale displacement keeps finite-difference roundoff near machine level
        delta = image_b - image_a
        delta = delta / max(float(np.abs(delta).max()), 1.0)
        return _QuadraticProbe(image_a + delta)
    if kind == "content":
        partition = LayerPartition(content=(ContentEntry(layer),))
        return build_objective(network, weights, partition, content_image=image_b)
    if kind == sr.GLOBAL:
        partition = LayerPartition(style=(StyleEntry(layer, kind=sr.GLOBAL),))
    elif kind == sr.SPATIAL:
        partition = LayerPartition(style=(StyleEntry(layer, kind=sr.SPATIAL),))
    elif kind == sr.PIXELWISE:
        partition = LayerPartition(style=(StyleEntry(layer, kind=sr.PIXELWISE),))
    elif kind.startswith("localized"):
        s = int(kind.split(":", 1)[1]) if ":" in kind else 0
        partition = LayerPartition(style=(StyleEntry(layer, kind=sr.LOCALIZED, s=s),))
    else:
        raise ConfigurationError(f"unknown gradcheck kind {kind!r}")
    return build_objective(network, weights, partition, style_image=image_b)


DEFAULT_GRADCHECK_KINDS = (
    "content", "global", "spatial", "pixelwise", "localized:0", "localized:1", "localized:2",
)
GRADCHECK_THRESHOLD = 1e-4


def cmd_gradcheck(args) -> int:
    job = cfg.load_job(args.config)
    network, weights = cfg.build_network(job)
    size = job.get("size", [16, 16])
    eps = float(job.get("eps", 1e-4))
    samples = int(job.get("samples", 10))
    seed = args.seed if args.seed is not None else int(job.get("seed", 0))
    kinds = job.get("kinds", list(DEFAULT_GRADCHECK_KINDS))
    layer = job.get("layer", "conv2-1")
    if layer not in network.layer_names():
        raise ConfigurationError(f"layer {layer!r} does not exist in the network")

    lo, hi = cfg.clamp_range(network.mean)
    rng = np.random.default_rng(seed)
    shape = (network.input_channels, int(size[0]), int(size[1]))
    probe = rng.uniform(lo, hi, size=shape)
    target_source = rng.uniform(lo, hi, size=shape)

    failed = False
    for kind in kinds:
        objective = _gradcheck_kind(kind, network, weights, layer, (probe, target_source))
        if job.get("corrupt_gradient", False):
            objective = _CorruptedGradient(objective)
        err = grad_check(objective, probe, eps=eps, samples=samples, seed=seed)
        ok = err < GRADCHECK_THRESHOLD
        failed = failed or not ok
        print(f"{kind}: max relative error {err:.3e} {'ok' if ok else 'FAIL'}")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stylegram",
        description="Gram-matrix style transfer and texture synthesis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, doc in (
        ("transfer", cmd_transfer, "repaint a content image with a style"),
        ("texture", cmd_texture, "synthesize a texture from synthetic Gram targets"),
        ("gram-stats", cmd_gram_stats, "per-layer Gram histograms of an image"),
        ("gradcheck", cmd_gradcheck, "verify analytic gradients against finite differences"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("config", help="path to the JSON job config")
        p.add_argument("--output", help="override the output path")
        p.add_argument("--seed", type=int, help="override the initialization seed")
        p.set_defaults(func=func)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, WeightFormatError, ImageFormatError, ShapeMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StylegramError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
