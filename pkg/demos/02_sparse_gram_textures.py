"""Textures from random sparse Gram matrices.

Instead of copying a painting's Gram matrix, mimic just two of its gross
properties: how sparse its entries are and how large they run. A matrix of
|Gaussian| magnitudes under a random zero-one mask, symmetrized, is already
enough to drive interesting textures. Denser masks give busier images;
targeting several layers at once layers the scales on top of each other.
"""

import numpy as np

from stylegram import image_pipeline as ip
from stylegram import network as net
from stylegram import style_repr as sr
from stylegram.objective import LayerPartition, StyleEntry, build_objective
from stylegram.optimizer import OptConfig, init_image, minimize
from stylegram.style_synth import SparseGramSpec, random_sparse_gram

from _util import OUT_DIR

SIZE = 48

config = net.preset_config("tinyvgg")
weights = net.random_init(config, seed=0)
filters = {spec.name: spec.out_channels for spec in config.conv_layers()}


def synthesize(tag, layer_specs):
    entries = tuple(StyleEntry(layer, kind=sr.GLOBAL) for layer, _ in layer_specs)
    targets = {
        index: random_sparse_gram(
            SparseGramSpec(n=filters[layer], sparsity=sparsity, sigma=40.0, seed=7 + index))
        for index, (layer, sparsity) in enumerate(layer_specs)
    }
    objective = build_objective(config, weights, LayerPartition(style=entries),
                                style_targets=targets)
    start = init_image("noise", np.zeros((3, SIZE, SIZE)), seed=1, noise_range=(0.0, 255.0))
    run = minimize(objective, start, OptConfig(max_iterations=150, clamp=(0.0, 255.0)))
    out = OUT_DIR / f"sparse_{tag}.png"
    ip.save_image(out, ip.deprocess(run.image, config.mean))
    print(f"{tag}: loss {run.trace[0].loss:.3g} -> {run.trace[-1].loss:.3g} "
          f"({run.iterations} iterations); wrote {out}")


# single layer, increasingly dense targets
synthesize("conv2_sparse90", [("conv2-1", 0.9)])
synthesize("conv2_sparse50", [("conv2-1", 0.5)])

# multiple layers at once
synthesize("conv1_conv2", [("conv1-1", 0.9), ("conv2-1", 0.9)])
synthesize("conv2_conv3", [("conv2-1", 0.9), ("conv3-1", 0.8)])
