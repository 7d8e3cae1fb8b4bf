"""Textures from a single Gram entry.

Drop every style constraint except one matrix cell: pick a layer, point at
one (i, j) filter pair, give it a magnitude, and descend from noise. Each
cell behaves like a basis direction of the style space; complexity grows
with the layer the target lives at.
"""

import numpy as np

from stylegram import image_pipeline as ip
from stylegram import network as net
from stylegram import style_repr as sr
from stylegram.objective import LayerPartition, StyleEntry, build_objective
from stylegram.optimizer import OptConfig, init_image, minimize
from stylegram.style_synth import one_hot_gram

from _util import OUT_DIR

SIZE = 48

config = net.preset_config("tinyvgg")
weights = net.random_init(config, seed=0)
filters = {spec.name: spec.out_channels for spec in config.conv_layers()}

for layer, (i, j) in [("conv1-1", (1, 5)), ("conv2-1", (3, 7)), ("conv3-1", (4, 20))]:
    n = filters[layer]
    target = one_hot_gram(n, i, j, 64.0)
    partition = LayerPartition(style=(StyleEntry(layer, kind=sr.GLOBAL),))
    objective = build_objective(config, weights, partition, style_targets={0: target})

    start = init_image("noise", np.zeros((3, SIZE, SIZE)), seed=5, noise_range=(0.0, 255.0))
    run = minimize(objective, start,
                   OptConfig(max_iterations=150, clamp=(0.0, 255.0)))

    out = OUT_DIR / f"one_hot_{layer}.png"
    ip.save_image(out, ip.deprocess(run.image, config.mean))
    first, last = run.trace[0].loss, run.trace[-1].loss
    print(f"{layer} cell ({i},{j}): loss {first:.3g} -> {last:.3g} "
          f"in {run.iterations} iterations ({run.reason}); wrote {out}")
