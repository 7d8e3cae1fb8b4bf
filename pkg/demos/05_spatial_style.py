"""Spatial style: per-filter autocorrelation planes instead of Gram entries.

The Gram matrix deliberately throws away all layout. Replacing each G_ij
inner product with the full autocorrelation plane of each filter keeps a
soft imprint of where features sit: a plane has size (2X-1) x (2Y-1), the
center holds the filter's energy, and off-center entries describe how the
filter co-occurs with itself under displacement. Reconstruction from noise
then recovers a rough scene arrangement, not just texture. Both images must
share dimensions, since the representation is displacement-bound.

Scaling is the inverse of the global Gram: cheap where feature maps are
small (upper layers) and expensive where they are huge (bottom layers), so
this demo keeps the spatial constraints on the upper layers.
"""

import numpy as np

from stylegram import image_pipeline as ip
from stylegram import network as net
from stylegram import style_repr as sr
from stylegram.objective import LayerPartition, StyleEntry, build_objective
from stylegram.optimizer import OptConfig, init_image, minimize

from _util import ASSETS, OUT_DIR

SIZE = 32

config = net.preset_config("tinyvgg")
weights = net.random_init(config, seed=0)
scene = ip.preprocess(
    ip.resize_bilinear(ip.load_image(ASSETS / "scene48.ppm"), SIZE, SIZE), config.mean)

features = net.forward(config, weights, scene, ["conv2-1"]).features["conv2-1"]
planes = sr.spatial_gram(features)
print(f"conv2-1 features {features.shape} -> autocorrelation planes {planes.shape}")
print(f"plane center equals the filter energy: "
      f"{np.allclose(planes[:, planes.shape[1] // 2, planes.shape[2] // 2], np.diag(sr.gram(features)))}")

opt = OptConfig(max_iterations=80, clamp=(0.0, 255.0))
for tag, kind in (("global", sr.GLOBAL), ("spatial", sr.SPATIAL)):
    partition = LayerPartition(style=(
        StyleEntry("conv2-1", kind=kind), StyleEntry("conv3-1", kind=kind),
    ))
    objective = build_objective(config, weights, partition, style_image=scene)
    start = init_image("noise", np.zeros_like(scene), seed=2, noise_range=(0.0, 255.0))
    run = minimize(objective, start, opt)
    out = OUT_DIR / f"reconstruct_{tag}.png"
    ip.save_image(out, ip.deprocess(run.image, config.mean))
    print(f"{tag:8s} reconstruction loss {run.trace[0].loss:.3g} -> "
          f"{run.trace[-1].loss:.3g}; wrote {out}")
