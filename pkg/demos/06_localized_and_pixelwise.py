"""Location-bound style: pixelwise products and decay-weighted windows.

The most rigid style representation keeps a Gram value at every location:
G_ij(x, y) = F_i(x,y) F_j(x,y). Matching it amounts to painting the style
image over the content (the constraints pin every position). Growing the
window radius s softens this: correlations are then collected over a
(2s+1)^2 neighborhood with weights 1/(1 + dx^2 + dy^2), trading rigidity
for locality. s = 0 with unit weight degenerates to the pixelwise form
exactly.
"""

import numpy as np

from stylegram import image_pipeline as ip
from stylegram import network as net
from stylegram import style_repr as sr
from stylegram.objective import ContentEntry, LayerPartition, StyleEntry, build_objective
from stylegram.optimizer import OptConfig, init_image, minimize

from _util import ASSETS, OUT_DIR

config = net.preset_config("tinyvgg")
weights = net.random_init(config, seed=0)
content = ip.preprocess(ip.load_image(ASSETS / "scene48.ppm"), config.mean)
style = ip.preprocess(ip.load_image(ASSETS / "waves48.ppm"), config.mean)

F = net.forward(config, weights, style, ["conv2-1"]).features["conv2-1"]
print(f"pixelwise gram field of conv2-1: {sr.pixelwise_gram(F).shape}")
print(f"localized(s=0) equals pixelwise bitwise: "
      f"{np.array_equal(sr.localized_gram(F, 0), sr.pixelwise_gram(F))}")
print(f"decay weights: w(0,0)={sr.decay_weight(0, 0)}, w(1,0)={sr.decay_weight(1, 0)}, "
      f"w(1,1)={sr.decay_weight(1, 1):.4f}")

opt = OptConfig(max_iterations=60, clamp=(0.0, 255.0))
for tag, kind, s in (("pixelwise", sr.PIXELWISE, 0), ("localized_s2", sr.LOCALIZED, 2)):
    partition = LayerPartition(
        content=(ContentEntry("conv1-1"),),
        style=(StyleEntry("conv2-1", kind=kind, s=s),),
    )
    objective = build_objective(config, weights, partition, content_image=content,
                                style_image=style, alpha=1.0, beta=50000.0)
    run = minimize(objective, init_image("content", content), opt)
    out = OUT_DIR / f"{tag}.png"
    ip.save_image(out, ip.deprocess(run.image, config.mean))
    print(f"{tag:12s} loss {run.trace[0].loss:.4g} -> {run.trace[-1].loss:.4g}; wrote {out}")
