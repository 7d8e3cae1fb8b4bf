"""Classic style transfer, and why the starting point matters.

The objective is wildly non-convex, so gradient descent lands in whichever
basin the initialization put it in. Starting from the content image keeps
the scene; starting from noise reconstructs everything from style statistics
alone; starting from the style image tends to leak the artwork's layout into
the result. This script runs the same objective from all three starts and
reports where the content term ends up in each case.
"""

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

partition = LayerPartition(
    content=(ContentEntry("conv2-1"),),
    style=(
        StyleEntry("conv1-1", kind=sr.GLOBAL),
        StyleEntry("conv2-1", kind=sr.GLOBAL),
        StyleEntry("conv3-1", kind=sr.GLOBAL),
    ),
)
objective = build_objective(config, weights, partition, content_image=content,
                            style_image=style, alpha=1.0, beta=2000.0)
opt = OptConfig(max_iterations=60, clamp=(0.0, 255.0))

for mode in ("content", "noise", "style"):
    start = init_image(mode, content, style, seed=11, noise_range=(0.0, 255.0))
    run = minimize(objective, start, opt)
    content_term = sum(t.loss for t in run.trace[-1].breakdown if t.pool == "content")
    out = OUT_DIR / f"transfer_from_{mode}.png"
    ip.save_image(out, ip.deprocess(run.image, config.mean))
    print(f"init={mode:7s} total {run.trace[-1].loss:10.4g} "
          f"content term {content_term:10.4g}; wrote {out}")
