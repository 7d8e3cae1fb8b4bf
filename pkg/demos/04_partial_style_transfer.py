"""Partial style transfer: move bottom layers into the content pool.

Bottom conv layers mostly carry colors and low-level structure. Enforcing
them as content (instead of merely lowering the style weight) keeps the
original palette while the upper style layers are still free to reshape
mid- and high-level appearance. Compare the three outputs: full style,
weak style, and the partial partition.
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
opt = OptConfig(max_iterations=60, clamp=(0.0, 255.0))


def run_case(tag, partition, beta):
    objective = build_objective(config, weights, partition, content_image=content,
                                style_image=style, alpha=1.0, beta=beta)
    run = minimize(objective, init_image("content", content), opt)
    out = OUT_DIR / f"partial_{tag}.png"
    ip.save_image(out, ip.deprocess(run.image, config.mean))
    print(f"{tag:12s} final loss {run.trace[-1].loss:10.4g}; wrote {out}")


every_layer = (
    StyleEntry("conv1-1", kind=sr.GLOBAL),
    StyleEntry("conv2-1", kind=sr.GLOBAL),
    StyleEntry("conv3-1", kind=sr.GLOBAL),
)
run_case("full", LayerPartition(content=(ContentEntry("conv2-2"),), style=every_layer),
         beta=5000.0)
run_case("low_weight", LayerPartition(content=(ContentEntry("conv2-2"),), style=every_layer),
         beta=200.0)
# bottom layers constrained as content; only the top layer carries style
run_case("partial", LayerPartition(
    content=(ContentEntry("conv1-1"), ContentEntry("conv2-1"), ContentEntry("conv2-2")),
    style=(StyleEntry("conv3-1", kind=sr.GLOBAL),),
), beta=5000.0)
