"""Gram-matrix style transfer and texture synthesis at desk scale.

The package splits into small layers: ``tensor_core`` holds the convolution,
pooling and correlation primitives with their adjoints; ``network`` runs a
configurable VGG-like stack forward and backward; ``style_repr`` provides the
style/content statistics, losses and analytic gradients; ``objective``
assembles weighted multi-layer objectives; ``style_synth`` generates synthetic
Gram targets; ``optimizer`` minimizes in pixel space (L-BFGS or Adam);
``image_pipeline`` does image I/O and preprocessing; ``cli`` wires it all to
config-file driven commands.
"""

from .errors import (
    ConfigurationError,
    ImageFormatError,
    NonFiniteError,
    ShapeMismatchError,
    StylegramError,
    WeightFormatError,
)
from .network import (
    FeatureCache,
    LayerSpec,
    NetworkConfig,
    WeightStore,
    backward,
    forward,
    load_weights,
    preset_config,
    random_init,
    save_weights,
)
from .objective import ContentEntry, LayerPartition, Objective, StyleEntry, build_objective
from .optimizer import OptConfig, OptRun, grad_check, init_image, minimize
from .style_synth import GramStats, SparseGramSpec, gram_stats, one_hot_gram, random_sparse_gram

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContentEntry",
    "FeatureCache",
    "GramStats",
    "ImageFormatError",
    "LayerPartition",
    "LayerSpec",
    "NetworkConfig",
    "NonFiniteError",
    "Objective",
    "OptConfig",
    "OptRun",
    "ShapeMismatchError",
    "SparseGramSpec",
    "StyleEntry",
    "StylegramError",
    "WeightFormatError",
    "WeightStore",
    "backward",
    "build_objective",
    "forward",
    "grad_check",
    "gram_stats",
    "init_image",
    "load_weights",
    "minimize",
    "one_hot_gram",
    "preset_config",
    "random_init",
    "random_sparse_gram",
    "save_weights",
    "__version__",
]
