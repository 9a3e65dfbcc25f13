"""Frequency-aware few-shot image generation with Haar wavelet skip
connections."""

__version__ = "0.1.0"

from .wavelet import (  # noqa: F401
    FrequencyBands,
    haar_decompose,
    haar_kernels,
    haar_reconstruct,
    partial_reconstruct,
)
from .fusion import FusionPlan, fuse_images, fuse_local, make_fusion_plan, similarity_map  # noqa: F401
from .generator import (  # noqa: F401
    Generator,
    GeneratorConfig,
    aggregate_bands_base,
    aggregate_bands_mean,
)
from .discriminator import Discriminator, DiscriminatorConfig  # noqa: F401
from .losses import (  # noqa: F401
    LossWeights,
    classification_loss,
    frequency_l1,
    hinge_d,
    hinge_g,
    local_reconstruction,
    total_d,
    total_g,
)
