"""Image feature extraction and synthetic-anomaly generation.

Companion package to ``adnpca``: turns image folders into the FEATMAT1
feature files and dataset manifests that package consumes, using a frozen
EfficientNet-B4 backbone with per-stage global average pooling, and
generates Perlin-masked foreign-texture anomaly images paired with the
normals they were built from.
"""

from .backbone import (
    IMAGENET_MEAN,
    IMAGENET_STD,
    StageFeatureExtractor,
    load_image_tensor,
    preprocess,
    resolve_device,
)
from .dataset import IMAGE_EXTENSIONS, list_categories, list_images, split_dir
from .errors import ExtractorError, InvalidJob, MissingWeights, UnreadableImage
from .extract import (
    ALL_STAGES,
    ExtractionJob,
    extract_features,
    feature_filename,
    write_dataset_manifest,
)
from .synth import (
    MASK_AREA,
    SynthesisJob,
    anomaly_mask,
    blend,
    load_pairing,
    perlin_noise,
    synthesize_anomalies,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_STAGES",
    "ExtractionJob",
    "ExtractorError",
    "IMAGENET_MEAN",
    "IMAGENET_STD",
    "IMAGE_EXTENSIONS",
    "InvalidJob",
    "MASK_AREA",
    "MissingWeights",
    "StageFeatureExtractor",
    "SynthesisJob",
    "UnreadableImage",
    "anomaly_mask",
    "blend",
    "extract_features",
    "feature_filename",
    "list_categories",
    "list_images",
    "load_image_tensor",
    "load_pairing",
    "perlin_noise",
    "preprocess",
    "resolve_device",
    "split_dir",
    "synthesize_anomalies",
    "write_dataset_manifest",
]
