"""Convolutional backbone with per-stage pooled feature vectors.

The network is EfficientNet-B4 as shipped by torchvision; its feature
trunk is a sequence of nine blocks whose output channel counts are
(48, 24, 32, 56, 112, 160, 272, 448, 1792). Each stage's activation map
is reduced to one vector per image by global average pooling, which is
what makes a per-stage Gaussian over channel-count-sized vectors
possible downstream.

Weights are always frozen; nothing here trains or fine-tunes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError
from torchvision.models import EfficientNet_B4_Weights, efficientnet_b4

from adnpca.featstore import STAGE_CHANNELS

from .errors import InvalidJob, MissingWeights, UnreadableImage

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

#: Seed used for the reproducible random-init backbone (weights="none").
RANDOM_INIT_SEED = 0


def resolve_device(hint: str) -> torch.device:
    """Map a device hint to something usable, falling back to cpu."""
    if hint.startswith("cuda") and not torch.cuda.is_available():
        return torch.device("cpu")
    return torch.device(hint)


def _build_network(weights: str) -> torch.nn.Module:
    if weights == "none":
        # random init, but reproducible and without touching global RNG state
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(RANDOM_INIT_SEED)
            return efficientnet_b4(weights=None)
    if weights == "imagenet":
        try:
            return efficientnet_b4(weights=EfficientNet_B4_Weights.IMAGENET1K_V1)
        except (OSError, RuntimeError, ValueError) as exc:
            raise MissingWeights(
                f"cannot load the pretrained checkpoint ({exc}); pass a local "
                "checkpoint path, or weights='none' for a random-init backbone"
            ) from exc
    # anything else is a filesystem path to a saved state dict
    path = Path(weights)
    if not path.is_file():
        raise MissingWeights(f"no checkpoint file at {path}")
    net = _build_network("none")
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
        net.load_state_dict(state)
    except (OSError, RuntimeError, ValueError, KeyError) as exc:
        raise MissingWeights(f"cannot load checkpoint {path}: {exc}") from exc
    return net


class StageFeatureExtractor:
    """Frozen backbone exposing globally pooled per-stage features.

    weights: "imagenet" (standard pretrained checkpoint), "none"
    (reproducible random init, sufficient for shape conformance), or a
    path to a saved state dict.
    """

    def __init__(self, weights: str = "imagenet", device: str = "cpu"):
        self.device = resolve_device(device)
        net = _build_network(weights)
        net.eval()
        net.requires_grad_(False)
        self.blocks = net.features.to(self.device)
        if len(self.blocks) != len(STAGE_CHANNELS):
            raise MissingWeights(
                f"backbone has {len(self.blocks)} stages, expected {len(STAGE_CHANNELS)}"
            )

    def stage_vectors(
        self, batch: torch.Tensor, stages: tuple[int, ...] | None = None
    ) -> dict[int, np.ndarray]:
        """Pooled features for ``batch`` (n, 3, h, w) at the requested stages.

        Returns {stage: float64 array of shape (n, STAGE_CHANNELS[stage])}.
        Only the blocks up to the deepest requested stage are evaluated.
        """
        wanted = tuple(range(len(self.blocks))) if stages is None else tuple(stages)
        if not wanted or any(not 0 <= s < len(self.blocks) for s in wanted):
            raise InvalidJob(f"stages must be within 0..{len(self.blocks) - 1}, got {wanted}")
        out: dict[int, np.ndarray] = {}
        x = batch.to(self.device)
        with torch.inference_mode():
            for stage, block in enumerate(self.blocks):
                x = block(x)
                if stage in wanted:
                    pooled = x.mean(dim=(2, 3))
                    out[stage] = pooled.cpu().numpy().astype(np.float64)
                if stage >= max(wanted):
                    break
        return out


def preprocess(image: Image.Image, image_size: int) -> torch.Tensor:
    """Resize, scale to [0,1], and normalize with the ImageNet statistics."""
    im = image.convert("RGB").resize((image_size, image_size), Image.BILINEAR)
    arr = np.asarray(im, dtype=np.float32) / 255.0
    arr = (arr - np.array(IMAGENET_MEAN, dtype=np.float32)) / np.array(
        IMAGENET_STD, dtype=np.float32
    )
    return torch.from_numpy(arr.transpose(2, 0, 1))


def load_image_tensor(path: Path | str, image_size: int) -> torch.Tensor:
    path = Path(path)
    try:
        with Image.open(path) as im:
            return preprocess(im, image_size)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise UnreadableImage(f"cannot decode {path}: {exc}") from exc
