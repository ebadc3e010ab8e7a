from __future__ import annotations

import numpy as np
import pytest
import torch

from adnpca.featstore import STAGE_CHANNELS

from adnpca_extractor.backbone import (
    IMAGENET_MEAN,
    IMAGENET_STD,
    StageFeatureExtractor,
    load_image_tensor,
    resolve_device,
)
import adnpca_extractor.backbone as backbone_mod
from adnpca_extractor.errors import InvalidJob, MissingWeights, UnreadableImage

from imghelp import IMAGE_SIZE


def _batch(n=2, size=IMAGE_SIZE, seed=0):
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(n, 3, size, size, generator=gen)


def test_stage_vectors_match_declared_channels(backbone):
    out = backbone.stage_vectors(_batch(n=2))
    assert sorted(out) == list(range(9))
    for stage, mat in out.items():
        assert mat.shape == (2, STAGE_CHANNELS[stage])
        assert mat.dtype == np.float64
        assert np.isfinite(mat).all()


def test_stage_subset_only_evaluates_requested(backbone):
    out = backbone.stage_vectors(_batch(), stages=(3, 8))
    assert sorted(out) == [3, 8]
    assert out[3].shape[1] == 56
    assert out[8].shape[1] == 1792


def test_invalid_stage_rejected(backbone):
    with pytest.raises(InvalidJob):
        backbone.stage_vectors(_batch(), stages=(9,))
    with pytest.raises(InvalidJob):
        backbone.stage_vectors(_batch(), stages=())


def test_inference_is_deterministic(backbone):
    x = _batch(seed=5)
    a = backbone.stage_vectors(x, stages=(0, 4))
    b = backbone.stage_vectors(x, stages=(0, 4))
    for stage in a:
        np.testing.assert_array_equal(a[stage], b[stage])


def test_random_init_is_reproducible(backbone):
    # two separately constructed weightless backbones agree exactly
    other = StageFeatureExtractor(weights="none", device="cpu")
    x = _batch(seed=7)
    a = backbone.stage_vectors(x, stages=(2,))
    b = other.stage_vectors(x, stages=(2,))
    np.testing.assert_array_equal(a[2], b[2])


def test_checkpoint_round_trip(backbone, tmp_path):
    ckpt = tmp_path / "weights.pt"
    net_state = {}
    # rebuild the full network to capture a loadable state dict
    import torchvision

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(backbone_mod.RANDOM_INIT_SEED)
        net = torchvision.models.efficientnet_b4(weights=None)
    net_state = net.state_dict()
    torch.save(net_state, ckpt)

    loaded = StageFeatureExtractor(weights=str(ckpt), device="cpu")
    x = _batch(seed=3)
    np.testing.assert_array_equal(
        backbone.stage_vectors(x, stages=(1,))[1],
        loaded.stage_vectors(x, stages=(1,))[1],
    )


def test_missing_checkpoint_file(tmp_path):
    with pytest.raises(MissingWeights, match="no checkpoint file"):
        StageFeatureExtractor(weights=str(tmp_path / "absent.pt"))


def test_pretrained_download_failure_maps_to_missing_weights(monkeypatch):
    def boom(weights=None):
        raise OSError("network unreachable")

    monkeypatch.setattr(backbone_mod, "efficientnet_b4", boom)
    with pytest.raises(MissingWeights, match="pretrained checkpoint"):
        StageFeatureExtractor(weights="imagenet")


def test_device_hint_falls_back_to_cpu():
    if torch.cuda.is_available():
        pytest.skip("cuda present; fallback path not reachable")
    assert resolve_device("cuda").type == "cpu"
    assert resolve_device("cpu").type == "cpu"


def test_load_image_tensor_shape_and_normalization(tmp_path):
    from PIL import Image

    arr = np.full((40, 30, 3), 128, dtype=np.uint8)
    path = tmp_path / "gray.png"
    Image.fromarray(arr).save(path)

    t = load_image_tensor(path, image_size=32)
    assert t.shape == (3, 32, 32)
    assert t.dtype == torch.float32
    for c in range(3):
        want = (128.0 / 255.0 - IMAGENET_MEAN[c]) / IMAGENET_STD[c]
        assert abs(float(t[c].mean()) - want) < 1e-5


def test_unreadable_image(tmp_path):
    bad = tmp_path / "broken.png"
    bad.write_bytes(b"this is not a png")
    with pytest.raises(UnreadableImage, match="broken.png"):
        load_image_tensor(bad, image_size=32)
