"""The five candidate backbones, loaded frozen with their classifier heads removed.

squeezenet and shufflenetv2 come from torchvision (keras.applications does
not ship them); mobilenetv2, vgg16 and resnet50v2 come from Keras.  Each
loader returns a callable mapping a uint8 NHWC batch to (N, dim) float32
feature vectors: published per-model preprocessing, frozen forward pass to
the final feature maps, then global max pooling over the spatial axes.
Frameworks are imported lazily so exporting with one backbone does not
require the other runtime.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class BackboneInfo:
    name: str
    expected_dim: int
    framework: str  # "torchvision" | "keras"
    weights_id: str  # model-zoo identifier recorded in the sidecar
    preprocessing: str  # human-readable description recorded in the sidecar


BACKBONE_INFO: dict[str, BackboneInfo] = {
    "squeezenet": BackboneInfo(
        "squeezenet", 512, "torchvision", "SqueezeNet1_1_Weights.IMAGENET1K_V1",
        "scale to [0,1], normalize mean (0.485,0.456,0.406) std (0.229,0.224,0.225)",
    ),
    "mobilenetv2": BackboneInfo(
        "mobilenetv2", 1280, "keras", "keras.applications.MobileNetV2 imagenet",
        "x / 127.5 - 1",
    ),
    "shufflenetv2": BackboneInfo(
        "shufflenetv2", 1024, "torchvision", "ShuffleNet_V2_X1_0_Weights.IMAGENET1K_V1",
        "scale to [0,1], normalize mean (0.485,0.456,0.406) std (0.229,0.224,0.225)",
    ),
    "vgg16": BackboneInfo(
        "vgg16", 512, "keras", "keras.applications.VGG16 imagenet",
        "caffe-style: RGB->BGR, subtract ImageNet channel means",
    ),
    "resnet50v2": BackboneInfo(
        "resnet50v2", 2048, "keras", "keras.applications.ResNet50V2 imagenet",
        "x / 127.5 - 1",
    ),
}

SUPPORTED = tuple(sorted(BACKBONE_INFO))


class BackboneError(Exception):
    """Unknown backbone or backbone runtime failure."""


@dataclass
class LoadedBackbone:
    info: BackboneInfo
    weights: str  # "imagenet" | "none"
    run: Callable[[np.ndarray], np.ndarray]  # uint8 NHWC -> float32 (N, dim)


def _torch_normalize(batch: np.ndarray) -> "object":
    import torch

    x = torch.from_numpy(batch.astype(np.float32) / 255.0).permute(0, 3, 1, 2)
    mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
    std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)
    return (x - mean) / std


def _load_torchvision(name: str, weights: str, seed: int) -> LoadedBackbone:
    import torch
    from torchvision import models

    torch.manual_seed(seed)
    if name == "squeezenet":
        model = models.squeezenet1_1(
            weights=models.SqueezeNet1_1_Weights.IMAGENET1K_V1 if weights == "imagenet" else None
        )

        def features(x):
            return model.features(x)

    else:  # shufflenetv2
        model = models.shufflenet_v2_x1_0(
            weights=models.ShuffleNet_V2_X1_0_Weights.IMAGENET1K_V1
            if weights == "imagenet"
            else None
        )

        def features(x):
            # the model's forward up to conv5, i.e. before pooling and fc
            x = model.conv1(x)
            x = model.maxpool(x)
            x = model.stage2(x)
            x = model.stage3(x)
            x = model.stage4(x)
            return model.conv5(x)

    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)

    def run(batch: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            maps = features(_torch_normalize(batch))
            pooled = torch.amax(maps, dim=(2, 3))
        return pooled.numpy().astype(np.float32)

    return LoadedBackbone(BACKBONE_INFO[name], weights, run)


def _load_keras(name: str, weights: str, seed: int, input_size: int) -> LoadedBackbone:
    import os

    os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")
    import tensorflow as tf
    from tensorflow.keras import applications as apps

    tf.keras.utils.set_random_seed(seed)
    builders = {
        "mobilenetv2": (apps.MobileNetV2, apps.mobilenet_v2.preprocess_input),
        "vgg16": (apps.VGG16, apps.vgg16.preprocess_input),
        "resnet50v2": (apps.ResNet50V2, apps.resnet_v2.preprocess_input),
    }
    builder, preprocess = builders[name]
    model = builder(
        include_top=False,
        weights="imagenet" if weights == "imagenet" else None,
        input_shape=(input_size, input_size, 3),
    )
    model.trainable = False

    def run(batch: np.ndarray) -> np.ndarray:
        x = preprocess(batch.astype(np.float32))
        maps = model(x, training=False).numpy()
        return maps.max(axis=(1, 2)).astype(np.float32)

    return LoadedBackbone(BACKBONE_INFO[name], weights, run)


def load_backbone(
    name: str, weights: str = "imagenet", seed: int = 0, input_size: int = 64
) -> LoadedBackbone:
    """Build one frozen backbone; ``weights='none'`` gives a seeded random init."""
    if name not in BACKBONE_INFO:
        raise BackboneError(
            f"unknown backbone {name!r}; supported: {', '.join(SUPPORTED)}"
        )
    if weights not in ("imagenet", "none"):
        raise BackboneError(f"weights must be 'imagenet' or 'none', got {weights!r}")
    info = BACKBONE_INFO[name]
    if info.framework == "torchvision":
        return _load_torchvision(name, weights, seed)
    return _load_keras(name, weights, seed, input_size)
