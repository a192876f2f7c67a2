"""Backbone registry: builders, level capture points, published dimensions.

Levels 1-4 are the outputs of the four main convolutional stages
(strides 4, 8, 16, 32 relative to the input). For ResNet-family models
these are ``layer1``..``layer4``; for EfficientNet the matching stages
of the ``features`` stack.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch.nn as nn
from torchvision import models


@dataclass(frozen=True)
class BackboneSpec:
    build: Callable[[bool], nn.Module]  # pretrained -> model
    level_modules: dict[int, str]  # level -> dotted module name to hook
    level_channels: dict[int, int]  # published channel counts per level


def _resnet(factory, weights_enum):
    def build(pretrained: bool) -> nn.Module:
        return factory(weights=weights_enum if pretrained else None)

    return build


def _levels_resnet() -> dict[int, str]:
    return {1: "layer1", 2: "layer2", 3: "layer3", 4: "layer4"}


BACKBONES: dict[str, BackboneSpec] = {
    "resnext101": BackboneSpec(
        build=_resnet(models.resnext101_32x8d, models.ResNeXt101_32X8D_Weights.IMAGENET1K_V1),
        level_modules=_levels_resnet(),
        level_channels={1: 256, 2: 512, 3: 1024, 4: 2048},
    ),
    "wide_resnet50": BackboneSpec(
        build=_resnet(models.wide_resnet50_2, models.Wide_ResNet50_2_Weights.IMAGENET1K_V1),
        level_modules=_levels_resnet(),
        level_channels={1: 256, 2: 512, 3: 1024, 4: 2048},
    ),
    "resnet18": BackboneSpec(
        build=_resnet(models.resnet18, models.ResNet18_Weights.IMAGENET1K_V1),
        level_modules=_levels_resnet(),
        level_channels={1: 64, 2: 128, 3: 256, 4: 512},
    ),
    "efficientnet_b4": BackboneSpec(
        build=_resnet(models.efficientnet_b4, models.EfficientNet_B4_Weights.IMAGENET1K_V1),
        level_modules={1: "features.2", 2: "features.3", 3: "features.5", 4: "features.7"},
        level_channels={1: 32, 2: 56, 3: 160, 4: 448},
    ),
}


def get_backbone(name: str) -> BackboneSpec:
    try:
        return BACKBONES[name]
    except KeyError:
        known = ", ".join(sorted(BACKBONES))
        raise ValueError(f"unknown backbone {name!r}; available: {known}") from None
