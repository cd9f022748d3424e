"""
Baseline regressors: ResNet/VGG-style CNNs, linear head on frozen tokens,
and a fully fine-tuned ViT. Every model ends in a sigmoid.
"""
import logging

import torch
import torch.nn as nn
from torchvision import models as tv_models
from torchvision.models.resnet import Bottleneck, conv1x1
from torchvision.models.vgg import make_layers

from app.errors import BackboneUnavailableError
from app.models.network import ModelConfig
from app.networks.backbones import BackboneAdapter
from app.networks.layers import bounded_sigmoid, init_parameters


logger = logging.getLogger(__name__)


class SigmoidRegressor(nn.Module):
    """Feature extractor followed by a linear unit and a sigmoid"""

    def __init__(self, features: nn.Module, width: int):
        super().__init__()
        self.features = features
        self.fc = nn.Linear(width, 1)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return bounded_sigmoid(self.fc(self.features(images))).squeeze(-1)


# ============ CNN baselines ============

_RESNET_FULL = {
    "resnet50-style": (tv_models.resnet50, tv_models.ResNet50_Weights.DEFAULT),
    "resnet152-style": (tv_models.resnet152, tv_models.ResNet152_Weights.DEFAULT),
}

# Bottleneck blocks per stage for the desk-scale variants
_RESNET_TINY_BLOCKS = {
    "resnet50-style": [1, 1, 1, 1],
    "resnet152-style": [1, 2, 3, 1],
}

_VGG19_TINY_CFG = [8, 8, "M", 16, 16, "M", 32, 32, 32, 32, "M", 64, 64, 64, 64, "M", 64, 64, 64, 64, "M"]


def _pretrained(builder, weights, name: str) -> nn.Module:
    try:
        return builder(weights=weights)
    except Exception as e:
        raise BackboneUnavailableError(f"Pretrained weights for {name} unavailable: {e}") from e


def _tiny_resnet(blocks_per_stage: list[int]) -> tuple[nn.Module, int]:
    """ResNet stem + bottleneck stages with narrow planes"""
    layers: list[nn.Module] = [
        nn.Conv2d(3, 16, kernel_size=7, stride=2, padding=3, bias=False),
        nn.BatchNorm2d(16),
        nn.ReLU(inplace=True),
        nn.MaxPool2d(kernel_size=3, stride=2, padding=1),
    ]
    inplanes = 16
    for stage, (planes, blocks) in enumerate(zip((8, 16, 32, 64), blocks_per_stage)):
        stride = 1 if stage == 0 else 2
        downsample = nn.Sequential(
            conv1x1(inplanes, planes * Bottleneck.expansion, stride),
            nn.BatchNorm2d(planes * Bottleneck.expansion),
        )
        layers.append(Bottleneck(inplanes, planes, stride, downsample))
        inplanes = planes * Bottleneck.expansion
        for _ in range(1, blocks):
            layers.append(Bottleneck(inplanes, planes))
    layers += [nn.AdaptiveAvgPool2d(1), nn.Flatten()]
    return nn.Sequential(*layers), inplanes


def build_resnet(config: ModelConfig) -> nn.Module:
    name = config.architecture
    if config.scale == "tiny":
        features, width = _tiny_resnet(_RESNET_TINY_BLOCKS[name])
        return init_parameters(SigmoidRegressor(features, width), config.init_seed)

    builder, weights = _RESNET_FULL[name]
    net = _pretrained(builder, weights, name) if config.pretrained else builder(weights=None)
    width = net.fc.in_features
    net.fc = nn.Identity()
    model = SigmoidRegressor(net, width)
    init_parameters(model.fc, config.init_seed)
    return model


def build_vgg19(config: ModelConfig) -> nn.Module:
    if config.scale == "tiny":
        features = nn.Sequential(
            make_layers(_VGG19_TINY_CFG, batch_norm=False),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
        )
        return init_parameters(SigmoidRegressor(features, 64), config.init_seed)

    weights = tv_models.VGG19_Weights.DEFAULT
    net = _pretrained(tv_models.vgg19, weights, "vgg19") if config.pretrained else tv_models.vgg19(weights=None)
    width = net.classifier[-1].in_features
    net.classifier[-1] = nn.Identity()
    model = SigmoidRegressor(net, width)
    init_parameters(model.fc, config.init_seed)
    return model


# ============ Token baselines ============

class BackboneLinearHead(nn.Module):
    """One linear layer over every patch token plus the class token; backbone frozen"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        spec = config.backbone.model_copy(update={"frozen": True})
        self.backbone = BackboneAdapter(spec, config.image_size)
        grid = config.grid_size
        self.in_features = grid * grid * spec.embed_dim + spec.embed_dim
        self.fc = nn.Linear(self.in_features, 1)
        init_parameters(self.fc, config.init_seed)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        grid = self.backbone(images)
        flat = torch.cat([grid.tokens.flatten(1), grid.class_token], dim=1)
        return bounded_sigmoid(self.fc(flat)).squeeze(-1)


class ViTFineTune(nn.Module):
    """Backbone trained end to end from its pretrained weights, class token to sigmoid"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        spec = config.backbone.model_copy(update={"frozen": False})
        self.backbone = BackboneAdapter(spec, config.image_size)
        for param in self.backbone.parameters():
            param.requires_grad = True
        self.fc = nn.Linear(spec.embed_dim, 1)
        init_parameters(self.fc, config.init_seed)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        grid = self.backbone(images)
        return bounded_sigmoid(self.fc(grid.class_token)).squeeze(-1)
