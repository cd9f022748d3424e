"""
Architecture registry: name -> model builder
"""
from typing import Callable, Union

import torch.nn as nn

from app.errors import RegistryError
from app.models.network import ModelConfig
from app.networks.baselines import BackboneLinearHead, ViTFineTune, build_resnet, build_vgg19
from app.networks.wcamnet import WCamNet


ModelBuilder = Callable[[ModelConfig], nn.Module]

MODEL_REGISTRY: dict[str, ModelBuilder] = {
    "wcamnet": WCamNet,
    "resnet50-style": build_resnet,
    "resnet152-style": build_resnet,
    "vgg19-style": build_vgg19,
    "backbone-linear-head": BackboneLinearHead,
    "vit-full-finetune": ViTFineTune,
}


def registered_architectures() -> list[str]:
    return list(MODEL_REGISTRY)


def build_model(config: Union[ModelConfig, str]) -> nn.Module:
    """
    Build a trainable model for an architecture variant.

    Args:
        config: Full ModelConfig, or just a registered architecture name

    Returns:
        nn.Module mapping (batch, 3, S, S) images to (batch,) predictions in (0, 1)
    """
    name = config if isinstance(config, str) else config.architecture
    if name not in MODEL_REGISTRY:
        raise RegistryError(
            f"Unknown architecture {name!r}. Valid names: {', '.join(registered_architectures())}"
        )
    if isinstance(config, str):
        config = ModelConfig(architecture=name)
    return MODEL_REGISTRY[name](config)


def count_parameters(model: nn.Module, trainable_only: bool = False) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad or not trainable_only)


def trainable_parameters(model: nn.Module) -> list[nn.Parameter]:
    return [p for p in model.parameters() if p.requires_grad]
