# Networks
from app.networks.backbones import BackboneAdapter, PatchTokenGrid, backbone_extract, get_backbone
from app.networks.layers import HDBranch, RegressionHead, SEGate, SEResidualBlock, fuse, init_parameters
from app.networks.registry import (
    MODEL_REGISTRY,
    build_model,
    count_parameters,
    registered_architectures,
    trainable_parameters,
)
from app.networks.wcamnet import WCamNet

__all__ = [
    "BackboneAdapter",
    "HDBranch",
    "MODEL_REGISTRY",
    "PatchTokenGrid",
    "RegressionHead",
    "SEGate",
    "SEResidualBlock",
    "WCamNet",
    "backbone_extract",
    "build_model",
    "count_parameters",
    "fuse",
    "get_backbone",
    "init_parameters",
    "registered_architectures",
    "trainable_parameters",
]
