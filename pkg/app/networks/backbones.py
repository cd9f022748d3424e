"""
Frozen patch-token backbones
DINOv2 from torch hub, or a tiny frozen random projection for desk-scale runs
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import torch
import torch.nn as nn

from app.errors import BackboneUnavailableError, ShapeError
from app.models.network import DEFAULT_IMAGE_SIZE, PATCH_SIZE, BackboneSpec


logger = logging.getLogger(__name__)


@dataclass
class PatchTokenGrid:
    """Backbone output: (batch, D, grid, grid) tokens plus optional class token (batch, D)"""
    tokens: torch.Tensor
    class_token: Optional[torch.Tensor] = None

    @property
    def embed_dim(self) -> int:
        return self.tokens.shape[1]

    @property
    def grid_size(self) -> int:
        return self.tokens.shape[-1]


class TinyRandomBackbone(nn.Module):
    """
    Frozen random linear projection from 14x14x3 patches to embed_dim.
    Mimics the DINOv2 token interface so CI never downloads weights.
    """

    def __init__(self, embed_dim: int = 32, seed: int = 0):
        super().__init__()
        self.embed_dim = embed_dim
        self.proj = nn.Conv2d(3, embed_dim, kernel_size=PATCH_SIZE, stride=PATCH_SIZE)

        generator = torch.Generator().manual_seed(seed)
        fan_in = 3 * PATCH_SIZE * PATCH_SIZE
        with torch.no_grad():
            weight = torch.randn(self.proj.weight.shape, generator=generator)
            self.proj.weight.copy_(weight / fan_in ** 0.5)
            self.proj.bias.zero_()

    def forward_features(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        tokens = self.proj(x)
        batch = tokens.shape[0]
        patch_tokens = tokens.flatten(2).transpose(1, 2)
        return {
            "x_norm_patchtokens": patch_tokens,
            "x_norm_clstoken": patch_tokens.mean(dim=1).reshape(batch, -1),
        }


def _load_hub_model(spec: BackboneSpec) -> nn.Module:
    """Load a DINOv2 variant from torch hub"""
    try:
        model = torch.hub.load(spec.hub_repo, spec.hub_model, pretrained=True)
    except Exception as e:
        raise BackboneUnavailableError(
            f"Backbone {spec.hub_repo}:{spec.hub_model} unavailable: {type(e).__name__}: {e}"
        ) from e
    logger.info(f"Loaded {spec.hub_model} from torch hub")
    return model


class BackboneAdapter(nn.Module):
    """
    Wraps a patch-token backbone and reshapes its final-layer patch tokens
    into a (batch, D, grid, grid) grid in row-major order.
    """

    def __init__(self, spec: BackboneSpec, image_size: int):
        super().__init__()
        if image_size % PATCH_SIZE != 0:
            raise ShapeError(f"Input size {image_size} is not divisible by patch size {PATCH_SIZE}")
        self.spec = spec
        self.image_size = image_size
        self.grid_size = image_size // PATCH_SIZE
        self.embed_dim = spec.embed_dim

        if spec.kind == "tiny-random-frozen":
            self.model = TinyRandomBackbone(spec.embed_dim, seed=spec.seed)
        else:
            self.model = _load_hub_model(spec)

        self.frozen = spec.frozen
        if self.frozen:
            for param in self.model.parameters():
                param.requires_grad = False
            self.model.eval()

    def train(self, mode: bool = True) -> "BackboneAdapter":
        # Frozen backbones stay in evaluation mode for the whole run
        super().train(mode)
        if self.frozen:
            self.model.eval()
        return self

    def forward(self, images: torch.Tensor) -> PatchTokenGrid:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ShapeError(f"Expected (batch, 3, H, W) images, got {tuple(images.shape)}")
        if tuple(images.shape[-2:]) != (self.image_size, self.image_size):
            raise ShapeError(
                f"Expected {self.image_size}x{self.image_size} input, got "
                f"{images.shape[-2]}x{images.shape[-1]}"
            )

        with torch.set_grad_enabled(torch.is_grad_enabled() and not self.frozen):
            features = self.model.forward_features(images)

        patch_tokens = features["x_norm_patchtokens"]
        batch, count, dim = patch_tokens.shape
        if count != self.grid_size * self.grid_size or dim != self.embed_dim:
            raise ShapeError(
                f"Backbone produced {count} tokens of width {dim}, expected "
                f"{self.grid_size ** 2} of width {self.embed_dim}"
            )
        tokens = patch_tokens.reshape(batch, self.grid_size, self.grid_size, dim).permute(0, 3, 1, 2)
        return PatchTokenGrid(tokens=tokens.contiguous(), class_token=features.get("x_norm_clstoken"))


# Cache of adapters used for read-only extraction (visualisation, ad-hoc calls)
_extractors: dict[str, BackboneAdapter] = {}


def get_backbone(spec: BackboneSpec, image_size: int) -> BackboneAdapter:
    """Get or create a shared frozen adapter for read-only use"""
    key = f"{spec.model_dump_json()}@{image_size}"
    if key not in _extractors:
        _extractors[key] = BackboneAdapter(spec, image_size)
    return _extractors[key]


def backbone_extract(
    images: torch.Tensor,
    backbone: Union[BackboneSpec, BackboneAdapter],
    image_size: int = DEFAULT_IMAGE_SIZE,
) -> PatchTokenGrid:
    """
    Extract the patch-token grid for a batch of preprocessed images.

    Args:
        images: (batch, 3, S, S) normalized images, S a multiple of 14
        backbone: Spec to resolve (cached) or an adapter instance
        image_size: Expected input side when resolving from a spec

    Returns:
        PatchTokenGrid with tokens of shape (batch, D, S/14, S/14)
    """
    if isinstance(backbone, BackboneSpec):
        backbone = get_backbone(backbone, image_size)
    with torch.no_grad():
        return backbone(images)
