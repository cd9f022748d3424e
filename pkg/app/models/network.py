"""
Pydantic models describing backbones and architecture variants
"""
import hashlib
import json
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator


PATCH_SIZE = 14
DEFAULT_IMAGE_SIZE = 602
HD_CHANNELS = 64

BackboneKind = Literal["pretrained-base", "pretrained-large", "tiny-random-frozen"]

Architecture = Literal[
    "wcamnet",
    "resnet50-style",
    "resnet152-style",
    "vgg19-style",
    "backbone-linear-head",
    "vit-full-finetune",
]

# Published embedding widths of the hub variants
HUB_MODELS = {
    "pretrained-base": ("dinov2_vitb14", 768),
    "pretrained-large": ("dinov2_vitl14", 1024),
}

TINY_EMBED_DIM = 32


class BackboneSpec(BaseModel):
    """Which patch-token backbone to use and how wide its tokens are"""
    kind: BackboneKind = "pretrained-base"
    embed_dim: int = Field(default=768, gt=0)
    patch_size: Literal[14] = PATCH_SIZE
    frozen: bool = True
    hub_repo: str = "facebookresearch/dinov2"
    seed: int = 0

    @model_validator(mode="after")
    def _check_width(self) -> "BackboneSpec":
        if self.kind in HUB_MODELS and self.embed_dim != HUB_MODELS[self.kind][1]:
            raise ValueError(
                f"{self.kind} backbone has embed_dim {HUB_MODELS[self.kind][1]}, got {self.embed_dim}"
            )
        return self

    @property
    def hub_model(self) -> Optional[str]:
        return HUB_MODELS[self.kind][0] if self.kind in HUB_MODELS else None

    @classmethod
    def base(cls) -> "BackboneSpec":
        return cls(kind="pretrained-base", embed_dim=768)

    @classmethod
    def large(cls) -> "BackboneSpec":
        return cls(kind="pretrained-large", embed_dim=1024)

    @classmethod
    def tiny(cls, embed_dim: int = TINY_EMBED_DIM, seed: int = 0) -> "BackboneSpec":
        return cls(kind="tiny-random-frozen", embed_dim=embed_dim, seed=seed)


class ModelConfig(BaseModel):
    """Declarative description of an architecture variant"""
    architecture: Architecture = "wcamnet"
    backbone: BackboneSpec = BackboneSpec()
    use_hd_branch: bool = True
    use_se_blocks: bool = True
    se_reduction: int = Field(default=8, gt=0)
    image_size: int = DEFAULT_IMAGE_SIZE
    scale: Literal["full", "tiny"] = "full"
    pretrained: bool = True
    init_seed: int = 0

    @model_validator(mode="after")
    def _check_image_size(self) -> "ModelConfig":
        if self.image_size <= 0 or self.image_size % PATCH_SIZE != 0:
            raise ValueError(
                f"image_size must be a positive multiple of {PATCH_SIZE}, got {self.image_size}"
            )
        return self

    @property
    def grid_size(self) -> int:
        return self.image_size // PATCH_SIZE

    @property
    def fused_channels(self) -> int:
        return self.backbone.embed_dim + (HD_CHANNELS if self.use_hd_branch else 0)

    def config_hash(self) -> str:
        """Stable short hash used for provenance in reports"""
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
