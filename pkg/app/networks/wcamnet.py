"""
WCamNet: frozen patch-token backbone in parallel with an HD conv branch,
fused and passed through two residual SE blocks and a sigmoid regression head
"""
import torch
import torch.nn as nn

from app.models.network import ModelConfig
from app.networks.backbones import BackboneAdapter
from app.networks.layers import HDBranch, RegressionHead, SEResidualBlock, fuse, init_parameters


class WCamNet(nn.Module):
    """Road-surface friction regressor"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.backbone = BackboneAdapter(config.backbone, config.image_size)
        self.hd_branch = HDBranch(config.image_size) if config.use_hd_branch else None

        channels = config.fused_channels
        if config.use_se_blocks:
            self.se_blocks = nn.Sequential(
                SEResidualBlock(channels, config.se_reduction),
                SEResidualBlock(channels, config.se_reduction),
            )
        else:
            self.se_blocks = nn.Identity()
        self.head = RegressionHead(channels)

        for offset, part in enumerate((self.hd_branch, self.se_blocks, self.head)):
            if part is not None:
                init_parameters(part, config.init_seed * 100 + offset)

    def forward_features(self, images: torch.Tensor) -> dict[str, torch.Tensor]:
        """Run the graph and keep every intermediate tensor"""
        grid = self.backbone(images)
        hd = self.hd_branch(images) if self.hd_branch is not None else None
        fused = fuse(grid.tokens, hd)
        refined = self.se_blocks(fused)
        outputs = {
            "tokens": grid.tokens,
            "fused": fused,
            "refined": refined,
            "prediction": self.head(refined),
        }
        if hd is not None:
            outputs["hd"] = hd
        return outputs

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        grid = self.backbone(images)
        hd = self.hd_branch(images) if self.hd_branch is not None else None
        return self.head(self.se_blocks(fuse(grid.tokens, hd)))
