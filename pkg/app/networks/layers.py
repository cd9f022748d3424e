"""
WCamNet building blocks: HD branch, fusion, residual SE blocks, regression head
"""
from typing import Optional

import torch
import torch.nn as nn

from app.errors import ShapeError
from app.models.network import HD_CHANNELS, PATCH_SIZE


def init_parameters(module: nn.Module, seed: int) -> nn.Module:
    """
    Fan-in scaled uniform init for every conv/linear weight, zero biases.

    Args:
        module: Module whose trainable conv/linear layers get initialized
        seed: Seed for the dedicated generator

    Returns:
        The same module
    """
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for layer in module.modules():
            if not isinstance(layer, (nn.Conv2d, nn.Linear)):
                continue
            if not layer.weight.requires_grad:
                continue
            fan_in = layer.weight[0].numel()
            bound = 1.0 / fan_in ** 0.5
            sample = torch.rand(layer.weight.shape, generator=generator, dtype=layer.weight.dtype)
            layer.weight.copy_(sample * 2 * bound - bound)
            if layer.bias is not None:
                layer.bias.zero_()
    return module


def bounded_sigmoid(logits: torch.Tensor) -> torch.Tensor:
    """Sigmoid kept strictly inside (0, 1) at the dtype's resolution"""
    eps = torch.finfo(logits.dtype).eps
    return torch.sigmoid(logits).clamp(eps, 1.0 - eps)


def conv_output_size(size: int, kernel: int, stride: int, padding: int = 0) -> int:
    return (size + 2 * padding - kernel) // stride + 1


class HDBranch(nn.Module):
    """
    Three conv layers on the full-resolution input, total stride 14,
    so the output lines up with the patch-token grid.
    """

    # (in, out, kernel, stride, padding)
    LAYERS = [
        (3, 32, 7, 7, 0),
        (32, 64, 3, 2, 1),
        (64, HD_CHANNELS, 3, 1, 1),
    ]

    def __init__(self, image_size: int):
        super().__init__()
        side = image_size
        for _, _, kernel, stride, padding in self.LAYERS:
            side = conv_output_size(side, kernel, stride, padding)
        if side * PATCH_SIZE != image_size:
            raise ShapeError(
                f"HD branch output {side}x{side} does not match the "
                f"{image_size // PATCH_SIZE}x{image_size // PATCH_SIZE} token grid"
            )
        self.output_size = side

        layers: list[nn.Module] = []
        for in_ch, out_ch, kernel, stride, padding in self.LAYERS:
            layers += [
                nn.Conv2d(in_ch, out_ch, kernel_size=kernel, stride=stride, padding=padding),
                nn.BatchNorm2d(out_ch),
                nn.ReLU(inplace=True),
            ]
        self.layers = nn.Sequential(*layers)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.layers(images)


def fuse(tokens: torch.Tensor, hd: Optional[torch.Tensor]) -> torch.Tensor:
    """
    Concatenate token grid and HD features along channels, tokens first.

    Args:
        tokens: (batch, D, g, g) patch-token grid
        hd: (batch, 64, g, g) HD branch features, or None when the branch is ablated

    Returns:
        (batch, D + 64, g, g) fused map (tokens alone when hd is None)
    """
    if hd is None:
        return tokens
    if tokens.shape[0] != hd.shape[0] or tokens.shape[-2:] != hd.shape[-2:]:
        raise ShapeError(
            f"Cannot fuse tokens {tuple(tokens.shape)} with HD features {tuple(hd.shape)}"
        )
    return torch.cat([tokens, hd], dim=1)


class SEGate(nn.Module):
    """Squeeze (global average pool) and excitation (bottleneck MLP + sigmoid)"""

    def __init__(self, channels: int, reduction: int = 8):
        super().__init__()
        squeezed = max(1, channels // reduction)
        self.squeeze = nn.AdaptiveAvgPool2d(1)
        self.excitation = nn.Sequential(
            nn.Linear(channels, squeezed),
            nn.ReLU(inplace=True),
            nn.Linear(squeezed, channels),
            nn.Sigmoid(),
        )
        self.squeezed_channels = squeezed

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, _, _ = x.size()
        y = self.squeeze(x).view(b, c)
        return self.excitation(y).view(b, c, 1, 1)


class SEResidualBlock(nn.Module):
    """
    Residual block whose conv branch is rescaled per channel by SE gates,
    followed by the identity skip. Channel count and spatial size are preserved.
    """

    def __init__(self, channels: int, reduction: int = 8):
        super().__init__()
        if channels <= 0:
            raise ShapeError(f"SE block needs at least one channel, got {channels}")
        if reduction <= 0:
            raise ValueError(f"reduction must be positive, got {reduction}")
        self.channels = channels
        self.residual = nn.Sequential(
            nn.Conv2d(channels, channels, kernel_size=3, padding=1),
            nn.BatchNorm2d(channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, kernel_size=3, padding=1),
            nn.BatchNorm2d(channels),
        )
        self.se = SEGate(channels, reduction)

    def gates(self, x: torch.Tensor) -> torch.Tensor:
        """Excitation gates for input x, shape (batch, C, 1, 1)"""
        return self.se(self.residual(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.channels:
            raise ShapeError(f"SE block expects {self.channels} channels, got {x.shape[1]}")
        branch = self.residual(x)
        return x + branch * self.se(branch)


class RegressionHead(nn.Module):
    """Global average pooling, one linear unit, sigmoid"""

    def __init__(self, channels: int):
        super().__init__()
        self.fc = nn.Linear(channels, 1)

    @staticmethod
    def pool(x: torch.Tensor) -> torch.Tensor:
        return x.mean(dim=(2, 3))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4:
            raise ShapeError(f"Head expects (batch, C, H, W), got {tuple(x.shape)}")
        return bounded_sigmoid(self.fc(self.pool(x))).squeeze(-1)
