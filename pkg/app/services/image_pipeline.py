"""
Image preprocessing, training augmentation and the torch Dataset over a manifest
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import torch
import torchvision.transforms.functional as TF
from PIL import Image, UnidentifiedImageError
from torch.utils.data import DataLoader, Dataset
from torchvision.transforms import InterpolationMode

from app.errors import EmptySplitError, ImageDecodeError
from app.models.dataset import DatasetManifest, Normalization, SplitName
from app.models.network import DEFAULT_IMAGE_SIZE
from app.services.manifest_store import resolve_image


logger = logging.getLogger(__name__)

ImageInput = Union[Image.Image, np.ndarray]


# ============ Preprocessing ============

def load_image(path: Union[str, Path]) -> Image.Image:
    """Decode an image file to RGB, naming the file on failure"""
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise ImageDecodeError(str(path), f"{type(e).__name__}: {e}") from e


def to_unit_tensor(image: ImageInput, image_size: int = DEFAULT_IMAGE_SIZE) -> torch.Tensor:
    """Bilinear resize to image_size x image_size and scale to [0, 1], shape (3, S, S)"""
    if isinstance(image, np.ndarray):
        image = Image.fromarray(image)
    image = image.convert("RGB")
    resized = TF.resize(image, [image_size, image_size], interpolation=InterpolationMode.BILINEAR)
    return TF.to_tensor(resized)


def normalize(tensor: torch.Tensor, normalization: Normalization) -> torch.Tensor:
    return TF.normalize(tensor, list(normalization.mean), list(normalization.std))


def preprocess(
    image: ImageInput,
    normalization: Normalization,
    image_size: int = DEFAULT_IMAGE_SIZE,
) -> torch.Tensor:
    """
    Resize, scale to [0, 1] and normalize with train-split statistics.

    Args:
        image: Decoded RGB image of any resolution
        normalization: Per-channel mean/std
        image_size: Output side (602 for the full model)

    Returns:
        Float tensor of shape (3, image_size, image_size)
    """
    return normalize(to_unit_tensor(image, image_size), normalization)


def compute_normalization(
    paths: Sequence[Union[str, Path]],
    image_size: int = DEFAULT_IMAGE_SIZE,
) -> Normalization:
    """Per-channel mean/std over resized [0, 1] images (population std)"""
    if not paths:
        raise EmptySplitError("Cannot compute normalization statistics without images")
    total = torch.zeros(3, dtype=torch.float64)
    total_sq = torch.zeros(3, dtype=torch.float64)
    count = 0
    for path in paths:
        pixels = to_unit_tensor(load_image(path), image_size).double().flatten(1)
        total += pixels.sum(dim=1)
        total_sq += (pixels ** 2).sum(dim=1)
        count += pixels.shape[1]
    mean = total / count
    std = (total_sq / count - mean ** 2).clamp_min(1e-12).sqrt()
    return Normalization(mean=tuple(mean.tolist()), std=tuple(std.tolist()))


# ============ Augmentation ============

@dataclass(frozen=True)
class AugmentParams:
    """Training augmentation; defaults follow the training protocol"""
    flip_prob: float = 0.5
    jitter: float = 0.05
    max_rotation: float = 45.0
    padding: int = 64
    crop: str = "random"

    @classmethod
    def identity(cls) -> "AugmentParams":
        return cls(flip_prob=0.0, jitter=0.0, max_rotation=0.0, padding=64, crop="center")


def sample_seed(seed: int, epoch: int, index: int) -> int:
    """Augmentation seed of one sample in one epoch, independent of worker layout"""
    return int(np.random.SeedSequence([seed, epoch, index]).generate_state(1)[0])


def augment(
    image: torch.Tensor,
    seed: int,
    params: AugmentParams = AugmentParams(),
    fill: Sequence[float] = (0.5, 0.5, 0.5),
) -> torch.Tensor:
    """
    Flip, color jitter, rotate, then pad and crop back to the input size.

    Args:
        image: (3, S, S) tensor in [0, 1]
        seed: Determines every random draw
        params: Augmentation strengths
        fill: Per-channel value for rotated-in borders and padding

    Returns:
        Augmented (3, S, S) tensor
    """
    generator = torch.Generator().manual_seed(seed)
    draws = torch.rand(6, generator=generator).tolist()
    x = image

    # 1. Horizontal flip
    if draws[0] < params.flip_prob:
        x = TF.hflip(x)

    # 2. Color jitter
    if params.jitter > 0:
        brightness, contrast, saturation = (1 + (2 * d - 1) * params.jitter for d in draws[1:4])
        x = TF.adjust_brightness(x, brightness)
        x = TF.adjust_contrast(x, contrast)
        x = TF.adjust_saturation(x, saturation)

    # 3. Rotation
    angle = (2 * draws[4] - 1) * params.max_rotation
    if angle != 0:
        x = TF.rotate(x, angle, interpolation=InterpolationMode.BILINEAR, fill=list(fill))

    # 4. Pad and crop back
    pad = params.padding
    if pad > 0:
        channels, height, width = x.shape
        canvas = torch.tensor(list(fill), dtype=x.dtype).view(channels, 1, 1)
        canvas = canvas.expand(channels, height + 2 * pad, width + 2 * pad).clone()
        canvas[:, pad:pad + height, pad:pad + width] = x
        if params.crop == "center":
            top = left = pad
        else:
            offsets = torch.randint(0, 2 * pad + 1, (2,), generator=generator).tolist()
            top, left = offsets
        x = canvas[:, top:top + height, left:left + width]

    return x.contiguous()


# ============ Dataset ============

class FrictionImageDataset(Dataset):
    """
    Images of one manifest split with friction labels.
    Augmentation randomness depends only on (seed, epoch, index).
    """

    def __init__(
        self,
        manifest: DatasetManifest,
        manifest_path: Union[str, Path],
        split: SplitName,
        train: bool = False,
        augment_params: Optional[AugmentParams] = None,
        seed: int = 0,
        image_size: Optional[int] = None,
    ):
        self.samples = manifest.samples_for(split)
        if not self.samples:
            raise EmptySplitError(f"Split {split!r} has no samples")
        self.manifest_path = Path(manifest_path)
        self.normalization = manifest.normalization
        self.train = train
        self.augment_params = augment_params if train else None
        self.seed = seed
        self.epoch = 0
        self.image_size = image_size or manifest.image_size

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> tuple[torch.Tensor, torch.Tensor]:
        sample = self.samples[index]
        image = load_image(resolve_image(self.manifest_path, sample.image_ref))
        x = to_unit_tensor(image, self.image_size)
        if self.augment_params is not None:
            x = augment(
                x,
                sample_seed(self.seed, self.epoch, index),
                self.augment_params,
                fill=self.normalization.mean,
            )
        label = torch.tensor(sample.friction_factor, dtype=torch.float32)
        return normalize(x, self.normalization), label


def build_loader(
    dataset: FrictionImageDataset,
    batch_size: int,
    shuffle: bool,
    seed: int = 0,
    num_workers: int = 0,
) -> DataLoader:
    """DataLoader whose shuffling order is fixed by seed"""
    generator = torch.Generator().manual_seed(seed)
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        num_workers=num_workers,
        generator=generator,
        drop_last=False,
    )
