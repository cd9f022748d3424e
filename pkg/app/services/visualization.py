"""
Token PCA rendering and friction histograms
"""
import json
import logging
from pathlib import Path
from typing import Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import torch
from PIL import Image
from sklearn.decomposition import PCA

from app.models.dataset import DatasetManifest, Normalization
from app.models.network import BackboneSpec
from app.networks.backbones import BackboneAdapter, backbone_extract
from app.services.image_pipeline import ImageInput, preprocess
from app.services.sampling import bin_histogram


logger = logging.getLogger(__name__)

N_COMPONENTS = 3


# ============ Token PCA ============

def token_pca(tokens: np.ndarray, n_components: int = N_COMPONENTS) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    PCA of token vectors with a deterministic sign per component.

    Each component is flipped so its largest-magnitude loading is positive.
    Components beyond the matrix rank are returned as zeros.

    Args:
        tokens: (N, D) token matrix

    Returns:
        Tuple of (scores (N, k), components (k, D), explained variance (k,))
    """
    n, d = tokens.shape
    x = tokens.astype(np.float64)
    centered = x - x.mean(axis=0)
    singular = np.linalg.svd(centered, compute_uv=False)
    tol = singular.max(initial=0.0) * max(n, d) * np.finfo(np.float64).eps
    rank = int((singular > tol).sum())

    scores = np.zeros((n, n_components))
    components = np.zeros((n_components, d))
    variance = np.zeros(n_components)
    usable = min(rank, n_components)
    if usable < n_components:
        logger.warning(f"Token matrix has rank {rank}; padding {n_components - usable} PCA component(s) with zeros")
    if usable == 0:
        return scores, components, variance

    pca = PCA(n_components=usable, svd_solver="full")
    fitted = pca.fit_transform(x)
    signs = np.sign(pca.components_[np.arange(usable), np.abs(pca.components_).argmax(axis=1)])
    scores[:, :usable] = fitted * signs
    components[:usable] = pca.components_ * signs[:, None]
    variance[:usable] = pca.explained_variance_
    return scores, components, variance


def minmax_scale(scores: np.ndarray) -> np.ndarray:
    """Scale each column to [0, 1]; constant columns become 0"""
    low, high = scores.min(axis=0), scores.max(axis=0)
    span = np.where(high > low, high - low, 1.0)
    return np.clip((scores - low) / span, 0.0, 1.0)


def pca_token_visualization(
    image: ImageInput,
    backbone: Union[BackboneSpec, BackboneAdapter],
    normalization: Normalization = Normalization(),
    image_size: int = 602,
) -> np.ndarray:
    """
    Map every patch token of one image to RGB through a per-image 3-component PCA.

    Args:
        image: Decoded image of any resolution
        backbone: Backbone spec or adapter
        normalization: Statistics used for preprocessing
        image_size: Model input side (602 gives a 43 x 43 grid)

    Returns:
        (grid, grid, 3) float array in [0, 1]
    """
    batch = preprocess(image, normalization, image_size).unsqueeze(0)
    grid = backbone_extract(batch, backbone, image_size)
    tokens = grid.tokens[0]
    g = tokens.shape[-1]
    # Row-major token order matches the grid layout
    matrix = tokens.reshape(tokens.shape[0], g * g).T.cpu().numpy()
    scores, _, _ = token_pca(matrix)
    return minmax_scale(scores).reshape(g, g, N_COMPONENTS)


def save_rgb(array: np.ndarray, path: Union[str, Path], upscale: int = 1) -> Path:
    """Write a [0, 1] RGB array as PNG, optionally enlarged with nearest-neighbour"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img = Image.fromarray((np.clip(array, 0, 1) * 255 + 0.5).astype(np.uint8))
    if upscale > 1:
        img = img.resize((img.width * upscale, img.height * upscale), Image.NEAREST)
    img.save(path)
    return path


# ============ Histograms ============

def histogram_counts(manifest: DatasetManifest) -> dict:
    post = bin_histogram(manifest.samples, manifest.n_bins)
    pre = manifest.raw_histogram if manifest.raw_histogram is not None else post
    edges = np.linspace(0.0, 1.0, manifest.n_bins + 1).round(6).tolist()
    return {"bin_edges": edges, "pre_resampling": pre, "post_resampling": post}


def plot_histograms(manifest: DatasetManifest, out_dir: Union[str, Path]) -> dict[str, Path]:
    """
    Friction-factor histograms before and after resampling, plus their counts as JSON.

    Returns:
        Mapping of artifact name -> path
    """
    if not manifest.samples:
        raise ValueError("Manifest has no samples to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = histogram_counts(manifest)
    edges = counts["bin_edges"]
    width = edges[1] - edges[0]

    paths = {"counts": out_dir / "histogram_counts.json"}
    paths["counts"].write_text(json.dumps(counts, indent=2), encoding="utf-8")

    for key, title in (("pre_resampling", "Before resampling"), ("post_resampling", "After resampling")):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.bar(edges[:-1], counts[key], width=width, align="edge", edgecolor="black", color="#366092")
        ax.set_xlabel("Friction factor")
        ax.set_ylabel("Images")
        ax.set_title(f"{title} (n={sum(counts[key])})")
        ax.set_xlim(0.0, 1.0)
        fig.tight_layout()
        paths[key] = out_dir / f"histogram_{key}.png"
        fig.savefig(paths[key], dpi=120)
        plt.close(fig)

    return paths


@torch.no_grad()
def render_token_pca(
    image: ImageInput,
    backbone: Union[BackboneSpec, BackboneAdapter],
    out_path: Union[str, Path],
    normalization: Normalization = Normalization(),
    image_size: int = 602,
    upscale: int = 8,
) -> Path:
    """pca_token_visualization written to a PNG"""
    return save_rgb(pca_token_visualization(image, backbone, normalization, image_size), out_path, upscale)
