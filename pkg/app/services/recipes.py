"""
Per-architecture training recipes
"""
from dataclasses import dataclass
from typing import Optional

from app.errors import RegistryError
from app.models.network import BackboneSpec, ModelConfig
from app.models.training import ScheduleSpec, TrainConfig
from app.networks.registry import MODEL_REGISTRY, registered_architectures


@dataclass(frozen=True)
class Recipe:
    epochs: int
    schedule: ScheduleSpec


RECIPES: dict[str, Recipe] = {
    "wcamnet": Recipe(epochs=15, schedule=ScheduleSpec.cosine(period_epochs=5)),
    "resnet50-style": Recipe(epochs=30, schedule=ScheduleSpec.step(step_epochs=10)),
    "resnet152-style": Recipe(epochs=30, schedule=ScheduleSpec.step(step_epochs=10)),
    "vgg19-style": Recipe(epochs=30, schedule=ScheduleSpec.step(step_epochs=10)),
    "backbone-linear-head": Recipe(epochs=6, schedule=ScheduleSpec.step(step_epochs=2)),
    "vit-full-finetune": Recipe(epochs=30, schedule=ScheduleSpec.step(step_epochs=10)),
}


def recipe_for(architecture: str) -> Recipe:
    if architecture not in RECIPES or architecture not in MODEL_REGISTRY:
        raise RegistryError(
            f"No recipe for {architecture!r}. Valid names: {', '.join(registered_architectures())}"
        )
    return RECIPES[architecture]


def model_config_for(
    architecture: str,
    image_size: int = 602,
    tiny_backbone: bool = False,
    seed: int = 0,
    **overrides,
) -> ModelConfig:
    """
    ModelConfig for an architecture, either at full scale with pretrained weights
    or at desk scale with the tiny random backbone and tiny CNNs.
    """
    recipe_for(architecture)
    backbone = BackboneSpec.tiny(seed=seed) if tiny_backbone else BackboneSpec.base()
    fields = {
        "architecture": architecture,
        "backbone": backbone,
        "image_size": image_size,
        "scale": "tiny" if tiny_backbone else "full",
        "pretrained": not tiny_backbone,
        "init_seed": seed,
    }
    fields.update(overrides)
    return ModelConfig(**fields)


def train_config_for(
    model: ModelConfig,
    seed: int = 0,
    epochs: Optional[int] = None,
    **overrides,
) -> TrainConfig:
    """TrainConfig with the recipe's epochs and schedule for model.architecture"""
    recipe = recipe_for(model.architecture)
    return TrainConfig(
        model=model,
        epochs=epochs or recipe.epochs,
        schedule=recipe.schedule,
        seed=seed,
        **overrides,
    )
