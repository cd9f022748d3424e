"""
Pydantic models for the procedural roadside benchmark
"""
from pydantic import BaseModel, Field


class SceneSpec(BaseModel):
    """Everything that determines one synthetic roadside image"""
    friction: float = Field(..., ge=0.0, le=1.0)
    seed: int = 0
    width: int = Field(default=1280, ge=64)
    height: int = Field(default=720, ge=64)
    station_id: str = "SYN-000"
    lighting: float = Field(default=0.5, ge=0.0, le=1.0)
    clutter: int = Field(default=6, ge=0)
    mask_road: bool = False
