# API Routers
from app.routers import cameras, stations

__all__ = ["cameras", "stations"]
