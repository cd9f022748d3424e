"""
Roadside Data Simulator - FastAPI app
Serves camera images and weather-station grip readings for the ingestion client
"""
from fastapi import FastAPI

from app.routers import cameras, stations
from app.services.roadside_source import get_roadside_source


# Create FastAPI app
app = FastAPI(
    title="Roadside Data Simulator",
    description="Camera image and optical grip sensor endpoints for local collection runs and tests",
    version="1.0.0"
)

# Include routers
app.include_router(cameras.router)
app.include_router(stations.router)


@app.get("/")
async def root():
    """Root endpoint with API info"""
    return {
        "name": "Roadside Data Simulator",
        "version": "1.0.0",
        "docs": "/docs"
    }


@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "source": type(get_roadside_source()).__name__,
    }


# For local development
if __name__ == "__main__":
    import uvicorn
    uvicorn.run("app.main:app", host="127.0.0.1", port=8000, reload=True)
