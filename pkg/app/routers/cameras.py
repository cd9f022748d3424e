"""
Camera image endpoints of the roadside simulator
"""
from typing import Optional

from fastapi import APIRouter, Depends, Header, HTTPException
from fastapi.responses import Response

from app.errors import SourceUnavailableError
from app.services.roadside_source import RoadsideSource, get_roadside_source


router = APIRouter(prefix="/cameras", tags=["cameras"])


def check_token(source: RoadsideSource, authorization: Optional[str]) -> None:
    """401 unless the bearer token matches when the source requires one"""
    if source.token and authorization != f"Bearer {source.token}":
        raise HTTPException(status_code=401, detail="Invalid or missing bearer token")


@router.get("/{camera_id}/image")
async def get_camera_image(
    camera_id: str,
    authorization: Optional[str] = Header(default=None),
    source: RoadsideSource = Depends(get_roadside_source),
):
    """
    Current image of one camera.
    """
    check_token(source, authorization)
    try:
        content, media_type = source.camera_image(camera_id)
    except KeyError:
        raise HTTPException(status_code=404, detail=f"Camera {camera_id} not found")
    except SourceUnavailableError as e:
        raise HTTPException(status_code=503, detail=str(e))

    return Response(content=content, media_type=media_type)
