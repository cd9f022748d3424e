"""
Weather-station sensor endpoints of the roadside simulator
"""
from typing import Optional

from fastapi import APIRouter, Depends, Header, HTTPException
from fastapi.responses import Response

from app.errors import SourceUnavailableError
from app.routers.cameras import check_token
from app.services.roadside_source import RoadsideSource, get_roadside_source


router = APIRouter(prefix="/stations", tags=["stations"])


@router.get("/{station_id}/sensor-values")
async def get_sensor_values(
    station_id: str,
    authorization: Optional[str] = Header(default=None),
    source: RoadsideSource = Depends(get_roadside_source),
):
    """
    Latest optical grip readings of a station: {station_id, timestamp, sensors: [{index, grip}]}.
    The body is passed through untouched so fixtures can be replayed byte-for-byte.
    """
    check_token(source, authorization)
    try:
        body = source.sensor_values(station_id)
    except KeyError:
        raise HTTPException(status_code=404, detail=f"Station {station_id} not found")
    except SourceUnavailableError as e:
        raise HTTPException(status_code=503, detail=str(e))

    return Response(content=body, media_type="application/json")
